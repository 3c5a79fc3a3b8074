#!/usr/bin/env python3
"""Main entry point for the aniso command line."""

import argparse
import sys

from aniso import __version__
from aniso.commands import alt_min, check_potential, envelope_scan, grid, prox, train
from aniso.core.errors import AnisoError, ConfigError
from aniso.utils.formatter import ColorFormatter
from aniso.utils.logger import setup_logger

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_INTERRUPTED = 130

COMMANDS = {
    'check-potential': (check_potential, 'Check the Legendre assumptions of a potential'),
    'envelope-scan': (envelope_scan, 'Scan the phi-envelope and its gradient over v'),
    'prox': (prox, 'phi-proximal mapping and envelope at one point'),
    'alt-min': (alt_min, 'Alternating minimization of the splitting model'),
    'train': (train, 'Distributed training with elastic coupling'),
    'grid': (grid, 'Grid search over training settings'),
}


def create_parser() -> argparse.ArgumentParser:
    """Create and configure the argument parser."""
    parser = argparse.ArgumentParser(
        prog='aniso',
        description='Anisotropic proximal mappings, envelopes and splitting-based training',
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    parser.add_argument('--verbose', '-v', action='store_true', help='Enable verbose output')
    parser.add_argument('--log-file', type=str, help='Write a detailed log to this file')

    subparsers = parser.add_subparsers(dest='command', help='Available commands', metavar='COMMAND')
    for name, (_, help_text) in COMMANDS.items():
        sub = subparsers.add_parser(name, help=help_text)
        if name == 'check-potential':
            sub.add_argument('potential', nargs='?', help='Potential spec, e.g. log or tan-sep:eta=2')
        sub.add_argument('--config', '-c', type=str, help='Flat key = value config file')
        sub.add_argument('--format', choices=['table', 'json', 'yaml', 'plain'], default='table',
                         help='Console output format (default: table)')
        sub.add_argument('overrides', nargs='*', metavar='KEY=VALUE',
                         help='Settings overriding the config file')
    return parser


def main(argv=None) -> int:
    """Main entry point."""
    parser = create_parser()
    args = parser.parse_args(argv)
    logger = setup_logger(verbose=args.verbose, log_file=args.log_file)
    colors = ColorFormatter()

    if not args.command:
        parser.print_help()
        return EXIT_UNEXPECTED

    # check-potential takes an optional positional spec that argparse may
    # have swallowed from the overrides
    if getattr(args, 'potential', None) and '=' in args.potential:
        args.overrides = [args.potential] + list(args.overrides)
        args.potential = None

    module, _ = COMMANDS[args.command]
    try:
        return module.execute(args)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        print(colors.error(f"Configuration error: {e}"), file=sys.stderr)
        return EXIT_CONFIG
    except AnisoError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(colors.error(f"{type(e).__name__}: {e}"), file=sys.stderr)
        return EXIT_NUMERICAL
    except KeyboardInterrupt:
        logger.info("Operation cancelled by user")
        print(colors.warning("\nOperation cancelled by user"), file=sys.stderr)
        return EXIT_INTERRUPTED
    except Exception as e:
        logger.error(f"Unexpected error: {e}")
        print(colors.error(f"Error: {e}"), file=sys.stderr)
        if args.verbose:
            logger.exception("Full traceback:")
        return EXIT_UNEXPECTED


if __name__ == '__main__':
    sys.exit(main())
