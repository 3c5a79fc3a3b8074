"""Subcommands; each module exposes ``execute(args) -> int``."""
