"""Flat ``key = value`` experiment configuration.

One setting per line, ``#`` starts a comment, nesting is expressed with
dotted keys and lists are comma-separated::

    # toy run
    potential = log-sep:eta=2
    lam = 0.1, 0.05
    dataset.n = 200

Scalars go through ``yaml.safe_load`` and are then coerced to the type
declared for the key; a single-element list is written with a trailing
comma (``lam = 0.1,``).
"""

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import yaml

from ..core.errors import ConfigError, GridCapError

SCHEMA_VERSION = 1
RESOLVED_FILE = "config.resolved"
SCHEMA_FILE = "schema.json"


@dataclass(frozen=True)
class Option:
    kind: type
    default: Any
    multi: bool = False
    help: str = ""


def _train_options(multi: bool) -> Dict[str, Option]:
    return {
        "output": Option(str, "runs/train"),
        "objective": Option(str, "mlp", help="mlp or a test-function name"),
        "objective.dimension": Option(int, 2),
        "init_value": Option(float, 0.0, help="start point of test-function objectives"),
        "dataset.kind": Option(str, "two_gaussians"),
        "dataset.n": Option(int, 200),
        "dataset.noise": Option(float, 0.5),
        "dataset.test_fraction": Option(float, 0.0),
        "dataset.seed": Option(int, 0),
        "model.layers": Option(int, [2, 16, 2], multi=True),
        "model.nu": Option(float, 0.0),
        "workers": Option(int, 4, multi),
        "potential": Option(str, "quad", multi),
        "eta": Option(float, 1.0, multi),
        "lam": Option(float, 0.05, multi),
        "tau": Option(float, 0.005, multi),
        "sigma": Option(float, 0.05, multi),
        "rate": Option(float, None, multi, help="sets sigma = tau when given"),
        "kappa": Option(float, 0.9, multi),
        "batch_size": Option(int, 20, multi),
        "iterations": Option(int, 2000),
        "seed": Option(int, 0),
        "shard_mode": Option(str, "full_overlap", multi),
        "sigma_decay": Option(float, 0.0),
        "tau_includes_inv_lambda": Option(bool, False),
        "delta_uses_stale_u": Option(bool, False),
        "metrics_every": Option(int, 50),
        "envelope_every": Option(int, 0),
        "threads": Option(int, 1),
        "full_batch": Option(bool, False),
        "record_timing": Option(bool, False),
        "baseline": Option(str, "none", help="none or msgd"),
        "save_params": Option(bool, True),
    }


def _grid_options() -> Dict[str, Option]:
    options = _train_options(multi=True)
    options["output"] = Option(str, "runs/grid")
    options["max_runs"] = Option(int, 100)
    options["parallel_runs"] = Option(int, 1)
    return options


SCHEMAS: Dict[str, Dict[str, Option]] = {
    "check-potential": {
        "output": Option(str, "runs/check-potential"),
        "potential": Option(str, "log"),
        "dimension": Option(int, 2),
        "samples.points": Option(int, 50),
        "samples.directions": Option(int, 8),
        "convexity.half_width": Option(float, 0.5),
        "seed": Option(int, 0),
    },
    "envelope-scan": {
        "output": Option(str, "runs/envelope-scan"),
        "function": Option(str, "abs"),
        "dimension": Option(int, 1),
        "potential": Option(str, "quad"),
        "lam": Option(float, [1.0], multi=True),
        "scan.lower": Option(float, -3.0),
        "scan.upper": Option(float, 3.0),
        "scan.points": Option(int, 601),
        "method": Option(str, "grid", help="grid or local"),
        "grid.margin": Option(float, 1.0),
        "grid.points": Option(int, 801),
        "grid.refine": Option(int, 2),
        "threads": Option(int, 1),
    },
    "prox": {
        "output": Option(str, "runs/prox"),
        "function": Option(str, "abs"),
        "dimension": Option(int, 1),
        "potential": Option(str, "quad"),
        "lam": Option(float, 1.0),
        "v": Option(float, [2.0], multi=True),
        "method": Option(str, "grid", help="grid or local"),
        "init": Option(float, None, multi=True),
        "grid.half_width": Option(float, 4.0),
        "grid.points": Option(int, 801),
        "grid.refine": Option(int, 2),
        "identity_check": Option(bool, False),
    },
    "alt-min": {
        "output": Option(str, "runs/alt-min"),
        "function": Option(str, "neg_cos"),
        "dimension": Option(int, 1),
        "workers": Option(int, 1),
        "potential": Option(str, "tan"),
        "lam": Option(float, 0.1),
        "u0": Option(float, [0.4], multi=True),
        "tau": Option(float, 0.05),
        "sigma": Option(float, 0.04),
        "tol": Option(float, 1e-8),
        "max_iter": Option(int, 10000),
        "exact_u": Option(bool, False),
        "tau_includes_inv_lambda": Option(bool, False),
        "envelope_every": Option(int, 0),
    },
    "train": _train_options(multi=False),
    "grid": _grid_options(),
}


def _parse_scalar(raw: str) -> Any:
    raw = raw.strip()
    if raw == "":
        return None
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError:
        return raw
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return value
    if isinstance(value, (dict, list)):
        return raw
    return value


def _parse_value(raw: str) -> Any:
    if "," not in raw:
        return _parse_scalar(raw)
    parts = [p for p in raw.split(",")]
    if parts and parts[-1].strip() == "":
        parts = parts[:-1]
    return [_parse_scalar(p) for p in parts]


def _coerce(kind: type, value: Any, key: str, line: Optional[int]) -> Any:
    if value is None:
        return None
    try:
        if kind is bool:
            if isinstance(value, bool):
                return value
            raise ValueError(f"expected true/false, got {value!r}")
        if kind is int:
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError(f"expected an integer, got {value!r}")
            return int(value)
        if kind is float:
            if isinstance(value, bool):
                raise ValueError(f"expected a number, got {value!r}")
            return float(value)
        return str(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Bad value for '{key}': {e}", line=line, key=key) from None


def _emit_scalar(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


class ExperimentConfig:
    """Resolved settings of one subcommand; every key of its schema is present."""

    def __init__(self, subcommand: str, values: Optional[Dict[str, Any]] = None):
        if subcommand not in SCHEMAS:
            raise ConfigError(f"Unknown subcommand '{subcommand}'", subcommand=subcommand)
        self.subcommand = subcommand
        self.schema = SCHEMAS[subcommand]
        self.values: Dict[str, Any] = {k: opt.default for k, opt in self.schema.items()}
        for key, value in (values or {}).items():
            self.set(key, value)

    @classmethod
    def parse(cls, text: str, subcommand: str) -> "ExperimentConfig":
        config = cls(subcommand)
        config.update_from_lines(text.splitlines())
        return config

    @classmethod
    def load(cls, path: Optional[Union[str, Path]], subcommand: str,
             overrides: Sequence[str] = ()) -> "ExperimentConfig":
        """Config file (optional) followed by ``key=value`` overrides."""
        config = cls(subcommand)
        if path is not None:
            try:
                text = Path(path).read_text(encoding="utf-8")
            except OSError as e:
                raise ConfigError(f"Cannot read config file: {e}", path=str(path)) from None
            config.update_from_lines(text.splitlines())
        config.apply_overrides(overrides)
        return config

    def update_from_lines(self, lines: Iterable[str], first_line: int = 1) -> None:
        for number, line in enumerate(lines, start=first_line):
            content = line.split("#", 1)[0].strip()
            if not content:
                continue
            key, sep, raw = content.partition("=")
            key = key.strip()
            if not sep or not key:
                raise ConfigError("Expected 'key = value'", line=number, text=line.strip())
            self.set(key, _parse_value(raw), line=number)

    def apply_overrides(self, overrides: Sequence[str]) -> None:
        for override in overrides:
            key, sep, raw = override.partition("=")
            if not sep or not key.strip():
                raise ConfigError("Override must look like key=value", override=override)
            self.set(key.strip(), _parse_value(raw))

    def set(self, key: str, value: Any, line: Optional[int] = None) -> None:
        option = self.schema.get(key)
        if option is None:
            raise ConfigError(f"Unknown key '{key}' for {self.subcommand}", line=line, key=key)
        if isinstance(value, (list, tuple)):
            if not option.multi:
                raise ConfigError(f"Key '{key}' takes a single value", line=line, key=key)
            value = [_coerce(option.kind, v, key, line) for v in value]
            if any(v is None for v in value):
                raise ConfigError(f"Empty list entry for '{key}'", line=line, key=key)
        else:
            value = _coerce(option.kind, value, key, line)
        self.values[key] = value

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def get(self, key: str, default: Any = None) -> Any:
        return self.values.get(key, default)

    def as_list(self, key: str) -> List[Any]:
        value = self.values[key]
        if value is None:
            return []
        return list(value) if isinstance(value, list) else [value]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ExperimentConfig):
            return NotImplemented
        return self.subcommand == other.subcommand and self.values == other.values

    def __repr__(self) -> str:
        return f"ExperimentConfig({self.subcommand!r}, {self.values!r})"

    def emit(self) -> str:
        """Canonical text form, keys in sorted order."""
        lines = [f"# aniso {self.subcommand}"]
        for key in sorted(self.values):
            value = self.values[key]
            if isinstance(value, list):
                text = ", ".join(_emit_scalar(v) for v in value)
                if len(value) == 1:
                    text += ","
            else:
                text = _emit_scalar(value)
            lines.append(f"{key} = {text}".rstrip())
        return "\n".join(lines) + "\n"

    def write_artifacts(self, directory: Union[str, Path]) -> Path:
        """Write config.resolved and schema.json; returns the directory."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        with open(directory / RESOLVED_FILE, "w", encoding="utf-8", newline="\n") as f:
            f.write(self.emit())
        schema = {"schema_version": SCHEMA_VERSION, "subcommand": self.subcommand}
        with open(directory / SCHEMA_FILE, "w", encoding="utf-8", newline="\n") as f:
            json.dump(schema, f, indent=2, sort_keys=True)
            f.write("\n")
        return directory

    def sweep_keys(self) -> List[str]:
        """Keys holding more than one value, in sorted order."""
        return sorted(k for k, v in self.values.items()
                      if isinstance(v, list) and self.schema[k].multi and len(v) > 1
                      and k not in SCALAR_LIST_KEYS)

    def expand(self, cap: Optional[int] = None) -> List[Dict[str, Any]]:
        """Cartesian product of all list-valued keys, last key varying fastest."""
        keys = self.sweep_keys()
        axes = [self.values[k] for k in keys]
        size = math.prod(len(a) for a in axes) if axes else 1
        if cap is not None and size > cap:
            raise GridCapError(f"Grid has {size} runs, more than the cap of {cap}",
                               size=size, cap=cap)
        base = {k: (v[0] if isinstance(v, list) and len(v) == 1 and k not in SCALAR_LIST_KEYS else v)
                for k, v in self.values.items()}
        runs = []
        for combo in itertools.product(*axes):
            run = dict(base)
            run.update(zip(keys, combo))
            runs.append(run)
        return runs


# List-typed settings that are a single value, not a sweep axis
SCALAR_LIST_KEYS = ("model.layers", "u0", "v", "init")


def config_from_args(args, subcommand: str) -> ExperimentConfig:
    """Config file named by ``--config`` plus positional ``key=value`` overrides."""
    return ExperimentConfig.load(getattr(args, "config", None), subcommand,
                                 getattr(args, "overrides", None) or ())
