"""Per-iteration time series of a run and its CSV form."""

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from .errors import ArgumentError

ALT_MIN_COLUMNS = ("iter", "F", "r_u", "r_z", "envelope_residual", "step_u", "step_z")

TRAIN_COLUMNS = ("iter", "F", "train_loss", "train_error", "consensus_gap",
                 "envelope_grad_norm", "wall_ms")

# Columns that depend on the clock and are left out of reproducible outputs
TIMING_COLUMNS = ("wall_ms",)


@dataclass
class RunRecord:
    """Rows of named values; missing entries are stored as None."""
    columns: Sequence[str]
    rows: List[Dict[str, Any]] = field(default_factory=list)

    def append(self, **values: Any) -> None:
        unknown = set(values) - set(self.columns)
        if unknown:
            raise ArgumentError("Unknown RunRecord columns", columns=sorted(unknown))
        self.rows.append({c: values.get(c) for c in self.columns})

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> List[Any]:
        if name not in self.columns:
            raise ArgumentError(f"No column '{name}'", columns=list(self.columns))
        return [row[name] for row in self.rows]

    def last(self, name: str) -> Any:
        """Most recent non-empty value of a column."""
        for row in reversed(self.rows):
            if row[name] is not None:
                return row[name]
        return None

    def all_finite(self, name: str) -> bool:
        return all(v is None or math.isfinite(v) for v in self.column(name))

    def to_csv(self, path: Union[str, Path], include_timing: bool = True) -> None:
        """Write with a header row, LF endings and shortest round-trip floats."""
        columns = [c for c in self.columns if include_timing or c not in TIMING_COLUMNS]
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(columns)
            for row in self.rows:
                writer.writerow([format_cell(row[c]) for c in columns])


def format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def read_csv(path: Union[str, Path]) -> List[Dict[str, Optional[str]]]:
    with open(path, newline="", encoding="utf-8") as f:
        return [{k: (v if v != "" else None) for k, v in row.items()} for row in csv.DictReader(f)]


def write_rows(path: Union[str, Path], columns: Sequence[str], rows: Sequence[Dict[str, Any]]) -> None:
    """CSV in the RunRecord format for ad-hoc tables (scans, summaries)."""
    record = RunRecord(columns)
    for row in rows:
        record.append(**row)
    record.to_csv(path)
