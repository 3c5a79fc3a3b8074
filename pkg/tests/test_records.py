import math

import numpy as np
import pytest

from aniso.core.errors import ArgumentError
from aniso.core.records import ALT_MIN_COLUMNS, TRAIN_COLUMNS, RunRecord, format_cell, read_csv
from aniso.utils.formatter import OutputFormatter, best_rows, format_duration, to_builtin


class TestRunRecord:

    def test_missing_values_are_none(self):
        record = RunRecord(ALT_MIN_COLUMNS)
        record.append(iter=0, F=1.5)
        assert record.rows[0]["r_u"] is None
        assert record.last("F") == 1.5

    def test_unknown_column(self):
        with pytest.raises(ArgumentError):
            RunRecord(ALT_MIN_COLUMNS).append(loss=1.0)

    def test_last_skips_empty_cells(self):
        record = RunRecord(ALT_MIN_COLUMNS)
        record.append(iter=0, envelope_residual=0.5)
        record.append(iter=1)
        assert record.last("envelope_residual") == 0.5

    def test_csv_layout(self, tmp_path):
        record = RunRecord(("iter", "F", "flag"))
        record.append(iter=0, F=0.1, flag=True)
        record.append(iter=np.int64(1), F=np.float64(1e-20))
        path = tmp_path / "run.csv"
        record.to_csv(path)
        assert path.read_bytes() == b"iter,F,flag\n0,0.1,1\n1,1e-20,\n"

    def test_timing_can_be_left_out(self, tmp_path):
        record = RunRecord(TRAIN_COLUMNS)
        record.append(iter=0, F=1.0, wall_ms=3.2)
        record.to_csv(tmp_path / "run.csv", include_timing=False)
        header = (tmp_path / "run.csv").read_text().splitlines()[0]
        assert "wall_ms" not in header.split(",")

    def test_floats_round_trip_through_the_csv(self, tmp_path, rng):
        record = RunRecord(("iter", "F"))
        values = rng.standard_normal(20)
        for i, v in enumerate(values):
            record.append(iter=i, F=float(v))
        record.to_csv(tmp_path / "run.csv")
        rows = read_csv(tmp_path / "run.csv")
        assert [float(r["F"]) for r in rows] == values.tolist()

    def test_read_csv_maps_blank_to_none(self, tmp_path):
        (tmp_path / "run.csv").write_text("iter,F\n0,\n")
        assert read_csv(tmp_path / "run.csv") == [{"iter": "0", "F": None}]

    def test_format_cell(self):
        assert format_cell(None) == ""
        assert format_cell(math.inf) == "inf"
        assert format_cell("log-sep:eta=2.0") == "log-sep:eta=2.0"


class TestFormatter:

    def test_json_handles_arrays(self):
        text = OutputFormatter("json").format_data({"u": np.array([1.0, 2.0]), "n": np.int64(3)})
        assert '"n": 3' in text and "1.0" in text

    def test_to_builtin(self):
        assert to_builtin({"a": (np.float64(0.5),)}) == {"a": [0.5]}

    def test_unsupported_format(self):
        with pytest.raises(ValueError):
            OutputFormatter("xml")

    def test_best_rows(self):
        rows = [{"potential": "quad", "loss": 0.3, "run": 0},
                {"potential": "log", "loss": 0.2, "run": 1},
                {"potential": "quad", "loss": 0.1, "run": 2},
                {"potential": "quad", "loss": 0.1, "run": 3},
                {"potential": "log", "loss": None, "run": 4}]
        best = best_rows(rows, "potential", "loss")
        assert [(r["potential"], r["run"]) for r in best] == [("quad", 2), ("log", 1)]

    @pytest.mark.parametrize("seconds,text", [(5.0, "5.0s"), (125.0, "2m 5s"), (3725.0, "1h 2m 5s")])
    def test_duration(self, seconds, text):
        assert format_duration(seconds) == text
