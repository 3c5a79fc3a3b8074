"""grid command: cartesian sweep of training runs with per-potential best rows."""

from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional

from ..core.errors import AnisoError
from ..core.potentials import PotentialSpec
from ..core.records import write_rows
from ..utils.config import ExperimentConfig, config_from_args
from ..utils.formatter import ColorFormatter, OutputFormatter, best_rows
from ..utils.logger import ErrorCollector, ProgressLogger, get_logger
from .train import TrainOutcome, run_training

METRIC_COLUMNS = ("Objective", "Train Loss", "Train Error", "Test Loss", "Test Error")
SETTING_COLUMNS = ("run", "potential", "spec", "lam", "eta", "tau", "sigma", "kappa",
                   "batch_size", "workers", "shard_mode", "seed")


def summary_row(index: int, outcome: TrainOutcome) -> Dict[str, Any]:
    cfg = outcome.trainer
    spec = PotentialSpec.parse(cfg.potential)
    row = {
        "run": index, "potential": spec.kind.value, "spec": cfg.potential, "lam": cfg.lam,
        "eta": spec.eta, "tau": cfg.tau, "sigma": cfg.sigma, "kappa": cfg.kappa,
        "batch_size": cfg.batch_size, "workers": cfg.workers, "shard_mode": cfg.shard_mode,
        "seed": cfg.seed,
    }
    row.update({k: outcome.metrics[k] for k in METRIC_COLUMNS})
    return row


def best_per_column(rows: List[Dict[str, Any]]) -> List[Dict[str, Any]]:
    """For each potential, the best value of every metric taken independently."""
    table = []
    for potential in dict.fromkeys(r["potential"] for r in rows):
        group = [r for r in rows if r["potential"] == potential]
        entry: Dict[str, Any] = {"potential": potential}
        for column in METRIC_COLUMNS:
            values = [r[column] for r in group if r[column] is not None]
            entry[column] = min(values) if values else None
        table.append(entry)
    return table


def run_grid(config: ExperimentConfig, out: Path) -> Dict[str, List[Dict[str, Any]]]:
    """Run every combination; seed of run i is the base seed plus i."""
    runs = config.expand(cap=config["max_runs"])
    for index, values in enumerate(runs):
        values["seed"] = config["seed"] + index

    logger = get_logger()
    errors = ErrorCollector()
    progress = ProgressLogger(len(runs), "grid")

    def attempt(item) -> Optional[TrainOutcome]:
        index, values = item
        try:
            outcome = run_training(values)
        except AnisoError as e:
            errors.add_error(f"run {index}", e)
            outcome = None
        progress.update()
        return outcome

    with ThreadPoolExecutor(max_workers=max(1, config["parallel_runs"])) as pool:
        outcomes = list(pool.map(attempt, enumerate(runs)))
    progress.complete()
    errors.log_summary()

    rows = []
    for index, outcome in enumerate(outcomes):
        if outcome is None:
            continue
        outcome.result.record.to_csv(out / "runs" / f"run_{index:04d}.csv")
        rows.append(summary_row(index, outcome))
    logger.info(f"grid: {len(rows)} of {len(runs)} runs completed, {errors.get_error_count()} failed")

    tables = {
        "summary": rows,
        "best_by_train_loss": best_rows(rows, "potential", "Train Loss"),
        "best_by_test_error": best_rows(rows, "potential", "Test Error"),
        "best_per_column": best_per_column(rows),
    }
    return tables


def execute(args) -> int:
    config = config_from_args(args, "grid")
    out = config.write_artifacts(Path(config["output"]))
    tables = run_grid(config, out)

    columns = list(SETTING_COLUMNS) + list(METRIC_COLUMNS)
    for name in ("summary", "best_by_train_loss", "best_by_test_error"):
        write_rows(out / f"{name}.csv", columns, tables[name])
    write_rows(out / "best_per_column.csv", ["potential"] + list(METRIC_COLUMNS),
               tables["best_per_column"])

    colors = ColorFormatter()
    if not tables["summary"]:
        print(colors.error("No grid run completed"))
        return 3

    formatter = OutputFormatter(getattr(args, "format", None) or "table")
    print(colors.bold("Best configuration per potential (by train loss)"))
    formatter.print_data(_compact(tables["best_by_train_loss"]))
    if tables["best_by_test_error"]:
        print(colors.bold("\nBest configuration per potential (by test error)"))
        formatter.print_data(_compact(tables["best_by_test_error"]))
    print(colors.bold("\nBest value per column"))
    formatter.print_data(tables["best_per_column"])
    print(f"\n{len(tables['summary'])} runs written to {out}")
    return 0


def _compact(rows: List[Dict[str, Any]]) -> List[Dict[str, Any]]:
    keep = ("potential", "spec", "lam", "tau", "sigma", "kappa") + METRIC_COLUMNS
    return [{k: r[k] for k in keep} for r in rows]
