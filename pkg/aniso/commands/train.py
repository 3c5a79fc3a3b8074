"""train command: distributed training of a toy MLP or a test function."""

import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

from ..core.distributed import TrainerConfig, TrainResult, train, train_msgd
from ..core.errors import ArgumentError
from ..core.models import (Dataset, DatasetObjective, DatasetSpec, FunctionObjective, MlpModel,
                           make_test_function, save_params, split_dataset, synth_dataset)
from ..core.potentials import PotentialSpec
from ..utils.config import config_from_args
from ..utils.formatter import OutputFormatter, format_duration
from ..utils.logger import get_logger


@dataclass
class TrainOutcome:
    result: TrainResult
    trainer: TrainerConfig
    test: Optional[Dataset]
    metrics: Dict[str, Any]
    seconds: float


def potential_with_eta(potential: str, eta: float) -> str:
    """Potential spec string with the layer scaling applied (eta = 1 keeps the string's own)."""
    spec = PotentialSpec.parse(potential)
    if eta != 1.0:
        spec = replace(spec, eta=eta)
    return str(spec)


def trainer_config(values: Dict[str, Any]) -> TrainerConfig:
    tau, sigma = values["tau"], values["sigma"]
    if values.get("rate") is not None:
        tau = sigma = values["rate"]
    return TrainerConfig(
        workers=values["workers"],
        potential=potential_with_eta(values["potential"], values["eta"]),
        lam=values["lam"], tau=tau, sigma=sigma, kappa=values["kappa"],
        batch_size=values["batch_size"], iterations=values["iterations"], seed=values["seed"],
        shard_mode=values["shard_mode"], nu=values["model.nu"],
        tau_includes_inv_lambda=values["tau_includes_inv_lambda"],
        delta_uses_stale_u=values["delta_uses_stale_u"], sigma_decay=values["sigma_decay"],
        metrics_every=values["metrics_every"], envelope_every=values["envelope_every"],
        n_threads=values["threads"], full_batch=values["full_batch"],
        record_timing=values["record_timing"],
    )


def build_objective(values: Dict[str, Any], cfg: TrainerConfig) -> Tuple[Any, Optional[Dataset], Optional[np.ndarray]]:
    """Objective, optional test set and optional start point."""
    if values["objective"] == "mlp":
        spec = DatasetSpec(values["dataset.kind"], values["dataset.n"], values["dataset.noise"])
        data = synth_dataset(spec, values["dataset.seed"])
        train_set, test_set = split_dataset(data, values["dataset.test_fraction"], values["dataset.seed"])
        layers = values["model.layers"]
        layers = tuple(layers) if isinstance(layers, list) else (layers,)
        if layers[0] != train_set.n_features or layers[-1] != train_set.n_classes:
            raise ArgumentError("model.layers must start with the feature count and end with the class count",
                                layers=layers, features=train_set.n_features, classes=train_set.n_classes)
        model = MlpModel(layers, nu=cfg.nu)
        return DatasetObjective(model, train_set), test_set, None

    f = make_test_function(values["objective"], values["objective.dimension"])
    return FunctionObjective(f), None, np.full(f.dimension, values["init_value"])


def run_training(values: Dict[str, Any]) -> TrainOutcome:
    """One training run from resolved settings; shared by train and grid."""
    cfg = trainer_config(values)
    objective, test, initial = build_objective(values, cfg)
    runner = {"none": train, "msgd": train_msgd}.get(values["baseline"])
    if runner is None:
        raise ArgumentError(f"Unknown baseline '{values['baseline']}'", choices=["none", "msgd"])

    started = time.perf_counter()
    result = runner(cfg, objective, initial)
    seconds = time.perf_counter() - started

    final = result.record.rows[-1]
    metrics = {
        "Objective": final["F"],
        "Train Loss": final["train_loss"],
        "Train Error": final["train_error"],
        "Test Loss": None,
        "Test Error": None,
        "Consensus Gap": final["consensus_gap"],
    }
    if test is not None:
        metrics["Test Loss"], metrics["Test Error"] = objective.metrics(result.u, test)
    return TrainOutcome(result, cfg, test, metrics, seconds)


def execute(args) -> int:
    logger = get_logger()
    config = config_from_args(args, "train")
    outcome = run_training(config.values)

    out = config.write_artifacts(Path(config["output"]))
    outcome.result.record.to_csv(out / "run.csv")
    if config["save_params"]:
        save_params(out / "params.csv", outcome.result.u)

    summary = dict(outcome.metrics)
    summary.update(potential=outcome.trainer.potential, lam=outcome.trainer.lam,
                   infinite_objective_values=outcome.result.infinite_evaluations)
    OutputFormatter("json").save_data(summary, out / "summary.json")

    OutputFormatter(getattr(args, "format", None) or "table").print_data(summary)
    print(f"\nTraining finished in {format_duration(outcome.seconds)}; artifacts in {out}")
    logger.info(f"train finished: {outcome.trainer.iterations} rounds in {outcome.seconds:.2f}s")
    return 0
