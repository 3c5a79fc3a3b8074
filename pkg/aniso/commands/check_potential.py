"""check-potential command: executable checks of the Legendre assumptions."""

import csv
from pathlib import Path

import numpy as np

from ..core.errors import ArgumentError, InversionError
from ..core.oracle import local_convexity_constants
from ..core.potentials import SampleSpec, check_assumptions, parse_potential
from ..utils.config import config_from_args
from ..utils.formatter import ColorFormatter, OutputFormatter
from ..utils.logger import get_logger


def conjugate_roundtrip_error(p, points: np.ndarray) -> float:
    """max ||grad phi*(grad phi(w)) - w|| over the sample points."""
    worst = 0.0
    for w in points:
        back = p.conjugate_gradient(p.gradient(w))
        worst = max(worst, float(np.linalg.norm(back - w)))
    return worst


def execute(args) -> int:
    """Run the assumption checks; failing assumptions are reported, not errors."""
    logger = get_logger()
    config = config_from_args(args, "check-potential")
    if getattr(args, "potential", None):
        config.set("potential", args.potential)

    p = parse_potential(config["potential"], config["dimension"])
    samples = SampleSpec.default(p, config["samples.points"], config["samples.directions"],
                                 config["seed"])
    report = check_assumptions(p, samples)

    summary = {"potential": p.spec, "dimension": p.dimension, "all_passed": report.all_passed}
    try:
        summary["conjugate_roundtrip_error"] = conjugate_roundtrip_error(p, samples.points)
    except InversionError as e:
        logger.warning(f"Conjugate gradient inversion failed: {e}")
        summary["conjugate_roundtrip_error"] = None

    h = config["convexity.half_width"]
    try:
        estimate = local_convexity_constants(p, (-h * np.ones(p.dimension), h * np.ones(p.dimension)))
        summary.update(mu_hat=estimate.mu_hat, gamma_hat=estimate.gamma_hat,
                       box_half_width=h)
    except ArgumentError as e:
        logger.warning(f"Local convexity constants skipped: {e}")

    out = config.write_artifacts(Path(config["output"]))
    json_formatter = OutputFormatter("json")
    _write_report_csv(out / "report.csv", report.as_rows())
    json_formatter.save_data(summary, out / "summary.json")

    formatter = OutputFormatter(getattr(args, "format", None) or "table")
    colors = ColorFormatter()
    formatter.print_data(report.as_rows())
    status = colors.success("all assumptions hold") if report.all_passed else \
        colors.warning(f"failing: {', '.join(c.name for c in report.failures())}")
    print(f"\n{p.spec}: {status}")
    logger.info(f"check-potential {p.spec} written to {out}")
    return 0


def _write_report_csv(path: Path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
