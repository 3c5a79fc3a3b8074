"""prox command: phi-prox, envelope and envelope gradient at one point v."""

from pathlib import Path

import numpy as np

from ..core.errors import ArgumentError
from ..core.models import make_test_function
from ..core.oracle import GridSpec
from ..core.potentials import parse_potential
from ..core.prox import ProxProblem, prox_grid, prox_identity_residual, prox_local
from ..core.records import write_rows
from ..utils.config import config_from_args
from ..utils.formatter import OutputFormatter
from ..utils.logger import get_logger


def execute(args) -> int:
    logger = get_logger()
    config = config_from_args(args, "prox")
    d = config["dimension"]
    v = np.array(config.as_list("v"), dtype=float)
    if v.size != d:
        raise ArgumentError("v must have one entry per dimension", dimension=d, v=v.size)

    f = make_test_function(config["function"], d)
    phi = parse_potential(config["potential"], d)
    prob = ProxProblem(f, phi, config["lam"])
    if prob.threshold_unknown:
        logger.warning(f"{f.name} has no known lower bound; the prox-boundedness threshold is unknown")

    method = config["method"]
    if method == "grid":
        grid = GridSpec.around(v, config["grid.half_width"], config["grid.points"], config["grid.refine"])
        result = prox_grid(prob, v, grid)
    elif method == "local":
        init = config.as_list("init") or None
        result = prox_local(prob, v, init)
    else:
        raise ArgumentError(f"Unknown prox method '{method}'")

    summary = {
        "function": f.name,
        "potential": phi.spec,
        "lam": prob.lam,
        "v": v,
        "envelope": result.envelope,
        "envelope_gradient": result.envelope_gradient,
        "minimizers": result.minimizers,
        "multivalued": result.multivalued,
        "method": result.method,
    }
    if config["identity_check"]:
        summary["identity_residual"] = prox_identity_residual(prob, v)

    out = config.write_artifacts(Path(config["output"]))
    columns = [f"z{i}" for i in range(d)] + ["envelope"] + [f"envelope_grad{i}" for i in range(d)]
    rows = []
    for z in result.minimizers:
        row = {f"z{i}": float(z[i]) for i in range(d)}
        row["envelope"] = float(prob.inner(v, z))
        if not result.multivalued:
            row.update({f"envelope_grad{i}": float(result.envelope_gradient[i]) for i in range(d)})
        rows.append(row)
    write_rows(out / "prox.csv", columns, rows)
    OutputFormatter("json").save_data(summary, out / "summary.json")

    OutputFormatter(getattr(args, "format", None) or "table").print_data(summary)
    return 0
