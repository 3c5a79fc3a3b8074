"""envelope-scan command: envelope, prox and envelope gradient over a box of v."""

import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List

import numpy as np

from ..core.errors import ArgumentError, EmptyFeasibleError
from ..core.models import make_test_function
from ..core.oracle import GridSpec
from ..core.potentials import parse_potential
from ..core.prox import ProxProblem, prox_grid, prox_local
from ..core.records import write_rows
from ..utils.config import config_from_args
from ..utils.logger import ProgressLogger, get_logger


def scan_columns(dimension: int) -> List[str]:
    return ([f"v{i}" for i in range(dimension)] + ["envelope"]
            + [f"envelope_grad{i}" for i in range(dimension)] + ["n_minimizers", "method"])


def scan_point(prob: ProxProblem, v: np.ndarray, method: str, z_grid: GridSpec) -> Dict:
    d = prob.dimension
    row = {f"v{i}": float(v[i]) for i in range(d)}
    try:
        result = prox_grid(prob, v, z_grid) if method == "grid" else prox_local(prob, v)
    except EmptyFeasibleError:
        row.update(envelope=math.inf, n_minimizers=0, method=method)
        return row
    row.update(envelope=float(result.envelope), n_minimizers=len(result.minimizers),
               method=result.method)
    if result.envelope_gradient is not None:
        row.update({f"envelope_grad{i}": float(result.envelope_gradient[i]) for i in range(d)})
    return row


def scan(prob: ProxProblem, v_grid: GridSpec, method: str, z_grid: GridSpec,
         threads: int = 1) -> List[Dict]:
    """One row per scan point, in grid order."""
    points = v_grid.coordinates()
    progress = ProgressLogger(len(points), f"envelope scan lam={prob.lam!r}")

    def run(v):
        row = scan_point(prob, v, method, z_grid)
        progress.update()
        return row

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(run, points))
    else:
        rows = [run(v) for v in points]
    progress.complete()
    return rows


def execute(args) -> int:
    logger = get_logger()
    config = config_from_args(args, "envelope-scan")
    d = config["dimension"]
    if d > 3:
        raise ArgumentError("envelope-scan supports dimension at most 3", dimension=d)
    method = config["method"]
    if method not in ("grid", "local"):
        raise ArgumentError(f"Unknown prox method '{method}'")

    f = make_test_function(config["function"], d)
    phi = parse_potential(config["potential"], d)
    lower, upper = config["scan.lower"], config["scan.upper"]
    v_grid = GridSpec((lower,) * d, (upper,) * d, (config["scan.points"],) * d, refine=0)
    margin = config["grid.margin"]
    z_grid = GridSpec((lower - margin,) * d, (upper + margin,) * d,
                      (config["grid.points"],) * d, refine=config["grid.refine"])

    out = config.write_artifacts(Path(config["output"]))
    columns = scan_columns(d)
    for lam in config.as_list("lam"):
        prob = ProxProblem(f, phi, lam)
        rows = scan(prob, v_grid, method, z_grid, config["threads"])
        path = out / f"envelope_lam={lam!r}.csv"
        write_rows(path, columns, rows)
        multivalued = sum(1 for r in rows if r["n_minimizers"] > 1)
        empty = sum(1 for r in rows if r["n_minimizers"] == 0)
        print(f"lam={lam!r}: {len(rows)} points, {multivalued} multivalued, {empty} empty -> {path}")
        logger.info(f"Envelope scan for lam={lam!r} written to {path}")
    return 0
