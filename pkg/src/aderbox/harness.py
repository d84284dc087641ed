"""Verification harness: error norms, convergence tables, stored references.

Norms are computed against the case's exact solution on the reconstructed
degree-M representation, sampled at the (M+1)-point GL nodes per cell and
accumulated without domain normalization (the convention the benchmark
tables use).  For cases without an exact solution (the RHD Riemann
problems), a stored fine-mesh finite-volume reference generated by this
package's own N=0 third-order scheme serves as the oracle.
"""

from __future__ import annotations

import csv
import os
import time
from dataclasses import dataclass

import numpy as np

from .driver import Engine, RunConfig
from .operators import axdot


def solution_error_norms(engine: Engine) -> dict:
    """L1/L2/Linf of the density error on the reconstructed representation."""
    case = engine.case
    if case.exact is None:
        raise ValueError(f"case {case.name!r} has no exact solution")
    W = engine._reconstruct()
    X = engine._node_positions(engine.grid.active, "M")
    Ve = case.exact(X, engine.t)
    Vh, _ = engine.sys.primitives(W)
    err = np.abs(Vh[0] - Ve[0])
    wts = engine.table.basis_M.weights
    vols = engine.active_vol
    acc1 = err
    acc2 = err * err
    for a in range(engine.d):
        acc1 = axdot(wts[None, :], acc1, acc1.ndim - 1 - a)
        acc2 = axdot(wts[None, :], acc2, acc2.ndim - 1 - a)
    l1 = float(np.sum(acc1.reshape(-1) * vols))
    l2 = float(np.sqrt(np.sum(acc2.reshape(-1) * vols)))
    linf = float(err.max())
    return {"L1": l1, "L2": l2, "Linf": linf}


@dataclass
class ErrorRow:
    h: float
    L1: float
    L2: float
    Linf: float
    order1: float
    order2: float
    orderinf: float
    wall: float


def observed_order(e_coarse, e_fine, h_coarse, h_fine) -> float:
    if e_fine <= 0 or e_coarse <= 0:
        return float("nan")
    return float(np.log(e_coarse / e_fine) / np.log(h_coarse / h_fine))


def convergence_table(case_name, N, M, meshes, **run_kw) -> list[ErrorRow]:
    """Run the case on each mesh and tabulate density error norms."""
    rows = []
    for n in meshes:
        n0 = (n,) * len_of_case(case_name) if isinstance(n, int) else tuple(n)
        t0 = time.perf_counter()
        eng = Engine(RunConfig(case=case_name, N=N, M=M, n0=n0, **run_kw))
        eng.run()
        wall = time.perf_counter() - t0
        norms = solution_error_norms(eng)
        h = float(eng.grid.dx0[0])
        if rows:
            prev = rows[-1]
            o1 = observed_order(prev.L1, norms["L1"], prev.h, h)
            o2 = observed_order(prev.L2, norms["L2"], prev.h, h)
            oi = observed_order(prev.Linf, norms["Linf"], prev.h, h)
        else:
            o1 = o2 = oi = float("nan")
        rows.append(ErrorRow(h=h, L1=norms["L1"], L2=norms["L2"],
                             Linf=norms["Linf"], order1=o1, order2=o2,
                             orderinf=oi, wall=wall))
    return rows


def len_of_case(case_name) -> int:
    from .problems import ProblemCase, get_case

    case = case_name if isinstance(case_name, ProblemCase) else get_case(case_name)
    return case.d


def write_error_table(path: str, scheme_rows: dict):
    """CSV with one block per scheme: h, L1, L2, Linf, orders, wall time."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["scheme", "h", "L1", "L2", "Linf",
                    "order_L1", "order_L2", "order_Linf", "wall_s"])
        for scheme, rows in scheme_rows.items():
            for r in rows:
                w.writerow([scheme, f"{r.h:.6e}", f"{r.L1:.6e}", f"{r.L2:.6e}",
                            f"{r.Linf:.6e}", f"{r.order1:.3f}", f"{r.order2:.3f}",
                            f"{r.orderinf:.3f}", f"{r.wall:.2f}"])
    return path


# ---------------------------------------------------------------------------
# Stored fine-mesh references (RHD Riemann problems)
# ---------------------------------------------------------------------------

REFERENCE_SCHEME = dict(N=0, M=2, limiter="off")
REFERENCE_FACTOR = 10


def reference_path(directory: str, case_name: str) -> str:
    return os.path.join(directory, f"ref_{case_name}.csv")


def generate_reference(case_name: str, directory: str, base_cells: int = 200,
                       factor: int = REFERENCE_FACTOR) -> str:
    """Run the 1D N=0 WENO scheme at `factor` x resolution; store cell means."""
    from .problems import get_case

    case = get_case(case_name)
    if case.d != 1:
        raise ValueError("references are generated for 1D cases only")
    n = base_cells * factor
    eng = Engine(RunConfig(case=case_name, n0=(n,), **REFERENCE_SCHEME))
    eng.run()
    means = eng.cell_means()
    V, _ = eng.sys.primitives(means)
    lo = eng.grid.cell_lo(eng.grid.active)[:, 0]
    sz = eng.grid.cell_sizes(eng.grid.active)[:, 0]
    x = lo + 0.5 * sz
    os.makedirs(directory, exist_ok=True)
    path = reference_path(directory, case_name)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["x"] + list(eng.sys.prim_names))
        for i in range(x.size):
            w.writerow([f"{x[i]:.12e}"] + [f"{v:.12e}" for v in V[:, i]])
    return path


def load_reference(path: str):
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    return data[:, 0], data[:, 1:].T


def coarse_means_from_reference(ref_rho: np.ndarray, factor: int) -> np.ndarray:
    """Average consecutive groups of `factor` fine cells onto the coarse grid."""
    n = ref_rho.size // factor
    return ref_rho[:n * factor].reshape(n, factor).mean(axis=1)
