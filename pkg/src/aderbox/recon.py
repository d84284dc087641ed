"""Spatial reconstruction: degree-N cell data to a degree-M polynomial per cell.

Three paths, chosen by (N, M):
  * N == M     -> identity (the DG representation is already degree M)
  * 0 < N < M  -> dimension-by-dimension constrained least squares on the
                  compact 3-cell stencil, center-cell moments matched exactly
  * N == 0     -> dimension-by-dimension WENO with nonlinear weights

Sweeps are batched: each function maps stacks of per-cell stencil data
(shape (cells, m, ...nodes...)) in one contraction.  Every sweep reconstructs
along exactly one array axis; the caller supplies the virtual neighbor data
(the mesh module guarantees level-uniform stencils).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operators import OperatorTable, axdot


@dataclass(frozen=True)
class WenoConfig:
    """Nonlinear-weight constants for the N=0 reconstruction."""

    lambda_central: float = 1.0e5
    lambda_side: float = 1.0
    epsilon: float = 1.0e-14
    r_exponent: int = 8

    def __post_init__(self):
        if min(self.lambda_central, self.lambda_side, self.epsilon) <= 0:
            raise ValueError("WENO constants must be positive")
        if self.r_exponent <= 0:
            raise ValueError("WENO exponent must be positive")


def clsq_sweep(table: OperatorTable, left: np.ndarray, center: np.ndarray,
               right: np.ndarray, axis: int) -> np.ndarray:
    """One CLSQ reconstruction sweep along `axis`.

    The three arrays hold the (virtually same-size) stencil data with N+1
    nodes along `axis`; the output carries M+1 nodes there.  For N == M the
    operator degenerates to the identity on the center data.
    """
    if table.N == table.M:
        return center.copy()
    stacked = np.concatenate([left, center, right], axis=axis)
    return axdot(table.recon_matrix, stacked, axis)


def weno_sweep(table: OperatorTable, cfg: WenoConfig, neighbors: list[np.ndarray],
               axis: int, mask: np.ndarray | None = None) -> np.ndarray:
    """One WENO sweep along `axis` from 2*hw+1 single-node slabs.

    `neighbors` lists the per-offset data (offset -hw..hw), each of size 1
    along `axis`.  `mask`, when given, flags windows to drop per element
    (shape (n_windows,) + element shape) for stencils cut short by halos.
    """
    w = table.weno
    if w is None:
        raise ValueError(f"no WENO tables for M={table.M} (N=0 path supports M<=4)")
    if len(neighbors) != 2 * w.halfwidth + 1:
        raise ValueError("wrong stencil width for WENO sweep")
    stacked = np.concatenate(neighbors, axis=axis)
    ax = axis % stacked.ndim
    cands = []
    sigmas = []
    for off, G in zip(w.offsets, w.matrices):
        sl = [slice(None)] * stacked.ndim
        sl[ax] = slice(off + w.halfwidth, off + w.halfwidth + table.M + 1)
        cand = axdot(G, stacked[tuple(sl)], ax)
        c = np.moveaxis(cand, ax, -1)
        sigmas.append(np.einsum("...a,ab,...b->...", c, w.osc, c))
        cands.append(cand)
    out = None
    wsum = None
    for k in range(len(cands)):
        lam = cfg.lambda_central if k == w.central else cfg.lambda_side
        om = lam / (sigmas[k] + cfg.epsilon) ** cfg.r_exponent
        if mask is not None:
            om = np.where(mask[k], om, 0.0)
        term = np.expand_dims(om, ax) * cands[k]
        out = term if out is None else out + term
        wsum = om if wsum is None else wsum + om
    return out / np.expand_dims(wsum, ax)


def reconstruct_cell(table: OperatorTable, block) -> np.ndarray:
    """Full reconstruction of one cell from its 3^d degree-N neighborhood.

    `block` is indexed block[jy][jx] (d=2) or block[jx] (d=1) with offsets
    0,1,2 and the cell itself in the middle; each entry has shape
    (m, N+1[, N+1]).  Returns the (m, M+1[, M+1]) nodal tensor.  This is the
    single-cell reference path; the step loop uses the batched sweeps.
    """
    if table.d == 1:
        return clsq_sweep(table, block[0][None], block[1][None], block[2][None],
                          axis=-1)[0]
    wx = [
        clsq_sweep(table, block[j][0][None], block[j][1][None], block[j][2][None],
                   axis=-1)[0]
        for j in range(3)
    ]
    return clsq_sweep(table, wx[0][None], wx[1][None], wx[2][None], axis=-2)[0]
