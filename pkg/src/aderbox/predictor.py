"""Element-local space-time Galerkin predictor.

From the reconstructed polynomial w_h at t^n, produce the degree-M space-time
polynomial q_h on cell x [t^n, t^(n+1)] by discrete Picard iteration on the
time-upwinded weak form.  The operation is strictly cell-local: its only
inputs are the cell's own data, sizes and the timestep, so it vectorizes over
an arbitrary batch of cells.

Array layout: component axis first.  w has shape (m, C, [nM]*d) with x the
last axis; the returned q has shape (m, C, nM, [nM]*d) with the time axis in
position 2.
"""

from __future__ import annotations

import numpy as np

from .operators import OperatorTable, axdot
from .systems.base import HyperbolicSystem

TIME_AXIS = 2


class PredictorFailure(RuntimeError):
    """NaN/Inf appeared during the Picard iteration (caller treats as troubled)."""


def predict(table: OperatorTable, sys: HyperbolicSystem, w: np.ndarray,
            dx, dt: float, tol: float = 1e-9, track: list | None = None,
            q_init: np.ndarray | None = None):
    """Solve the local space-time system; returns (q, failed).

    dx is the per-axis cell size: sequence of d scalars or of (C,) arrays
    (mixed AMR levels).  `failed` flags cells whose iteration produced
    non-finite values; those are reset to the constant-in-time initial guess
    so downstream flux code stays finite, and the caller must discard them.
    Pass a list as `track` to record the per-iteration max-norm changes.
    """
    d = table.d
    M = table.M
    nt = table.n_nodes_M

    warm = q_init is not None and q_init.shape[1] == w.shape[1]
    if warm:
        q = q_init.copy()
    else:
        q = np.repeat(np.expand_dims(w, TIME_AXIS), nt, axis=TIME_AXIS)
    q0 = np.repeat(np.expand_dims(w, TIME_AXIS), nt, axis=TIME_AXIS)
    w_b = np.expand_dims(w, TIME_AXIS)
    # fold the K1 solve with the time-quadrature weights: each sweep is
    # q <- w - sum_a (dt/dx_a) D_a (T f_a), T = K1^{-1} diag(w_t)
    t_op = table.K1inv * table.basis_M.weights[None, :]

    C = q.shape[1]
    dxa = [np.broadcast_to(np.asarray(s, dtype=float), (C,)) for s in dx]
    max_iters = 2 * (M + 1)
    qscale = 1.0 + float(np.max(np.abs(w)))
    thresh = tol * qscale
    cell_axes_of = lambda arr: (0,) + tuple(range(2, arr.ndim))
    # cells drop out of the sweep once their coefficients stop moving; the
    # subset path only engages when it saves real work (large quiet regions)
    act = None  # None: all cells
    scratch = np.empty_like(q)
    with np.errstate(all="ignore"):
        for it in range(max_iters):
            full = act is None
            qa = q if full else q[:, act]
            wa = w_b if full else w_b[:, act]
            dvec = dxa if full else [s[act] for s in dxa]
            fluxes = sys.flux_all(qa, range(d))
            # accumulate the per-direction divergences, then apply the time
            # operator once (it commutes with the spatial contractions)
            acc = None
            for a in range(d):
                ax = qa.ndim - 1 - a  # x is last, y second-to-last
                contrib = axdot(table.pred_deriv, fluxes[a], ax)
                contrib *= (dt / _cell_shape(dvec[a], qa.ndim))
                acc = contrib if acc is None else acc + contrib
            if sys.has_source:
                acc -= dt * sys.source(qa)
            q_new = scratch if full else np.empty_like(qa)
            np.copyto(q_new, np.broadcast_to(wa, qa.shape))
            q_new -= axdot(t_op, acc, TIME_AXIS)
            # cold starts can't meet the tolerance before ~M sweeps; warm
            # starts may converge immediately
            check = it >= M - 1 or warm or track is not None
            if check:
                np.subtract(qa, q_new, out=qa)
                np.abs(qa, out=qa)
                delta_cell = qa.max(axis=cell_axes_of(qa))
            if full:
                q, scratch = q_new, q
            else:
                q[:, act] = q_new
            if not check:
                continue
            if track is not None:
                track.append(float(delta_cell.max()) if delta_cell.size else 0.0)
            conv = (delta_cell <= thresh) & np.isfinite(delta_cell)
            if it + 1 >= max_iters:
                break
            if full:
                if conv.sum() > 0.5 * C:
                    act = np.nonzero(~conv)[0]
            else:
                act = act[~conv]
            if act is not None and act.size == 0:
                break

    finite = np.isfinite(q)
    failed = ~finite.all(axis=tuple(i for i in range(q.ndim) if i != 1))
    if np.any(failed):
        q[:, failed] = q0[:, failed]
    return q, failed


def predict_with_fluxes(table, sys, w, dx, dt, tol: float = 1e-9, q_init=None):
    """predict() plus the fluxes of the converged q (reused by the corrector)."""
    q, failed = predict(table, sys, w, dx, dt, tol=tol, q_init=q_init)
    with np.errstate(all="ignore"):
        fluxes = sys.flux_all(q, range(table.d))
    return q, failed, fluxes


def boundary_trace(table: OperatorTable, q: np.ndarray, direction: int,
                   side: int) -> np.ndarray:
    """Trace of q_h on a face: contract the `direction` node axis with the
    face vector (side 0 -> xi=0, side 1 -> xi=1).

    Returns shape (m, C, nt[, n_transverse]); for d=2 and direction=x the
    transverse axis is y, and vice versa.
    """
    vec = table.face_trace_right if side == 1 else table.face_trace_left
    ax = q.ndim - 1 - direction
    if ax == q.ndim - 1:
        return q @ vec
    if ax == q.ndim - 2:
        return np.matmul(vec, q)
    return np.tensordot(q, vec, axes=([ax], [0]))


def _cell_shape(s, ndim: int):
    """Broadcast a per-cell scalar array over the node axes."""
    arr = np.asarray(s, dtype=float)
    if arr.ndim == 0:
        return arr
    shape = [1] * ndim
    shape[1] = arr.size
    return arr.reshape(shape)
