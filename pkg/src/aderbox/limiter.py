"""A-posteriori subcell finite volume limiter.

Pipeline per step (invoked by the step loop): project the candidate solution
onto (2N+1)^d subcell averages, test physical admissibility and the relaxed
discrete maximum principle against the node-neighborhood history, then
recompute rejected cells on their subgrid with a MUSCL-Hancock TVD scheme or
a third-order ADER-WENO scheme, recombine to degree N under the exact-mean
constraint, and hand the subcell face fluxes to the flux ledger so neighbors
stay conservative.

Subcell arrays are batched over the troubled set with shape
(m, T, [S + 2*HALO]^d), S = 2N+1; the owned block sits at [HALO:HALO+S] per
axis and the solvers advance the "inner" region (one extra layer) so that all
S+1 faces per axis of the owned block get fluxes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corrector import rusanov_flux
from .operators import OperatorTable, axdot, build_operator_tables
from .predictor import boundary_trace, predict
from .recon import WenoConfig

DMP_DELTA0 = 1e-5
DMP_EPS = 1e-4
HALO = 2

CAUSE_NONE = 0
CAUSE_PHYSICAL = 1
CAUSE_DMP = 2
CAUSE_PREDICTOR = 3
CAUSE_NAMES = {0: "none", 1: "physical", 2: "dmp", 3: "predictor_failure"}


def project_to_subcells(table: OperatorTable, u: np.ndarray) -> np.ndarray:
    """L2 projection of degree-N dof onto the (2N+1)^d subcell averages."""
    v = u
    for a in range(table.d):
        v = axdot(table.subcell_project, v, v.ndim - 1 - a)
    return v


def recombine(table: OperatorTable, v: np.ndarray) -> np.ndarray:
    """Constrained least-squares recovery of degree-N dof from subcell averages.

    Dimension-by-dimension; exact on the image of the projection and exactly
    mean-preserving (the conservation constraint holds per axis).
    """
    u = v
    for a in range(table.d):
        u = axdot(table.subcell_recon, u, u.ndim - 1 - a)
    return u


def subcell_slot_matrices(table: OperatorTable):
    """Per-slot AMR transfer matrices acting directly on subcell averages.

    Piecewise-constant overlap averaging: every row is a convex combination,
    so admissible averages stay admissible across level transfers (a
    polynomial round-trip would overshoot near strong fronts).  Constants and
    totals are preserved exactly.
    """
    S = table.n_sub
    r = table.r
    proj = []
    gath = []
    for slot in range(r):
        P = np.zeros((S, S))
        G = np.zeros((S, S))
        for j in range(S):  # child subcell j inside this slot, parent frame
            lo, hi = (slot + j / S) / r, (slot + (j + 1) / S) / r
            for k in range(S):  # parent subcell k
                ov = min(hi, (k + 1) / S) - max(lo, k / S)
                if ov > 0:
                    P[j, k] = ov / (hi - lo)
                    G[k, j] = ov * S
        proj.append(P)
        gath.append(G)
    return proj, gath


@dataclass
class DetectionReport:
    troubled: np.ndarray  # bool per active cell
    cause: np.ndarray  # int8 per active cell
    lo: np.ndarray  # per-component DMP bounds used, (m, C)
    hi: np.ndarray


def detect(sys, v_star: np.ndarray, lo: np.ndarray, hi: np.ndarray,
           predictor_failed: np.ndarray | None = None) -> DetectionReport:
    """Flag troubled cells from candidate subcell averages.

    A cell is troubled when any subcell average is physically inadmissible or
    any conserved component leaves [lo - delta, hi + delta], with delta the
    relaxed-DMP margin built from the neighborhood range.
    """
    m, C = v_star.shape[:2]
    flat = v_star.reshape(m, C, -1)
    ok_phys = sys.admissible(flat).all(axis=-1)
    delta = np.maximum(DMP_DELTA0, DMP_EPS * (hi - lo))
    vmin = flat.min(axis=-1)
    vmax = flat.max(axis=-1)
    ok_dmp = np.all((vmin >= lo - delta) & (vmax <= hi + delta), axis=0)

    cause = np.zeros(C, dtype=np.int8)
    cause[~ok_dmp] = CAUSE_DMP
    cause[~ok_phys] = CAUSE_PHYSICAL
    if predictor_failed is not None:
        cause[predictor_failed] = CAUSE_PREDICTOR
    return DetectionReport(troubled=cause != CAUSE_NONE, cause=cause, lo=lo, hi=hi)


# ---------------------------------------------------------------------------
# Slicing helpers: spatial axis a maps to array axis (ndim - 1 - a), x last.
# ---------------------------------------------------------------------------

def _ax(arr, a):
    return arr.ndim - 1 - a


def _sl(arr, a, lo, hi):
    """arr[..., lo:hi, ...] along spatial axis a (hi=None for end)."""
    sl = [slice(None)] * arr.ndim
    sl[_ax(arr, a)] = slice(lo, hi)
    return arr[tuple(sl)]


def _at(arr, a, k):
    sl = [slice(None)] * arr.ndim
    sl[_ax(arr, a)] = k
    return arr[tuple(sl)]


def _inner(ext, d):
    """Drop the outermost halo layer on every spatial axis."""
    out = ext
    for a in range(d):
        out = _sl(out, a, 1, -1)
    return out


def _own(arr, d, pad):
    out = arr
    for a in range(d):
        out = _sl(out, a, pad, -pad if pad else None)
    return out


def minmod(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.where(a * b <= 0.0, 0.0, np.where(np.abs(a) < np.abs(b), a, b))


# ---------------------------------------------------------------------------
# MUSCL-Hancock TVD subcell solver
# ---------------------------------------------------------------------------

def muscl_hancock_step(sys, ext: np.ndarray, d: int, h, dt: float):
    """One full-dt MUSCL-Hancock step on the halo-extended subcell block.

    Returns (v_new, bflux, ok): v_new are the owned averages at t^{n+1};
    bflux[(a, side)] holds the time-integrated face-averaged fluxes on the
    owned block's boundary faces (positive along +a); ok flags batch entries
    whose final averages are admissible (first-order fallback already done).
    """
    hb = [np.asarray(h[a], dtype=float).reshape((1, -1) + (1,) * d) for a in range(d)]
    inner = _inner(ext, d)
    slopes = []
    for a in range(d):
        # shifted views cropped to the inner region
        plus = ext
        minus = ext
        for b in range(d):
            if b == a:
                plus = _sl(plus, b, 2, None)
                minus = _sl(minus, b, 0, -2)
            else:
                plus = _sl(plus, b, 1, -1)
                minus = _sl(minus, b, 1, -1)
        slopes.append(minmod(inner - minus, plus - inner))

    with np.errstate(all="ignore"):
        for attempt in (0, 1):
            half = inner.copy()
            for a in range(d):
                fp = sys.flux(inner + 0.5 * slopes[a], a)
                fm = sys.flux(inner - 0.5 * slopes[a], a)
                half = half - (0.5 * dt / hb[a]) * (fp - fm)
            if sys.has_source:
                half = half + 0.5 * dt * sys.source(inner)
            bad = ~(np.isfinite(half).all(axis=0) & sys.admissible(half))
            if not bad.any() or attempt == 1:
                break
            for a in range(d):
                slopes[a] = np.where(bad[None], 0.0, slopes[a])

        v_new = _own(inner, d, HALO - 1).copy()
        bflux = {}
        for a in range(d):
            qp = half + 0.5 * slopes[a]  # state at the +a face of each cell
            qm = half - 0.5 * slopes[a]  # state at the -a face
            F = rusanov_flux(sys, _sl(qp, a, 0, -1), _sl(qm, a, 1, None), a)
            for b in range(d):
                if b != a:
                    F = _sl(F, b, HALO - 1, -(HALO - 1))
            dF = _sl(F, a, 1, None) - _sl(F, a, 0, -1)
            v_new = v_new - (dt / hb[a]) * dF
            bflux[(a, 0)] = dt * _at(F, a, 0)
            bflux[(a, 1)] = dt * _at(F, a, -1)
        if sys.has_source:
            v_new = v_new + dt * sys.source(_own(half, d, HALO - 1))
    ok = np.isfinite(v_new).all(axis=0) & sys.admissible(v_new)
    ok = ok.reshape(ok.shape[0], -1).all(axis=-1)
    return v_new, bflux, ok


# ---------------------------------------------------------------------------
# ADER-WENO (third order) subcell solver
# ---------------------------------------------------------------------------

def _weno_sweep_cells(mini: OperatorTable, cfg: WenoConfig, data: np.ndarray,
                      cells_axis: int, n_cells: int):
    """WENO-reconstruct along a cell-index axis; appends the node axis last.

    data carries cell values along `cells_axis` (length n_cells + 2 halo
    layers); the target cells are indices 1..n_cells.  Windows that would
    leave the available range are masked out of the nonlinear combination
    (they carry clamped-copy data that must not contribute).
    """
    w = mini.weno
    hw = w.halfwidth
    n_avail = data.shape[cells_axis]
    targets = np.arange(1, 1 + n_cells)
    shifted = [
        np.take(data, np.clip(targets + o, 0, n_avail - 1), axis=cells_axis)
        for o in range(-hw, hw + 1)
    ]
    stacked = np.stack(shifted, axis=-1)
    out = None
    wsum = None
    for k, (off, G) in enumerate(zip(w.offsets, w.matrices)):
        win = stacked[..., off + hw:off + hw + mini.M + 1]
        cand = np.tensordot(win, G, axes=([win.ndim - 1], [1]))
        sigma = np.einsum("...a,ab,...b->...", cand, w.osc, cand)
        valid = (targets + off >= 0) & (targets + off + mini.M <= n_avail - 1)
        shape = [1] * sigma.ndim
        shape[cells_axis] = n_cells
        lam = cfg.lambda_central if k == w.central else cfg.lambda_side
        om = lam / (sigma + cfg.epsilon) ** cfg.r_exponent
        om = om * valid.reshape(shape)
        term = om[..., None] * cand
        out = term if out is None else out + term
        wsum = om if wsum is None else wsum + om
    return out / wsum[..., None]


def _weno_nodal(mini: OperatorTable, cfg: WenoConfig, ext: np.ndarray, d: int):
    """Per-subcell degree-2 nodal tensors for the inner region.

    Output (m, T, nin, 3) for d=1 or (m, T, nin_y, nin_x, 3y, 3x) for d=2,
    where nin = n_ext - 2 covers the owned block plus one layer.
    """
    n_ext = ext.shape[-1]
    nin = n_ext - 2
    # x sweep over all rows; appends the x node axis
    wx = _weno_sweep_cells(mini, cfg, ext, ext.ndim - 1, nin)
    if d == 1:
        return wx
    # y sweep over the x-reconstructed sections; appends the y node axis
    wxy = _weno_sweep_cells(mini, cfg, wx, 2, nin)
    # (m, T, nin_y, nin_x, 3x, 3y) -> (m, T, nin_y, nin_x, 3y, 3x)
    return np.swapaxes(wxy, -1, -2)


def ader_weno_step(sys, ext: np.ndarray, d: int, h, dt: float):
    """Third-order ADER-WENO FV step on the subgrid (N=0, M=2 machinery).

    Same contract as muscl_hancock_step; batch entries whose result is
    inadmissible report ok=False so the caller can fall back to the TVD path.
    """
    mini = build_operator_tables(0, 2, d=d, r=2)
    cfg = WenoConfig()
    nin = ext.shape[-1] - 2
    T = ext.shape[1]
    nodal = _weno_nodal(mini, cfg, ext, d)
    # inadmissible nodal reconstructions drop to the constant average
    inner = _inner(ext, d)
    with np.errstate(all="ignore"):
        flatn = nodal.reshape(nodal.shape[:nodal.ndim - d] + (-1,))
        good = sys.admissible(flatn).all(axis=-1)
    if not good.all():
        const = inner.reshape(inner.shape + (1,) * d)
        nodal = np.where(good.reshape(good.shape + (1,) * d), nodal, const)

    # batch the inner subcells for the space-time predictor
    if d == 1:
        w = nodal.reshape(nodal.shape[0], T * nin, 3)
        dxs = (np.repeat(np.asarray(h[0], dtype=float), nin),)
    else:
        w = nodal.reshape(nodal.shape[0], T * nin * nin, 3, 3)
        dxs = (
            np.repeat(np.asarray(h[0], dtype=float), nin * nin),
            np.repeat(np.asarray(h[1], dtype=float), nin * nin),
        )
    with np.errstate(all="ignore"):
        q, failed = predict(mini, sys, w, dxs, dt)
        wt = mini.basis_M.weights

        def face_avg(tr):
            # tr: (m, B, nt[, ntrans]) -> reference average over time (x face)
            out = np.tensordot(tr, wt, axes=([2], [0]))
            if d == 2:
                out = np.tensordot(out, wt, axes=([2], [0]))
            return out

        v_new = _own(_inner(ext, d), d, HALO - 1).copy()
        bflux = {}
        for a in range(d):
            trL = face_avg(boundary_trace(mini, q, a, 0))
            trR = face_avg(boundary_trace(mini, q, a, 1))
            if d == 1:
                trL = trL.reshape(-1, T, nin)
                trR = trR.reshape(-1, T, nin)
            else:
                trL = trL.reshape(-1, T, nin, nin)
                trR = trR.reshape(-1, T, nin, nin)
            # Riemann states at interior faces along a
            qL = _sl(trR, a, 0, -1)
            qR = _sl(trL, a, 1, None)
            F = rusanov_flux(sys, qL, qR, a)
            for b in range(d):
                if b != a:
                    F = _sl(F, b, HALO - 1, -(HALO - 1))
            dF = _sl(F, a, 1, None) - _sl(F, a, 0, -1)
            hba = np.asarray(h[a], dtype=float).reshape((1, -1) + (1,) * d)
            v_new = v_new - (dt / hba) * dF
            bflux[(a, 0)] = dt * _at(F, a, 0)
            bflux[(a, 1)] = dt * _at(F, a, -1)
        if sys.has_source:
            # collocated space-time source average
            s = sys.source(q)
            for _ in range(d + 1):
                s = np.tensordot(s, wt, axes=([2], [0]))
            if d == 1:
                s = s.reshape(-1, T, nin)
            else:
                s = s.reshape(-1, T, nin, nin)
            v_new = v_new + dt * _own(s, d, HALO - 1)
    ok = np.isfinite(v_new).all(axis=0) & sys.admissible(v_new)
    ok = ok.reshape(ok.shape[0], -1).all(axis=-1)
    if d == 1:
        fail_cells = failed.reshape(T, nin).any(axis=1)
    else:
        fail_cells = failed.reshape(T, nin, nin).reshape(T, -1).any(axis=1)
    return v_new, bflux, ok & ~fail_cells
