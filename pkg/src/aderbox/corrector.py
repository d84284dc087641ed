"""One-step corrector ingredients: numerical fluxes, CFL table, update integrals.

The fully discrete update is assembled by the step driver from the pieces
here: Riemann fluxes evaluated on boundary-extrapolated space-time traces,
the time-integrated face records, and the volume/source integrals contracted
against the degree-N test functions.  All functions are batched with the
component axis first.
"""

from __future__ import annotations

import logging

import numpy as np

from .operators import OperatorTable, axdot
from .systems.base import HyperbolicSystem

log = logging.getLogger(__name__)

# Maximum admissible CFL numbers per data degree N; the stability limit
# depends on N only, not on the reconstruction degree M.
CFL_TABLE = {0: 1.0, 1: 0.33, 2: 0.17, 3: 0.1, 4: 0.069, 5: 0.045, 6: 0.038}


def cfl_max(N: int) -> float:
    return CFL_TABLE[N]


def compute_dt(h_min: float, lam_max: float, N: int, d: int, cfl_user: float,
               dt_max: float | None = None) -> float:
    """Global timestep from the CFL condition dt = cfl * CFL_N * (h/d) / lam."""
    if not 0.0 < cfl_user <= 1.0:
        raise ValueError("cfl_user must lie in (0, 1]")
    if lam_max <= 0.0:
        if dt_max is None:
            raise ValueError("lam_max = 0 requires a configured dt_max")
        return dt_max
    dt = cfl_user * cfl_max(N) * (h_min / d) / lam_max
    return dt if dt_max is None else min(dt, dt_max)


# ---------------------------------------------------------------------------
# Riemann fluxes.  qL/qR are (m, ...) states on the two sides of a face whose
# outward normal (from L to R) points along +direction.
# ---------------------------------------------------------------------------

def rusanov_flux(sys: HyperbolicSystem, qL, qR, direction: int) -> np.ndarray:
    fL, sL = sys.flux_signal(qL, direction)
    fR, sR = sys.flux_signal(qR, direction)
    smax = np.maximum(sL, sR)
    return 0.5 * (fL + fR) - 0.5 * smax * (np.asarray(qR) - np.asarray(qL))


def hll_flux(sys: HyperbolicSystem, qL, qR, direction: int) -> np.ndarray:
    fL = sys.flux(qL, direction)
    fR = sys.flux(qR, direction)
    lminL, lmaxL = sys.signal_range(qL, direction)
    lminR, lmaxR = sys.signal_range(qR, direction)
    sL = np.minimum(lminL, lminR)
    sR = np.maximum(lmaxL, lmaxR)
    return _hll_combine(fL, fR, qL, qR, sL, sR)


def _hll_combine(fL, fR, qL, qR, sL, sR):
    with np.errstate(all="ignore"):
        mid = (sR * fL - sL * fR + sL * sR * (np.asarray(qR) - np.asarray(qL))) / (sR - sL)
    out = np.where(sL >= 0.0, fL, np.where(sR <= 0.0, fR, mid))
    return out


_warned_rmhd_hllem = False


def hllem_flux(sys: HyperbolicSystem, qL, qR, direction: int,
               theta: float = 1.0) -> np.ndarray:
    """HLL plus an anti-diffusive correction for the entropy/contact wave.

    The correction removes the HLL mass diffusion across contacts (density
    jump at continuous velocity and pressure); theta = 0 recovers HLL exactly.
    For RMHD no middle-wave eigenstructure is implemented: falls back to HLL.
    """
    global _warned_rmhd_hllem
    if sys.kind == "rmhd":
        if not _warned_rmhd_hllem:
            log.warning("hllem: RMHD middle-wave correction unavailable, using HLL")
            _warned_rmhd_hllem = True
        return hll_flux(sys, qL, qR, direction)
    if sys.kind not in ("euler", "mhd"):
        return hll_flux(sys, qL, qR, direction)

    fL = sys.flux(qL, direction)
    fR = sys.flux(qR, direction)
    lminL, lmaxL = sys.signal_range(qL, direction)
    lminR, lmaxR = sys.signal_range(qR, direction)
    sL = np.minimum(lminL, lminR)
    sR = np.maximum(lmaxL, lmaxR)
    flux = _hll_combine(fL, fR, qL, qR, sL, sR)
    if theta == 0.0:
        return flux

    VL, _ = sys.primitives(np.asarray(qL, dtype=float))
    VR, _ = sys.primitives(np.asarray(qR, dtype=float))
    Vb = 0.5 * (VL + VR)
    rho_b, p_b = Vb[0], Vb[4]
    with np.errstate(all="ignore"):
        c2 = sys.gamma * p_b / rho_b
        lam_star = Vb[1 + direction]
        delta = np.where(
            lam_star < 0.0,
            1.0 - lam_star / np.where(sL < 0, sL, -np.inf),
            1.0 - lam_star / np.where(sR > 0, sR, np.inf),
        )
        delta = np.clip(delta, 0.0, 1.0)
        # contact strength: density jump with the acoustic part removed
        alpha = (VR[0] - VL[0]) - (VR[4] - VL[4]) / c2
    rc = np.zeros_like(fL)
    vb2 = Vb[1] ** 2 + Vb[2] ** 2 + Vb[3] ** 2
    rc[0] = 1.0
    rc[1], rc[2], rc[3] = Vb[1], Vb[2], Vb[3]
    rc[4] = 0.5 * vb2
    with np.errstate(all="ignore"):
        corr = -(sL * sR) / (sR - sL) * theta * delta * alpha * rc
    middle = (sL < 0.0) & (sR > 0.0)
    return np.where(middle, flux + np.where(np.isfinite(corr), corr, 0.0), flux)


FLUXES = {"rusanov": rusanov_flux, "hll": hll_flux, "hllem": hllem_flux}


def numerical_flux(name: str):
    try:
        return FLUXES[name.lower()]
    except KeyError:
        raise ValueError(f"unknown flux {name!r}; choose from {sorted(FLUXES)}")


# ---------------------------------------------------------------------------
# Corrector integrals (raw, undivided by the mass matrix).
# ---------------------------------------------------------------------------

def volume_integral(table: OperatorTable, sys: HyperbolicSystem, q: np.ndarray,
                    dxs, dt: float, fluxes=None) -> np.ndarray:
    """int int grad(phi_k) . F(q_h) dx dt on each cell, shape (m, C, [nN]*d).

    dxs lists per-axis cell sizes (scalars or (C,) arrays); the integral
    carries the full physical scaling (cell volume x dt over the gradient
    axis), so dividing by the diagonal mass matrix yields the update term.
    """
    d = table.d
    wt = table.basis_M.weights
    out = None
    vol = _cell_volume(dxs, q.ndim - 1)
    if fluxes is None:
        fluxes = sys.flux_all(q, range(d))
    for a in range(d):
        ax_q = q.ndim - 1 - a
        tint = np.tensordot(fluxes[a], wt, axes=([2], [0])) * dt  # integrate time
        # re-ordered: axes now (m, C, [space nodes])
        term = axdot(table.gmix, tint, ax_q - 1)
        for b in range(d):
            if b == a:
                continue
            term = axdot(table.hmix, term, q.ndim - 2 - b)
        scale = vol / np.asarray(dxs[a], dtype=float)
        out = term * _bcast(scale, term.ndim) if out is None else \
            out + term * _bcast(scale, term.ndim)
    return out


def source_integral(table: OperatorTable, sys: HyperbolicSystem, q: np.ndarray,
                    dxs, dt: float) -> np.ndarray:
    """int int phi_k . S(q_h) dx dt, same conventions as volume_integral."""
    wt = table.basis_M.weights
    s = sys.source(q)
    tint = np.tensordot(s, wt, axes=([2], [0])) * dt
    term = tint
    for b in range(table.d):
        term = axdot(table.hmix, term, term.ndim - 1 - b)
    vol = _cell_volume(dxs, q.ndim - 1)
    return term * _bcast(vol, term.ndim)


def _cell_volume(dxs, ndim_unused):
    vol = None
    for s in dxs:
        arr = np.asarray(s, dtype=float)
        vol = arr if vol is None else vol * arr
    return vol


def _bcast(arr, ndim):
    arr = np.asarray(arr, dtype=float)
    if arr.ndim == 0:
        return arr
    shape = [1] * ndim
    shape[1] = arr.size
    return arr.reshape(shape)
