"""Special relativistic MHD with GLM divergence cleaning (units with c = 1).

Conserved vector (D, S_x, S_y, S_z, U, B_x, B_y, B_z, Phi) with

    D = rho W,   S = rho h W^2 v + E x B,   U = rho h W^2 - p + (E^2 + B^2)/2,

E = -v x B, Lorentz factor W = (1 - v^2)^(-1/2) and ideal-gas enthalpy
h = 1 + gamma/(gamma-1) p/rho.  The cleaning field obeys
d_t Phi + div B = -kappa Phi, and the magnetic flux carries the Phi term.

The conservative-to-primitive inversion is a safeguarded 1D Newton iteration
on xi = rho h W^2 with a 1e-12 pressure-residual tolerance; non-convergent or
acausal slots surface as NaN + False in the validity mask.
"""

from __future__ import annotations

import numpy as np

from .base import POSITIVITY_TOL, HyperbolicSystem, InadmissibleStateError

_MAX_NEWTON = 200
_P_TOL = 1e-12


class RelativisticMHD(HyperbolicSystem):
    kind = "rmhd"
    m = 9
    has_source = True
    prim_names = ("rho", "vx", "vy", "vz", "p", "Bx", "By", "Bz", "phi")

    def __init__(self, gamma: float, ch: float = 1.0, kappa: float = 0.0,
                 sharp_speeds: bool = False):
        super().__init__(gamma, ch, kappa)
        if self.ch > 1.0:
            raise ValueError("RMHD cleaning speed must respect causality (ch <= 1)")
        self.sharp_speeds = sharp_speeds

    # -- conversions ---------------------------------------------------------
    def prim2cons(self, V):
        V = np.asarray(V, dtype=float)
        rho, p = V[0], V[4]
        vel = V[1:4]
        B = V[5:8]
        v2 = vel[0] ** 2 + vel[1] ** 2 + vel[2] ** 2
        if np.any(rho <= 0) or np.any(p <= 0) or np.any(v2 >= 1.0):
            raise InadmissibleStateError("rmhd: primitive state violates rho,p>0, v^2<1")
        W2 = 1.0 / (1.0 - v2)
        xi = (rho + self.gamma / (self.gamma - 1.0) * p) * W2  # rho h W^2
        E = -np.cross(vel, B, axis=0)
        ExB = np.cross(E, B, axis=0)
        E2B2 = np.sum(E * E + B * B, axis=0)
        Q = np.empty_like(V)
        Q[0] = rho * np.sqrt(W2)
        Q[1:4] = xi * vel + ExB
        Q[4] = xi - p + 0.5 * E2B2
        Q[5:8] = B
        Q[8] = V[8]
        return Q

    def _invert(self, D, s2, sb, b2, U, p_guess=None):
        """Newton on xi = rho h W^2; returns (xi, v2, p, converged)."""
        gm = (self.gamma - 1.0) / self.gamma
        if p_guess is None:
            p_guess = np.maximum(1e-8, U - D)
        lo = np.maximum((1.0 + 1e-12) * D, 1e-300)
        xi = np.maximum(U + p_guess - 0.5 * b2, lo)
        p_old = np.full_like(xi, np.inf)
        done = np.zeros(xi.shape, dtype=bool)
        idx = np.arange(xi.size).reshape(xi.shape)

        flat = lambda a: a.reshape(-1)
        xi_f = flat(xi).copy()
        done_f = flat(done).copy()
        p_f = np.zeros_like(xi_f)
        v2_f = np.zeros_like(xi_f)
        D_f, s2_f, sb_f, b2_f, U_f = map(flat, (D, s2, sb, b2, U))
        lo_f = flat(lo)
        pold_f = flat(p_old).copy()

        act = np.arange(xi_f.size)
        for _ in range(_MAX_NEWTON):
            if act.size == 0:
                break
            x = xi_f[act]
            d, ss, sB, bb, u = D_f[act], s2_f[act], sb_f[act], b2_f[act], U_f[act]
            with np.errstate(all="ignore"):
                num = ss * x * x + sB * sB * (2.0 * x + bb)
                den = x * x * (x + bb) ** 2
                v2 = np.clip(num / den, 0.0, 1.0 - 1e-16)
                om = 1.0 - v2
                sq = np.sqrt(om)
                p = gm * (x * om - d * sq)
                dnum = 2.0 * ss * x + 2.0 * sB * sB
                dden = 2.0 * x * (x + bb) * (2.0 * x + bb)
                dv2 = (dnum * den - num * dden) / (den * den)
                dp = gm * (om - x * dv2 + 0.5 * d * dv2 / np.maximum(sq, 1e-300))
                f = x - p + 0.5 * (bb * (1.0 + v2) - sB * sB / (x * x)) - u
                df = 1.0 - dp + 0.5 * (bb * dv2 + 2.0 * sB * sB / x**3)
                step = f / df
            xnew = x - step
            # safeguards: stay above the causal floor, damp wild steps
            bad = ~np.isfinite(xnew)
            xnew[bad] = 2.0 * x[bad]
            xnew = np.clip(xnew, 0.5 * x, 2.0 * x)
            xnew = np.maximum(xnew, lo_f[act])
            p_f[act] = p
            v2_f[act] = v2
            conv = np.abs(p - pold_f[act]) <= _P_TOL * (1.0 + np.abs(p))
            pold_f[act] = p
            xi_f[act] = xnew
            done_f[act[conv]] = True
            act = act[~conv]

        # final evaluation at the converged xi
        with np.errstate(all="ignore"):
            x = xi_f
            num = s2_f * x * x + sb_f * sb_f * (2.0 * x + b2_f)
            den = x * x * (x + b2_f) ** 2
            v2 = num / den
            p = gm * (x * (1.0 - np.clip(v2, 0.0, 1.0)) -
                      D_f * np.sqrt(np.clip(1.0 - v2, 0.0, None)))
        shape = D.shape
        return (x.reshape(shape), v2.reshape(shape), p.reshape(shape),
                done_f.reshape(shape))

    def primitives(self, Q, p_guess=None):
        Q = np.asarray(Q, dtype=float)
        D = Q[0]
        S = Q[1:4]
        U = Q[4]
        B = Q[5:8]
        s2 = S[0] ** 2 + S[1] ** 2 + S[2] ** 2
        sb = S[0] * B[0] + S[1] * B[1] + S[2] * B[2]
        b2 = B[0] ** 2 + B[1] ** 2 + B[2] ** 2
        with np.errstate(all="ignore"):
            xi, v2, p, conv = self._invert(D, s2, sb, b2, U, p_guess)
            ok = (
                conv
                & np.all(np.isfinite(Q), axis=0)
                & np.isfinite(p)
                & (v2 < 1.0)
                & (p > POSITIVITY_TOL)
            )
            W = 1.0 / np.sqrt(np.clip(1.0 - v2, 1e-300, None))
            rho = D / W
            ok &= rho > POSITIVITY_TOL
            # v = (S - (S.B) B / xi) / (xi + b2)
            inv = 1.0 / (xi + b2)
            V = np.empty_like(Q)
            V[0] = rho
            for j in range(3):
                V[1 + j] = (S[j] + sb * B[j] / xi) * inv
            V[4] = p
            V[5:8] = B
            V[8] = Q[8]
        bad = ~ok
        if V.ndim == 1:
            if bad:
                V[:] = np.nan
        elif np.any(bad):
            V[:, bad] = np.nan
        return V, ok

    # -- physics -------------------------------------------------------------
    def flux(self, Q, direction):
        Q = np.asarray(Q, dtype=float)
        V, _ = self.primitives(Q)
        return self._flux_from_prim(Q, V, direction)

    def flux_all(self, Q, dirs):
        Q = np.asarray(Q, dtype=float)
        V, _ = self.primitives(Q)
        return [self._flux_from_prim(Q, V, a) for a in dirs]

    def _flux_from_prim(self, Q, V, direction):
        rho, p = V[0], V[4]
        vel = V[1:4]
        B = Q[5:8]
        phi = Q[8]
        v2 = vel[0] ** 2 + vel[1] ** 2 + vel[2] ** 2
        with np.errstate(all="ignore"):
            W2 = 1.0 / (1.0 - v2)
            xi = (rho + self.gamma / (self.gamma - 1.0) * p) * W2
        E = -np.cross(vel, B, axis=0)
        ExB = np.cross(E, B, axis=0)
        ptot = p + 0.5 * np.sum(E * E + B * B, axis=0)
        vn = vel[direction]
        Bn = B[direction]
        En = E[direction]
        F = np.empty_like(Q)
        F[0] = Q[0] * vn
        for j in range(3):
            F[1 + j] = xi * vn * vel[j] - En * E[j] - Bn * B[j]
            F[5 + j] = vn * B[j] - vel[j] * Bn
        F[1 + direction] += ptot
        F[4] = xi * vn + ExB[direction]  # = S_n, the conserved momentum component
        F[5 + direction] += phi
        F[8] = Bn
        return F

    def flux_signal(self, Q, direction):
        Q = np.asarray(Q, dtype=float)
        F = self.flux(Q, direction)
        return F, self.max_signal(Q, direction)

    def source(self, Q):
        Q = np.asarray(Q, dtype=float)
        S = np.zeros_like(Q)
        if self.kappa > 0.0:
            S[8] = -self.kappa * Q[8]
        return S

    def _sharp_signal(self, Q, direction):
        """Approximate fast-speed bound (degenerate-direction formula)."""
        V, ok = self.primitives(Q)
        rho, p = V[0], V[4]
        vel = V[1:4]
        B = Q[5:8]
        v2 = np.clip(vel[0] ** 2 + vel[1] ** 2 + vel[2] ** 2, 0.0, 1.0 - 1e-16)
        with np.errstate(all="ignore"):
            h = 1.0 + self.gamma / (self.gamma - 1.0) * p / rho
            cs2 = self.gamma * p / (rho * h)
            vdotB = vel[0] * B[0] + vel[1] * B[1] + vel[2] * B[2]
            b2com = np.sum(B * B, axis=0) * (1.0 - v2) + vdotB**2
            va2 = b2com / (rho * h + b2com)
            a2 = np.clip(cs2 + va2 - cs2 * va2, 0.0, 1.0)
            vn = vel[direction]
            disc = np.sqrt(np.maximum(
                a2 * (1.0 - v2) * (1.0 - v2 * a2 - vn * vn * (1.0 - a2)), 0.0))
            denom = 1.0 - v2 * a2
            lam_m = (vn * (1.0 - a2) - disc) / denom
            lam_p = (vn * (1.0 - a2) + disc) / denom
        lam_m = np.where(ok, lam_m, -1.0)
        lam_p = np.where(ok, lam_p, 1.0)
        return np.clip(lam_m, -1.0, 1.0), np.clip(lam_p, -1.0, 1.0)

    def max_signal(self, Q, direction):
        Q = np.asarray(Q, dtype=float)
        shape = Q.shape[1:]
        if self.sharp_speeds:
            lam_m, lam_p = self._sharp_signal(Q, direction)
            lam = np.maximum(np.abs(lam_m), np.abs(lam_p))
            return np.maximum(lam, self.ch)
        # causality cap: always a valid bound, and >= ch since ch <= 1
        return np.ones(shape)

    def signal_range(self, Q, direction):
        Q = np.asarray(Q, dtype=float)
        shape = Q.shape[1:]
        if self.sharp_speeds:
            lam_m, lam_p = self._sharp_signal(Q, direction)
            return (np.minimum(lam_m, -self.ch), np.maximum(lam_p, self.ch))
        return -np.ones(shape), np.ones(shape)

    def wall_flip(self, direction):
        s = np.ones(self.m)
        s[1 + direction] = -1.0
        s[5 + direction] = -1.0
        return s

    @property
    def conserved_audit_mask(self):
        mask = np.ones(self.m, dtype=bool)
        if self.kappa > 0.0:
            mask[8] = False
        return mask
