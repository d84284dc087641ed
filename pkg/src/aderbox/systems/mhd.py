"""Ideal MHD with hyperbolic (GLM) divergence cleaning, in Gaussian units.

Conserved vector (rho, rho*v (3), rho*E, B (3), psi).  The magnetic terms
carry the Gaussian 1/(4 pi) and 1/(8 pi) factors; benchmark dictionaries with
mu = sqrt(4 pi) only balance in these units.  The psi equation is pure
transport at the cleaning speed c_h (no damping term).
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .base import POSITIVITY_TOL, HyperbolicSystem, InadmissibleStateError

FOURPI = 4.0 * np.pi
EIGHTPI = 8.0 * np.pi


class IdealMHD(HyperbolicSystem):
    kind = "mhd"
    m = 9
    prim_names = ("rho", "u", "v", "w", "p", "Bx", "By", "Bz", "psi")

    def prim2cons(self, V):
        V = np.asarray(V, dtype=float)
        rho, u, v, w, p = V[:5]
        if np.any(rho <= 0) or np.any(p <= 0):
            raise InadmissibleStateError("mhd: primitive state needs rho, p > 0")
        B2 = V[5] ** 2 + V[6] ** 2 + V[7] ** 2
        Q = np.empty_like(V)
        Q[0] = rho
        Q[1] = rho * u
        Q[2] = rho * v
        Q[3] = rho * w
        Q[4] = p / (self.gamma - 1.0) + 0.5 * rho * (u * u + v * v + w * w) + B2 / EIGHTPI
        Q[5:9] = V[5:9]
        return Q

    def primitives(self, Q):
        Q = np.asarray(Q, dtype=float)
        rho = Q[0]
        with np.errstate(all="ignore"):
            inv = 1.0 / rho
            u, v, w = Q[1] * inv, Q[2] * inv, Q[3] * inv
            B2 = Q[5] ** 2 + Q[6] ** 2 + Q[7] ** 2
            p = (self.gamma - 1.0) * (
                Q[4] - 0.5 * rho * (u * u + v * v + w * w) - B2 / EIGHTPI
            )
        ok = (rho > POSITIVITY_TOL) & (p > POSITIVITY_TOL) & np.all(np.isfinite(Q), axis=0)
        V = np.empty_like(Q)
        V[0], V[1], V[2], V[3], V[4] = rho, u, v, w, p
        V[5:9] = Q[5:9]
        return V, ok

    def flux(self, Q, direction):
        Q = np.asarray(Q, dtype=float)
        V, _ = self.primitives(Q)
        return self._flux_from_prim(Q, V, direction)

    def flux_signal(self, Q, direction):
        Q = np.asarray(Q, dtype=float)
        if _kernels.HAVE_NUMBA and direction < 3:
            return _kernels.mhd_flux_signal(Q, self.gamma, self.ch, direction)
        V, _ = self.primitives(Q)
        return self._flux_from_prim(Q, V, direction), \
            np.maximum(np.abs(V[1 + direction]) + self._fast_speed(V, direction),
                       self.ch)

    def flux_all(self, Q, dirs):
        Q = np.asarray(Q, dtype=float)
        dirs = list(dirs)
        if _kernels.HAVE_NUMBA and dirs == list(range(len(dirs))):
            return _kernels.mhd_flux_all(Q, self.gamma, self.ch, dirs)
        V, _ = self.primitives(Q)
        return [self._flux_from_prim(Q, V, a) for a in dirs]

    def _flux_from_prim(self, Q, V, direction):
        rho, p = V[0], V[4]
        vel = V[1:4]
        B = Q[5:8]
        psi = Q[8]
        un = vel[direction]
        Bn = B[direction]
        B2 = B[0] ** 2 + B[1] ** 2 + B[2] ** 2
        pt = p + B2 / EIGHTPI
        vdotB = vel[0] * B[0] + vel[1] * B[1] + vel[2] * B[2]
        F = np.empty_like(Q)
        F[0] = rho * un
        for j in range(3):
            F[1 + j] = Q[1 + j] * un - Bn * B[j] / FOURPI
            F[5 + j] = un * B[j] - vel[j] * Bn
        F[1 + direction] += pt
        F[4] = un * (Q[4] + pt) - Bn * vdotB / FOURPI
        F[5 + direction] += psi
        F[8] = self.ch**2 * Bn
        return F

    def _fast_speed(self, V, direction):
        with np.errstate(all="ignore"):
            a2 = self.gamma * V[4] / V[0]
            invr = 1.0 / (FOURPI * V[0])
            b2 = (V[5] ** 2 + V[6] ** 2 + V[7] ** 2) * invr
            bn2 = V[5 + direction] ** 2 * invr
            s = a2 + b2
            disc = np.sqrt(np.maximum(s * s - 4.0 * a2 * bn2, 0.0))
            return np.sqrt(np.maximum(0.5 * (s + disc), 0.0))

    def max_signal(self, Q, direction):
        V, _ = self.primitives(np.asarray(Q, dtype=float))
        cf = self._fast_speed(V, direction)
        return np.maximum(np.abs(V[1 + direction]) + cf, self.ch)

    def signal_range(self, Q, direction):
        V, _ = self.primitives(np.asarray(Q, dtype=float))
        cf = self._fast_speed(V, direction)
        un = V[1 + direction]
        return np.minimum(un - cf, -self.ch), np.maximum(un + cf, self.ch)

    def wall_flip(self, direction):
        s = np.ones(self.m)
        s[1 + direction] = -1.0
        s[5 + direction] = -1.0
        return s
