"""Compressible Euler equations for an ideal gas.

Conserved vector (rho, rho*u, rho*v, rho*w, rho*E); the third velocity
component is carried so 1D/2D runs share one layout.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .base import POSITIVITY_TOL, HyperbolicSystem, InadmissibleStateError


class Euler(HyperbolicSystem):
    kind = "euler"
    m = 5
    prim_names = ("rho", "u", "v", "w", "p")

    def prim2cons(self, V):
        V = np.asarray(V, dtype=float)
        rho, u, v, w, p = V
        if np.any(rho <= 0) or np.any(p <= 0):
            raise InadmissibleStateError("euler: primitive state needs rho, p > 0")
        Q = np.empty_like(V)
        Q[0] = rho
        Q[1] = rho * u
        Q[2] = rho * v
        Q[3] = rho * w
        Q[4] = p / (self.gamma - 1.0) + 0.5 * rho * (u * u + v * v + w * w)
        return Q

    def primitives(self, Q):
        Q = np.asarray(Q, dtype=float)
        V = np.empty_like(Q)
        rho = Q[0]
        with np.errstate(all="ignore"):
            inv = 1.0 / rho
            V[0] = rho
            V[1] = Q[1] * inv
            V[2] = Q[2] * inv
            V[3] = Q[3] * inv
            V[4] = (self.gamma - 1.0) * (
                Q[4] - 0.5 * (Q[1] * V[1] + Q[2] * V[2] + Q[3] * V[3]))
        ok = (rho > POSITIVITY_TOL) & (V[4] > POSITIVITY_TOL) \
            & np.all(np.isfinite(Q), axis=0)
        return V, ok

    def flux(self, Q, direction):
        Q = np.asarray(Q, dtype=float)
        V, _ = self.primitives(Q)
        return self._flux_from_prim(Q, V, direction)

    def _flux_from_prim(self, Q, V, direction):
        p = V[4]
        un = V[1 + direction]
        F = np.empty_like(Q)
        F[0] = Q[0] * un
        F[1] = Q[1] * un
        F[2] = Q[2] * un
        F[3] = Q[3] * un
        F[1 + direction] += p
        F[4] = un * (Q[4] + p)
        return F

    def flux_signal(self, Q, direction):
        Q = np.asarray(Q, dtype=float)
        if _kernels.HAVE_NUMBA and direction < 3:
            return _kernels.euler_flux_signal(Q, self.gamma, direction)
        V, _ = self.primitives(Q)
        return self._flux_from_prim(Q, V, direction), \
            np.abs(V[1 + direction]) + self._sound(V)

    def flux_all(self, Q, dirs):
        Q = np.asarray(Q, dtype=float)
        dirs = list(dirs)
        if _kernels.HAVE_NUMBA and dirs == list(range(len(dirs))):
            return _kernels.euler_flux_all(Q, self.gamma, dirs)
        V, _ = self.primitives(Q)
        return [self._flux_from_prim(Q, V, a) for a in dirs]

    def _sound(self, V):
        with np.errstate(all="ignore"):
            return np.sqrt(self.gamma * V[4] / V[0])

    def max_signal(self, Q, direction):
        V, _ = self.primitives(np.asarray(Q, dtype=float))
        return np.abs(V[1 + direction]) + self._sound(V)

    def signal_range(self, Q, direction):
        V, _ = self.primitives(np.asarray(Q, dtype=float))
        c = self._sound(V)
        un = V[1 + direction]
        return un - c, un + c

    def wall_flip(self, direction):
        s = np.ones(self.m)
        s[1 + direction] = -1.0
        return s
