"""Linear scalar advection q_t + a . grad q = 0; used to exercise the
space-time machinery against the method-of-characteristics solution."""

from __future__ import annotations

import numpy as np

from .base import HyperbolicSystem


class LinearAdvection(HyperbolicSystem):
    kind = "advection"
    m = 1
    prim_names = ("q",)

    def __init__(self, speed=(1.0, 0.0, 0.0)):
        super().__init__(gamma=1.4)
        self.speed = np.asarray(speed, dtype=float)

    def prim2cons(self, V):
        return np.asarray(V, dtype=float).copy()

    def primitives(self, Q):
        Q = np.asarray(Q, dtype=float)
        return Q.copy(), np.all(np.isfinite(Q), axis=0)

    def flux(self, Q, direction):
        return self.speed[direction] * np.asarray(Q, dtype=float)

    def max_signal(self, Q, direction):
        return np.full(np.asarray(Q).shape[1:], abs(self.speed[direction]))

    def signal_range(self, Q, direction):
        a = self.speed[direction]
        shape = np.asarray(Q).shape[1:]
        return np.full(shape, a), np.full(shape, a)

    def wall_flip(self, direction):
        return np.ones(self.m)
