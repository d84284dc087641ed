"""Gauss-Legendre quadrature and nodal Lagrange bases on the unit interval.

Everything downstream (operator tables, predictors, projections) is built from
the two objects defined here: an n-point Gauss-Legendre rule mapped to [0,1]
and the Lagrange cardinal basis collocated at those points.  Nodes are computed
by Newton iteration on the Legendre polynomials, so any supported degree is
reproducible to machine precision without stored tables.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_POINTS = 10


@dataclass(frozen=True)
class QuadRule1D:
    """An n-point quadrature rule on [0,1], exact through degree 2n-1."""

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return self.nodes.size


def _legendre(p: int, x: float) -> tuple[float, float]:
    """Value and derivative of the Legendre polynomial P_p at x in [-1,1]."""
    if p == 0:
        return 1.0, 0.0
    pm, pc = 1.0, x
    for k in range(2, p + 1):
        pm, pc = pc, ((2 * k - 1) * x * pc - (k - 1) * pm) / k
    dp = p * (x * pc - pm) / (x * x - 1.0)
    return pc, dp


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> QuadRule1D:
    """Return the n-point Gauss-Legendre rule on [0,1].

    Roots of P_n are found by Newton iteration from the Chebyshev initial
    guess, converged to a 1e-15 residual.  Raises ValueError outside the
    supported range 1 <= n <= MAX_POINTS.
    """
    if not 1 <= n <= MAX_POINTS:
        raise ValueError(f"gauss_legendre: n={n} outside supported range [1, {MAX_POINTS}]")
    nodes = np.empty(n)
    weights = np.empty(n)
    for i in range(n):
        x = -np.cos(np.pi * (i + 0.75) / (n + 0.5))
        for _ in range(100):
            v, dv = _legendre(n, x)
            dx = -v / dv
            x += dx
            if abs(dx) < 1e-15:
                break
        v, dv = _legendre(n, x)
        nodes[i] = x
        weights[i] = 2.0 / ((1.0 - x * x) * dv * dv)
    # map [-1,1] -> [0,1]
    return QuadRule1D(nodes=0.5 * (nodes + 1.0), weights=0.5 * weights)


class LagrangeBasis1D:
    """Nodal Lagrange basis of degree N collocated at the (N+1)-point GL nodes.

    The basis is cardinal: phi_l(node_m) = delta_lm, and because products of
    two basis functions are integrated exactly by the collocation rule, the
    1D mass matrix is diag(weights).
    """

    def __init__(self, degree: int):
        self.degree = degree
        self.rule = gauss_legendre(degree + 1)
        self.nodes = self.rule.nodes
        self.weights = self.rule.weights
        # barycentric weights for stable evaluation anywhere (incl. outside [0,1])
        diff = self.nodes[:, None] - self.nodes[None, :]
        np.fill_diagonal(diff, 1.0)
        self._bary = 1.0 / np.prod(diff, axis=1)

    @property
    def n(self) -> int:
        return self.degree + 1

    def eval(self, xi) -> np.ndarray:
        """Values of all basis functions at points xi; shape (len(xi), N+1)."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        out = np.empty((xi.size, self.n))
        for j, x in enumerate(xi):
            d = x - self.nodes
            hit = np.nonzero(d == 0.0)[0]
            if hit.size:
                row = np.zeros(self.n)
                row[hit[0]] = 1.0
            else:
                row = np.prod(d) * self._bary / d
            out[j] = row
        return out

    def eval_deriv(self, xi) -> np.ndarray:
        """Derivatives of all basis functions at points xi; shape (len(xi), N+1).

        Product formula: phi_l'(x) = bary_l * sum_{j != l} prod_{k != l,j} (x - x_k).
        """
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        out = np.empty((xi.size, self.n))
        for p, x in enumerate(xi):
            d = x - self.nodes
            for l in range(self.n):
                s = 0.0
                for j in range(self.n):
                    if j == l:
                        continue
                    mask = np.ones(self.n, dtype=bool)
                    mask[[l, j]] = False
                    s += np.prod(d[mask])
                out[p, l] = s * self._bary[l]
        return out


def lagrange_eval(basis: LagrangeBasis1D, l: int, xi: float) -> float:
    """Value of the l-th cardinal polynomial at xi (xi may lie outside [0,1])."""
    if not 0 <= l <= basis.degree:
        raise ValueError(f"basis index {l} out of range for degree {basis.degree}")
    return float(basis.eval(xi)[0, l])


def lagrange_deriv(basis: LagrangeBasis1D, l: int, xi: float) -> float:
    """Derivative of the l-th cardinal polynomial at xi."""
    if not 0 <= l <= basis.degree:
        raise ValueError(f"basis index {l} out of range for degree {basis.degree}")
    return float(basis.eval_deriv(xi)[0, l])


@lru_cache(maxsize=None)
def basis(degree: int) -> LagrangeBasis1D:
    return LagrangeBasis1D(degree)
