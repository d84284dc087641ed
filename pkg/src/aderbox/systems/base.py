"""Shared interface for the hyperbolic PDE systems.

All kernels are vectorized: state arrays carry the component axis first,
shape (m, ...), with arbitrary trailing shape (cells, nodes, ...).  Conversion
failures never raise inside the hot path; they surface as NaN entries plus a
False entry in the validity mask, which the limiter's detector consumes.
"""

from __future__ import annotations

import numpy as np

POSITIVITY_TOL = 1e-12  # admissibility floor on density and pressure


class InadmissibleStateError(ValueError):
    """A state violated positivity/causality; carries the offending values."""

    def __init__(self, message: str, state=None):
        super().__init__(message)
        self.state = state


class HyperbolicSystem:
    """Base for the conservation-law descriptors.

    Subclasses define: m, kind, prim_names, prim2cons, primitives, flux,
    signal bounds, admissibility, wall mirror signs and (optionally) a source.
    """

    kind: str = "?"
    m: int = 0
    has_source: bool = False

    def __init__(self, gamma: float, ch: float = 0.0, kappa: float = 0.0):
        if gamma <= 1.0:
            raise ValueError(f"gamma must exceed 1, got {gamma}")
        if ch < 0 or kappa < 0:
            raise ValueError("cleaning speed and damping must be nonnegative")
        self.gamma = float(gamma)
        self.ch = float(ch)
        self.kappa = float(kappa)

    # -- conversions ---------------------------------------------------------
    def prim2cons(self, V: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def primitives(self, Q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Primitive variables and validity mask; invalid slots may hold NaN."""
        raise NotImplementedError

    def cons2prim(self, Q: np.ndarray) -> np.ndarray:
        """Strict conversion; raises InadmissibleStateError on any bad slot."""
        V, ok = self.primitives(np.asarray(Q, dtype=float))
        if not np.all(ok):
            bad = np.argwhere(~ok)
            idx = tuple(bad[0])
            state = np.asarray(Q)[(slice(None),) + idx]
            raise InadmissibleStateError(
                f"{self.kind}: conservative-to-primitive failed at {idx}", state=state
            )
        return V

    # -- physics -------------------------------------------------------------
    def flux(self, Q: np.ndarray, direction: int) -> np.ndarray:
        raise NotImplementedError

    def flux_all(self, Q: np.ndarray, dirs) -> list:
        """Fluxes along several directions; subclasses share the primitive pass."""
        return [self.flux(Q, a) for a in dirs]

    def max_signal(self, Q: np.ndarray, direction: int) -> np.ndarray:
        """Upper bound on |lambda| of the flux Jacobian along `direction`."""
        raise NotImplementedError

    def flux_signal(self, Q: np.ndarray, direction: int):
        """(flux, max signal) along `direction`, sharing the primitive pass."""
        return self.flux(Q, direction), self.max_signal(Q, direction)

    def signal_range(self, Q: np.ndarray, direction: int) -> tuple[np.ndarray, np.ndarray]:
        """(lower, upper) wave-speed estimates along `direction`."""
        raise NotImplementedError

    def admissible(self, Q: np.ndarray) -> np.ndarray:
        """Elementwise physical admissibility; never raises."""
        Q = np.asarray(Q, dtype=float)
        with np.errstate(all="ignore"):
            _, ok = self.primitives(Q)
        return ok & np.all(np.isfinite(Q), axis=0)

    def source(self, Q: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def wall_flip(self, direction: int) -> np.ndarray:
        """Mirror signs per component for a wall normal to `direction`."""
        raise NotImplementedError

    @property
    def conserved_audit_mask(self) -> np.ndarray:
        """Components whose domain integral is exactly conserved (no damping)."""
        return np.ones(self.m, dtype=bool)

    def __repr__(self):
        return (f"{type(self).__name__}(gamma={self.gamma}, ch={self.ch}, "
                f"kappa={self.kappa})")
