"""PDE system descriptors: Euler, ideal MHD (GLM), special RMHD (GLM)."""

from __future__ import annotations

from .advection import LinearAdvection  # noqa: F401
from .base import POSITIVITY_TOL, HyperbolicSystem, InadmissibleStateError  # noqa: F401
from .euler import Euler
from .mhd import IdealMHD
from .rmhd import RelativisticMHD

_KINDS = {"euler": Euler, "mhd": IdealMHD, "rmhd": RelativisticMHD}


def make_system(kind: str, gamma: float, ch: float = 0.0, kappa: float = 0.0,
                **kwargs) -> HyperbolicSystem:
    """Instantiate a system descriptor by kind name."""
    try:
        cls = _KINDS[kind.lower()]
    except KeyError:
        raise ValueError(f"unknown system kind {kind!r}; choose from {sorted(_KINDS)}")
    if cls is Euler:
        return cls(gamma)
    if cls is IdealMHD:
        return cls(gamma, ch=ch)
    return cls(gamma, ch=ch, kappa=kappa, **kwargs)
