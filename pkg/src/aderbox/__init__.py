"""ADER P_NP_M schemes with a-posteriori subcell FV limiting on adaptive Cartesian grids."""

__version__ = "0.1.0"

from .quadrature import gauss_legendre, LagrangeBasis1D  # noqa: F401
