"""Precomputed operator tables on the unit reference element.

All per-step dense kernels (reconstruction sweeps, space-time predictor,
corrector integrals, subcell projection/recombination, AMR transfers, WENO
combinations) contract data with the small 1D matrices assembled here, once,
at configuration time.  Multi-dimensional operators are applied dimension by
dimension, so only 1D tables are ever stored.

Conventions
-----------
* reference element is [0,1]; reference time is tau in [0,1]
* degree-p nodal data live at the (p+1)-point Gauss-Legendre nodes, which makes
  every 1D mass matrix diagonal (diag of the GL weights)
* the CLSQ reconstruction matrix maps the stacked nodal data of the 3-cell
  stencil (left, center, right) to the degree-M nodal coefficients of the
  center cell, with the center-cell moments matched exactly
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .quadrature import LagrangeBasis1D, gauss_legendre


class UnsupportedSchemeError(ValueError):
    """Raised for (N, M) pairs outside the supported scheme family."""


def check_scheme(N: int, M: int) -> None:
    if not (0 <= N <= M <= 6):
        raise UnsupportedSchemeError(f"need 0 <= N <= M <= 6, got N={N}, M={M}")
    if N > 0 and M > 3 * N + 2:
        raise UnsupportedSchemeError(
            f"3-cell stencil supports M <= 3N+2; got N={N}, M={M}"
        )


def _cross_mass(bi: LagrangeBasis1D, bj: LagrangeBasis1D, shift: float) -> np.ndarray:
    """C[a,b] = int_0^1 bi_a(s) bj_b(s + shift) ds, via exact quadrature.

    With `shift` the offset of the integration cell in the frame of bj's cell,
    this is the moment of bj's (extrapolated) basis against bi's local basis.
    """
    npts = (bi.degree + bj.degree) // 2 + 1
    rule = gauss_legendre(max(npts, bi.n, bj.n))
    vi = bi.eval(rule.nodes)  # (q, ni)
    vj = bj.eval(rule.nodes + shift)  # (q, nj)
    return np.einsum("q,qa,qb->ab", rule.weights, vi, vj)


def _interval_integrals(b: LagrangeBasis1D, lo: float, hi: float) -> np.ndarray:
    """v[a] = int_lo^hi b_a(x) dx (basis may be extrapolated outside [0,1])."""
    rule = gauss_legendre(b.n)
    x = lo + (hi - lo) * rule.nodes
    return (hi - lo) * (rule.weights @ b.eval(x))


def _clsq_solve(a_rows: np.ndarray, c_rows: np.ndarray, rhs_map_a: np.ndarray,
                rhs_map_c: np.ndarray) -> np.ndarray:
    """Solve the constrained least-squares operator via the KKT system.

    minimize ||A w - b||^2 subject to C w = d, where b = rhs_map_a @ u and
    d = rhs_map_c @ u; returns G with w = G @ u.
    """
    n_w = a_rows.shape[1]
    n_c = c_rows.shape[0]
    kkt = np.zeros((n_w + n_c, n_w + n_c))
    kkt[:n_w, :n_w] = 2.0 * a_rows.T @ a_rows
    kkt[:n_w, n_w:] = c_rows.T
    kkt[n_w:, :n_w] = c_rows
    rhs = np.vstack([2.0 * a_rows.T @ rhs_map_a, rhs_map_c])
    return np.linalg.solve(kkt, rhs)[:n_w]


@dataclass
class WenoTables:
    """Per-window reconstruction matrices and oscillation quadratic form."""

    offsets: list[int]  # leftmost cell of each window, relative to the center cell
    matrices: list[np.ndarray]  # (M+1) x (M+1): window averages -> center nodal coeffs
    central: int | None  # index of the uniquely-centered window, if any
    osc: np.ndarray  # sigma = p^T osc p on nodal coefficients
    halfwidth: int  # stencil reach per side


@dataclass
class OperatorTable:
    """All reference-element matrices for a P_N P_M scheme in d dimensions."""

    N: int
    M: int
    d: int
    r: int

    basis_N: LagrangeBasis1D = field(repr=False, default=None)
    basis_M: LagrangeBasis1D = field(repr=False, default=None)

    # mass / stiffness / traces (degree-M basis unless suffixed)
    mass1d_N: np.ndarray = None
    mass1d_M: np.ndarray = None
    stiffness1d: np.ndarray = None  # S[k,l] = int phiM'_k phiM_l
    face_trace_left: np.ndarray = None  # phiM(0)
    face_trace_right: np.ndarray = None  # phiM(1)
    faceN_left: np.ndarray = None  # phiN(0)
    faceN_right: np.ndarray = None  # phiN(1)

    # CLSQ reconstruction: (M+1) x 3(N+1), blocks [left | center | right]
    recon_matrix: np.ndarray = None

    # subcell limiter operators (1D; tensorize per axis)
    subcell_project: np.ndarray = None  # (2N+1) x (N+1)
    subcell_recon: np.ndarray = None  # (N+1) x (2N+1)
    subface_int: np.ndarray = None  # A[k,j] = int_{subcell j} phiN_k

    # AMR transfers per child slot, for degrees N and M
    amr_project_N: list[np.ndarray] = None
    amr_gather_N: list[np.ndarray] = None
    amr_project_M: list[np.ndarray] = None
    amr_gather_M: list[np.ndarray] = None

    # space-time predictor tables (degree M)
    tmass1: np.ndarray = None  # phiM(1) outer phiM(1)
    tmass0: np.ndarray = None  # phiM(0) (acts on the known initial condition)
    tstiff: np.ndarray = None  # S (time direction)
    sstiff: np.ndarray = None  # S (each space direction; isotropic reference cell)
    K1inv: np.ndarray = None
    pred_deriv: np.ndarray = None  # D[k,l] = S[l,k] / w_k

    # corrector cross matrices (degree-N tests x degree-M collocation nodes)
    hmix: np.ndarray = None  # phiN_k(xiM_a) * wM_a
    gmix: np.ndarray = None  # phiN'_k(xiM_a) * wM_a
    interp_n_to_m: np.ndarray = None  # phiN_k(xiM_a), (M+1) x (N+1)

    # level-jump face helpers (per fine segment s of a coarse face)
    seg_test_N: list[np.ndarray] = None  # (1/r) phiN_k((s+xiM_b)/r) wM_b
    seg_subface_int: list[np.ndarray] = None  # int over subcell j of segment s of phiN_k

    # WENO tables (N=0 reconstruction path), built for degree M
    weno: WenoTables = None

    @property
    def n_nodes_N(self) -> int:
        return self.N + 1

    @property
    def n_nodes_M(self) -> int:
        return self.M + 1

    @property
    def n_sub(self) -> int:
        return 2 * self.N + 1


def _build_weno_tables(M: int) -> WenoTables:
    bM = LagrangeBasis1D(M)
    hw = min(M, 2)
    offsets = [o for o in range(-hw, hw - M + 1) if o <= 0 <= o + M]
    matrices = []
    for o in offsets:
        B = np.empty((M + 1, M + 1))
        for row, j in enumerate(range(o, o + M + 1)):
            B[row] = _interval_integrals(bM, float(j), float(j + 1))
        matrices.append(np.linalg.inv(B))
    # the most-centered window gets the large linear weight when unique
    centers = [abs(o + M / 2.0) for o in offsets]
    best = min(centers)
    central = centers.index(best) if centers.count(best) == 1 else None
    # oscillation quadratic form via nodal differentiation matrices
    Dm = bM.eval_deriv(bM.nodes)  # (node, basis): derivative values at nodes
    Dmat = Dm  # maps nodal values -> nodal values of derivative
    osc = np.zeros((M + 1, M + 1))
    Wm = np.diag(bM.weights)
    Dk = np.eye(M + 1)
    for _ in range(M):
        Dk = Dmat @ Dk
        osc += Dk.T @ Wm @ Dk
    return WenoTables(offsets=offsets, matrices=matrices, central=central, osc=osc,
                      halfwidth=hw)


@lru_cache(maxsize=None)
def build_operator_tables(N: int, M: int, d: int = 2, r: int = 2) -> OperatorTable:
    """Assemble every reference-element matrix for a P_N P_M scheme.

    Raises UnsupportedSchemeError when (N, M) violates the stencil-sufficiency
    relation, ValueError for unsupported d or r.
    """
    check_scheme(N, M)
    if d not in (1, 2):
        raise ValueError(f"d must be 1 or 2, got {d}")
    if r not in (2, 3):
        raise ValueError(f"refinement factor must be 2 or 3, got {r}")

    bN = LagrangeBasis1D(N)
    bM = LagrangeBasis1D(M)
    t = OperatorTable(N=N, M=M, d=d, r=r, basis_N=bN, basis_M=bM)

    t.mass1d_N = np.diag(bN.weights)
    t.mass1d_M = np.diag(bM.weights)
    rule = gauss_legendre(M + 1)
    dphi = bM.eval_deriv(rule.nodes)  # (q, k)
    phi = bM.eval(rule.nodes)
    t.stiffness1d = np.einsum("q,qk,ql->kl", rule.weights, dphi, phi)
    t.face_trace_left = bM.eval(0.0)[0]
    t.face_trace_right = bM.eval(1.0)[0]
    t.faceN_left = bN.eval(0.0)[0]
    t.faceN_right = bN.eval(1.0)[0]

    # ---- CLSQ reconstruction over the (left, center, right) stencil ----
    if N < M:
        WN = np.diag(bN.weights)
        B = {j: _cross_mass(bN, bM, float(j)) for j in (-1, 0, 1)}
        A = np.vstack([B[-1], B[1]])
        C = B[0]
        nn = N + 1
        rhs_a = np.zeros((2 * nn, 3 * nn))
        rhs_a[:nn, :nn] = WN
        rhs_a[nn:, 2 * nn:] = WN
        rhs_c = np.zeros((nn, 3 * nn))
        rhs_c[:, nn:2 * nn] = WN
        t.recon_matrix = _clsq_solve(A, C, rhs_a, rhs_c)
    else:
        # identity path: center block passes through
        nn = N + 1
        G = np.zeros((nn, 3 * nn))
        G[:, nn:2 * nn] = np.eye(nn)
        t.recon_matrix = G

    # ---- subcell projection / constrained recombination ----
    S = 2 * N + 1
    P = np.empty((S, N + 1))
    for a in range(S):
        P[a] = S * _interval_integrals(bN, a / S, (a + 1) / S)
    t.subcell_project = P
    ones = np.full((1, S), 1.0 / S)
    t.subcell_recon = _clsq_solve(P, bN.weights[None, :], np.eye(S), ones)
    t.subface_int = (P / S).T  # A[k,j]

    # ---- AMR transfers ----
    def transfers(b: LagrangeBasis1D):
        proj, gath = [], []
        Minv = np.diag(1.0 / b.weights)
        for s in range(r):
            proj.append(b.eval((s + b.nodes) / r))
            rulep = gauss_legendre(b.n)
            vi = b.eval((s + rulep.nodes) / r)
            vj = b.eval(rulep.nodes)
            C = np.einsum("q,qa,qb->ab", rulep.weights, vi, vj) / r
            gath.append(Minv @ C)
        return proj, gath

    t.amr_project_N, t.amr_gather_N = transfers(bN)
    t.amr_project_M, t.amr_gather_M = transfers(bM)

    # ---- space-time predictor ----
    e0, e1 = t.face_trace_left, t.face_trace_right
    t.tmass1 = np.outer(e1, e1)
    t.tmass0 = e0.copy()
    t.tstiff = t.stiffness1d
    t.sstiff = t.stiffness1d
    K1 = t.tmass1 - t.stiffness1d
    t.K1inv = np.linalg.inv(K1)
    t.pred_deriv = t.stiffness1d.T / bM.weights[:, None]

    # ---- corrector cross matrices ----
    phiN_at_M = bN.eval(bM.nodes)  # (M+1, N+1)
    dphiN_at_M = bN.eval_deriv(bM.nodes)
    t.hmix = phiN_at_M.T * bM.weights[None, :]
    t.gmix = dphiN_at_M.T * bM.weights[None, :]
    t.interp_n_to_m = phiN_at_M

    # ---- level-jump helpers ----
    t.seg_test_N = [
        bN.eval((s + bM.nodes) / r).T * bM.weights[None, :] / r for s in range(r)
    ]
    t.seg_subface_int = []
    for s in range(r):
        Bseg = np.empty((N + 1, S))
        for j in range(S):
            lo = (s + j / S) / r
            hi = (s + (j + 1) / S) / r
            Bseg[:, j] = _interval_integrals(bN, lo, hi)
        t.seg_subface_int.append(Bseg)

    if N == 0 and M <= 4:
        # the nonlinear FV reconstruction path; degrees above 4 are out of scope
        t.weno = _build_weno_tables(M)

    return t


def axdot(mat: np.ndarray, arr: np.ndarray, axis: int) -> np.ndarray:
    """Contract arr along `axis` with mat: out[...,k,...] = sum_l mat[k,l] arr[...,l,...].

    Routed through batched matmul so no transposed copies are made; this is
    the single hottest primitive in the step loop.
    """
    axis %= arr.ndim
    if axis == arr.ndim - 1:
        return np.matmul(arr, mat.T)
    if axis == arr.ndim - 2:
        return np.matmul(mat, arr)
    lead = arr.shape[:axis]
    trail = int(np.prod(arr.shape[axis + 1:]))
    tmp = arr.reshape(lead + (arr.shape[axis], trail))
    out = np.matmul(mat, tmp)
    return out.reshape(lead + (mat.shape[0],) + arr.shape[axis + 1:])
