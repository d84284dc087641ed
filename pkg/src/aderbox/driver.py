"""Run configuration and the one-step ADER P_NP_M driver.

The step loop follows a fixed, observable ordering:

    remesh (if AMR) -> reconstruct -> predict -> candidate update ->
    detect -> limit / fix neighbors -> commit

The detector consumes only committed t^n data plus the candidate t^{n+1}
(strict a-posteriori contract).  Faces carry exactly one committed flux
record per step: the P_NP_M record by default, the limiter's subcell record
wherever a troubled cell touches the face; neighbor updates are patched by
the record delta, which keeps global conservation exact by construction.

Everything is batched over cells; the only Python-level loops run over plan
groups, face batches and AMR levels.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import corrector, limiter as lim, mesh, predictor, problems, recon
from .operators import axdot, build_operator_tables, check_scheme
from .systems.base import InadmissibleStateError

log = logging.getLogger(__name__)

NEIGHBOR_OFFSETS = {
    1: [(-1,), (1,)],
    2: [(ox, oy) for oy in (-1, 0, 1) for ox in (-1, 0, 1) if (ox, oy) != (0, 0)],
}


class LimiterFailure(RuntimeError):
    """The subcell recomputation itself produced an inadmissible state."""


@dataclass
class RunConfig:
    """Fully deterministic run description (no seeds anywhere)."""

    case: str
    N: int = 2
    M: int = 3
    flux: str | None = None  # default from the case
    limiter: str | None = None  # off | tvd | weno (default from the case)
    cfl: float | None = None
    n0: tuple | None = None
    t_end: float | None = None
    amr: bool = False
    l_max: int | None = None
    r: int | None = None
    chi_ref: float = 0.2
    chi_rec: float = 0.1
    remesh_every: int = 1
    out_dir: str | None = None
    out_formats: tuple = ()
    cut: tuple | None = None  # (axis, value)
    fault_injection: float = 0.0  # fraction of cells force-limited per step
    unsafe_unlimited: bool = False
    max_steps: int = 10**9

    def resolve(self) -> "ResolvedConfig":
        case = self.case if isinstance(self.case, problems.ProblemCase) \
            else problems.get_case(self.case)
        check_scheme(self.N, self.M)
        limiter_kind = self.limiter if self.limiter is not None else case.limiter
        if limiter_kind not in ("off", "tvd", "weno"):
            raise ValueError(f"unknown limiter {limiter_kind!r}")
        if limiter_kind == "off" and self.N > 0 and not self.unsafe_unlimited \
                and self.fault_injection == 0.0:
            # linear schemes need the a-posteriori limiter on discontinuities;
            # smooth convergence cases opt out explicitly via the case default
            if case.limiter != "off":
                raise ValueError(
                    "limiter=off with N>0 requires unsafe_unlimited=True")
        r = self.r if self.r is not None else (case.amr[1] if case.amr[1] else 2)
        l_max = self.l_max if self.l_max is not None else case.amr[0]
        return ResolvedConfig(
            case=case, N=self.N, M=self.M,
            flux=self.flux or case.flux,
            limiter=limiter_kind,
            cfl=self.cfl if self.cfl is not None else case.cfl,
            n0=tuple(self.n0) if self.n0 else case.n0,
            t_end=self.t_end if self.t_end is not None else case.t_end,
            amr=self.amr, l_max=l_max if self.amr else 0, r=r,
            chi_ref=self.chi_ref, chi_rec=self.chi_rec,
            remesh_every=self.remesh_every,
            fault_injection=self.fault_injection,
            max_steps=self.max_steps, raw=self)


@dataclass
class ResolvedConfig:
    case: problems.ProblemCase
    N: int
    M: int
    flux: str
    limiter: str
    cfl: float
    n0: tuple
    t_end: float
    amr: bool
    l_max: int
    r: int
    chi_ref: float
    chi_rec: float
    remesh_every: int
    fault_injection: float
    max_steps: int
    raw: RunConfig


@dataclass
class RunSummary:
    t_final: float
    steps: int
    n_active: int
    troubled_total: int
    troubled_max: int
    conservation_drift: float
    timers: dict
    outputs: list = field(default_factory=list)


@dataclass
class _FaceBatch:
    fg: mesh.FaceGroup
    posL: np.ndarray
    posR: np.ndarray
    measure: np.ndarray  # physical transverse face length (1.0 in 1D)
    C: np.ndarray = None  # (m, nf[, n_transverse_M]) time-integrated flux
    momL: np.ndarray = None  # (m, nf, N+1) transverse test moments, left side
    momR: np.ndarray = None


def _hash01(step: int, level: int, idx: tuple) -> float:
    h = (step * 2654435761 + level * 97) & 0xFFFFFFFF
    for k, v in enumerate(idx):
        h = (h + (int(v) + 1) * (40503 if k == 0 else 69061)) * 2246822519
        h &= 0xFFFFFFFF
    return h / 2**32


class Engine:
    """State and step pipeline for one configured run."""

    def __init__(self, config: RunConfig):
        self.cfg = config.resolve()
        case = self.cfg.case
        self.case = case
        self.sys = case.system()
        self.d = case.d
        self.table = build_operator_tables(self.cfg.N, self.cfg.M, d=self.d,
                                           r=self.cfg.r)
        self.weno_cfg = recon.WenoConfig()
        self.flux_fn = corrector.numerical_flux(self.cfg.flux)
        self.grid = mesh.Grid(self.d, case.extents, self.cfg.n0, r=self.cfg.r,
                              l_max=self.cfg.l_max, bc=case.bc)
        self.t = 0.0
        self.steps = 0
        self.troubled_total = 0
        self.troubled_max = 0
        self.timers = {k: 0.0 for k in
                       ("remesh", "recon", "predict", "flux", "detect", "limit")}
        self._sub_proj, self._sub_gath = lim.subcell_slot_matrices(self.table)
        self._q_warm = None
        # time-shift operator: evaluate the previous window's polynomial one
        # window ahead as the warm start for the next Picard solve
        self._tshift = self.table.basis_M.eval(self.table.basis_M.nodes + 1.0)
        self._check_subcell_cfl()
        self._init_fields()
        self._rebuild_topology()
        self._audit0 = self.conserved_totals()

    # ------------------------------------------------------------------
    # setup
    # ------------------------------------------------------------------
    def _check_subcell_cfl(self):
        # N_omega = (2N+1)^d keeps the subgrid FV stable at the main dt:
        # CFL_PNPM <= 1/(2N+1) must hold (direct inequality check)
        if corrector.cfl_max(self.cfg.N) > 1.0 / (2 * self.cfg.N + 1) + 1e-12:
            raise ValueError("subcell count violates the FV stability bound")

    def _node_positions(self, gids, degree: str):
        """Physical positions of the per-cell nodes, shape (d, n, [nodes])."""
        nodes = self._nodes_1d(degree)
        lo = self.grid.cell_lo(gids)
        sz = self.grid.cell_sizes(gids)
        if self.d == 1:
            x = lo[:, 0, None] + sz[:, 0, None] * nodes[0][None, :]
            return x[None]
        nx, ny = nodes[0], nodes[1]
        X = lo[:, 0, None, None] + sz[:, 0, None, None] * nx[None, None, :]
        Y = lo[:, 1, None, None] + sz[:, 1, None, None] * ny[None, :, None]
        shape = (len(gids), ny.size, nx.size)
        return np.stack([np.broadcast_to(X, shape), np.broadcast_to(Y, shape)])

    def _nodes_1d(self, degree: str):
        t = self.table
        if degree == "N":
            return [t.basis_N.nodes] * self.d
        if degree == "M":
            return [t.basis_M.nodes] * self.d
        if degree == "WX":  # x carries degree M, y carries degree N
            return [t.basis_M.nodes, t.basis_N.nodes]
        if degree == "sub":
            S = t.n_sub
            return [(np.arange(S) + 0.5) / S] * self.d
        raise ValueError(degree)

    def _init_fields(self):
        self._alloc_state()
        self._set_initial_condition()
        if self.cfg.amr and self.cfg.l_max > 0:
            # seed refinement from the initial data, re-evaluating the IC on
            # every new cell instead of projecting
            for _ in range(self.cfg.l_max + 1):
                self._rebuild_topology()
                chi = self._indicator()
                changed, old_map = self.grid.remesh(chi > self.cfg.chi_ref,
                                                    np.zeros_like(chi, dtype=bool))
                if not changed:
                    break
                self._alloc_state()
                self._set_initial_condition()
            self._rebuild_topology()

    def _alloc_state(self):
        g, t = self.grid, self.table
        nn = (t.n_nodes_N,) * self.d
        self.U = np.zeros((self.sys.m, g.n_cells) + nn)
        self.troubled = np.zeros(g.n_cells, dtype=bool)
        self.cause = np.zeros(g.n_cells, dtype=np.int8)
        self.vstore = np.zeros((self.sys.m, g.n_cells) + (t.n_sub,) * self.d)

    def _set_initial_condition(self):
        # L2-project the initial condition (pointwise interpolation would cap
        # the moment accuracy at O(h^(2N+2)), short of M+1 when M > 2N+1)
        from .quadrature import gauss_legendre

        t = self.table
        q = gauss_legendre(min(10, max(t.n_nodes_M + 1, t.n_nodes_N + 2)))
        gids = np.arange(self.grid.n_cells)
        lo = self.grid.cell_lo(gids)
        sz = self.grid.cell_sizes(gids)
        phi = t.basis_N.eval(q.nodes)  # (nq, N+1)
        if self.d == 1:
            X = (lo[:, 0, None] + sz[:, 0, None] * q.nodes[None, :])[None]
            Q = self.sys.prim2cons(self.case.initial(X))
            mom = np.einsum("mcq,q,qk->mck", Q, q.weights, phi)
            self.U = (mom / t.basis_N.weights).astype(float)
        else:
            nq = q.nodes.size
            Xg = lo[:, 0, None, None] + sz[:, 0, None, None] * q.nodes[None, None, :]
            Yg = lo[:, 1, None, None] + sz[:, 1, None, None] * q.nodes[None, :, None]
            shape = (len(gids), nq, nq)
            X = np.stack([np.broadcast_to(Xg, shape), np.broadcast_to(Yg, shape)])
            Q = self.sys.prim2cons(self.case.initial(X))
            mom = np.einsum("mcba,b,a,bl,ak->mclk", Q, q.weights, q.weights, phi, phi)
            self.U = (mom / np.multiply.outer(t.basis_N.weights,
                                              t.basis_N.weights)).astype(float)
        if self.case.post_init is not None:
            self.case.post_init(self.grid, self.U, self.table, self.sys)
        mesh.restrict_parents(self.grid, self.U, self._gather_mats("N"))

    def _proj_mats(self, degree: str):
        t = self.table
        if degree == "N":
            return [t.amr_project_N] * self.d
        if degree == "M":
            return [t.amr_project_M] * self.d
        if degree == "WX":
            return [t.amr_project_M, t.amr_project_N]
        if degree == "sub":
            return [self._sub_proj] * self.d
        raise ValueError(degree)

    def _gather_mats(self, degree: str):
        t = self.table
        if degree == "N":
            return [t.amr_gather_N] * self.d
        if degree == "M":
            return [t.amr_gather_M] * self.d
        if degree == "WX":
            return [t.amr_gather_M, t.amr_gather_N]
        if degree == "sub":
            return [self._sub_gath] * self.d
        raise ValueError(degree)

    def _rebuild_topology(self):
        g = self.grid
        offsets = list(NEIGHBOR_OFFSETS[self.d])
        if self.cfg.N == 0:
            hw = self.table.weno.halfwidth
            for a in range(self.d):
                for o in range(2, hw + 1):
                    for sgn in (-1, 1):
                        off = [0] * self.d
                        off[a] = sgn * o
                        offsets.append(tuple(off))
        self.plans = g.build_plans(offsets)
        self.faces = g.build_faces()
        self.pos_of_gid = np.full(g.n_cells, -1, dtype=np.int64)
        self.pos_of_gid[g.active] = np.arange(g.n_active)
        self.active_sizes = g.cell_sizes(g.active)  # (nact, d)
        self.active_vol = g.cell_volume(g.active)
        self._face_batches = []
        for fg in self.faces:
            posL = self.pos_of_gid[fg.left]
            posR = self.pos_of_gid[fg.right]
            if self.d == 2:
                t_axis = 1 - fg.axis
                fine = fg.left if fg.fine_side == 0 else fg.right
                ref = fine if fg.kind == "jump" else fg.left
                measure = self.grid.cell_sizes(ref)[:, t_axis]
            else:
                measure = np.ones(len(fg.left))
            self._face_batches.append(_FaceBatch(fg=fg, posL=posL, posR=posR,
                                                 measure=measure))
        # map (cell pos, axis, cell-side) -> (batch index, row); the limiter
        # substitution and the jump fix-up both need it
        self.face_of_cell = {}
        for bi, fb in enumerate(self._face_batches):
            fg = fb.fg
            for row in range(len(fg.left)):
                if fg.kind == "boundary":
                    self.face_of_cell.setdefault(
                        (int(fb.posL[row]), fg.axis, fg.bside), []).append((bi, row))
                else:
                    self.face_of_cell.setdefault(
                        (int(fb.posL[row]), fg.axis, 1), []).append((bi, row))
                    self.face_of_cell.setdefault(
                        (int(fb.posR[row]), fg.axis, 0), []).append((bi, row))

    # ------------------------------------------------------------------
    # virtual fetch with Dirichlet filling
    # ------------------------------------------------------------------
    def _fetch(self, offset, data, degree, t_eval, rows=None, signs=None):
        plan = self.plans[offset]
        slot_mats = self._proj_mats(degree)
        if signs is None:
            signs = [self.sys.wall_flip(a) for a in range(self.d)]
        out = mesh.gather_virtual(plan, data, self.d, self.grid.n_active,
                                  slot_mats, mirror_signs=signs, rows=rows)
        if plan.dirichlet_dest.size:
            self._fill_dirichlet(plan, out, data, degree, t_eval, offset,
                                 rows=rows)
        return out

    def _fill_dirichlet(self, plan, out, data, degree, t_eval, offset, rows=None):
        nodes = self._nodes_1d(degree)
        rowpos = None
        if rows is not None:
            rowpos = np.full(self.grid.n_active, -1, dtype=np.int64)
            rowpos[rows] = np.arange(len(rows))
        for dest, (lev, idx) in zip(plan.dirichlet_dest, plan.dirichlet_keys):
            out_row = dest
            if rowpos is not None:
                out_row = int(rowpos[dest])
                if out_row < 0:
                    continue
            lo, sz = mesh.region_box(self.grid, lev, idx)
            axis, side = self._boundary_of(lev, idx)
            if self.d == 1:
                X = (lo[0] + sz[0] * nodes[0])[None]
            else:
                nx, ny = nodes[0], nodes[1]
                Xg = lo[0] + sz[0] * nx
                Yg = lo[1] + sz[1] * ny
                X = np.stack([np.broadcast_to(Xg[None, :], (ny.size, nx.size)),
                              np.broadcast_to(Yg[:, None], (ny.size, nx.size))])
            own = data[:, self.grid.active[dest]]
            mirror = np.flip(own, axis=own.ndim - 1 - axis) \
                * self.sys.wall_flip(axis).reshape((-1,) + (1,) * (own.ndim - 1))
            out[:, out_row] = self.case.ghost(axis, side, X, t_eval, mirror, self.sys)

    def _boundary_of(self, lev, idx):
        n_lvl = [int(n) * self.grid.r**lev for n in self.grid.n0]
        for a in range(self.d):
            if idx[a] < 0:
                return a, 0
            if idx[a] >= n_lvl[a]:
                return a, 1
        raise RuntimeError("dirichlet region inside the domain")

    # ------------------------------------------------------------------
    # step phases
    # ------------------------------------------------------------------
    def _indicator(self):
        comp = 0  # density-like component drives refinement
        means = {}
        w = self.table.basis_N.weights
        mu = self.U[comp:comp + 1]
        for a in range(self.d):
            mu = axdot(w[None, :], mu, mu.ndim - 1 - a)
        mu = mu.reshape(1, -1)
        ones = [np.ones(1) for _ in range(self.d)]
        for off in NEIGHBOR_OFFSETS[self.d]:
            got = self._fetch(off, self.U[comp:comp + 1], "N", self.t, signs=ones)
            v = got
            for a in range(self.d):
                v = axdot(w[None, :], v, v.ndim - 1 - a)
            means[off] = v.reshape(-1)
        means[(0,) * self.d] = mu[0, self.grid.active]
        return mesh.lohner_indicator(means, self.d)

    def _remesh_phase(self):
        if not self.cfg.amr or self.cfg.l_max == 0:
            return
        if self.cfg.remesh_every > 1 and self.steps % self.cfg.remesh_every:
            return
        t0 = time.perf_counter()
        # parents must carry the restriction of the committed children before
        # any merge copies their payload or the indicator reads them
        mesh.restrict_parents(self.grid, self.U, self._gather_mats("N"))
        chi = self._indicator()
        changed, old_map = self.grid.remesh(chi > self.cfg.chi_ref,
                                            chi < self.cfg.chi_rec)
        self._apply_remesh(changed, old_map)
        self.timers["remesh"] += time.perf_counter() - t0

    def _apply_remesh(self, changed, old_map):
        if not changed:
            return
        self.U = mesh.rebuild_cell_data(self.grid, old_map, self.U,
                                        self._proj_mats("N"))
        self.vstore = mesh.rebuild_cell_data(self.grid, old_map, self.vstore,
                                             self._proj_mats("sub"))
        old_troubled = self.troubled
        self.troubled = np.zeros(self.grid.n_cells, dtype=bool)
        self.cause = np.zeros(self.grid.n_cells, dtype=np.int8)
        for gid, key in enumerate(self.grid.keys):
            old = old_map.get(key)
            if old is not None and old < old_troubled.size:
                self.troubled[gid] = old_troubled[old]
            elif old is None:
                # fresh child: inherit the limited status so its history stays
                # the (projected) stored averages, not the recombined dof
                pkey = (key[0] - 1,) + tuple(v // self.grid.r for v in key[1:])
                pold = old_map.get(pkey)
                if pold is not None and pold < old_troubled.size:
                    self.troubled[gid] = old_troubled[pold]
        self._q_warm = None
        self._rebuild_topology()

    def force_refine(self, mask):
        """Refine the masked active cells (testing/static-mesh runs)."""
        changed, old_map = self.grid.remesh(np.asarray(mask, dtype=bool),
                                            np.zeros(self.grid.n_active, dtype=bool))
        self._apply_remesh(changed, old_map)
        mesh.restrict_parents(self.grid, self.U, self._gather_mats("N"))

    def compute_dt(self):
        # nodal values of cells that MOOD will recompute this step may be
        # inadmissible (NaN signals); they are excluded here, while the
        # admissible stored subcell averages of limited cells do contribute
        UA = self.U[:, self.grid.active]
        lam = 0.0
        with np.errstate(all="ignore"):
            for a in range(self.d):
                lam = max(lam, float(np.nanmax(self.sys.max_signal(UA, a))))
            if self.troubled.any():
                VS = self.vstore[:, self.troubled]
                for a in range(self.d):
                    lam = max(lam, float(np.nanmax(self.sys.max_signal(VS, a))))
        if not np.isfinite(lam):
            raise LimiterFailure(f"no admissible state for the CFL scan at t={self.t}")
        h_min = float(self.active_sizes.min())
        dt = corrector.compute_dt(h_min, lam, self.cfg.N, self.d, self.cfg.cfl,
                                  dt_max=self.cfg.t_end)
        return min(dt, self.cfg.t_end - self.t)

    def _reconstruct(self):
        t0 = time.perf_counter()
        g, t = self.grid, self.table
        UA = self.U[:, g.active]
        if self.cfg.N == self.cfg.M:
            self.timers["recon"] += time.perf_counter() - t0
            return UA.copy()
        if self.cfg.N == 0:
            w = self._reconstruct_weno()
            self.timers["recon"] += time.perf_counter() - t0
            return w
        ex = [0] * (self.d - 1)
        left = self._fetch(tuple([-1] + ex), self.U, "N", self.t)
        right = self._fetch(tuple([1] + ex), self.U, "N", self.t)
        wx = recon.clsq_sweep(t, left, UA, right, axis=-1)
        if self.d == 1:
            self.timers["recon"] += time.perf_counter() - t0
            return wx
        # stage the x-reconstruction on the arena for the y-sweep gathers
        wx_arena = np.zeros((self.sys.m, g.n_cells) + wx.shape[2:])
        wx_arena[:, g.active] = wx
        mesh.restrict_parents(g, wx_arena, self._gather_mats("WX"))
        down = self._fetch((0, -1), wx_arena, "WX", self.t)
        up = self._fetch((0, 1), wx_arena, "WX", self.t)
        w = recon.clsq_sweep(t, down, wx, up, axis=-2)
        self.timers["recon"] += time.perf_counter() - t0
        return w

    def _reconstruct_weno(self):
        g, t = self.grid, self.table
        hw = t.weno.halfwidth
        UA = self.U[:, g.active]
        ex = [0] * (self.d - 1)
        neigh = []
        for o in range(-hw, hw + 1):
            if o == 0:
                neigh.append(UA)
            else:
                neigh.append(self._fetch(tuple([o] + ex), self.U, "N", self.t))
        wx = recon.weno_sweep(t, self.weno_cfg, neigh, axis=-1)
        if self.d == 1:
            return wx
        wx_arena = np.zeros((self.sys.m, g.n_cells) + wx.shape[2:])
        wx_arena[:, g.active] = wx
        mesh.restrict_parents(g, wx_arena, self._gather_mats("WX"))
        neigh_y = []
        for o in range(-hw, hw + 1):
            if o == 0:
                neigh_y.append(wx_arena[:, g.active])
            else:
                neigh_y.append(self._fetch((0, o), wx_arena, "WX", self.t))
        return recon.weno_sweep(t, self.weno_cfg, neigh_y, axis=-2)

    def _face_fluxes(self, q, dt):
        """Riemann fluxes on every face, time-integrated; fills the ledger."""
        t0 = time.perf_counter()
        t = self.table
        wt = t.basis_M.weights
        for fb in self._face_batches:
            fg = fb.fg
            a = fg.axis
            if fg.kind == "same":
                trL = predictor.boundary_trace(t, q[:, fb.posL], a, 1)
                trR = predictor.boundary_trace(t, q[:, fb.posR], a, 0)
            elif fg.kind == "jump":
                if fg.fine_side == 0:
                    trL = predictor.boundary_trace(t, q[:, fb.posL], a, 1)
                    trC = predictor.boundary_trace(t, q[:, fb.posR], a, 0)
                    trR = self._segment_eval(trC, fg.slot)
                else:
                    trC = predictor.boundary_trace(t, q[:, fb.posL], a, 1)
                    trL = self._segment_eval(trC, fg.slot)
                    trR = predictor.boundary_trace(t, q[:, fb.posR], a, 0)
            else:  # boundary
                side = fg.bside
                own = predictor.boundary_trace(t, q[:, fb.posL], a, side)
                ext = self._boundary_trace_state(fb, own, dt)
                trL, trR = (ext, own) if side == 0 else (own, ext)
            F = self.flux_fn(self.sys, trL, trR, a)
            C = np.tensordot(F, wt, axes=([2], [0])) * dt
            fb.C = C
            if self.d == 2:
                momz = np.einsum("kb,mfb->mfk", t.hmix, C)
            else:
                momz = C[..., None]
            meas = fb.measure[None, :, None]
            if fg.kind == "jump":
                fine_meas = fb.measure[None, :, None]
                coarse_meas = fine_meas * self.grid.r
                if self.d == 2:
                    momc = np.einsum("kb,mfb->mfk", t.seg_test_N[fg.slot], C) \
                        * coarse_meas
                else:
                    momc = C[..., None]
                if fg.fine_side == 0:
                    fb.momL = momz * fine_meas
                    fb.momR = momc
                else:
                    fb.momL = momc
                    fb.momR = momz * fine_meas
            else:
                fb.momL = momz * meas
                fb.momR = fb.momL
        self.timers["flux"] += time.perf_counter() - t0

    def _segment_eval(self, tr, slot):
        """Evaluate a coarse face trace on one fine sub-segment (d=2)."""
        return axdot(self.table.amr_project_M[slot], tr, tr.ndim - 1)

    def _boundary_trace_state(self, fb, own, dt):
        fg = fb.fg
        a, side = fg.axis, fg.bside
        kind = fg.bc
        if kind == "outflow":
            return own.copy()
        if kind == "wall":
            flip = self.sys.wall_flip(a).reshape((-1,) + (1,) * (own.ndim - 1))
            return own * flip
        # dirichlet: evaluate the case state at the face nodes and times
        t = self.table
        gids = fb.fg.left
        lo = self.grid.cell_lo(gids)
        sz = self.grid.cell_sizes(gids)
        xf = lo[:, a] + (sz[:, a] if side == 1 else 0.0)
        taus = t.basis_M.nodes
        out = np.empty_like(own)
        flip = self.sys.wall_flip(a).reshape((-1,) + (1,) * (own.ndim - 2))
        for it, tau in enumerate(taus):
            t_eval = self.t + tau * dt
            if self.d == 1:
                X = xf[None, :]
                mirror = own[:, :, it] * flip
                out[:, :, it] = self.case.ghost(a, side, X, t_eval, mirror, self.sys)
            else:
                trans = 1 - a
                ttrans = lo[:, trans][:, None] + sz[:, trans][:, None] \
                    * t.basis_M.nodes[None, :]
                Xf = np.broadcast_to(xf[:, None], ttrans.shape)
                X = np.stack([Xf, ttrans]) if a == 0 else np.stack([ttrans, Xf])
                mirror = own[:, :, it] * flip
                out[:, :, it] = self.case.ghost(a, side, X, t_eval, mirror, self.sys)
        return out

    def _candidate_update(self, q, dt, fluxes=None):
        t = self.table
        dxs = [self.active_sizes[:, a] for a in range(self.d)]
        vol = corrector.volume_integral(t, self.sys, q, dxs, dt, fluxes=fluxes)
        acc = vol
        if self.sys.has_source:
            acc = acc + corrector.source_integral(t, self.sys, q, dxs, dt)
        surf = np.zeros_like(acc)
        for fb in self._face_batches:
            self._accumulate_surface(surf, fb)
        wq = t.basis_N.weights
        mass = wq
        for _ in range(self.d - 1):
            mass = np.multiply.outer(t.basis_N.weights, mass)
        mass = mass * self.active_vol.reshape((-1,) + (1,) * self.d)
        UA = self.U[:, self.grid.active]
        return UA + (acc - surf) / mass[None]

    def _accumulate_surface(self, surf, fb, rows=None, momL=None, momR=None):
        """Add the signed test-function moments of one face batch.

        rows/momL/momR allow partial (delta) application for the limiter fix.
        """
        t = self.table
        fg = fb.fg
        a = fg.axis
        posL = fb.posL if rows is None else fb.posL[rows]
        posR = fb.posR if rows is None else fb.posR[rows]
        mL = fb.momL if momL is None else momL
        mR = fb.momR if momR is None else momR
        if fg.kind == "boundary":
            side = fg.bside
            if side == 1:
                self._scatter(surf, posL, mL, a, t.faceN_right, +1.0)
            else:
                self._scatter(surf, posL, mR, a, t.faceN_left, -1.0)
            return
        self._scatter(surf, posL, mL, a, t.faceN_right, +1.0)
        self._scatter(surf, posR, mR, a, t.faceN_left, -1.0)

    def _scatter(self, surf, pos, mom, a, trace, sign):
        if self.d == 1:
            contrib = sign * mom[:, :, 0][:, :, None] * trace[None, None, :]
            np.add.at(surf, (slice(None), pos), contrib)
            return
        if a == 0:  # x face: moments are over y test functions
            contrib = sign * np.einsum("mfk,x->mfkx", mom, trace)
        else:  # y face: moments over x
            contrib = sign * np.einsum("mfk,y->mfyk", mom, trace)
        np.add.at(surf, (slice(None), pos), contrib)

    # ------------------------------------------------------------------
    def _suball(self, history: bool):
        """Subcell views of every arena cell.

        With history=True, cells limited at t^n expose their stored averages
        (the limiter's working representation feeds the subcell halos); the
        detection bounds instead use the plain projection of u_h^n, which is
        what the candidate projection is compared against.
        """
        sub = lim.project_to_subcells(self.table, self.U)
        if history and self.troubled.any():
            sub[:, self.troubled] = self.vstore[:, self.troubled]
        if self.grid.n_active != self.grid.n_cells:
            # parents carry convex gathers of their children's views so halo
            # and bound transfers never leave the admissible hull
            mesh.restrict_parents(self.grid, sub, [self._sub_gath] * self.d)
        return sub

    def _detect_phase(self, Ustar, failed_cells, dt):
        t0 = time.perf_counter()
        g = self.grid
        suball = self._suball(history=False)
        own = suball[:, g.active]
        m = self.sys.m
        flat = own.reshape(m, g.n_active, -1)
        lo = flat.min(axis=-1)
        hi = flat.max(axis=-1)
        for off in NEIGHBOR_OFFSETS[self.d]:
            got = self._fetch(off, suball, "sub", self.t)
            gf = got.reshape(m, g.n_active, -1)
            lo = np.minimum(lo, gf.min(axis=-1))
            hi = np.maximum(hi, gf.max(axis=-1))
        vstar = lim.project_to_subcells(self.table, Ustar)
        report = lim.detect(self.sys, vstar, lo, hi, predictor_failed=failed_cells)
        if self.cfg.fault_injection > 0.0:
            inject = np.zeros(g.n_active, dtype=bool)
            for pos, gid in enumerate(g.active):
                u = _hash01(self.steps, int(g.level[gid]),
                            tuple(int(v) for v in g.ij[gid]))
                inject[pos] = u < self.cfg.fault_injection
            report.troubled |= inject
            report.cause[inject & (report.cause == lim.CAUSE_NONE)] = lim.CAUSE_DMP
        # halo views for the subcell solvers, assembled only on troubled rows;
        # limited cells expose their stored averages here
        views = {}
        own = None
        if report.troubled.any():
            rows = np.nonzero(report.troubled)[0]
            suball_h = self._suball(history=True)
            for off in NEIGHBOR_OFFSETS[self.d]:
                views[off] = self._fetch(off, suball_h, "sub", self.t, rows=rows)
            own = suball_h[:, g.active[rows]]
        self.timers["detect"] += time.perf_counter() - t0
        return report, views, own

    def _limit_phase(self, Ustar, report, views, own_sub, dt):
        t0 = time.perf_counter()
        g, t = self.grid, self.table
        S = t.n_sub
        tidx = np.nonzero(report.troubled)[0]
        T = tidx.size
        ext_shape = (self.sys.m, T) + (S + 2 * lim.HALO,) * self.d
        ext = np.empty(ext_shape)
        H = lim.HALO

        def put(dst_sl, src):
            ext[(slice(None), slice(None)) + dst_sl] = src

        if self.d == 1:
            put((slice(H, H + S),), own_sub)
            put((slice(0, H),), views[(-1,)][..., S - H:])
            put((slice(H + S, None),), views[(1,)][..., :H])
        else:
            sl_mid = slice(H, H + S)
            put((sl_mid, sl_mid), own_sub)
            for off in NEIGHBOR_OFFSETS[2]:
                vx = views[off]
                sly = {0: sl_mid, -1: slice(0, H), 1: slice(H + S, None)}[off[1]]
                slx = {0: sl_mid, -1: slice(0, H), 1: slice(H + S, None)}[off[0]]
                src_y = {0: slice(None), -1: slice(S - H, None),
                         1: slice(0, H)}[off[1]]
                src_x = {0: slice(None), -1: slice(S - H, None),
                         1: slice(0, H)}[off[0]]
                put((sly, slx), vx[:, :, src_y, src_x])

        h = [self.active_sizes[tidx, a] / S for a in range(self.d)]
        if self.cfg.limiter == "weno":
            v_new, bflux, ok = lim.ader_weno_step(self.sys, ext, self.d, h, dt)
            if not ok.all():
                bad = np.nonzero(~ok)[0]
                v_fb, bf_fb, ok_fb = lim.muscl_hancock_step(
                    self.sys, ext[:, bad], self.d, [ha[bad] for ha in h], dt)
                v_new[:, bad] = v_fb
                for key in bflux:
                    bflux[key][:, bad] = bf_fb[key]
                ok = ok.copy()
                ok[bad] = ok_fb
        else:
            v_new, bflux, ok = lim.muscl_hancock_step(self.sys, ext, self.d, h, dt)
        if not ok.all():
            bad = int(np.nonzero(~ok)[0][0])
            gid = g.active[tidx[bad]]
            raise LimiterFailure(
                f"subcell recomputation inadmissible in cell {self.grid.keys[gid]} "
                f"at t={self.t:.6g} (cause={lim.CAUSE_NAMES[int(report.cause[tidx[bad]])]})")

        Ustar[:, tidx] = lim.recombine(t, v_new)
        self._substitute_fluxes(Ustar, report, tidx, bflux, dt, v_new)
        self.timers["limit"] += time.perf_counter() - t0
        return v_new, tidx

    def _substitute_fluxes(self, Ustar, report, tidx, bflux, dt, v_new):
        """Commit limiter records on troubled faces and patch neighbors.

        The committed record is the limiter's time-integrated total flux
        through the face; the neighbor keeps its already computed transverse
        moment distribution and is shifted by the record's conservative total
        (patching higher moments with the piecewise-constant subcell fluxes
        would inject O(h^2) noise into smooth neighbors at every firing).
        """
        t = self.table
        g = self.grid
        S = t.n_sub
        troubled_pos = np.zeros(g.n_active, dtype=bool)
        troubled_pos[tidx] = True
        tindex = {int(p): k for k, p in enumerate(tidx)}
        mass = t.basis_N.weights
        for _ in range(self.d - 1):
            mass = np.multiply.outer(t.basis_N.weights, mass)
        mass = mass * self.active_vol.reshape((-1,) + (1,) * self.d)
        # distribution vectors re-spreading a total over the test moments
        b_plain = t.basis_N.weights
        b_seg = [self.grid.r * mats.sum(axis=1) for mats in t.seg_subface_int]

        tindex_arr = np.full(g.n_active, -1, dtype=np.int64)
        tindex_arr[tidx] = np.arange(tidx.size)

        for fb in self._face_batches:
            fg = fb.fg
            a = fg.axis
            if fg.kind == "boundary":
                continue
            tl = troubled_pos[fb.posL]
            tr = troubled_pos[fb.posR]
            rows = np.nonzero(tl | tr)[0]
            if rows.size == 0:
                continue
            if fg.kind == "same":
                owner_left = tl[rows]
                own_pos = np.where(owner_left, fb.posL[rows], fb.posR[rows])
                kk = tindex_arr[own_pos]
                recL = bflux[(a, 1)][:, kk]
                recR = bflux[(a, 0)][:, kk]
                if self.d == 1:
                    recL = recL[:, :, None]
                    recR = recR[:, :, None]
                rec = np.where(owner_left[None, :, None], recL, recR)
                total_new = rec.mean(axis=-1) * fb.measure[rows][None, :]
                for side_is_left, posv, mom, trace, sign in (
                    (True, fb.posL[rows], fb.momL, t.faceN_right, +1.0),
                    (False, fb.posR[rows], fb.momR, t.faceN_left, -1.0),
                ):
                    mom_old = mom[:, rows].copy()
                    delta_tot = total_new - mom_old.sum(axis=-1)
                    mom_new = mom_old + delta_tot[:, :, None] * b_plain[None, None, :]
                    mom[:, rows] = mom_new
                    untr = ~troubled_pos[posv]
                    if untr.any():
                        self._apply_moment_delta_batch(
                            Ustar, posv[untr], (mom_new - mom_old)[:, untr], a,
                            trace, sign, mass)
                continue
            # jump faces: rare, handled per row
            for row in rows:
                posL = int(fb.posL[row])
                posR = int(fb.posR[row])
                fine_is_left = fg.fine_side == 0
                fine_pos = posL if fine_is_left else posR
                coarse_pos = posR if fine_is_left else posL
                fine_side = 1 if fine_is_left else 0
                if troubled_pos[fine_pos]:
                    rec = self._bflux_row(bflux, a, fine_side, tindex[fine_pos])
                    total_new = rec.mean(axis=1) * fb.measure[row]
                    if troubled_pos[coarse_pos]:
                        self._reconcile_coarse_cell(
                            Ustar, v_new, bflux, tindex[coarse_pos], coarse_pos,
                            a, 1 - fine_side, fg.slot, rec, fb.measure[row])
                else:
                    crec = self._bflux_row(bflux, a, 1 - fine_side,
                                           tindex[coarse_pos])
                    ov = self._segment_overlap(fg.slot)
                    total_new = (crec @ ov) * fb.measure[row] * self.grid.r
                bL = b_plain if fine_is_left else b_seg[fg.slot]
                bR = b_seg[fg.slot] if fine_is_left else b_plain
                for pos, mom, b, trace, sign in (
                    (posL, fb.momL, bL, t.faceN_right, +1.0),
                    (posR, fb.momR, bR, t.faceN_left, -1.0),
                ):
                    mom_old = mom[:, row].copy()
                    delta_tot = total_new - mom_old.sum(axis=-1)
                    mom_new = mom_old + delta_tot[:, None] * b[None, :]
                    mom[:, row] = mom_new
                    if troubled_pos[pos]:
                        continue
                    self._apply_moment_delta(Ustar, pos, mom_new - mom_old, a,
                                             trace, sign, mass)

    def _apply_moment_delta_batch(self, Ustar, pos, delta, a, trace, sign, mass):
        """Batched neighbor patch: delta is (m, n, N+1), pos unique per batch."""
        if self.d == 1:
            contrib = sign * delta[:, :, 0][:, :, None] * trace[None, None, :]
        elif a == 0:
            contrib = sign * np.einsum("mfk,x->mfkx", delta, trace)
        else:
            contrib = sign * np.einsum("mfk,y->mfyk", delta, trace)
        Ustar[:, pos] -= contrib / mass[pos][None]

    def _bflux_row(self, bflux, axis, side, k):
        rec = bflux[(axis, side)][:, k]
        return rec if self.d == 2 else rec[:, None]

    def _segment_overlap(self, slot):
        """Fraction of each coarse boundary subcell inside a fine segment."""
        S = self.table.n_sub
        r = self.grid.r
        lo, hi = slot / r, (slot + 1) / r
        edges = np.arange(S + 1) / S
        return np.clip(np.minimum(edges[1:], hi) - np.maximum(edges[:-1], lo),
                       0.0, None)

    def _reconcile_coarse_cell(self, Ustar, v_new, bflux, kc, coarse_pos, axis,
                               cside, slot, fine_rec, fine_measure):
        """Fix a troubled coarse cell's means for a committed fine record.

        Only needed when both sides of a jump face are troubled: the face
        carries the fine solver's record while the coarse solver advanced
        with its own boundary fluxes; the difference is pushed into the
        coarse boundary subcells (exact conservation, then re-recombined).
        """
        S = self.table.n_sub
        r = self.grid.r
        crec = self._bflux_row(bflux, axis, cside, kc)
        if self.d == 1:
            committed = fine_rec[:, 0]
            used = crec[:, 0]
            delta_k = (committed - used)[:, None]
            cover = np.array([1.0])
            ks = np.array([0])
        else:
            coarse_measure = fine_measure * r
            edges_f = (slot + np.arange(S + 1) / S) / r
            edges_c = np.arange(S + 1) / S
            committed = np.zeros((self.sys.m, S))
            cover = np.zeros(S)
            for k in range(S):
                for j in range(S):
                    ov = min(edges_f[j + 1], edges_c[k + 1]) - \
                        max(edges_f[j], edges_c[k])
                    if ov > 0:
                        committed[:, k] += fine_rec[:, j] * ov * coarse_measure
                        cover[k] += ov
            used = crec * (cover[None, :] * coarse_measure)
            delta_k = committed - used
            ks = np.nonzero(cover > 0)[0]
        if not np.any(np.abs(delta_k) > 0):
            return
        sizes = self.active_sizes[coarse_pos]
        subvol = np.prod(sizes) / S**self.d
        sgn = -1.0 if cside == 1 else +1.0
        vv = v_new[:, kc]
        sl = [slice(None)] * self.d
        sl[self.d - 1 - axis] = S - 1 if cside == 1 else 0
        block = vv[(slice(None),) + tuple(sl)]
        if self.d == 1:
            vv[(slice(None),) + tuple(sl)] = block + sgn * delta_k[:, 0] / subvol
        else:
            block[:, ks] += sgn * delta_k[:, ks] / subvol
        Ustar[:, coarse_pos] = lim.recombine(self.table, vv[:, None])[:, 0]

    def _apply_moment_delta(self, Ustar, pos, delta, a, trace, sign, mass):
        t = self.table
        if self.d == 1:
            contrib = sign * delta[:, 0][:, None] * trace[None, :]
            Ustar[:, pos] -= contrib / mass[pos]
            return
        if a == 0:
            contrib = sign * np.einsum("mk,x->mkx", delta, trace)
        else:
            contrib = sign * np.einsum("mk,y->myk", delta, trace)
        Ustar[:, pos] -= contrib / mass[pos]

    # ------------------------------------------------------------------
    def conserved_totals(self):
        w = self.table.basis_N.weights
        UA = self.U[:, self.grid.active]
        means = UA
        for a in range(self.d):
            means = axdot(w[None, :], means, means.ndim - 1 - a)
        means = means.reshape(self.sys.m, -1)
        return means @ self.active_vol

    def step(self):
        self._remesh_phase()
        mesh.restrict_parents(self.grid, self.U, self._gather_mats("N"))
        dt = self.compute_dt()

        W = self._reconstruct()
        t0 = time.perf_counter()
        dxs = [self.active_sizes[:, a] for a in range(self.d)]
        q_init = None
        if self._q_warm is not None and self._q_warm.shape[1] == W.shape[1]:
            q_init = axdot(self._tshift, self._q_warm, predictor.TIME_AXIS)
        q, failed, fluxes = predictor.predict_with_fluxes(self.table, self.sys, W,
                                                          dxs, dt, q_init=q_init)
        self._q_warm = q
        self.timers["predict"] += time.perf_counter() - t0

        self._face_fluxes(q, dt)
        Ustar = self._candidate_update(q, dt, fluxes)

        if self.cfg.limiter != "off" and self.cfg.N > 0:
            report, views, own_sub = self._detect_phase(Ustar, failed, dt)
            new_troubled = np.zeros(self.grid.n_cells, dtype=bool)
            new_cause = np.zeros(self.grid.n_cells, dtype=np.int8)
            if report.troubled.any():
                v_new, tidx = self._limit_phase(Ustar, report, views, own_sub, dt)
                gids = self.grid.active[tidx]
                new_troubled[gids] = True
                new_cause[gids] = report.cause[tidx]
                self.vstore[:, gids] = v_new
                self.troubled_total += int(tidx.size)
                self.troubled_max = max(self.troubled_max, int(tidx.size))
            self.troubled = new_troubled
            self.cause = new_cause
        else:
            if failed.any():
                bad = int(np.nonzero(failed)[0][0])
                raise LimiterFailure(
                    f"predictor failure without limiter at active cell {bad}")

        if not np.isfinite(Ustar).all():
            bad = np.argwhere(~np.isfinite(Ustar))[0]
            raise LimiterFailure(f"non-finite state committed at {bad}")

        self.U[:, self.grid.active] = Ustar
        self.t += dt
        self.steps += 1
        return dt

    def run(self, hooks=None) -> RunSummary:
        while self.t < self.cfg.t_end - 1e-13 and self.steps < self.cfg.max_steps:
            self.step()
            if hooks:
                for h in hooks:
                    h(self)
        totals = self.conserved_totals()
        mask = self.sys.conserved_audit_mask
        base = np.abs(self._audit0[mask])
        drift = float(np.max(np.abs(totals[mask] - self._audit0[mask]) /
                             np.maximum(base, 1.0)))
        return RunSummary(
            t_final=self.t, steps=self.steps, n_active=self.grid.n_active,
            troubled_total=self.troubled_total, troubled_max=self.troubled_max,
            conservation_drift=drift, timers=dict(self.timers))

    # convenience views -------------------------------------------------
    def active_nodal_prims(self):
        UA = self.U[:, self.grid.active]
        V, ok = self.sys.primitives(UA)
        return V, ok

    def cell_means(self):
        w = self.table.basis_N.weights
        means = self.U[:, self.grid.active]
        for a in range(self.d):
            means = axdot(w[None, :], means, means.ndim - 1 - a)
        return means.reshape(self.sys.m, -1)
