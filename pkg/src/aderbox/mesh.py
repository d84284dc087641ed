"""Cartesian grid with cell-by-cell AMR: arena, virtual neighbors, remeshing.

The tree is stored flat: every cell (active leaves and their ancestors) lives
in one arena addressed by (level, multi-index), with parallel numpy arrays
for level/index/status and the solution dof kept alongside by the driver.
Parents always carry the L2 restriction of their subtree, which makes the
"virtually refined / virtually gathered" neighbor data of any active cell a
gather plus a small per-axis matrix, planned once per topology change:

  * same-level neighbor  -> plain gather
  * coarser neighbor     -> gather ancestor + per-axis slot projection
  * finer neighbor       -> gather the parent's restricted dof

Physical boundaries are resolved into the same plans (periodic wraps, wall
mirrors with node reversal, outflow clamps) except Dirichlet ghosts, which
are evaluated per step by the problem's boundary provider.

Face-level 2:1 balance is enforced so flux faces join at most one level.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BC_KINDS = ("periodic", "wall", "outflow", "dirichlet")

ACTIVE = 0
PARENT = 1


@dataclass(frozen=True)
class BCSpec:
    """Boundary kinds per axis: ((x_lo, x_hi), (y_lo, y_hi))."""

    sides: tuple

    def __post_init__(self):
        for lo, hi in self.sides:
            for k in (lo, hi):
                if k not in BC_KINDS:
                    raise ValueError(f"unknown boundary kind {k!r}")
            if ("periodic" in (lo, hi)) and lo != hi:
                raise ValueError("periodic boundaries must pair up per axis")

    def kind(self, axis: int, side: int) -> str:
        return self.sides[axis][side]


@dataclass
class PlanGroup:
    """One homogeneous batch of virtual-neighbor queries for an offset."""

    paths: tuple  # per-axis tuple of child-slot chains (coarse -> fine)
    mirror: tuple  # axes along which the data must be mirrored (wall images)
    dest: np.ndarray  # positions in the active list
    src: np.ndarray  # arena gids to gather from


@dataclass
class StencilPlan:
    groups: list[PlanGroup] = field(default_factory=list)
    dirichlet_dest: np.ndarray = None  # active-list positions needing BC evaluation
    dirichlet_keys: list = None  # (level, idx tuple) of each ghost region


@dataclass
class FaceGroup:
    """Faces sharing axis/kind; L is the lower-coordinate side."""

    axis: int
    kind: str  # "same" | "jump" | "boundary"
    left: np.ndarray  # arena gids (same/jump) or owner gids (boundary)
    right: np.ndarray
    # jump faces: which side is fine, transverse slot of the fine sub-face
    fine_side: int = -1  # 0: fine cell on the left of the face, 1: on the right
    slot: int = -1
    # boundary faces: which side of the domain and the BC kind
    bside: int = -1
    bc: str = ""


class Grid:
    """Level-0 uniform Cartesian mesh plus the cell-by-cell refinement tree."""

    def __init__(self, d, extents, n0, r=2, l_max=0, bc=None):
        if d not in (1, 2):
            raise ValueError("d must be 1 or 2")
        self.d = d
        self.extents = tuple((float(lo), float(hi)) for lo, hi in extents)
        self.n0 = tuple(int(n) for n in n0)
        if len(self.extents) != d or len(self.n0) != d:
            raise ValueError("extents/n0 must list one entry per axis")
        if r not in (2, 3):
            raise ValueError("refinement factor must be 2 or 3")
        self.r = int(r)
        self.l_max = int(l_max)
        self.bc = bc if bc is not None else BCSpec(tuple(("periodic", "periodic")
                                                         for _ in range(d)))
        self.dx0 = np.array([(hi - lo) / n for (lo, hi), n in zip(self.extents, self.n0)])

        keys = []
        if d == 1:
            keys = [(0, ix) for ix in range(self.n0[0])]
        else:
            keys = [(0, ix, iy) for iy in range(self.n0[1]) for ix in range(self.n0[0])]
        self._build(keys, [ACTIVE] * len(keys))

    # -- arena ---------------------------------------------------------------
    def _build(self, keys, status):
        order = sorted(range(len(keys)), key=lambda i: _sort_key(keys[i]))
        self.keys = [keys[i] for i in order]
        self.key2gid = {k: g for g, k in enumerate(self.keys)}
        self.level = np.array([k[0] for k in self.keys], dtype=np.int64)
        self.ij = np.array([k[1:] for k in self.keys], dtype=np.int64)
        self.status = np.array([status[i] for i in order], dtype=np.int8)
        self.active = np.nonzero(self.status == ACTIVE)[0]
        self.n_cells = len(self.keys)

    @property
    def n_active(self) -> int:
        return self.active.size

    def level_count(self, level: int) -> np.ndarray:
        return np.array([n * self.r**level for n in self.n0], dtype=np.int64)

    def spacing(self, level: int) -> np.ndarray:
        return self.dx0 / float(self.r) ** int(level)

    def cell_sizes(self, gids) -> np.ndarray:
        """Per-axis sizes, shape (len(gids), d)."""
        return self.dx0[None, :] / (float(self.r) ** self.level[gids])[:, None]

    def cell_lo(self, gids) -> np.ndarray:
        sz = self.cell_sizes(gids)
        lo = np.array([e[0] for e in self.extents])
        return lo[None, :] + self.ij[gids] * sz

    def cell_volume(self, gids) -> np.ndarray:
        return np.prod(self.cell_sizes(gids), axis=1)

    # -- reference mapping -----------------------------------------------------
    def to_reference(self, gid: int, x) -> np.ndarray:
        lo = self.cell_lo(np.array([gid]))[0]
        sz = self.cell_sizes(np.array([gid]))[0]
        xi = (np.asarray(x, dtype=float) - lo) / sz
        if np.any(xi < -1e-12) or np.any(xi > 1 + 1e-12):
            raise ValueError("point outside the cell")
        return xi

    def from_reference(self, gid: int, xi) -> np.ndarray:
        lo = self.cell_lo(np.array([gid]))[0]
        sz = self.cell_sizes(np.array([gid]))[0]
        return lo + np.asarray(xi, dtype=float) * sz

    # -- region resolution -----------------------------------------------------
    def resolve_region(self, level: int, idx: tuple):
        """Find the arena cell covering the region (level, idx).

        Returns (gid, paths): `paths` lists, per axis, the child-slot chain to
        project the found (coarser) cell's data down to the queried size;
        empty chains mean a direct hit (the hit may be a PARENT, whose
        restricted dof stands in for the finer subtree).
        """
        lev = level
        cur = tuple(idx)
        chains = [[] for _ in range(self.d)]
        while lev >= 0:
            key = (lev,) + cur
            gid = self.key2gid.get(key)
            if gid is not None:
                return gid, tuple(tuple(reversed(c)) for c in chains)
            for a in range(self.d):
                chains[a].append(cur[a] % self.r)
            cur = tuple(c // self.r for c in cur)
            lev -= 1
        raise KeyError(f"region ({level}, {idx}) not covered by the arena")

    # -- stencil plans ---------------------------------------------------------
    def build_plan(self, offset: tuple) -> StencilPlan:
        """Virtual-neighbor plan for all active cells at the given offset."""
        groups: dict = {}
        diri_dest, diri_keys = [], []
        for pos, gid in enumerate(self.active):
            lev = int(self.level[gid])
            n_lvl = [int(n) * self.r**lev for n in self.n0]
            idx = [int(v) + o for v, o in zip(self.ij[gid], offset)]
            mirror = []
            skip = False
            for a in range(self.d):
                if 0 <= idx[a] < n_lvl[a]:
                    continue
                kind = self.bc.kind(a, 0 if idx[a] < 0 else 1)
                if kind == "periodic":
                    idx[a] %= n_lvl[a]
                elif kind == "wall":
                    idx[a] = -idx[a] - 1 if idx[a] < 0 else 2 * n_lvl[a] - idx[a] - 1
                    mirror.append(a)
                elif kind == "outflow":
                    idx[a] = min(max(idx[a], 0), n_lvl[a] - 1)
                else:  # dirichlet: runtime evaluation
                    diri_dest.append(pos)
                    diri_keys.append((lev, tuple(idx)))
                    skip = True
                    break
            if skip:
                continue
            src, paths = self.resolve_region(lev, tuple(idx))
            key = (paths, tuple(mirror))
            groups.setdefault(key, ([], []))
            groups[key][0].append(pos)
            groups[key][1].append(src)
        plan = StencilPlan()
        for (paths, mirror), (dest, src) in sorted(groups.items()):
            plan.groups.append(PlanGroup(paths=paths, mirror=mirror,
                                         dest=np.array(dest, dtype=np.int64),
                                         src=np.array(src, dtype=np.int64)))
        plan.dirichlet_dest = np.array(diri_dest, dtype=np.int64)
        plan.dirichlet_keys = diri_keys
        return plan

    def build_plans(self, offsets) -> dict:
        return {tuple(o): self.build_plan(tuple(o)) for o in offsets}

    # -- face table --------------------------------------------------------------
    def build_faces(self) -> list[FaceGroup]:
        buckets: dict = {}

        def put(key, a, b):
            buckets.setdefault(key, ([], []))
            buckets[key][0].append(a)
            buckets[key][1].append(b)

        for gid in self.active:
            lev = int(self.level[gid])
            n_lvl = [int(n) * self.r**lev for n in self.n0]
            for a in range(self.d):
                for side in (0, 1):
                    idx = list(int(v) for v in self.ij[gid])
                    idx[a] += 1 if side == 1 else -1
                    if not 0 <= idx[a] < n_lvl[a]:
                        kind = self.bc.kind(a, side)
                        if kind == "periodic":
                            idx[a] %= n_lvl[a]
                        else:
                            put(("boundary", a, side, kind), gid, -1)
                            continue
                    nbr, paths = self.resolve_region(lev, tuple(idx))
                    depth = max(len(c) for c in paths)
                    if depth == 0:
                        if self.status[nbr] == ACTIVE:
                            if side == 1:  # own the face on the high side
                                put(("same", a), gid, nbr)
                        # PARENT: finer cells register from their side
                        continue
                    if depth > 1:
                        raise RuntimeError("face balance violated (jump > 1 level)")
                    # this cell is fine against a coarser active neighbor
                    slot = 0
                    if self.d == 2:
                        t_axis = 1 - a
                        slot = int(self.ij[gid][t_axis]) % self.r
                    put(("jump", a, 1 - side, slot), gid, nbr)
        out = []
        for key in sorted(buckets, key=repr):
            a_list, b_list = buckets[key]
            if key[0] == "same":
                out.append(FaceGroup(axis=key[1], kind="same",
                                     left=np.array(a_list), right=np.array(b_list)))
            elif key[0] == "jump":
                axis, fine_side, slot = key[1], key[2], key[3]
                fine = np.array(a_list)
                coarse = np.array(b_list)
                left, right = (coarse, fine) if fine_side == 1 else (fine, coarse)
                out.append(FaceGroup(axis=axis, kind="jump", left=left, right=right,
                                     fine_side=fine_side, slot=slot))
            else:
                _, axis, side, bc = key
                own = np.array(a_list)
                out.append(FaceGroup(axis=axis, kind="boundary", left=own, right=own,
                                     bside=side, bc=bc))
        return out

    # -- parent restriction -------------------------------------------------------
    def restriction_maps(self):
        """Per level (descending): (parent gids, children gids (P, r^d))."""
        out = []
        parents = np.nonzero(self.status == PARENT)[0]
        if parents.size == 0:
            return out
        by_level: dict = {}
        for gid in parents:
            by_level.setdefault(int(self.level[gid]), []).append(gid)
        for lev in sorted(by_level, reverse=True):
            plist = by_level[lev]
            n_child = self.r**self.d
            children = np.empty((len(plist), n_child), dtype=np.int64)
            for i, gid in enumerate(plist):
                base = [int(v) * self.r for v in self.ij[gid]]
                k = 0
                for sy in range(self.r if self.d == 2 else 1):
                    for sx in range(self.r):
                        idx = (base[0] + sx,) if self.d == 1 else \
                            (base[0] + sx, base[1] + sy)
                        children[i, k] = self.key2gid[(lev + 1,) + idx]
                        k += 1
            out.append((np.array(plist, dtype=np.int64), children))
        return out

    # -- remeshing ------------------------------------------------------------
    def remesh(self, refine_mask: np.ndarray, coarsen_mask: np.ndarray):
        """Apply refinement/coarsening marks (per active cell, in active order).

        Returns (changed, old_key2gid).  Data rebuild contract: every new cell
        either existed before (copy its data by old gid; merged parents carry
        their maintained L2 restriction) or is a fresh child whose parent key
        existed before (slot-project the parent's data).
        """
        refine = set()
        for pos in np.nonzero(refine_mask)[0]:
            gid = int(self.active[pos])
            if self.level[gid] < self.l_max:
                refine.add(gid)

        # sibling groups where all r^d children agree to coarsen
        coarsen_votes: dict = {}
        for pos in np.nonzero(coarsen_mask)[0]:
            gid = int(self.active[pos])
            if self.level[gid] == 0 or gid in refine:
                continue
            lev = int(self.level[gid])
            pidx = tuple(int(v) // self.r for v in self.ij[gid])
            coarsen_votes.setdefault((lev - 1,) + pidx, []).append(gid)
        merges = []
        removed = set()
        merged_parents = set()
        n_child = self.r**self.d
        for pkey, members in sorted(coarsen_votes.items()):
            if len(members) != n_child:
                continue
            if self._coarsening_breaks_balance(pkey):
                continue
            merges.append((pkey, members))
            removed.update(members)
            merged_parents.add(pkey)

        if not refine and not merges:
            return False, None

        new_keys = []
        new_status = []
        for gid in range(self.n_cells):
            key = self.keys[gid]
            if gid in removed:
                continue
            if key in merged_parents:
                new_keys.append(key)
                new_status.append(ACTIVE)
            elif gid in refine:
                new_keys.append(key)
                new_status.append(PARENT)
                for cidx in _children_of(key, self.r, self.d):
                    new_keys.append(cidx)
                    new_status.append(ACTIVE)
            else:
                new_keys.append(key)
                new_status.append(int(self.status[gid]))

        old_map = self.key2gid
        self._build(new_keys, new_status)
        self._enforce_balance()
        return True, old_map

    def _coarsening_breaks_balance(self, pkey) -> bool:
        lev = pkey[0]
        pidx = pkey[1:]
        n_lvl = [int(n) * self.r**lev for n in self.n0]
        for a in range(self.d):
            for step in (-1, 1):
                idx = list(pidx)
                idx[a] += step
                if not 0 <= idx[a] < n_lvl[a]:
                    kind = self.bc.kind(a, 0 if idx[a] < 0 else 1)
                    if kind != "periodic":
                        continue
                    idx[a] %= n_lvl[a]
                key = (lev,) + tuple(idx)
                gid = self.key2gid.get(key)
                if gid is not None and self.status[gid] == PARENT:
                    # neighbor region holds cells at lev+1 -> parent at lev
                    # would face a 2-level jump only if those children are
                    # themselves refined; check the face-adjacent children
                    base = [v * self.r for v in idx]
                    t_axes = [t for t in range(self.d) if t != a]
                    face_s = 0 if step == -1 else self.r - 1
                    # children adjacent to the parent's face
                    span = range(self.r) if t_axes else [0]
                    for t in span:
                        cidx = list(base)
                        cidx[a] = base[a] + (self.r - 1 if step == -1 else 0)
                        if t_axes:
                            cidx[t_axes[0]] = base[t_axes[0]] + t
                        cgid = self.key2gid.get((lev + 1,) + tuple(cidx))
                        if cgid is not None and self.status[cgid] == PARENT:
                            return True
        return False

    def _enforce_balance(self):
        """Refine until every face joins at most one level difference."""
        while True:
            need = set()
            for gid in self.active:
                lev = int(self.level[gid])
                if lev >= self.l_max:
                    continue
                n_lvl = [int(n) * self.r**lev for n in self.n0]
                for a in range(self.d):
                    for step in (-1, 1):
                        idx = list(int(v) for v in self.ij[gid])
                        idx[a] += step
                        if not 0 <= idx[a] < n_lvl[a]:
                            if self.bc.kind(a, 0 if idx[a] < 0 else 1) != "periodic":
                                continue
                            idx[a] %= n_lvl[a]
                        key = (lev,) + tuple(idx)
                        nbr = self.key2gid.get(key)
                        if nbr is None or self.status[nbr] != PARENT:
                            continue
                        base = [v * self.r for v in idx]
                        t_axes = [t for t in range(self.d) if t != a]
                        span = range(self.r) if t_axes else [0]
                        for t in span:
                            cidx = list(base)
                            cidx[a] = base[a] + (self.r - 1 if step == -1 else 0)
                            if t_axes:
                                cidx[t_axes[0]] = base[t_axes[0]] + t
                            cgid = self.key2gid.get((lev + 1,) + tuple(cidx))
                            if cgid is not None and self.status[cgid] == PARENT:
                                need.add(gid)
            if not need:
                break
            keys = list(self.keys)
            status = list(self.status)
            for gid in sorted(need):
                status[gid] = PARENT
                for cidx in _children_of(self.keys[gid], self.r, self.d):
                    keys.append(cidx)
                    status.append(ACTIVE)
            self._build(keys, status)


def _children_of(key, r, d):
    lev = key[0]
    base = [v * r for v in key[1:]]
    out = []
    if d == 1:
        for sx in range(r):
            out.append((lev + 1, base[0] + sx))
    else:
        for sy in range(r):
            for sx in range(r):
                out.append((lev + 1, base[0] + sx, base[1] + sy))
    return out


def _sort_key(key):
    return (key[0],) + tuple(reversed(key[1:]))


# ---------------------------------------------------------------------------
# Refinement indicator (second-derivative oscillation measure)
# ---------------------------------------------------------------------------

def lohner_indicator(means: dict, d: int, eps: float = 0.01) -> np.ndarray:
    """Smoothness indicator chi per cell from 3^d neighborhood means.

    `means` maps offset tuples (entries of {-1,0,1}^d) to (C,) arrays of the
    virtual neighbor cell means of the indicator field.  Uses undivided
    one-sided first differences and central (plus cross) second differences;
    eps filters ripples relative to the field magnitude.
    """
    c = means[(0,) * d]
    num = np.zeros_like(c)
    den = np.zeros_like(c)
    for k in range(d):
        ek = tuple(1 if i == k else 0 for i in range(d))
        mk = tuple(-1 if i == k else 0 for i in range(d))
        p, m = means[ek], means[mk]
        num += (p - 2.0 * c + m) ** 2
        den += (np.abs(p - c) + np.abs(c - m) + eps * (np.abs(p) + 2 * np.abs(c) + np.abs(m))) ** 2
        for l in range(k + 1, d):
            el = tuple(1 if i == l else 0 for i in range(d))
            pp = means[tuple(np.add(ek, el))]
            pm = means[tuple(np.subtract(ek, el))]
            mp = means[tuple(np.subtract(el, ek))]
            mm = means[tuple(np.negative(np.add(ek, el)))]
            cross = 0.25 * (pp - pm - mp + mm)
            num += 2.0 * cross**2
            gk = np.abs(means[ek] - c) + np.abs(c - means[mk])
            gl = np.abs(means[el] - c) + np.abs(c - means[tuple(-x for x in el)])
            filt = eps * (np.abs(pp) + np.abs(pm) + np.abs(mp) + np.abs(mm))
            den += 2.0 * (0.5 * (gk + gl) + filt) ** 2
    with np.errstate(all="ignore"):
        chi = np.sqrt(num / den)
    return np.where(den > 0, chi, 0.0)


# ---------------------------------------------------------------------------
# Data movement driven by the plans (all batched)
# ---------------------------------------------------------------------------

def _compose_chain(mats, chain):
    out = mats[chain[0]]
    for s in chain[1:]:
        out = mats[s] @ out
    return out


def gather_virtual(plan: StencilPlan, data: np.ndarray, d: int, n_active: int,
                   slot_mats, mirror_signs=None, rows=None) -> np.ndarray:
    """Assemble the virtual same-size neighbor data for active cells.

    data: arena array (m, C_total, [nodes...]); slot_mats[a] lists the
    per-slot 1D projection matrices for the degree living on axis a
    (axis 0 = x = last array axis).  mirror_signs[a], when given, is the
    per-component sign vector for wall images along axis a.  Dirichlet
    entries are left at zero for the caller to fill.  With `rows` (active
    positions), only those cells are assembled, in the given order.
    """
    from .operators import axdot

    m = data.shape[0]
    rowpos = None
    if rows is not None:
        rowpos = np.full(n_active, -1, dtype=np.int64)
        rowpos[rows] = np.arange(len(rows))
        out = np.zeros((m, len(rows)) + data.shape[2:])
    else:
        out = np.zeros((m, n_active) + data.shape[2:])
    for g in plan.groups:
        dest = g.dest
        src = g.src
        if rowpos is not None:
            mapped = rowpos[dest]
            sel = mapped >= 0
            if not sel.any():
                continue
            dest = mapped[sel]
            src = src[sel]
        chunk = data[:, src]
        for a in range(d):
            if g.paths[a]:
                mat = _compose_chain(slot_mats[a], g.paths[a])
                chunk = axdot(mat, chunk, chunk.ndim - 1 - a)
        for a in g.mirror:
            ax = chunk.ndim - 1 - a
            chunk = np.flip(chunk, axis=ax)
            if mirror_signs is not None:
                shape = (m,) + (1,) * (chunk.ndim - 1)
                chunk = chunk * np.asarray(mirror_signs[a]).reshape(shape)
        out[:, dest] = chunk
    return out


def rebuild_cell_data(grid: Grid, old_map: dict, old_data: np.ndarray,
                      proj_mats) -> np.ndarray:
    """Carry per-cell data across a remesh.

    Cells that existed keep their data; fresh children are slot projections
    of their parent's old data (proj_mats[a] lists per-slot 1D matrices for
    axis a).  Works for any nodal payload with shape (m, C, [nodes...]).
    """
    from .operators import axdot

    new = np.zeros(old_data.shape[:1] + (grid.n_cells,) + old_data.shape[2:])
    copy_new, copy_old = [], []
    fresh: dict = {}
    for gid, key in enumerate(grid.keys):
        old = old_map.get(key)
        if old is not None:
            copy_new.append(gid)
            copy_old.append(old)
            continue
        lev = key[0]
        pidx = tuple(v // grid.r for v in key[1:])
        slots = tuple(v % grid.r for v in key[1:])
        parent_old = old_map[(lev - 1,) + pidx]
        fresh.setdefault(slots, ([], []))
        fresh[slots][0].append(gid)
        fresh[slots][1].append(parent_old)
    if copy_new:
        new[:, np.array(copy_new)] = old_data[:, np.array(copy_old)]
    for slots, (gids, parents) in sorted(fresh.items()):
        chunk = old_data[:, np.array(parents)]
        for a in range(grid.d):
            chunk = axdot(proj_mats[a][slots[a]], chunk, chunk.ndim - 1 - a)
        new[:, np.array(gids)] = chunk
    return new


def restrict_parents(grid: Grid, data: np.ndarray, gather_mats) -> None:
    """Refresh every parent's payload as the L2 restriction of its children.

    Processes levels fine-to-coarse so multi-level trees stay consistent;
    gather_mats[a] lists per-slot 1D gather matrices for axis a.  In place.
    """
    from .operators import axdot

    for parents, children in grid.restriction_maps():
        acc = None
        for k in range(children.shape[1]):
            slots = (k % grid.r,) if grid.d == 1 else (k % grid.r, k // grid.r)
            chunk = data[:, children[:, k]]
            for a in range(grid.d):
                chunk = axdot(gather_mats[a][slots[a]], chunk, chunk.ndim - 1 - a)
            acc = chunk if acc is None else acc + chunk
        data[:, parents] = acc


def region_box(grid: Grid, level: int, idx: tuple):
    """Physical (lo, size) of an arbitrary region key (possibly a ghost)."""
    sz = grid.dx0 / float(grid.r) ** level
    lo = np.array([e[0] for e in grid.extents]) + np.asarray(idx, dtype=float) * sz
    return lo, sz
