"""Mesh/AMR tests: arena, virtual neighbors, indicator, remesh invariants."""

import numpy as np
import pytest

from aderbox.mesh import (
    ACTIVE,
    PARENT,
    BCSpec,
    Grid,
    gather_virtual,
    lohner_indicator,
    rebuild_cell_data,
    region_box,
    restrict_parents,
)
from aderbox.operators import build_operator_tables


def make_grid(d=2, n=4, r=3, l_max=2, bc_kind="periodic"):
    bc = BCSpec(tuple((bc_kind, bc_kind) for _ in range(d)))
    return Grid(d=d, extents=((0.0, 1.0),) * d, n0=(n,) * d, r=r, l_max=l_max, bc=bc)


def test_reference_map_round_trip():
    g = make_grid(d=2, n=4)
    gid = g.key2gid[(0, 2, 1)]
    lo = g.cell_lo(np.array([gid]))[0]
    assert np.allclose(lo, [0.5, 0.25])
    x = g.from_reference(gid, [0.25, 0.5])
    assert np.allclose(x, [0.5625, 0.375])
    assert np.allclose(g.to_reference(gid, x), [0.25, 0.5], atol=1e-14)
    rng = np.random.default_rng(0)
    for _ in range(10):
        xi = rng.uniform(0, 1, 2)
        assert np.allclose(g.to_reference(gid, g.from_reference(gid, xi)), xi,
                           atol=1e-14)
    with pytest.raises(ValueError):
        g.to_reference(gid, [0.0, 0.0])


def test_tiling_and_volume():
    g = make_grid(d=2, n=4, r=3, l_max=2)
    # refine two cells, then one of the children again
    mask = np.zeros(g.n_active, dtype=bool)
    mask[[0, 5]] = True
    changed, _ = g.remesh(mask, np.zeros_like(mask))
    assert changed
    mask2 = np.zeros(g.n_active, dtype=bool)
    mask2[3] = True
    g.remesh(mask2, np.zeros_like(mask2))
    vol = g.cell_volume(g.active).sum()
    assert abs(vol - 1.0) < 1e-12


def test_resolve_region_and_paths():
    g = make_grid(d=2, n=4, r=2, l_max=2)
    mask = np.zeros(g.n_active, dtype=bool)
    mask[0] = True  # refine cell (0,0,0)
    g.remesh(mask, np.zeros_like(mask))
    # the fine region inside the refined cell resolves to its own key
    gid, paths = g.resolve_region(1, (1, 1))
    assert g.keys[gid] == (1, 1, 1)
    assert paths == ((), ())
    # a fine region inside an unrefined cell ascends one level
    gid, paths = g.resolve_region(1, (3, 1))
    assert g.keys[gid] == (0, 1, 0)
    assert paths == ((1,), (1,))
    # two levels down: chains run coarse -> fine
    gid, paths = g.resolve_region(2, (7, 2))
    assert g.keys[gid] == (0, 1, 0)
    assert paths == ((1, 1), (1, 0))


def test_uniform_plan_is_pure_gather_periodic():
    g = make_grid(d=2, n=4, r=2, l_max=0)
    plan = g.build_plan((1, 0))
    assert len(plan.groups) == 1
    grp = plan.groups[0]
    assert grp.paths == ((), ()) and grp.mirror == ()
    # neighbor of (3, j) wraps to (0, j)
    pos = {g.keys[gid]: i for i, gid in enumerate(g.active)}
    dest = pos[(0, 3, 1)]
    k = np.nonzero(grp.dest == dest)[0][0]
    assert g.keys[grp.src[k]] == (0, 0, 1)


def test_wall_plan_mirrors():
    g = make_grid(d=1, n=4, r=2, l_max=0, bc_kind="wall")
    plan = g.build_plan((-1,))
    mirrored = [grp for grp in plan.groups if grp.mirror == (0,)]
    assert len(mirrored) == 1
    # ghost of cell 0 mirrors cell 0 itself
    assert g.keys[mirrored[0].src[0]] == (0, 0)
    # distance-2 ghost mirrors cell 1
    plan2 = g.build_plan((-2,))
    m2 = [grp for grp in plan2.groups if grp.mirror == (0,)][0]
    assert g.keys[m2.src[0]] == (0, 1)


def test_gather_virtual_constant_across_jump():
    # constant field stays constant through virtual refinement/gathering
    table = build_operator_tables(1, 2, d=2, r=2)
    g = make_grid(d=2, n=4, r=2, l_max=1)
    mask = np.zeros(g.n_active, dtype=bool)
    mask[5] = True
    g.remesh(mask, np.zeros_like(mask))
    data = np.full((1, g.n_cells, 2, 2), 7.25)
    plans = g.build_plans([(1, 0), (-1, 0), (0, 1), (0, -1)])
    slot_mats = [table.amr_project_N, table.amr_project_N]
    for plan in plans.values():
        out = gather_virtual(plan, data, 2, g.n_active, slot_mats)
        assert np.allclose(out, 7.25, atol=1e-13)


def test_gather_virtual_linear_field_exact():
    # rho = x across a level jump: virtual neighbors are exact restrictions
    N = 1
    table = build_operator_tables(N, 2, d=1, r=3)
    bc = BCSpec((("outflow", "outflow"),))
    g = Grid(d=1, extents=((0.0, 1.0),), n0=(4,), r=3, l_max=1, bc=bc)
    mask = np.zeros(4, dtype=bool)
    mask[1] = True  # refine the second cell
    g.remesh(mask, np.zeros_like(mask))
    nodes = table.basis_N.nodes
    data = np.zeros((1, g.n_cells, N + 1))
    for gid in range(g.n_cells):
        lo = g.cell_lo(np.array([gid]))[0][0]
        sz = g.cell_sizes(np.array([gid]))[0][0]
        data[0, gid] = lo + nodes * sz
    restrict_parents(g, data, [table.amr_gather_N])
    plan = g.build_plan((1,))
    out = gather_virtual(plan, data, 1, g.n_active, [table.amr_project_N])
    # every active cell's right virtual neighbor must sample x exactly
    for i, gid in enumerate(g.active):
        lo = g.cell_lo(np.array([gid]))[0][0]
        sz = g.cell_sizes(np.array([gid]))[0][0]
        if lo + sz >= 1.0:  # outflow clamp copies the last cell: skip
            continue
        expect = (lo + sz) + nodes * sz
        assert np.allclose(out[0, i], expect, atol=1e-12), g.keys[gid]


def test_face_table_balance_and_symmetry():
    g = make_grid(d=2, n=4, r=2, l_max=1)
    mask = np.zeros(g.n_active, dtype=bool)
    mask[5] = True
    g.remesh(mask, np.zeros_like(mask))
    faces = g.build_faces()
    # every face area accounted once: sum of per-axis face measures
    for axis in (0, 1):
        total = 0.0
        for fg in faces:
            if fg.axis != axis or fg.kind == "boundary":
                continue
            fine = fg.left if fg.fine_side == 0 else fg.right
            sizes = g.cell_sizes(fine if fg.kind == "jump" else fg.left)
            total += np.sum(sizes[:, 1 - axis]) if g.d == 2 else len(fg.left)
        # periodic 4x4 (16 faces of 0.25) plus the two interior child faces
        assert abs(total - (16 * 0.25 + 2 * 0.125)) < 1e-12


def test_neighbor_symmetry_of_faces():
    g = make_grid(d=2, n=3, r=2, l_max=1)
    mask = np.zeros(g.n_active, dtype=bool)
    mask[4] = True
    g.remesh(mask, np.zeros_like(mask))
    seen = set()
    for fg in g.build_faces():
        if fg.kind == "boundary":
            continue
        for a, b in zip(fg.left, fg.right):
            assert (b, a, fg.axis) not in seen  # no duplicated face
            seen.add((a, b, fg.axis))
            assert a != b


def test_remesh_refine_then_coarsen_restores_polynomial():
    N = 2
    table = build_operator_tables(N, N, d=2, r=2)
    g = make_grid(d=2, n=2, r=2, l_max=1)
    rng = np.random.default_rng(3)
    data = rng.standard_normal((1, g.n_cells, N + 1, N + 1))
    orig = data.copy()
    mask = np.zeros(g.n_active, dtype=bool)
    mask[2] = True
    gid_refined = g.active[2]
    key_refined = g.keys[gid_refined]
    changed, old_map = g.remesh(mask, np.zeros_like(mask))
    proj = [table.amr_project_N] * 2
    gath = [table.amr_gather_N] * 2
    data = rebuild_cell_data(g, old_map, data, proj)
    restrict_parents(g, data, gath)
    # now coarsen everything
    coarsen = np.ones(g.n_active, dtype=bool)
    changed, old_map = g.remesh(np.zeros(g.n_active, dtype=bool), coarsen)
    assert changed
    data = rebuild_cell_data(g, old_map, data, proj)
    assert g.n_active == 4
    gid_new = g.key2gid[key_refined]
    assert np.allclose(data[0, gid_new], orig[0, gid_refined], atol=1e-12)


def test_remesh_conservation_of_means():
    N, r = 1, 3
    table = build_operator_tables(N, N, d=2, r=r)
    g = make_grid(d=2, n=3, r=r, l_max=2)
    rng = np.random.default_rng(7)
    data = rng.standard_normal((2, g.n_cells, N + 1, N + 1))
    w = table.basis_N.weights
    means0 = np.einsum("mcyx,y,x,c->m", data[:, g.active], w, w,
                       g.cell_volume(g.active))
    proj = [table.amr_project_N] * 2
    gath = [table.amr_gather_N] * 2
    mask = np.zeros(g.n_active, dtype=bool)
    mask[[0, 4, 7]] = True
    _, old_map = g.remesh(mask, np.zeros_like(mask))
    data = rebuild_cell_data(g, old_map, data, proj)
    restrict_parents(g, data, gath)
    means1 = np.einsum("mcyx,y,x,c->m", data[:, g.active], w, w,
                       g.cell_volume(g.active))
    assert np.allclose(means1, means0, rtol=1e-12)
    assert abs(g.cell_volume(g.active).sum() - 1.0) < 1e-12
    # coarsen a sibling group back
    coarsen = np.ones(g.n_active, dtype=bool)
    _, old_map = g.remesh(np.zeros(g.n_active, dtype=bool), coarsen)
    data = rebuild_cell_data(g, old_map, data, proj)
    means2 = np.einsum("mcyx,y,x,c->m", data[:, g.active], w, w,
                       g.cell_volume(g.active))
    assert np.allclose(means2, means0, rtol=1e-12)


def test_no_remesh_when_no_marks():
    g = make_grid()
    changed, _ = g.remesh(np.zeros(g.n_active, dtype=bool),
                          np.zeros(g.n_active, dtype=bool))
    assert not changed


def test_balance_enforced_two_level():
    g = make_grid(d=2, n=4, r=2, l_max=2)
    mask = np.zeros(g.n_active, dtype=bool)
    mask[5] = True
    g.remesh(mask, np.zeros_like(mask))
    # refine all children of that cell again: neighbors must be split too
    lev = g.level[g.active]
    mask2 = lev == 1
    g.remesh(mask2, np.zeros(g.n_active, dtype=bool))
    for fg in g.build_faces():
        if fg.kind == "jump":
            fine = fg.left if fg.fine_side == 0 else fg.right
            coarse = fg.right if fg.fine_side == 0 else fg.left
            assert np.all(g.level[fine] - g.level[coarse] == 1)


def test_lohner_indicator_profiles():
    # constant -> 0; linear -> ~0; step -> > 0.25 near the jump
    n = 20
    x = np.arange(n, dtype=float)
    const = {(-1,): np.ones(n), (0,): np.ones(n), (1,): np.ones(n)}
    assert np.allclose(lohner_indicator(const, 1), 0.0, atol=1e-14)
    lin = {(-1,): x - 1, (0,): x, (1,): x + 1}
    assert np.all(lohner_indicator(lin, 1) < 1e-10)
    step_c = np.where(x < 10, 1.0, 2.0)
    step = {(-1,): np.concatenate([[step_c[0]], step_c[:-1]]),
            (0,): step_c,
            (1,): np.concatenate([step_c[1:], [step_c[-1]]])}
    chi = lohner_indicator(step, 1)
    band = np.nonzero(chi > 0.25)[0]
    assert 0 < band.size <= 3
    assert np.all(np.abs(band - 9.5) < 2)


def test_lohner_indicator_2d_cross_terms():
    # a diagonal ridge produces nonzero chi via the cross derivative
    n = 9
    means = {}
    xx, yy = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    f = lambda a, b: np.abs(a - b).astype(float).ravel()
    for ox in (-1, 0, 1):
        for oy in (-1, 0, 1):
            means[(ox, oy)] = f(xx + ox, yy + oy)
    chi = lohner_indicator(means, 2)
    assert chi.max() > 0.25


def test_region_box():
    g = make_grid(d=2, n=4, r=2, l_max=1)
    lo, sz = region_box(g, 1, (-1, 0))
    assert np.allclose(lo, [-0.125, 0.0])
    assert np.allclose(sz, [0.125, 0.125])


def test_bcspec_validation():
    with pytest.raises(ValueError):
        BCSpec((("periodic", "wall"),))
    with pytest.raises(ValueError):
        BCSpec((("nonsense", "nonsense"),))
