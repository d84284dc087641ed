"""Output writers: CSV line cuts, legacy-ASCII VTK per AMR level, metadata.

The cut sampler evaluates the in-cell polynomials at the nodal abscissae of
every intersected cell; VTK files carry per-level cell data (conserved means,
troubled flag, indicator) on the level's full index box with an activity
mask, which standard readers display directly.
"""

from __future__ import annotations

import os

import numpy as np

from .operators import axdot

CSV_FLOAT = "%.12e"


def _prim_columns(sys):
    return list(sys.prim_names)


def line_cut(engine, axis: int, value: float):
    """Sample primitives along an axis-aligned line.

    Returns (header, rows): rows are (x, y, prims..., level, troubled) sorted
    by the cut coordinate; for d=1 the cut is the whole domain (y = 0).
    """
    g = engine.grid
    t = engine.table
    sys = engine.sys
    d = engine.d
    nodes = t.basis_N.nodes
    rows = []
    lo_all = g.cell_lo(g.active)
    sz_all = g.cell_sizes(g.active)
    UA = engine.U[:, g.active]
    troubled = engine.troubled[g.active]
    if d == 1:
        for k in range(g.n_active):
            xs = lo_all[k, 0] + sz_all[k, 0] * nodes
            vals = UA[:, k]  # (m, n)
            V, _ = sys.primitives(vals)
            for j, x in enumerate(xs):
                rows.append((x, 0.0) + tuple(V[:, j]) +
                            (int(g.level[g.active[k]]), int(troubled[k])))
    else:
        cut_ax = 1 - axis  # the coordinate held fixed
        for k in range(g.n_active):
            lo = lo_all[k]
            sz = sz_all[k]
            if not lo[cut_ax] <= value < lo[cut_ax] + sz[cut_ax]:
                continue
            xi = (value - lo[cut_ax]) / sz[cut_ax]
            phi = t.basis_N.eval(xi)[0]
            # (m, ny, nx): contract the fixed coordinate's node axis
            vals = np.tensordot(UA[:, k], phi,
                                axes=([1 if cut_ax == 1 else 2], [0]))
            xs = lo[axis] + sz[axis] * nodes
            V, _ = sys.primitives(vals)
            for j, x in enumerate(xs):
                xy = (x, value) if axis == 0 else (value, x)
                rows.append(xy + tuple(V[:, j]) +
                            (int(g.level[g.active[k]]), int(troubled[k])))
        rows.sort(key=lambda r: r[axis])
    header = ["x", "y"] + _prim_columns(sys) + ["level", "troubled"]
    return header, rows


def write_cut_csv(engine, path: str, axis: int, value: float):
    header, rows = line_cut(engine, axis, value)
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        for r in rows:
            f.write(",".join(CSV_FLOAT % v if isinstance(v, float) else str(v)
                             for v in r) + "\n")
    return path


def write_vtk_levels(engine, directory: str, prefix: str, chi=None):
    """One legacy-ASCII STRUCTURED_POINTS file per refinement level.

    Cell data: conserved means per component, troubled flag, active mask and
    (when given) the refinement indicator chi.
    """
    g = engine.grid
    d = engine.d
    sys = engine.sys
    written = []
    means = engine.cell_means()
    chi_by_pos = chi if chi is not None else np.zeros(g.n_active)
    for lev in range(g.l_max + 1):
        sel = np.nonzero(g.level[g.active] == lev)[0]
        if sel.size == 0:
            continue
        ncells = [int(n) * g.r**lev for n in g.n0]
        if d == 1:
            ncells = ncells + [1]
        shape = tuple(ncells)
        fields = {}
        for name in ("troubled", "active", "chi"):
            fields[name] = np.zeros(shape)
        comp_fields = [np.zeros(shape) for _ in range(sys.m)]
        for pos in sel:
            gid = g.active[pos]
            ij = g.ij[gid]
            idx = (int(ij[0]), int(ij[1])) if d == 2 else (int(ij[0]), 0)
            fields["troubled"][idx] = float(engine.troubled[gid])
            fields["active"][idx] = 1.0
            fields["chi"][idx] = float(chi_by_pos[pos])
            for c in range(sys.m):
                comp_fields[c][idx] = means[c, pos]
        spacing = [
            (engine.case.extents[a][1] - engine.case.extents[a][0]) / ncells[a]
            for a in range(d)
        ]
        if d == 1:
            spacing = spacing + [1.0]
        origin = [engine.case.extents[a][0] for a in range(d)] + [0.0] * (2 - d)
        path = os.path.join(directory, f"{prefix}_l{lev}.vtk")
        with open(path, "w") as f:
            f.write("# vtk DataFile Version 3.0\n")
            f.write(f"{prefix} level {lev}\n")
            f.write("ASCII\n")
            f.write("DATASET STRUCTURED_POINTS\n")
            f.write(f"DIMENSIONS {ncells[0] + 1} {ncells[1] + 1} 1\n")
            f.write(f"ORIGIN {origin[0]:g} {origin[1]:g} 0\n")
            f.write(f"SPACING {spacing[0]:g} {spacing[1]:g} 1\n")
            f.write(f"CELL_DATA {ncells[0] * ncells[1]}\n")
            for c in range(sys.m):
                name = f"q{c}"
                f.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                _write_field(f, comp_fields[c])
            for name in ("troubled", "active", "chi"):
                f.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                _write_field(f, fields[name])
        written.append(path)
    return written


def _write_field(f, field):
    flat = field.reshape(field.shape[0], -1, order="C")
    # VTK expects x varying fastest: field is indexed (ix, iy)
    for iy in range(field.shape[1]):
        f.write(" ".join("%g" % v for v in field[:, iy]) + "\n")


def write_metadata(path: str, config, summary=None, extra=None):
    """Flat key = value run-record (full configuration and code version)."""
    from . import __version__

    lines = [f"aderbox_version = {__version__}"]
    cfg_items = config.__dict__ if not hasattr(config, "raw") else config.raw.__dict__
    for k, v in sorted(cfg_items.items()):
        lines.append(f"{k} = {v!r}")
    if hasattr(config, "case") and hasattr(config.case, "params"):
        for k, v in sorted(config.case.params().items()):
            lines.append(f"case.{k} = {v!r}")
    if summary is not None:
        for k in ("t_final", "steps", "n_active", "troubled_total",
                  "troubled_max", "conservation_drift"):
            lines.append(f"summary.{k} = {getattr(summary, k)!r}")
        for k, v in sorted(summary.timers.items()):
            lines.append(f"summary.time_{k} = {v:.3f}")
    if extra:
        for k, v in sorted(extra.items()):
            lines.append(f"{k} = {v!r}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")
    return path
