"""Command-line interface: run, convergence, reference, list-cases."""

from __future__ import annotations

import argparse
import os
import sys as _sys

from . import harness, output, problems
from .driver import Engine, RunConfig


def _parse_scheme(text: str):
    try:
        n, m = text.lower().split("x")
        return int(n), int(m)
    except Exception:
        raise argparse.ArgumentTypeError(f"scheme must look like 2x3, got {text!r}")


def _parse_mesh(text: str):
    return tuple(int(v) for v in text.lower().split("x"))


def _parse_cut(text: str):
    axis_name, value = text.split("=")
    axis = {"x": 0, "y": 1}[axis_name.strip().lower()]
    return axis, float(value)


def _load_config_file(path: str) -> dict:
    out = {}
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


def _build_run_config(args) -> RunConfig:
    overrides = {}
    if getattr(args, "config", None):
        overrides = _load_config_file(args.config)

    def pick(name, cast, cli_value):
        if cli_value is not None:
            return cli_value
        if name in overrides:
            return cast(overrides[name])
        return None

    scheme = pick("scheme", _parse_scheme, args.scheme)
    N, M = scheme if scheme else (2, 3)
    mesh = pick("mesh", _parse_mesh, args.mesh)
    kw = dict(
        case=pick("case", str, args.case),
        N=N, M=M,
        flux=pick("flux", str, args.flux),
        limiter=pick("limiter", str, args.limiter),
        cfl=pick("cfl", float, args.cfl),
        n0=mesh,
        t_end=pick("tend", float, args.tend),
        amr=bool(pick("amr", lambda v: v.lower() in ("1", "true", "yes"),
                      True if args.amr else None) or False),
        out_dir=pick("out", str, args.out),
    )
    if args.lmax is not None or "lmax" in overrides:
        kw["l_max"] = pick("lmax", int, args.lmax)
    if args.rfactor is not None or "rfactor" in overrides:
        kw["r"] = pick("rfactor", int, args.rfactor)
    if args.cut is not None or "cut" in overrides:
        kw["cut"] = pick("cut", _parse_cut, _parse_cut(args.cut) if args.cut else None)
    if getattr(args, "formats", None):
        kw["out_formats"] = tuple(args.formats.split(","))
    if kw["case"] is None:
        raise SystemExit("a case is required (--case or config file)")
    return RunConfig(**{k: v for k, v in kw.items() if v is not None})


def cmd_run(args):
    cfg = _build_run_config(args)
    eng = Engine(cfg)
    summary = eng.run()
    written = []
    if cfg.out_dir:
        os.makedirs(cfg.out_dir, exist_ok=True)
        prefix = os.path.join(cfg.out_dir, cfg.case if isinstance(cfg.case, str)
                              else cfg.case.name)
        formats = cfg.out_formats or ("csv", "vtk")
        if "csv" in formats:
            cut = cfg.cut if cfg.cut else (0, _default_cut_value(eng))
            written.append(output.write_cut_csv(eng, prefix + "_cut.csv", *cut))
        if "vtk" in formats:
            written.extend(output.write_vtk_levels(eng, cfg.out_dir,
                                                   os.path.basename(prefix)))
        written.append(output.write_metadata(prefix + "_run.txt", eng.cfg, summary))
    print(f"case={eng.case.name} t={summary.t_final:.6g} steps={summary.steps} "
          f"cells={summary.n_active} troubled_max={summary.troubled_max} "
          f"drift={summary.conservation_drift:.3e}")
    for path in written:
        print(f"wrote {path}")
    return 0


def _default_cut_value(eng):
    if eng.d == 1:
        return 0.0
    lo, hi = eng.case.extents[1]
    return 0.5 * (lo + hi)


def cmd_convergence(args):
    schemes = [_parse_scheme(s) for s in args.schemes.split(",")]
    meshes = [int(v) for v in args.meshes.split(",")]
    table = {}
    for N, M in schemes:
        rows = harness.convergence_table(args.case, N, M, meshes)
        table[f"P{N}P{M}"] = rows
        for r in rows:
            print(f"P{N}P{M} h={r.h:.3e} L1={r.L1:.3e} L2={r.L2:.3e} "
                  f"Linf={r.Linf:.3e} order(L2)={r.order2:.2f} wall={r.wall:.1f}s")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = harness.write_error_table(
            os.path.join(args.out, f"convergence_{args.case}.csv"), table)
        print(f"wrote {path}")
    return 0


def cmd_reference(args):
    path = harness.generate_reference(args.case, args.out,
                                      base_cells=args.base_cells,
                                      factor=args.factor)
    print(f"wrote {path}")
    return 0


def cmd_list_cases(args):
    for name in problems.list_cases():
        case = problems.get_case(name)
        print(f"{name:14s} {case.kind:6s} gamma={case.gamma:<8.5g} "
              f"mesh={'x'.join(str(n) for n in case.n0):9s} t_end={case.t_end:.4g}")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(prog="aderbox",
                                     description="ADER P_NP_M hyperbolic solver")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one configuration")
    run_p.add_argument("--case")
    run_p.add_argument("--scheme", type=_parse_scheme, metavar="NxM")
    run_p.add_argument("--flux", choices=["rusanov", "hll", "hllem"])
    run_p.add_argument("--limiter", choices=["off", "tvd", "weno"])
    run_p.add_argument("--mesh", type=_parse_mesh, metavar="NX[xNY]")
    run_p.add_argument("--amr", action="store_true")
    run_p.add_argument("--lmax", type=int)
    run_p.add_argument("--rfactor", type=int, choices=[2, 3])
    run_p.add_argument("--cfl", type=float)
    run_p.add_argument("--tend", type=float)
    run_p.add_argument("--out")
    run_p.add_argument("--cut", metavar="AXIS=VALUE")
    run_p.add_argument("--formats", help="comma list: csv,vtk")
    run_p.add_argument("--config", help="key = value config file")
    run_p.set_defaults(fn=cmd_run)

    conv_p = sub.add_parser("convergence", help="mesh-refinement error table")
    conv_p.add_argument("--case", required=True)
    conv_p.add_argument("--schemes", required=True, metavar="1x2,2x3")
    conv_p.add_argument("--meshes", required=True, metavar="25,50,100")
    conv_p.add_argument("--out")
    conv_p.set_defaults(fn=cmd_convergence)

    ref_p = sub.add_parser("reference", help="regenerate stored references")
    ref_p.add_argument("--case", required=True)
    ref_p.add_argument("--out", required=True)
    ref_p.add_argument("--factor", type=int, default=10)
    ref_p.add_argument("--base-cells", type=int, default=200)
    ref_p.set_defaults(fn=cmd_reference)

    list_p = sub.add_parser("list-cases", help="list the benchmark registry")
    list_p.set_defaults(fn=cmd_list_cases)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    _sys.exit(main())
