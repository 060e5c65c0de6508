"""Command line front end.

Commands: verify, exact, evolve, rescale, report.  Exit status 0 on success,
1 when a verification records violations, 2 on usage errors.  All numeric
parameters are validated against module preconditions before dispatch.
An optional plain-text key=value config file can seed any flag; explicit
flags win.
"""

import argparse
import os
import sys

import numpy as np

from .curvature import Dims, PinchingParams
from .errors import PinchflowError, UsageError
from .exactflows import ExactSpec, evolve_exact, flow_diagnostics, trajectory_csv
from .gridflow import (
    build_torus,
    evolve_grid,
    rescale_sequence,
    save_pointcloud_csv,
    save_snapshot_csv,
    save_snapshot_npz,
)
from .ineqlab import PROPERTY_IDS, SampleSpec, format_report, parse_report, verify_property


def _parse_kv(text, label):
    """Parse 'name:k1=v1,k2=v2' into (name, dict of floats)."""
    name, _, rest = text.partition(":")
    out = {}
    if rest:
        for item in rest.split(","):
            key, eq, value = item.partition("=")
            if not eq:
                raise UsageError(f"bad {label} entry {item!r} (expected key=value)")
            try:
                out[key.strip()] = float(value)
            except ValueError:
                raise UsageError(f"bad numeric value in {label}: {item!r}") from None
    return name.strip(), out


def parse_exact_spec(text) -> ExactSpec:
    kind, kv = _parse_kv(text, "--spec")
    k = int(kv.pop("k", 1 if kind != "product" else 2))
    if kind == "sphere":
        n = int(kv.pop("n"))
        spec = ExactSpec("sphere", Dims(n, k), (kv.pop("r0"),))
    elif kind == "cylinder":
        n = int(kv.pop("n"))
        spec = ExactSpec("cylinder", Dims(n, k), (int(kv.pop("m")), kv.pop("r0")))
    elif kind == "product":
        p, q = int(kv.pop("p")), int(kv.pop("q"))
        spec = ExactSpec("product", Dims(p + q, k), (p, q, kv.pop("a0"), kv.pop("b0")))
    else:
        raise UsageError(f"unknown exact kind {kind!r}")
    if kv:
        raise UsageError(f"unknown --spec keys: {sorted(kv)}")
    return spec


def parse_grid_spec(text):
    kind, kv = _parse_kv(text, "--grid")
    if kind != "torus":
        raise UsageError(f"unknown grid kind {kind!r} (only torus is built in)")
    try:
        grid = build_torus(kv.pop("r1"), kv.pop("r2"), int(kv.pop("N")), int(kv.pop("k")))
    except KeyError as exc:
        raise UsageError(f"--grid torus needs r1, r2, N, k (missing {exc})") from None
    if kv:
        raise UsageError(f"unknown --grid keys: {sorted(kv)}")
    return grid


def parse_t_grid(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError("--t-grid must be start:stop:step")
    start, stop, step = (float(p) for p in parts)
    if step <= 0 or stop < start:
        raise UsageError("--t-grid needs step > 0 and stop >= start")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(count)


_PARAM_DESTS = {"c": "c", "a": "a", "eps0": "eps0", "eps": "eps",
                "Lambda": "lambda_", "sigma": "sigma", "eta": "eta", "Lmax": "lmax"}

_CONFIG_ALIASES = {"Lambda": "lambda_", "Lmax": "lmax", "stop_maxA2": "stop_maxa2"}


def _params_from_args(args, n):
    kv = {}
    for name, dest in _PARAM_DESTS.items():
        val = getattr(args, dest, None)
        if val is not None:
            kv[name] = val
    try:
        return PinchingParams.default_for(n, **kv)
    except ValueError as exc:
        raise UsageError(f"invalid pinching parameters: {exc}") from None


def _apply_config(parser, argv):
    """Pre-scan for --config and install its key=value pairs as subcommand defaults."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        raise UsageError("--config needs a file path")
    path = argv[idx + 1]
    sub_action = next(a for a in parser._actions
                      if isinstance(a, argparse._SubParsersAction))
    cmd = argv[0] if argv and not argv[0].startswith("-") else None
    target = sub_action.choices.get(cmd)
    if target is None:
        raise UsageError("--config requires a subcommand before it")
    try:
        lines = open(path).read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    known = {a.dest for a in target._actions}
    defaults = {}
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise UsageError(f"bad config line {line!r}")
        dest = key.strip().replace("-", "_")
        dest = _CONFIG_ALIASES.get(dest, dest)
        if dest not in known:
            raise UsageError(f"unknown config key {key.strip()!r}")
        defaults[dest] = _coerce(target, dest, value.strip())
    target.set_defaults(**defaults)
    for action in target._actions:
        if action.dest in defaults:
            action.required = False
    return [a for i, a in enumerate(argv) if i not in (idx, idx + 1)]


def _coerce(parser, dest, value):
    for action in parser._actions:
        if action.dest != dest:
            continue
        if action.type is not None:
            return action.type(value)
        if action.const is True:
            return value.lower() in ("1", "true", "yes")
        return value
    return value


def _add_param_flags(p):
    p.add_argument("--c", type=float, default=None, help="pinching slope")
    p.add_argument("--a", type=float, default=None, help="pinching offset")
    p.add_argument("--eps0", type=float, default=None)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--Lambda", dest="lambda_", type=float, default=None)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--Lmax", dest="lmax", type=float, default=None)
    p.add_argument("--config", default=None, help="key=value file merged under the flags")


def build_parser():
    parser = argparse.ArgumentParser(prog="pinchflow")
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run one property verification")
    v.add_argument("--property", required=True, choices=PROPERTY_IDS)
    v.add_argument("--n", type=int, default=5)
    v.add_argument("--k", type=int, default=2)
    v.add_argument("--samples", type=int, default=10000)
    v.add_argument("--seed", type=int, default=42)
    v.add_argument("--tol", type=float, default=1e-10)
    v.add_argument("--scale-min", type=float, default=0.5)
    v.add_argument("--scale-max", type=float, default=50.0)
    v.add_argument("--out", default=None, help="report path (default verify_<property>.txt)")
    _add_param_flags(v)

    e = sub.add_parser("exact", help="run an exact model flow")
    e.add_argument("--spec", required=True, help="sphere:n=..,k=..,r0=.. | cylinder:n=..,m=..,r0=..,k=.. | product:p=..,q=..,a0=..,b0=..,k=..")
    e.add_argument("--method", choices=("closed_form", "rk4"), default="closed_form")
    e.add_argument("--dt", type=float, default=1e-5, help="rk4 step")
    e.add_argument("--t-grid", required=True, help="start:stop:step")
    e.add_argument("--out", required=True, help="CSV output path")
    e.add_argument("--no-timestamp", action="store_true")
    _add_param_flags(e)

    g = sub.add_parser("evolve", help="evolve a grid immersion")
    g.add_argument("--grid", required=True, help="torus:r1=..,r2=..,N=..,k=..")
    g.add_argument("--cfl", type=float, default=0.1)
    g.add_argument("--t-end", type=float, default=None)
    g.add_argument("--stop-maxA2", dest="stop_maxa2", type=float, default=1e6)
    g.add_argument("--snapshot-every", type=int, default=10)
    g.add_argument("--order", type=int, choices=(2, 4), default=4)
    g.add_argument("--mode", choices=("fd", "spectral"), default="fd")
    g.add_argument("--snapshot-format", choices=("npz", "csv"), default="npz")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--no-timestamp", action="store_true")
    g.add_argument("--config", default=None)

    r = sub.add_parser("rescale", help="evolve a grid and emit rescaled snapshots")
    r.add_argument("--grid", required=True)
    r.add_argument("--schedule", required=True, help="comma-separated times")
    r.add_argument("--cfl", type=float, default=0.1)
    r.add_argument("--t-end", type=float, default=None)
    r.add_argument("--stop-maxA2", dest="stop_maxa2", type=float, default=1e6)
    r.add_argument("--snapshot-every", type=int, default=10)
    r.add_argument("--out", required=True, help="output directory")
    r.add_argument("--no-timestamp", action="store_true")
    r.add_argument("--config", default=None)

    rep = sub.add_parser("report", help="summarize saved verification reports")
    rep.add_argument("--in", dest="inputs", nargs="+", required=True)

    return parser


def cmd_verify(args):
    dims = Dims(args.n, args.k)
    needs_params = args.property in ("pinch_reaction", "frame_invariance")
    params = _params_from_args(args, args.n) if needs_params else None
    spec = SampleSpec(dims=dims, params=params, count=args.samples, seed=args.seed,
                      scale_range=(args.scale_min, args.scale_max))
    report = verify_property(args.property, spec, args.tol)
    out = args.out or f"verify_{args.property}.txt"
    with open(out, "w") as fh:
        fh.write(format_report(report))
    print(f"{report.property_id}: {report.samples} samples, "
          f"worst margin {report.worst_margin:.3e}, "
          f"{len(report.violations)} violations -> {out}")
    return 1 if report.violations else 0


def cmd_exact(args):
    spec = parse_exact_spec(args.spec)
    params = _params_from_args(args, spec.dims.n)
    t_grid = parse_t_grid(args.t_grid)
    traj = evolve_exact(spec, t_grid, method=args.method, dt=args.dt)
    diag = flow_diagnostics(traj, params)
    trajectory_csv(traj, diag, args.out, timestamp=not args.no_timestamp)
    print(f"{spec.kind}: {len(t_grid)} samples, T_sing = {traj.T_sing:.17g} -> {args.out}")
    return 0


def _write_grid_outputs(traj, outdir, fmt, timestamp):
    os.makedirs(outdir, exist_ok=True)
    diag_path = os.path.join(outdir, "diagnostics.csv")
    with open(diag_path, "w") as fh:
        if timestamp:
            import datetime

            fh.write(f"# generated {datetime.datetime.now().isoformat()}\n")
        fh.write("t,dt,max_A2,max_H2,area,h2_integral\n")
        for i in range(len(traj.times)):
            row = (traj.times[i], traj.dt[i], traj.max_a2[i], traj.max_h2[i],
                   traj.area[i], traj.h2_integral[i])
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")
    for i, snap in enumerate(traj.snapshots):
        base = os.path.join(outdir, f"snapshot_{i:04d}")
        if fmt == "npz":
            save_snapshot_npz(snap, traj.N, traj.k, base + ".npz")
        else:
            save_snapshot_csv(snap, traj.N, traj.k, base + ".csv", timestamp=timestamp)
    return diag_path


def cmd_evolve(args):
    grid = parse_grid_spec(args.grid)
    traj = evolve_grid(grid, cfl=args.cfl, t_end=args.t_end,
                       stop_maxA2=args.stop_maxa2, snapshot_every=args.snapshot_every,
                       deriv_order=args.order, mode=args.mode)
    diag_path = _write_grid_outputs(traj, args.out, args.snapshot_format,
                                    not args.no_timestamp)
    print(f"evolved {len(traj.times)} steps to t = {traj.times[-1]:.6g} "
          f"(stop: {traj.stop_reason}); diagnostics -> {diag_path}")
    return 0


def cmd_rescale(args):
    grid = parse_grid_spec(args.grid)
    try:
        schedule = [float(x) for x in args.schedule.split(",") if x]
    except ValueError:
        raise UsageError(f"bad --schedule {args.schedule!r}") from None
    t_end = args.t_end if args.t_end is not None else (max(schedule) if schedule else None)
    traj = evolve_grid(grid, cfl=args.cfl, t_end=t_end, stop_maxA2=args.stop_maxa2,
                       snapshot_every=args.snapshot_every)
    snaps = rescale_sequence(traj, schedule)
    os.makedirs(args.out, exist_ok=True)
    summary = os.path.join(args.out, "rescale_summary.txt")
    with open(summary, "w") as fh:
        fh.write("j t_tilde t_j iu iv L_j normH_center\n")
        for rs in snaps:
            save_pointcloud_csv(rs, os.path.join(args.out, f"rescale_{rs.j:02d}.csv"),
                                timestamp=not args.no_timestamp)
            fh.write(f"{rs.j} {rs.t_tilde:.17g} {rs.t_j:.17g} {rs.x_index[0]} "
                     f"{rs.x_index[1]} {rs.L_j:.17g} {rs.norm_h_center:.17g}\n")
    print(f"wrote {len(snaps)} rescaled snapshots -> {args.out}")
    return 0


def cmd_report(args):
    exit_code = 0
    for path in args.inputs:
        try:
            data = parse_report(open(path).read())
        except OSError as exc:
            raise UsageError(f"cannot read report {path}: {exc}") from None
        nviol = data.get("violation_count", len(data.get("violations", [])))
        print(f"{path}: property={data.get('property')} samples={data.get('samples')} "
              f"worst_margin={data.get('worst_margin')} violations={nviol} "
              f"fitted_constant={data.get('fitted_constant')}")
        if nviol:
            exit_code = 1
    return exit_code


_COMMANDS = {
    "verify": cmd_verify,
    "exact": cmd_exact,
    "evolve": cmd_evolve,
    "rescale": cmd_rescale,
    "report": cmd_report,
}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config(parser, argv)
        args = parser.parse_args(argv)
        code = _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2
    except PinchflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:   # argparse usage failures already exit with 2
        return exc.code if exc.code is not None else 2
    return code


if __name__ == "__main__":
    sys.exit(main())
