"""Command-line front end: ``wwrcva {epe,cva,table2,calibrate,compare}``.

Every flag may also come from ``--config FILE``, a flat ``key=value``
document using the flag names (``gamma-v`` or ``gamma_v``).  Flags given on
the command line override the file.  CSV output goes to ``--out`` or stdout.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np

from . import engine, mc
from .exposure import forward, lognormal, swap
from .termstructure import read_curve

EXPOSURES = ("forward", "swap", "lognormal")
CLOSED_FORM = ("wwm_h", "wwm_mean", "copula", "independent")


def _floats(text: str) -> list[float]:
    return [float(x) for x in str(text).split(",") if x.strip()]


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value file with defaults for any flag")
    p.add_argument("--set", type=int, choices=(1, 2, 3, 4), default=2, help="intensity parameter set")
    p.add_argument("--jump-rate", type=float, default=0.0, help="JCIR jump arrival rate (0: plain CIR)")
    p.add_argument("--jump-mean", type=float, default=0.1, help="JCIR mean jump size")
    p.add_argument("--exposure", choices=EXPOSURES, default="forward")
    p.add_argument("--nu", type=float, default=0.08, help="exposure volatility")
    p.add_argument("--gamma-v", type=float, default=0.0, help="swap drift scale")
    p.add_argument("--maturity", type=float, default=3.0)
    p.add_argument("--v0", type=float, default=1.0, help="lognormal initial value")
    p.add_argument("--alpha", type=float, default=0.0, help="lognormal constant drift")
    p.add_argument("--rho", type=_floats, default=[-0.8, 0.0, 0.8], help="comma-separated correlations")
    p.add_argument("--method", default="wwm_h", help="method, or comma-separated list for compare")
    p.add_argument("--paths", type=int, default=10_000, help="paths per batch")
    p.add_argument("--batches", type=int, default=10)
    p.add_argument("--dt", type=_floats, default=[0.01], help="time step (comma list for table2)")
    p.add_argument("--scheme", choices=tuple(mc.SCHEMES), default=None,
                   help="Euler scheme; selects the mc_* method when --method mc")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--backend", choices=("cython", "python"), default=None)
    p.add_argument("--recovery", type=float, default=0.0)
    p.add_argument("--curve", help="survival curve CSV (t,G); default: the model's own curve")
    p.add_argument("--out", help="output CSV path (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wwrcva", description="CVA under wrong-way risk")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "epe": "EPE profile to CSV",
        "cva": "CVA for one request",
        "table2": "four parameter sets x four methods x three correlations",
        "calibrate": "deterministic shift from a survival curve CSV",
        "compare": "CVA differences between methods",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        _common(p)
        if name == "epe":
            p.add_argument("--grid-step", type=float, default=0.25, help="profile spacing in years")
    return parser


def read_config(path) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    for n, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{n}: expected key=value, got {raw!r}")
        key, value = (x.strip() for x in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(cfg) - known)
        if unknown:
            parser.error(f"unknown config keys: {', '.join(unknown)}")
        # string defaults are converted by the flag's type, so the file can use CLI syntax
        sub.set_defaults(**cfg)
        args = parser.parse_args(argv)
    return args


def _exposure(args):
    if args.exposure == "forward":
        return forward(args.nu, args.maturity)
    if args.exposure == "swap":
        return swap(args.nu, args.gamma_v, args.maturity)
    alpha = args.alpha
    return lognormal(args.nu, args.maturity, args.v0, (lambda s: alpha) if alpha else None)


def _method(args, name: str | None = None) -> str:
    name = name or args.method
    if name == "mc":
        return "mc_" + (args.scheme or "full_truncation")
    if name not in engine.METHODS:
        raise SystemExit(f"unknown method {name!r}; choose from {engine.METHODS + ('mc',)}")
    return name


def _request(args, method: str) -> engine.CvaRequest:
    curve = read_curve(args.curve) if args.curve else None
    model = engine.build_model(args.set, args.jump_rate, args.jump_mean, curve)
    if not model.shift.is_zero and model.shift.negative:
        print("warning: calibrated shift is negative on some segments", file=sys.stderr)
    plan = mc.SimulationPlan.uniform(args.maturity, args.dt[0], n_paths=args.paths, n_batches=args.batches,
                                     seed=args.seed, workers=args.workers)
    return engine.CvaRequest(_exposure(args), model, curve if curve is not None else "self",
                             tuple(args.rho), args.recovery, method, plan)


def write_csv(header, rows, out) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([x if isinstance(x, str) else engine.fmt(x) for x in row])
    text = buf.getvalue()
    emit(text, out)
    return text


def emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_epe(args) -> None:
    req = _request(args, _method(args))
    grid = np.arange(0.0, args.maturity + 1e-9, args.grid_step)
    if grid[-1] < args.maturity - 1e-9:
        grid = np.append(grid, args.maturity)
    rows = []
    for rho in req.rho_list:
        cols = engine.epe_profile(req, rho, grid, backend=args.backend)
        hw = cols.get("ci_half_width", np.zeros_like(grid))
        rows += [(rho, t, e, i, h) for t, e, i, h in zip(grid, cols["epe"], cols["epe_independent"], hw)]
    write_csv(["rho", "t", "epe", "epe_independent", "ci_half_width"], rows, args.out)


def cmd_cva(args) -> None:
    res = engine.price(_request(args, _method(args)), backend=args.backend)
    hw = res.half_width_bps or [0.0] * len(res.rho)
    rows = [(rho, res.method, v, h) for rho, v, h in zip(res.rho, res.cva_bps, hw)]
    write_csv(["rho", "method", "cva_bps", "ci_half_width_bps"], rows, args.out)


def cmd_compare(args) -> None:
    names = [_method(args, m) for m in args.method.split(",")] if "," in args.method else list(CLOSED_FORM)
    rows = engine.compare(_request(args, names[0]), names, backend=args.backend)
    keys = ["rho", "method", "cva_bps", "ci_half_width_bps", "delta_bps"]
    write_csv(keys, [[r[k] for k in keys] for r in rows], args.out)


def cmd_table2(args) -> None:
    rep = engine.table2(n_paths=args.paths, n_batches=args.batches, dts=args.dt, seed=args.seed,
                        workers=args.workers, nu=args.nu, maturity=args.maturity,
                        recovery=args.recovery, backend=args.backend)
    emit(rep.to_csv(), args.out)
    for flag in rep.flags:
        print(f"divergence: {flag}", file=sys.stderr)


def cmd_calibrate(args) -> None:
    if not args.curve:
        raise SystemExit("calibrate needs --curve")
    model = engine.build_model(args.set, args.jump_rate, args.jump_mean, read_curve(args.curve))
    shift = model.shift
    if shift.negative:
        print("warning: calibrated shift is negative on some segments", file=sys.stderr)
    grid = shift.grid
    write_csv(["t", "psi", "Psi"], zip(grid, shift.psi(grid), shift.Psi(grid)), args.out)


COMMANDS = {"epe": cmd_epe, "cva": cmd_cva, "table2": cmd_table2, "calibrate": cmd_calibrate,
            "compare": cmd_compare}


def main(argv=None) -> int:
    args = parse_args(argv)
    COMMANDS[args.command](args)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
