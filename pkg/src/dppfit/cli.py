"""Command line interface.

Exit status is 0 on success, 1 on usage errors and 2 on runtime failures.
"""

import argparse
import csv
import json
import os
import sys
from dataclasses import replace

import numpy as np

from .asymptotics import asymptotic_covariance
from .contrast import ContrastSpec, FitOptions, fit
from .errors import DppfitError
from .estimators import K_CORRECTIONS, BandwidthRule, SmoothingKernel, default_grid, summary_hat
from .geometry import Window, read_pattern, write_pattern
from .kernels import KernelModel, get_family, validate
from .sampler import SamplerConfig, sample_dpp
from . import studio

__all__ = ["main", "build_parser"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _add_model(p):
    p.add_argument("--family", default="gaussian")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--alpha", type=float, help="Gaussian range parameter")
    p.add_argument("--theta", type=float, nargs="+", help="shape parameters of other families")


def _model_from(args):
    fam = get_family(args.family)
    if args.theta is not None:
        theta = tuple(args.theta)
    elif args.alpha is not None and fam.param_names == ("alpha",):
        theta = (args.alpha,)
    else:
        raise UsageError(f"missing shape parameters {fam.param_names} (use --alpha or --theta)")
    return KernelModel(fam, args.dim, args.rho, theta)


def _add_window(p, required=True):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--window", type=float, nargs="+", metavar="BOUND", help="lo1 hi1 ... lod hid")
    g.add_argument("--side", type=float, help="cube [0, side]^dim")


def _window_from(args):
    if args.window is not None:
        try:
            w = Window.from_bounds(args.window)
        except ValueError as exc:
            raise UsageError(f"--window: {exc}")
    else:
        if not args.side > 0:
            raise UsageError("--side must be positive")
        w = Window.cube(args.side, args.dim)
    return w


def _add_contrast(p):
    p.add_argument("--stat", choices=("K", "g"), default="g")
    p.add_argument("--rmin", type=float, default=0.01)
    p.add_argument("--rmax", type=float, help="default: a quarter of the shortest side")
    p.add_argument("--c", type=float, default=0.5)
    p.add_argument("--grid", type=int, default=513, help="number of grid points")


def _spec_from(args, window):
    r_max = args.rmax if args.rmax is not None else float(np.min(window.sides)) / 4
    try:
        return ContrastSpec(args.stat, args.rmin, r_max, args.c, None, args.grid)
    except ValueError as exc:
        raise UsageError(str(exc))


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", newline=""), True


def cmd_simulate(args):
    m = _model_from(args)
    w = _window_from(args)
    if w.dim != m.dim:
        raise UsageError("window dimension differs from --dim")
    try:
        cfg = SamplerConfig(args.seed, args.trunc_mass, args.max_modes, args.padding)
    except ValueError as exc:
        raise UsageError(str(exc))
    pattern, diag = sample_dpp(m, w, cfg, return_diagnostics=True)
    write_pattern(pattern, args.out)
    diag_path = args.diagnostics or args.out + ".diag.csv"
    with open(diag_path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["modes_per_axis", "n_modes", "retained_mass", "expected_count",
                     "n_selected", "n_points", "torus_sides", "proposals"])
        wr.writerow([" ".join(map(str, diag.modes_per_axis)), diag.n_modes,
                     repr(diag.retained_mass), repr(diag.expected_count), diag.n_selected,
                     pattern.n, " ".join(map(repr, diag.torus_sides)), diag.proposals])
    print(f"wrote {pattern.n} points to {args.out}", file=sys.stderr)
    return 0


def _kernel_and_bw(args):
    try:
        kernel = SmoothingKernel(args.kernel)
        bw = BandwidthRule.fixed(args.bandwidth) if args.bandwidth else BandwidthRule("stoyan", args.stoyan)
    except ValueError as exc:
        raise UsageError(str(exc))
    return kernel, bw


def cmd_summarize(args):
    p = read_pattern(args.pattern)
    r_max = args.rmax if args.rmax is not None else float(np.min(p.window.sides)) / 4
    if not (0 <= args.rmin < r_max) or args.grid < 2:
        raise UsageError("need 0 <= rmin < rmax and at least 2 grid points")
    kernel, bw = _kernel_and_bw(args)
    grid = default_grid(args.rmin, r_max, args.grid)
    curve = summary_hat(p, args.stat, grid, kernel, bw, args.correction or "border")
    fh, close = _open_out(args.out)
    try:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["t", "value", "estimator", "bandwidth"])
        bw_txt = "" if not np.isfinite(curve.bandwidth) else repr(float(curve.bandwidth))
        for t, v in zip(curve.grid, curve.values):
            wr.writerow([repr(float(t)), repr(float(v)), curve.estimator, bw_txt])
    finally:
        if close:
            fh.close()
    return 0


def cmd_fit(args):
    p = read_pattern(args.pattern)
    spec = _spec_from(args, p.window)
    kernel, bw = _kernel_and_bw(args)
    opts = FitOptions(seed=args.seed, kernel=kernel, bandwidth=bw)
    if args.correction:
        opts = replace(opts, k_correction=args.correction)
    rep = fit(
        p,
        args.family,
        spec,
        opts,
        asymptotic=args.asympt,
        asymptotic_kwargs={"n_samples": args.samples, "seed": args.seed},
    )
    row = rep.as_row()
    row = {k: (v.item() if isinstance(v, np.generic) else v) for k, v in row.items()}
    fh, close = _open_out(args.out)
    try:
        if args.format == "json":
            fh.write(json.dumps(row) + "\n")
        else:
            wr = csv.DictWriter(fh, fieldnames=list(row), lineterminator="\n")
            wr.writeheader()
            wr.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    finally:
        if close:
            fh.close()
    return 0


def cmd_mc_study(args):
    try:
        cfg = studio.load_config(args.config)
    except FileNotFoundError as exc:
        raise UsageError(str(exc))
    threads = args.threads
    result = studio.run_study(cfg, threads=threads)
    paths = studio.write_study(result, args.out_dir)
    if args.normality:
        rows = studio.normality_report(result, min_replicates=args.min_replicates)
        path = os.path.join(args.out_dir, "normality.csv")
        studio.write_normality(rows, path)
        paths["normality"] = path
    for c in result.cells:
        print(f"{c.window} {c.method}: mse={c.mse[0]:.4g} bias={c.bias[0]:.4g} "
              f"var={c.var[0]:.4g} n_fail={c.n_fail}", file=sys.stderr)
    return 0


def cmd_asympt(args):
    m = _model_from(args)
    if args.window is None and args.side is None and args.rmax is None:
        raise UsageError("give --window/--side or --rmax")
    if args.window is not None or args.side is not None:
        w = _window_from(args)
    else:
        w = Window.cube(4 * args.rmax, m.dim)
    spec = _spec_from(args, w)
    rep = asymptotic_covariance(m, spec, n_samples=args.samples, seed=args.seed)
    fh, close = _open_out(args.out)
    try:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["quantity", "i", "j", "value", "stderr"])
        for name, i, j, v, se in rep.rows():
            wr.writerow([name, i, j, repr(v), repr(se)])
    finally:
        if close:
            fh.close()
    return 0


def cmd_validate(args):
    m = _model_from(args)
    rep = validate(m)
    if rep.ok:
        print(f"ok: {m.describe()} (max spectral density {rep.spectral_max:.6g})")
        return 0
    witness = "" if rep.witness_k is None else f" witness k={list(map(float, rep.witness_k))}"
    print(f"invalid: {rep.condition} violated: {rep.message}{witness}", file=sys.stderr)
    return 2


def build_parser():
    parser = _Parser(prog="dppfit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("simulate", help="simulate a DPP pattern")
    _add_model(p)
    _add_window(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trunc-mass", type=float, default=0.99999)
    p.add_argument("--max-modes", type=int, default=2048)
    p.add_argument("--padding", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.add_argument("--diagnostics", help="sidecar CSV (default: OUT.diag.csv)")
    p.set_defaults(func=cmd_simulate)

    for name, func, hlp in (
        ("summarize", cmd_summarize, "estimate K or g from a pattern file"),
        ("fit", cmd_fit, "minimum contrast fit of a pattern file"),
    ):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("pattern")
        _add_contrast(p)
        p.add_argument("--kernel", default="epanechnikov", choices=("epanechnikov", "box"))
        p.add_argument("--bandwidth", type=float, help="fixed bandwidth (default: Stoyan rule)")
        p.add_argument("--stoyan", type=float, default=0.15, help="Stoyan rule constant")
        p.add_argument("--correction", choices=K_CORRECTIONS,
                       help="edge correction of K (default: border for summarize, isotropic for fit)")
        p.add_argument("--out")
        p.set_defaults(func=func)
    p.add_argument("--family", default="gaussian")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--asympt", action="store_true", help="add the asymptotic covariance")
    p.add_argument("--samples", type=int, default=200_000)
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("mc-study", help="run a Monte Carlo study from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--threads", type=int)
    p.add_argument("--normality", action="store_true", help="also write normality.csv")
    p.add_argument("--min-replicates", type=int, default=100)
    p.set_defaults(func=cmd_mc_study)

    p = sub.add_parser("asympt", help="asymptotic covariance at a model")
    _add_model(p)
    _add_window(p, required=False)
    _add_contrast(p)
    p.add_argument("--samples", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_asympt)

    p = sub.add_parser("validate", help="check existence of a DPP model")
    _add_model(p)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "threads", None) is not None and args.threads < 1:
            raise UsageError("--threads must be positive")
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:
        # --help
        return 0 if exc.code in (0, None) else 1
    except (DppfitError, ValueError, OSError) as exc:
        print(f"dppfit: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
