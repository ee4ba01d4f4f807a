"""Command-line front end: simulate, fit, and select subcommands.

Datasets are CSV files with a header row and columns t, y, v (raw time,
position, velocity).  Time axes are rescaled internally onto (0, 1) with a
5% margin at each end; penalties apply on that unit axis and all reported
curves are mapped back to raw units.  Reports are single JSON documents;
curves and search surfaces are plot-ready CSV.

Exit codes: 0 success, 2 parse or input error, 3 numerical failure
(singular system), 4 all search-grid points degenerate.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import __version__
from .errors import DegenerateGridError, DegenerateScoreError, SingularSystemError
from .fit import fit_vspline, rescale_domain
from .gcv import CorrelationSpec, optimize_params
from .hermite import build_design, fit_theta, hat_matrices, hat_matrices_correlated
from .kernels import KernelConfig

MARGIN = 0.05


class CliError(Exception):
    def __init__(self, code: int, stage: str, message: str):
        super().__init__(message)
        self.code = code
        self.stage = stage


def simulate_dataset(kind: str, n: int, noise: float, seed: int):
    """Reproducible synthetic (t, y, v) data on the raw axis [0, 1].

    "line" and "sine" use analytic derivatives; "iwp" draws a twice
    integrated white-noise path by exact joint increments of the position
    and its derivative (position variance grows like t^3/3), with the
    derivative channel serving as the velocity.  Observation noise of the
    given standard deviation is added independently to both channels.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    if noise < 0.0:
        raise ValueError("noise must be nonnegative")
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, 1.0, n)
    if kind == "line":
        y = 1.0 + 2.5 * t
        v = np.full(n, 2.5)
    elif kind == "sine":
        y = np.sin(2.0 * np.pi * t)
        v = 2.0 * np.pi * np.cos(2.0 * np.pi * t)
    elif kind == "iwp":
        y = np.zeros(n)
        v = np.zeros(n)
        for k in range(n - 1):
            h = t[k + 1] - t[k]
            # exact covariance of the (position, slope) increment pair
            cov = np.array([[h**3 / 3.0, h**2 / 2.0], [h**2 / 2.0, h]])
            dz, dw = np.linalg.cholesky(cov) @ rng.standard_normal(2)
            y[k + 1] = y[k] + h * v[k] + dz
            v[k + 1] = v[k] + dw
    else:
        raise ValueError(f"unknown kind {kind!r}")
    if noise > 0.0:
        y = y + rng.normal(0.0, noise, n)
        v = v + rng.normal(0.0, noise, n)
    return t, y, v


def _read_dataset(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise CliError(2, "reading input", f"cannot read {path}: {exc}")
    if len(rows) < 3:
        raise CliError(2, "reading input", f"{path}: need a header and at least 2 rows")
    body = rows[1:]
    try:
        data = np.array([[float(x) for x in row[:3]] for row in body])
    except (ValueError, IndexError):
        raise CliError(2, "reading input", f"{path}: rows must hold numeric t, y, v")
    t, y, v = data[:, 0], data[:, 1], data[:, 2]
    if not np.all(np.isfinite(data)):
        raise CliError(2, "reading input", f"{path}: non-finite values")
    if np.any(np.diff(t) <= 0.0):
        raise CliError(2, "reading input", f"{path}: times must be strictly increasing")
    return t, y, v


def _read_weights(path, n):
    try:
        w = np.loadtxt(path, dtype=float, ndmin=1)
    except OSError as exc:
        raise CliError(2, "reading weights", f"cannot read {path}: {exc}")
    except ValueError:
        raise CliError(2, "reading weights", f"{path}: expected one number per line")
    if w.shape != (n + 1,):
        raise CliError(2, "reading weights",
                       f"{path}: expected {n + 1} interval weights, got {w.size}")
    if np.any(w <= 0.0) or not np.all(np.isfinite(w)):
        raise CliError(2, "reading weights", f"{path}: weights must be positive")
    return w


def _read_corr(path, n):
    try:
        raw = np.loadtxt(path, delimiter=",", dtype=float, ndmin=2)
    except OSError as exc:
        raise CliError(2, "reading correlation matrices", f"cannot read {path}: {exc}")
    except ValueError:
        raise CliError(2, "reading correlation matrices", f"{path}: malformed CSV")
    if raw.shape != (2 * n, n):
        raise CliError(2, "reading correlation matrices",
                       f"{path}: expected two stacked {n}x{n} blocks (W then Ucorr)")
    try:
        return CorrelationSpec(W=raw[:n], Ucorr=raw[n:])
    except ValueError as exc:
        raise CliError(2, "reading correlation matrices", f"{path}: {exc}")


def _write_rows(path, header, rows):
    # repr of a Python float round-trips exactly; numpy scalars would not
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows([[repr(float(x)) for x in row] for row in rows])


def _curve_path(out_path: str) -> str:
    return out_path + ".curve.csv" if not out_path.endswith(".json") \
        else out_path[:-5] + ".curve.csv"


def _surface_path(out_path: str) -> str:
    return out_path + ".surface.csv" if not out_path.endswith(".json") \
        else out_path[:-5] + ".surface.csv"


def _fit_report(t_raw, y, v, lam, gamma, weights, corr, grid, out_path,
                selection=None):
    """Fit at fixed parameters and write the report and curve files."""
    tu, yu, vu, scale = rescale_domain(t_raw, y, v, margin=MARGIN)
    n = tu.size
    if weights is not None:
        cfg = KernelConfig.piecewise(np.concatenate([[0.0], tu, [1.0]]), weights)
    else:
        cfg = KernelConfig.uniform()

    design = build_design(tu, lam * cfg.weights, lam_breakpoints=cfg.breakpoints)
    if corr is not None:
        theta = fit_theta(design, yu, vu, gamma, W=corr.W, Ucorr=corr.Ucorr)
        hats = hat_matrices_correlated(design, gamma, corr.W, corr.Ucorr)
    else:
        theta = fit_theta(design, yu, vu, gamma)
        hats = hat_matrices(design, gamma)

    if corr is None and gamma > 0.0:
        # representer route; agrees with the basis fit and carries (d, c, b)
        vfit = fit_vspline(tu, yu, vu, cfg, lam, gamma)
        coefficients = {"d": vfit.d.tolist(), "c": vfit.c.tolist(), "b": vfit.b.tolist()}
        eval_f = vfit.evaluate
        eval_fp = vfit.evaluate_deriv
    else:
        coefficients = {"values": theta[:n].tolist(), "slopes": theta[n:].tolist()}
        eval_f = lambda tt: design.basis.evaluate(theta, tt)
        eval_fp = lambda tt: design.basis.evaluate_deriv(theta, tt)

    grid_raw = np.linspace(t_raw[0], t_raw[-1], grid)
    grid_unit = scale.to_unit(grid_raw)
    f_curve = np.asarray(eval_f(grid_unit))
    df_curve = np.asarray(eval_fp(grid_unit)) / scale.time_factor

    curve_file = _curve_path(out_path)
    _write_rows(curve_file, ["t", "f", "df"],
                zip(grid_raw, f_curve, df_curve))

    report = {
        "n": int(n),
        "lambda": float(lam),
        "gamma": float(gamma),
        "weighted": weights is not None,
        "correlated": corr is not None,
        "method": "representer" if (corr is None and gamma > 0.0) else "hermite-basis",
        "trace_s": float(np.trace(hats.S)),
        "trace_v": float(np.trace(hats.V)),
        "coefficients": coefficients,
        "domain": {"t_min": float(t_raw[0]), "t_max": float(t_raw[-1]),
                   "margin": MARGIN},
        "curve_file": curve_file,
        "knot_fit": {"f": theta[:n].tolist(),
                     "df_raw": (theta[n:] / scale.time_factor).tolist()},
    }
    if selection is not None:
        report["selection"] = selection
    with open(out_path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report


def cmd_simulate(args) -> int:
    try:
        t, y, v = simulate_dataset(args.kind, args.n, args.noise, args.seed)
    except ValueError as exc:
        raise CliError(2, "simulating", str(exc))
    _write_rows(args.out, ["t", "y", "v"], zip(t, y, v))
    print(f"wrote {args.out} ({args.kind}, n={args.n}, seed={args.seed})")
    return 0


def cmd_fit(args) -> int:
    t, y, v = _read_dataset(args.input)
    if args.lam <= 0.0:
        raise CliError(2, "parsing flags", "--lambda must be positive")
    if args.gamma < 0.0:
        raise CliError(2, "parsing flags", "--gamma must be nonnegative")
    weights = _read_weights(args.weights, t.size) if args.weights else None
    corr = _read_corr(args.corr, t.size) if args.corr else None
    try:
        report = _fit_report(t, y, v, args.lam, args.gamma, weights, corr,
                             args.grid, args.out)
    except (SingularSystemError, np.linalg.LinAlgError) as exc:
        raise CliError(3, "fitting", str(exc))
    except ValueError as exc:
        raise CliError(2, "fitting", str(exc))
    print(f"wrote {args.out} and {report['curve_file']}")
    return 0


def cmd_select(args) -> int:
    t, y, v = _read_dataset(args.input)
    weights = _read_weights(args.weights, t.size) if args.weights else None
    corr = _read_corr(args.corr, t.size) if args.corr else None
    tu, yu, vu, _ = rescale_domain(t, y, v, margin=MARGIN)
    if weights is not None:
        cfg = KernelConfig.piecewise(np.concatenate([[0.0], tu, [1.0]]), weights)
    else:
        cfg = KernelConfig.uniform()
    if args.criterion == "gcv-corr" and corr is None:
        raise CliError(2, "parsing flags", "--criterion gcv-corr requires --corr")
    try:
        result = optimize_params(
            tu, yu, vu, cfg, corr=corr, criterion=args.criterion,
            lam_bounds=(args.lambda_min, args.lambda_max),
            gamma_bounds=(args.gamma_min, args.gamma_max),
            lam_points=args.lambda_steps, gamma_points=args.gamma_steps)
    except DegenerateGridError as exc:
        raise CliError(4, "selecting parameters", str(exc))
    except (SingularSystemError, np.linalg.LinAlgError) as exc:
        raise CliError(3, "selecting parameters", str(exc))
    surface_file = _surface_path(args.out)
    _write_rows(surface_file, ["lambda", "gamma", "score"], result.surface)
    selection = {
        "criterion": result.criterion,
        "lambda": result.lam,
        "gamma": result.gamma,
        "score": result.score,
        "degenerate_grid_points": result.degenerate_count,
        "surface_file": surface_file,
    }
    try:
        _fit_report(t, y, v, result.lam, result.gamma, weights, corr,
                    args.grid, args.out, selection=selection)
    except (SingularSystemError, np.linalg.LinAlgError) as exc:
        raise CliError(3, "fitting at selected parameters", str(exc))
    print(f"selected lambda={result.lam:.6g} gamma={result.gamma:.6g} "
          f"(criterion={result.criterion}, score={result.score:.6g})")
    print(f"wrote {args.out} and {surface_file}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vspline",
        description="Fit cubic smoothing splines to paired position/velocity data.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="write a synthetic dataset CSV")
    sim.add_argument("--kind", choices=("iwp", "line", "sine"), default="iwp")
    sim.add_argument("--n", type=int, default=50)
    sim.add_argument("--noise", type=float, default=0.1)
    sim.add_argument("--seed", type=int, required=True)
    sim.add_argument("--out", required=True)
    sim.set_defaults(func=cmd_simulate)

    fit_p = sub.add_parser("fit", help="fit at fixed parameters")
    fit_p.add_argument("input")
    fit_p.add_argument("--lambda", dest="lam", type=float, required=True)
    fit_p.add_argument("--gamma", type=float, default=1.0)
    fit_p.add_argument("--weights", help="file with one interval weight per line (n + 1 lines)")
    fit_p.add_argument("--corr", help="CSV with stacked W and Ucorr blocks")
    fit_p.add_argument("--grid", type=int, default=200, help="curve sample count")
    fit_p.add_argument("--out", required=True, help="report JSON path")
    fit_p.set_defaults(func=cmd_fit)

    sel = sub.add_parser("select", help="search (lambda, gamma) by cross-validation")
    sel.add_argument("input")
    sel.add_argument("--criterion", choices=("cv", "gcv", "gcv-corr"), default="cv")
    sel.add_argument("--lambda-min", type=float, default=1e-8)
    sel.add_argument("--lambda-max", type=float, default=1e2)
    sel.add_argument("--lambda-steps", type=int, default=15)
    sel.add_argument("--gamma-min", type=float, default=1e-4)
    sel.add_argument("--gamma-max", type=float, default=1e4)
    sel.add_argument("--gamma-steps", type=int, default=13)
    sel.add_argument("--weights")
    sel.add_argument("--corr")
    sel.add_argument("--grid", type=int, default=200)
    sel.add_argument("--out", required=True)
    sel.set_defaults(func=cmd_select)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error while {exc.stage}: {exc}", file=sys.stderr)
        return exc.code
    except DegenerateScoreError as exc:
        print(f"error while scoring: {exc}", file=sys.stderr)
        return 3


def entrypoint():
    sys.exit(main())
