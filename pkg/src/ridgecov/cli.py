"""Command-line interface.

Subcommands: mp check, constants, simulate, variance-curve, optimize,
bootstrap, pred-mse. Data goes to files (or stdout for single-table
commands); all error text goes to stderr. Exit codes: 0 success, 2
configuration error, 3 numerical failure, 4 invariant violation.

simulate and bootstrap accept both a config file (key = value lines, '#'
comments, keys mirror flag names with '-' and '_' interchangeable) and
flags; flags take precedence over file values, which take precedence over
built-in defaults. Randomness flows from a single required seed.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from typing import Callable, Optional

from .avar import LimitParams, optimize_lambda, variance_curve
from .debias import (
    MonteCarloConstants,
    PROOF_VERSION,
    DISPLAY_VERSION,
    QUADRATURE,
    as_kind,
    compute_constants,
    normalizers,
)
from .errors import (
    AllDegenerate,
    ConfigError,
    DegenerateNormalizer,
    NonIntegrable,
    QuadratureFailure,
    RidgecovError,
    SolveFailure,
)
from .harness import (
    CoeffSpec,
    ExperimentConfig,
    KIND_ORDER,
    LambdaGrid,
    pred_mse_curve,
    read_records_csv,
    run_experiment,
    summarize_records,
    validate_bootstrap,
    write_boot_ratios_csv,
    write_pred_mse_csv,
    write_records_csv,
    write_summary_csv,
)
from .mp import MpLaw, identity_checks
from .ridge import prediction_optimal_lambda

CURVE_FIELDS = (
    "kind", "split", "lambda", "total", "var_of_cond_exp", "exp_of_cond_var",
    "degenerate_flag",
)

_NUMERICAL = (
    QuadratureFailure, NonIntegrable, SolveFailure, DegenerateNormalizer,
    AllDegenerate,
)


def _conv_int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"expected an integer, got {text!r}") from None


def _conv_float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"expected a number, got {text!r}") from None


def _conv_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _conv_str(text: str) -> str:
    return text


def _choice(*allowed: str) -> Callable[[str], str]:
    def convert(text: str) -> str:
        if text not in allowed:
            raise ConfigError(f"expected one of {allowed}, got {text!r}")
        return text

    return convert


# Experiment options shared by simulate and bootstrap. Each entry:
# dest -> (converter, default, required, help). All flags parse as raw
# strings so file-provided and flag-provided values pass through one
# conversion path.
_EXPERIMENT_OPTIONS: dict[str, tuple[Callable, object, bool, str]] = {
    "n": (_conv_int, None, True, "rows per split"),
    "c": (_conv_float, None, True, "aspect ratio p/n (p = round(c*n))"),
    "split": (_conv_int, None, True, "2 or 3"),
    "rho": (_conv_float, None, True, "true error correlation"),
    "style": (_choice("uniform_rescaled", "exact_gram"), "uniform_rescaled",
              False, "coefficient construction"),
    "u": (_conv_float, 1.0, False, "norm of alpha0"),
    "v": (_conv_float, 1.0, False, "norm of beta0"),
    "varrho": (_conv_float, 0.75, False, "alpha0^T beta0 target"),
    "grid": (_conv_str, None, True, "lambda grid lo:hi:count[:log]"),
    "kinds": (_conv_str, "INT,NR,DR", False, "comma-separated estimator kinds"),
    "reps": (_conv_int, None, False,
             "replicates per lambda (default: 2000 for p <= 500, else 500)"),
    "seed": (_conv_int, None, True, "master seed (required; no wall clock)"),
    "constants_method": (_choice("quad", "mc"), "quad", False,
                         "bias-constant evaluation"),
    "nr2sp_variant": (_choice(PROOF_VERSION, DISPLAY_VERSION), PROOF_VERSION,
                      False, "two-split NR correction variant"),
    "redraw_coeffs": (_conv_bool, False, False,
                      "redraw coefficients every replicate"),
    "threads": (_conv_int, 1, False, "worker threads (output independent)"),
}


def _add_experiment_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", default=None,
                     help="config file with key = value lines")
    for dest, (_, _, _, help_text) in _EXPERIMENT_OPTIONS.items():
        flag = "--" + dest.replace("_", "-")
        if dest == "redraw_coeffs":
            sub.add_argument(flag, dest=dest, nargs="?", const="true",
                             default=None, metavar="BOOL", help=help_text)
        else:
            sub.add_argument(flag, dest=dest, default=None, help=help_text)


def _read_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = line.split("=", 1)
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _resolve_experiment(args) -> dict:
    """Merge flag > config-file > default, convert, and validate presence."""
    file_values = _read_config_file(args.config) if args.config else {}
    unknown = set(file_values) - set(_EXPERIMENT_OPTIONS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    resolved = {}
    for dest, (convert, default, required, _) in _EXPERIMENT_OPTIONS.items():
        raw = getattr(args, dest)
        if raw is None and dest in file_values:
            raw = file_values[dest]
        if raw is None:
            if required:
                raise ConfigError(f"--{dest.replace('_', '-')} is required")
            resolved[dest] = default
        else:
            try:
                resolved[dest] = convert(raw)
            except ConfigError as exc:
                raise ConfigError(f"--{dest.replace('_', '-')}: {exc}") from None
    return resolved


def _experiment_config(resolved: dict) -> ExperimentConfig:
    return ExperimentConfig(
        n_per_split=resolved["n"],
        c=resolved["c"],
        split=resolved["split"],
        rho=resolved["rho"],
        coeff=CoeffSpec(style=resolved["style"], u=resolved["u"],
                        v=resolved["v"], varrho=resolved["varrho"]),
        grid=LambdaGrid.from_string(resolved["grid"]),
        kinds=tuple(k.strip() for k in resolved["kinds"].split(",") if k.strip()),
        reps=resolved["reps"],
        master_seed=resolved["seed"],
        constants_method=resolved["constants_method"],
        nr2sp_variant=resolved["nr2sp_variant"],
        redraw_coeffs=resolved["redraw_coeffs"],
        threads=resolved["threads"],
    )


def _out_writer(path: Optional[str]):
    if path is None:
        return sys.stdout, False
    return open(path, "w", newline=""), True


# ---------------------------------------------------------------------------
# Subcommand handlers.
# ---------------------------------------------------------------------------


def _cmd_mp_check(args) -> int:
    law = MpLaw(_conv_float(args.c))
    rows = identity_checks(law)
    width = max(len(r.name) for r in rows)
    print(f"{'identity':<{width}}  {'value':>20}  {'expected':>20}  status")
    all_ok = True
    for r in rows:
        status = "PASS" if r.ok else "FAIL"
        all_ok &= r.ok
        print(f"{r.name:<{width}}  {r.value:>20.12f}  {r.expected:>20.12f}  {status}")
    if not all_ok:
        print("mp check: identity mismatch beyond tolerance", file=sys.stderr)
        return 3
    return 0


def _cmd_constants(args) -> int:
    law = MpLaw(_conv_float(args.c))
    lambda1 = _conv_float(args.lambda1)
    lambda2 = _conv_float(args.lambda2)
    if args.method == "mc":
        method = MonteCarloConstants(n=args.mc_n, iters=args.mc_iters,
                                     seed=args.mc_seed)
    else:
        method = QUADRATURE
    g = compute_constants(law, lambda1, lambda2, method)
    print(f"c = {law.c!r}")
    print(f"lambda1 = {lambda1!r}")
    print(f"lambda2 = {lambda2!r}")
    for name in ("g_int_3sp", "g1_int_2sp", "g2_int_2sp", "g_nr",
                 "g_dr_3sp", "g_dr2_2sp"):
        print(f"{name} = {getattr(g, name)!r}")
    h = normalizers(g)
    for name in ("int_2sp_denom", "nr_2sp_denom", "nr_2sp_subtract",
                 "dr_2sp_denom", "dr_2sp_subtract", "int_3sp_scale",
                 "nr_3sp_subtract", "dr_3sp_subtract"):
        print(f"{name} = {getattr(h, name)!r}")
    return 0


def _cmd_simulate(args) -> int:
    resolved = _resolve_experiment(args)
    cfg = _experiment_config(resolved)
    os.makedirs(args.out, exist_ok=True)
    summary_path = os.path.join(args.out, "summary.csv")
    if args.from_records:
        records = read_records_csv(args.from_records)
        write_summary_csv(summarize_records(records, cfg), summary_path)
        return 0
    records, summaries = run_experiment(cfg)
    write_records_csv(records, os.path.join(args.out, "records.csv"))
    write_summary_csv(summaries, summary_path)
    return 0


def _cmd_variance_curve(args) -> int:
    law = MpLaw(_conv_float(args.c))
    lp = LimitParams(c=law.c, u=_conv_float(args.u), v=_conv_float(args.v),
                     varrho=_conv_float(args.varrho), rho=_conv_float(args.rho))
    grid = LambdaGrid.from_string(args.grid).values()
    kinds = ([as_kind(args.kind)] if args.kind
             else list(KIND_ORDER))
    splits = [args.split] if args.split else [2, 3]
    fh, close = _out_writer(args.out)
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_FIELDS)
        for kind in kinds:
            for split in splits:
                points = variance_curve(kind, split, law, lp, grid,
                                        nr2sp_variant=args.nr2sp_variant)
                for pt in points:
                    if pt.degenerate:
                        w.writerow([kind.value, split, repr(pt.lam), "", "", "", 1])
                    else:
                        b = pt.breakdown
                        w.writerow([
                            kind.value, split, repr(pt.lam), repr(b.total),
                            repr(b.var_of_cond_exp), repr(b.exp_of_cond_var), 0,
                        ])
    finally:
        if close:
            fh.close()
    return 0


def _cmd_optimize(args) -> int:
    law = MpLaw(_conv_float(args.c))
    u = _conv_float(args.u)
    lp = LimitParams(c=law.c, u=u, v=_conv_float(args.v),
                     varrho=_conv_float(args.varrho), rho=_conv_float(args.rho))
    grid_spec = LambdaGrid.from_string(args.grid)
    grid = grid_spec.values()
    kind = as_kind(args.kind)
    result = optimize_lambda(kind, args.split, law, lp, grid,
                             nr2sp_variant=args.nr2sp_variant)
    lam_pred = prediction_optimal_lambda(law, u)
    if len(grid) > 1:
        step = max(b - a for a, b in zip(grid[:-1], grid[1:]))
    else:
        step = 0.0
    print(f"kind = {kind.value}")
    print(f"split = {args.split}")
    print(f"variance-optimal lambda = {result.lambda_opt!r}")
    print(f"n x limiting variance at optimum = {result.breakdown_opt.total!r}")
    print(f"prediction-optimal lambda = {lam_pred!r} (c / u^2)")
    gap = abs(result.lambda_opt - lam_pred)
    if gap > step:
        print(f"verdict: DIFFER (gap {gap!r} exceeds one grid step {step!r})")
    else:
        print(f"verdict: match within one grid step (gap {gap!r}, step {step!r})")
    return 0


def _cmd_bootstrap(args) -> int:
    resolved = _resolve_experiment(args)
    cfg = _experiment_config(resolved)
    rows, summaries = validate_bootstrap(cfg, B=args.B,
                                         outer_reps=args.outer_reps)
    os.makedirs(args.out, exist_ok=True)
    write_boot_ratios_csv(rows, os.path.join(args.out, "boot_ratios.csv"))
    print("kind  count     min      q1  median    mean      q3     max")
    for s in summaries:
        print(f"{s.kind:<4}  {s.count:>5}  {s.minimum:>6.3f}  {s.q1:>6.3f}"
              f"  {s.median:>6.3f}  {s.mean:>6.3f}  {s.q3:>6.3f}  {s.maximum:>6.3f}")
    return 0


def _cmd_pred_mse(args) -> int:
    grid = LambdaGrid.from_string(args.grid)
    rows = pred_mse_curve(
        c=_conv_float(args.c), u=_conv_float(args.u), grid=grid,
        n=args.n, reps=args.reps, seed=args.seed, threads=args.threads,
    )
    fh, close = _out_writer(args.out)
    try:
        write = csv.writer(fh, lineterminator="\n")
        write.writerow(("lambda", "mse_theory", "mse_emp", "mse_emp_se"))
        for r in rows:
            write.writerow([
                repr(r.lam), repr(r.mse_theory),
                "" if r.mse_emp is None else repr(r.mse_emp),
                "" if r.mse_emp_se is None else repr(r.mse_emp_se),
            ])
    finally:
        if close:
            fh.close()
    return 0


# ---------------------------------------------------------------------------
# Parser assembly and dispatch.
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ridgecov",
        description="Debiased conditional-covariance estimation toolkit",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    mp_parser = subs.add_parser("mp", help="spectral-law diagnostics")
    mp_subs = mp_parser.add_subparsers(dest="mp_command", required=True)
    mp_check = mp_subs.add_parser("check", help="verify closed-form identities")
    mp_check.add_argument("--c", required=True, help="aspect ratio")
    mp_check.set_defaults(func=_cmd_mp_check)

    cons = subs.add_parser("constants", help="print bias-correction constants")
    cons.add_argument("--c", required=True)
    cons.add_argument("--lambda1", required=True)
    cons.add_argument("--lambda2", required=True)
    cons.add_argument("--method", choices=("quad", "mc"), default="quad")
    cons.add_argument("--mc-iters", type=int, default=10000)
    cons.add_argument("--mc-n", type=int, default=500)
    cons.add_argument("--mc-seed", type=int, default=0)
    cons.set_defaults(func=_cmd_constants)

    sim = subs.add_parser("simulate", help="run a Monte Carlo experiment")
    _add_experiment_flags(sim)
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--from-records", default=None,
                     help="skip simulation; re-summarize this records.csv")
    sim.set_defaults(func=_cmd_simulate)

    curve = subs.add_parser("variance-curve",
                            help="limiting variance across a lambda grid")
    curve.add_argument("--u", required=True)
    curve.add_argument("--v", required=True)
    curve.add_argument("--varrho", required=True)
    curve.add_argument("--rho", required=True)
    curve.add_argument("--c", required=True)
    curve.add_argument("--grid", required=True)
    curve.add_argument("--kind", default=None, help="restrict to one kind")
    curve.add_argument("--split", type=int, choices=(2, 3), default=None)
    curve.add_argument("--nr2sp-variant",
                       choices=(PROOF_VERSION, DISPLAY_VERSION),
                       default=PROOF_VERSION)
    curve.add_argument("--out", default=None, help="CSV path (default stdout)")
    curve.set_defaults(func=_cmd_variance_curve)

    opt = subs.add_parser("optimize",
                          help="variance-optimal vs prediction-optimal lambda")
    opt.add_argument("--kind", required=True)
    opt.add_argument("--split", type=int, choices=(2, 3), required=True)
    opt.add_argument("--u", required=True)
    opt.add_argument("--v", required=True)
    opt.add_argument("--varrho", required=True)
    opt.add_argument("--rho", required=True)
    opt.add_argument("--c", required=True)
    opt.add_argument("--grid", required=True)
    opt.add_argument("--nr2sp-variant",
                     choices=(PROOF_VERSION, DISPLAY_VERSION),
                     default=PROOF_VERSION)
    opt.set_defaults(func=_cmd_optimize)

    boot = subs.add_parser("bootstrap", help="bootstrap SE calibration study")
    _add_experiment_flags(boot)
    boot.add_argument("--B", type=int, default=2000,
                      help="bootstrap replicates per dataset")
    boot.add_argument("--outer-reps", type=int, default=500,
                      help="outer Monte Carlo replicates per lambda")
    boot.add_argument("--out", required=True, help="output directory")
    boot.set_defaults(func=_cmd_bootstrap)

    pred = subs.add_parser("pred-mse", help="nuisance prediction MSE curve")
    pred.add_argument("--c", required=True)
    pred.add_argument("--u", required=True)
    pred.add_argument("--grid", required=True)
    pred.add_argument("--n", type=int, default=None)
    pred.add_argument("--reps", type=int, default=None)
    pred.add_argument("--seed", type=int, default=None)
    pred.add_argument("--threads", type=int, default=1)
    pred.add_argument("--out", default=None, help="CSV path (default stdout)")
    pred.set_defaults(func=_cmd_pred_mse)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _NUMERICAL as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except RidgecovError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 4
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
