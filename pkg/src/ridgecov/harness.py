"""Monte Carlo experiment orchestration with deterministic seeding and CSV
emission.

Every random draw belongs to a cell keyed by (grid index, replicate index)
and flows from substream(master_seed, ...), so results are byte-identical
regardless of thread count or scheduling: cells are computed in any order,
collected, and emitted sorted.

Outputs are two CSV files. records.csv has one row per (kind, lambda,
replicate) with the raw and debiased estimates; summary.csv has one row per
(kind, lambda) with bias/variance statistics and their theoretical
counterparts. Summaries are a pure function of (records, config), so
re-summarizing a records file reproduces summary.csv exactly.
"""

from __future__ import annotations

import csv
import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .avar import LimitParams, bilinear_variance_limit, limiting_variance
from .debias import (
    EstimatorKind,
    MonteCarloConstants,
    PROOF_VERSION,
    QUADRATURE,
    as_kind,
    asymptotic_bias,
    check_split,
    compute_constants,
    debiased_from_moments,
    eval_moments,
    fit_nuisances,
    moments_given_fits,
    raw_from_moments,
)
from .dgp import (
    Dataset,
    EXACT_GRAM,
    ModelParams,
    SplitLayout,
    UNIFORM_RESCALED,
    generate_with_rng,
    make_coefficients,
    split as split_data,
)
from .errors import ConfigError, DegenerateNormalizer
from .mp import MpLaw, SpectralIntegrand
from .pboot import (
    bootstrap_variance_engine,
    compute_boot_constants,
    transform_scalars,
)
from .ridge import GramSolver, prediction_mse_theory, prediction_optimal_lambda
from .seeding import fingerprint, substream

KIND_ORDER = (EstimatorKind.INT, EstimatorKind.NR, EstimatorKind.DR)

RECORD_FIELDS = (
    "kind", "split", "lambda", "rep_index", "theta_raw", "theta_debiased",
    "degenerate_flag", "seed_used",
)
SUMMARY_FIELDS = (
    "kind", "split", "lambda", "reps_used", "bias", "bias_se", "n_var_emp",
    "v_theory", "bias_theory", "boot_ratio",
    # extension columns (documented in README): raw-estimator statistics and
    # the prediction-optimal penalty, consumed by the figure generator
    "bias_raw", "bias_raw_se", "lambda_pred_opt",
)
BOOT_RATIO_FIELDS = (
    "kind", "split", "lambda", "outer_used", "true_se", "boot_se_median",
    "ratio", "clamped_count",
)
PRED_MSE_FIELDS = ("lambda", "mse_theory", "mse_emp", "mse_emp_se")


@dataclass(frozen=True)
class CoeffSpec:
    style: str = UNIFORM_RESCALED
    u: float = 1.0
    v: float = 1.0
    varrho: float = 0.75

    def __post_init__(self) -> None:
        if self.style not in (UNIFORM_RESCALED, EXACT_GRAM):
            raise ConfigError(f"unknown coefficient style {self.style!r}")
        if self.u <= 0 or self.v <= 0:
            raise ConfigError("coefficient norms u, v must be positive")
        if abs(self.varrho) > self.u * self.v:
            raise ConfigError("|varrho| must be at most u*v")


@dataclass(frozen=True)
class LambdaGrid:
    lo: float
    hi: float
    count: int
    spacing: str = "linear"

    def __post_init__(self) -> None:
        if not self.lo > 0:
            raise ConfigError("grid lo must be positive")
        if self.hi < self.lo:
            raise ConfigError("grid hi must be at least lo")
        if self.count < 1:
            raise ConfigError("grid count must be at least 1")
        if self.count == 1 and self.hi != self.lo:
            raise ConfigError("a one-point grid needs hi == lo")
        if self.spacing not in ("linear", "log"):
            raise ConfigError(f"unknown grid spacing {self.spacing!r}")

    def values(self) -> tuple[float, ...]:
        if self.count == 1:
            return (float(self.lo),)
        if self.spacing == "linear":
            vals = np.linspace(self.lo, self.hi, self.count)
        else:
            vals = np.geomspace(self.lo, self.hi, self.count)
        return tuple(float(x) for x in vals)

    @classmethod
    def from_string(cls, text: str) -> "LambdaGrid":
        """Parse 'lo:hi:count' with an optional ':log' (or ':linear') tail."""
        parts = text.split(":")
        if len(parts) not in (3, 4):
            raise ConfigError(f"grid must be lo:hi:count[:log], got {text!r}")
        spacing = parts[3] if len(parts) == 4 else "linear"
        try:
            lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise ConfigError(f"malformed grid {text!r}") from None
        return cls(lo=lo, hi=hi, count=count, spacing=spacing)

    def to_string(self) -> str:
        return f"{self.lo!r}:{self.hi!r}:{self.count}:{self.spacing}"


def _as_kinds(kinds) -> tuple[EstimatorKind, ...]:
    parsed = {as_kind(k) for k in kinds}
    if not parsed:
        raise ConfigError("kinds must be a non-empty subset of INT, NR, DR")
    return tuple(k for k in KIND_ORDER if k in parsed)


@dataclass(frozen=True)
class ExperimentConfig:
    n_per_split: int
    c: float
    split: int
    rho: float
    coeff: CoeffSpec
    grid: LambdaGrid
    kinds: tuple[EstimatorKind, ...] = KIND_ORDER
    reps: Optional[int] = None  # None: 2000 for p <= 500, else 500
    master_seed: int = 0
    constants_method: str = "quad"
    nr2sp_variant: str = PROOF_VERSION
    redraw_coeffs: bool = False
    threads: int = 1

    def __post_init__(self) -> None:
        if self.n_per_split < 1:
            raise ConfigError("n_per_split must be positive")
        if not self.c > 0:
            raise ConfigError("c must be positive")
        check_split(self.split)
        if not abs(self.rho) <= 1:
            raise ConfigError("|rho| must be at most 1")
        if self.p < 2:
            raise ConfigError("p = round(c * n_per_split) must be at least 2")
        object.__setattr__(self, "kinds", _as_kinds(self.kinds))
        if self.reps is not None and self.reps < 1:
            raise ConfigError("reps must be at least 1")
        if self.constants_method not in ("quad", "mc"):
            raise ConfigError(f"unknown constants method {self.constants_method!r}")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")

    @property
    def p(self) -> int:
        return int(round(self.c * self.n_per_split))

    @property
    def resolved_reps(self) -> int:
        if self.reps is not None:
            return self.reps
        return 2000 if self.p <= 500 else 500

    def canonical_text(self) -> str:
        """Stable key = value rendering; threads is execution detail, not
        identity, so it is excluded."""
        lines = [
            f"n_per_split = {self.n_per_split}",
            f"c = {self.c!r}",
            f"split = {self.split}",
            f"rho = {self.rho!r}",
            f"coeff_style = {self.coeff.style}",
            f"u = {self.coeff.u!r}",
            f"v = {self.coeff.v!r}",
            f"varrho = {self.coeff.varrho!r}",
            f"grid = {self.grid.to_string()}",
            f"kinds = {','.join(k.value for k in self.kinds)}",
            f"reps = {self.resolved_reps}",
            f"master_seed = {self.master_seed}",
            f"constants_method = {self.constants_method}",
            f"nr2sp_variant = {self.nr2sp_variant}",
            f"redraw_coeffs = {int(self.redraw_coeffs)}",
        ]
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class ExperimentRecord:
    kind: str
    split: int
    lam: float
    rep_index: int
    theta_raw: float
    theta_debiased: Optional[float]
    degenerate: bool
    seed_used: int


@dataclass(frozen=True)
class SummaryRow:
    kind: str
    split: int
    lam: float
    reps_used: int
    bias: Optional[float]
    bias_se: Optional[float]
    n_var_emp: Optional[float]
    v_theory: Optional[float]
    bias_theory: float
    boot_ratio: Optional[float]
    bias_raw: float
    bias_raw_se: Optional[float]
    lambda_pred_opt: float


def _constants_method(cfg: ExperimentConfig):
    return QUADRATURE if cfg.constants_method == "quad" else MonteCarloConstants()


def _layout(cfg: ExperimentConfig) -> SplitLayout:
    n = cfg.n_per_split
    return SplitLayout.two(n, n) if cfg.split == 2 else SplitLayout.three(n, n, n)


def _views(split: int, parts: Sequence[Dataset]) -> tuple[Dataset, Dataset, Dataset]:
    if split == 2:
        return parts[0], parts[0], parts[1]
    return parts[0], parts[1], parts[2]


def fixed_coefficients(cfg: ExperimentConfig) -> tuple[np.ndarray, np.ndarray]:
    return make_coefficients(
        cfg.p, cfg.coeff.u, cfg.coeff.v, cfg.coeff.varrho, cfg.coeff.style,
        seed=cfg.master_seed,
    )


def effective_varrho(cfg: ExperimentConfig) -> float:
    """The alpha0^T beta0 value the theory columns should target.

    Fixed coefficients (the default): the realized inner product of the one
    draw every replicate shares. Redrawn coefficients: the limit of the draw
    distribution (exact for the exact-gram style; uniform entries rescaled to
    fixed norms concentrate at 0.75*u*v).
    """
    if not cfg.redraw_coeffs:
        alpha0, beta0 = fixed_coefficients(cfg)
        return float(alpha0 @ beta0)
    if cfg.coeff.style == EXACT_GRAM:
        return cfg.coeff.varrho
    return 0.75 * cfg.coeff.u * cfg.coeff.v


def _cell_records(
    cfg: ExperimentConfig,
    gi: int,
    lam: float,
    rep: int,
    g,
    fixed: Optional[tuple[np.ndarray, np.ndarray]],
) -> list[ExperimentRecord]:
    seed_used = fingerprint(cfg.master_seed, "sim", gi, rep)
    rng = substream(cfg.master_seed, "sim", gi, rep)
    if fixed is not None:
        alpha0, beta0 = fixed
    else:
        coeff_seed = fingerprint(cfg.master_seed, "coeff-redraw", gi, rep)
        alpha0, beta0 = make_coefficients(
            cfg.p, cfg.coeff.u, cfg.coeff.v, cfg.coeff.varrho,
            cfg.coeff.style, seed=coeff_seed,
        )
    params = ModelParams(p=cfg.p, alpha0=alpha0, beta0=beta0, rho=cfg.rho)
    layout = _layout(cfg)
    data = generate_with_rng(params, sum(layout.sizes), rng)
    d_alpha, d_beta, d_eval = _views(cfg.split, split_data(data, layout))
    moments = eval_moments(cfg.split, d_alpha, d_beta, d_eval, lam, lam)
    out = []
    for kind in cfg.kinds:
        raw = raw_from_moments(kind, moments)
        try:
            deb: Optional[float] = debiased_from_moments(
                kind, cfg.split, moments, g, cfg.nr2sp_variant
            )
            degenerate = False
        except DegenerateNormalizer:
            deb, degenerate = None, True
        out.append(ExperimentRecord(
            kind=kind.value, split=cfg.split, lam=lam, rep_index=rep,
            theta_raw=raw, theta_debiased=deb, degenerate=degenerate,
            seed_used=seed_used,
        ))
    return out


def _run_cells(cfg: ExperimentConfig, worker, cells: list):
    """Execute worker over cells with cfg.threads workers; results keyed by
    cell so assembly order never depends on scheduling."""
    results = {}
    if cfg.threads == 1:
        for cell in cells:
            results[cell] = worker(cell)
    else:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            for cell, value in zip(cells, pool.map(worker, cells)):
                results[cell] = value
    return results


def run_experiment(
    cfg: ExperimentConfig,
) -> tuple[list[ExperimentRecord], list[SummaryRow]]:
    """Simulate the full (lambda, replicate) grid and summarize it."""
    law = MpLaw(cfg.c)
    method = _constants_method(cfg)
    lambdas = cfg.grid.values()
    g_by_gi = {gi: compute_constants(law, lam, lam, method)
               for gi, lam in enumerate(lambdas)}
    fixed = None if cfg.redraw_coeffs else fixed_coefficients(cfg)
    reps = cfg.resolved_reps
    cells = [(gi, rep) for gi in range(len(lambdas)) for rep in range(reps)]

    def worker(cell):
        gi, rep = cell
        return _cell_records(cfg, gi, lambdas[gi], rep, g_by_gi[gi], fixed)

    results = _run_cells(cfg, worker, cells)
    kind_pos = {k.value: i for i, k in enumerate(KIND_ORDER)}
    records = [
        rec
        for gi in range(len(lambdas))
        for rep in range(reps)
        for rec in results[(gi, rep)]
    ]
    records.sort(key=lambda r: (kind_pos[r.kind], r.lam, r.rep_index))
    return records, summarize_records(records, cfg)


def summarize_records(
    records: Sequence[ExperimentRecord], cfg: ExperimentConfig
) -> list[SummaryRow]:
    """Pure reduction of records to per-(kind, lambda) statistics, with the
    matching theory columns recomputed from the config."""
    law = MpLaw(cfg.c)
    method = _constants_method(cfg)
    varrho = effective_varrho(cfg)
    lp = LimitParams(c=cfg.c, u=cfg.coeff.u, v=cfg.coeff.v,
                     varrho=varrho, rho=cfg.rho)
    theta0 = cfg.rho
    lam_pred = prediction_optimal_lambda(law, cfg.coeff.u)
    kind_pos = {k.value: i for i, k in enumerate(KIND_ORDER)}

    groups: dict[tuple[str, float], list[ExperimentRecord]] = {}
    for rec in records:
        groups.setdefault((rec.kind, rec.lam), []).append(rec)

    g_cache: dict[float, object] = {}
    rows = []
    for (kind_str, lam) in sorted(groups, key=lambda k: (kind_pos[k[0]], k[1])):
        grp = sorted(groups[(kind_str, lam)], key=lambda r: r.rep_index)
        kind = as_kind(kind_str)
        if lam not in g_cache:
            g_cache[lam] = compute_constants(law, lam, lam, method)
        g = g_cache[lam]
        debs = np.array([r.theta_debiased for r in grp if not r.degenerate])
        raws = np.array([r.theta_raw for r in grp])
        reps_used = len(debs)
        bias = float(np.mean(debs)) - theta0 if reps_used >= 1 else None
        bias_se = (
            float(np.std(debs, ddof=1) / math.sqrt(reps_used))
            if reps_used >= 2 else None
        )
        n_var_emp = (
            cfg.n_per_split * float(np.var(debs, ddof=1))
            if reps_used >= 2 else None
        )
        try:
            v_theory: Optional[float] = limiting_variance(
                kind, cfg.split, law, lp, lam, lam, g=g,
                nr2sp_variant=cfg.nr2sp_variant,
            ).total
        except DegenerateNormalizer:
            v_theory = None
        bias_raw = float(np.mean(raws)) - theta0
        bias_raw_se = (
            float(np.std(raws, ddof=1) / math.sqrt(len(raws)))
            if len(raws) >= 2 else None
        )
        rows.append(SummaryRow(
            kind=kind_str, split=cfg.split, lam=lam, reps_used=reps_used,
            bias=bias, bias_se=bias_se, n_var_emp=n_var_emp,
            v_theory=v_theory,
            bias_theory=asymptotic_bias(kind, cfg.split, varrho, theta0, g),
            boot_ratio=None, bias_raw=bias_raw, bias_raw_se=bias_raw_se,
            lambda_pred_opt=lam_pred,
        ))
    return rows


# ---------------------------------------------------------------------------
# CSV emission and parsing. Floats are written with repr (shortest exact
# round-trip), missing values as empty fields, flags as 0/1; '\n' line ends.
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _opt_float(text: str) -> Optional[float]:
    return None if text == "" else float(text)


def write_records_csv(records: Sequence[ExperimentRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_FIELDS)
        for r in records:
            w.writerow([
                r.kind, r.split, _fmt(r.lam), r.rep_index, _fmt(r.theta_raw),
                _fmt(r.theta_debiased), int(r.degenerate), r.seed_used,
            ])


def read_records_csv(path) -> list[ExperimentRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != RECORD_FIELDS:
            raise ConfigError(f"unexpected records header {header!r}")
        out = []
        for row in reader:
            out.append(ExperimentRecord(
                kind=row[0], split=int(row[1]), lam=float(row[2]),
                rep_index=int(row[3]), theta_raw=float(row[4]),
                theta_debiased=_opt_float(row[5]),
                degenerate=bool(int(row[6])), seed_used=int(row[7]),
            ))
    return out


def write_summary_csv(rows: Sequence[SummaryRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_FIELDS)
        for r in rows:
            w.writerow([
                r.kind, r.split, _fmt(r.lam), r.reps_used, _fmt(r.bias),
                _fmt(r.bias_se), _fmt(r.n_var_emp), _fmt(r.v_theory),
                _fmt(r.bias_theory), _fmt(r.boot_ratio), _fmt(r.bias_raw),
                _fmt(r.bias_raw_se), _fmt(r.lambda_pred_opt),
            ])


def read_summary_csv(path) -> list[SummaryRow]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != SUMMARY_FIELDS:
            raise ConfigError(f"unexpected summary header {header!r}")
        out = []
        for row in reader:
            out.append(SummaryRow(
                kind=row[0], split=int(row[1]), lam=float(row[2]),
                reps_used=int(row[3]), bias=_opt_float(row[4]),
                bias_se=_opt_float(row[5]), n_var_emp=_opt_float(row[6]),
                v_theory=_opt_float(row[7]), bias_theory=float(row[8]),
                boot_ratio=_opt_float(row[9]), bias_raw=float(row[10]),
                bias_raw_se=_opt_float(row[11]),
                lambda_pred_opt=float(row[12]),
            ))
    return out


# ---------------------------------------------------------------------------
# Bootstrap calibration: true SE across outer Monte Carlo replicates vs the
# per-replicate bootstrap SE (summarized by its median over replicates).
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BootRatioRow:
    kind: str
    split: int
    lam: float
    outer_used: int
    true_se: Optional[float]
    boot_se_median: Optional[float]
    ratio: Optional[float]
    clamped_count: int


@dataclass(frozen=True)
class BootRatioSummary:
    kind: str
    count: int
    minimum: float
    q1: float
    median: float
    mean: float
    q3: float
    maximum: float


def validate_bootstrap(
    cfg: ExperimentConfig,
    B: int,
    outer_reps: int,
    batch: int = 2048,
) -> tuple[list[BootRatioRow], list[BootRatioSummary]]:
    """For each grid lambda: estimate the true sampling SE from outer_reps
    fresh datasets and compare with each dataset's own bootstrap SE."""
    if outer_reps < 50:
        raise ConfigError("outer_reps must be at least 50")
    if B < 1:
        raise ConfigError("B must be at least 1")
    law = MpLaw(cfg.c)
    method = _constants_method(cfg)
    lambdas = cfg.grid.values()
    g_by_gi = {gi: compute_constants(law, lam, lam, method)
               for gi, lam in enumerate(lambdas)}
    bc_by_gi = {gi: compute_boot_constants(law, lam, lam)
                for gi, lam in enumerate(lambdas)}
    fixed = None if cfg.redraw_coeffs else fixed_coefficients(cfg)
    layout = _layout(cfg)
    cells = [(gi, o) for gi in range(len(lambdas)) for o in range(outer_reps)]

    def worker(cell):
        gi, o = cell
        lam, g, bc = lambdas[gi], g_by_gi[gi], bc_by_gi[gi]
        if fixed is not None:
            alpha0, beta0 = fixed
        else:
            coeff_seed = fingerprint(cfg.master_seed, "coeff-redraw-boot", gi, o)
            alpha0, beta0 = make_coefficients(
                cfg.p, cfg.coeff.u, cfg.coeff.v, cfg.coeff.varrho,
                cfg.coeff.style, seed=coeff_seed,
            )
        params = ModelParams(p=cfg.p, alpha0=alpha0, beta0=beta0, rho=cfg.rho)
        rng = substream(cfg.master_seed, "boot", "data", gi, o)
        data = generate_with_rng(params, sum(layout.sizes), rng)
        d_alpha, d_beta, d_eval = _views(cfg.split, split_data(data, layout))
        alpha_hat, beta_hat = fit_nuisances(d_alpha, d_beta, lam, lam)
        moments = moments_given_fits(alpha_hat, beta_hat, d_eval)
        norm2_a = float(alpha_hat @ alpha_hat)
        norm2_b = float(beta_hat @ beta_hat)
        out = {}
        for kind in cfg.kinds:
            try:
                rho_hat = debiased_from_moments(
                    kind, cfg.split, moments, g, cfg.nr2sp_variant
                )
            except DegenerateNormalizer:
                out[kind.value] = None
                continue
            scalars = transform_scalars(
                norm2_a, norm2_b, moments.ab, rho_hat, bc, g, cfg.split
            )
            res = bootstrap_variance_engine(
                kind=kind, split=cfg.split, n_per_split=cfg.n_per_split,
                p=cfg.p, lambda1=lam, lambda2=lam, scalars=scalars,
                rho_hat=rho_hat, g=g, B=B,
                rng=substream(cfg.master_seed, "boot", "engine", gi, o, kind.value),
                nr2sp_variant=cfg.nr2sp_variant, batch=batch,
            )
            out[kind.value] = (rho_hat, res.se, res.clamped)
        return out

    results = _run_cells(cfg, worker, cells)
    kind_pos = {k.value: i for i, k in enumerate(KIND_ORDER)}
    rows = []
    for kind in cfg.kinds:
        for gi, lam in enumerate(lambdas):
            estimates, boot_ses, clamped = [], [], 0
            for o in range(outer_reps):
                entry = results[(gi, o)][kind.value]
                if entry is None:
                    continue
                rho_hat, se, was_clamped = entry
                estimates.append(rho_hat)
                boot_ses.append(se)
                clamped += int(was_clamped)
            if len(estimates) >= 2:
                true_se = float(np.std(estimates, ddof=1))
                boot_med = float(np.median(boot_ses))
                ratio = true_se / boot_med if boot_med > 0 else None
            else:
                true_se = boot_med = ratio = None
            rows.append(BootRatioRow(
                kind=kind.value, split=cfg.split, lam=lam,
                outer_used=len(estimates), true_se=true_se,
                boot_se_median=boot_med, ratio=ratio, clamped_count=clamped,
            ))
    rows.sort(key=lambda r: (kind_pos[r.kind], r.lam))

    summaries = []
    for kind in cfg.kinds:
        ratios = np.array([r.ratio for r in rows
                           if r.kind == kind.value and r.ratio is not None])
        if ratios.size == 0:
            continue
        q1, med, q3 = (float(np.quantile(ratios, q)) for q in (0.25, 0.5, 0.75))
        summaries.append(BootRatioSummary(
            kind=kind.value, count=int(ratios.size),
            minimum=float(ratios.min()), q1=q1, median=med,
            mean=float(ratios.mean()), q3=q3, maximum=float(ratios.max()),
        ))
    return rows, summaries


def write_boot_ratios_csv(rows: Sequence[BootRatioRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BOOT_RATIO_FIELDS)
        for r in rows:
            w.writerow([
                r.kind, r.split, _fmt(r.lam), r.outer_used, _fmt(r.true_se),
                _fmt(r.boot_se_median), _fmt(r.ratio), r.clamped_count,
            ])


# ---------------------------------------------------------------------------
# Independent probes: the bilinear-form variance lemma and the nuisance
# prediction MSE curve.
# ---------------------------------------------------------------------------


def lemma_e_probe(
    u: float,
    v: float,
    varrho: float,
    c: float,
    f: SpectralIntegrand,
    n: int,
    draws: int,
    seed: int,
) -> tuple[float, float]:
    """Empirical vs limiting variance of the bilinear form
    alpha0^T f(Sigma_hat) beta0 (variance scaled by n).

    For p > n the spectral function is applied through the dual
    eigendecomposition: nonzero eigenpairs from X X^T / n, plus an f(0) term
    on the null space.
    """
    if draws < 2:
        raise ConfigError("draws must be at least 2")
    law = MpLaw(c)
    p = int(round(c * n))
    alpha0, beta0 = make_coefficients(
        p, u, v, varrho, EXACT_GRAM, seed=fingerprint(seed, "lemma-e-coeff")
    )
    values = np.empty(draws)
    f_zero = float(f(np.array([0.0]))[0]) if p > n else 0.0
    for d in range(draws):
        rng = substream(seed, "lemma-e", d)
        X = rng.standard_normal((n, p))
        if p <= n:
            evals, vecs = np.linalg.eigh(X.T @ X / n)
            pa = vecs.T @ alpha0
            pb = vecs.T @ beta0
            values[d] = float(np.sum(f(np.maximum(evals, 0.0)) * pa * pb))
        else:
            evals, vecs = np.linalg.eigh(X @ X.T / n)
            evals = np.maximum(evals, 0.0)
            scale = np.sqrt(n * np.maximum(evals, 1e-300))
            basis = (X.T @ vecs) / scale  # columns: eigenvectors of X^T X / n
            pa = basis.T @ alpha0
            pb = basis.T @ beta0
            bulk = float(np.sum(f(evals) * pa * pb))
            null = f_zero * float(alpha0 @ beta0 - pa @ pb)
            values[d] = bulk + null
    theory = bilinear_variance_limit(law, u, v, varrho, f)
    empirical = n * float(np.var(values, ddof=1))
    return empirical, theory


@dataclass(frozen=True)
class PredMseRow:
    lam: float
    mse_theory: float
    mse_emp: Optional[float]
    mse_emp_se: Optional[float]


def pred_mse_curve(
    c: float,
    u: float,
    grid: LambdaGrid,
    n: Optional[int] = None,
    reps: Optional[int] = None,
    seed: Optional[int] = None,
    threads: int = 1,
) -> list[PredMseRow]:
    """Limiting nuisance MSE across the grid, optionally with the empirical
    finite-sample curve from `reps` simulated fits."""
    law = MpLaw(c)
    lambdas = grid.values()
    theory = [prediction_mse_theory(law, u, lam) for lam in lambdas]
    if n is None:
        return [PredMseRow(lam, th, None, None)
                for lam, th in zip(lambdas, theory)]
    if reps is None or reps < 2:
        raise ConfigError("empirical curve needs reps >= 2")
    if seed is None:
        raise ConfigError("empirical curve needs a seed")
    p = int(round(c * n))
    coeff_rng = substream(seed, "pred-mse", "coeff")
    alpha0 = coeff_rng.standard_normal(p)
    alpha0 *= u / np.linalg.norm(alpha0)

    def worker(rep):
        rng = substream(seed, "pred-mse", rep)
        X = rng.standard_normal((n, p))
        a = X @ alpha0 + rng.standard_normal(n)
        solver = GramSolver(X)
        errs = np.empty(len(lambdas))
        for i, lam in enumerate(lambdas):
            diff = solver.solve(a, lam).coef - alpha0
            errs[i] = diff @ diff
        return errs

    reps_list = list(range(reps))
    if threads == 1:
        all_errs = np.stack([worker(r) for r in reps_list])
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            all_errs = np.stack(list(pool.map(worker, reps_list)))
    emp = all_errs.mean(axis=0)
    emp_se = all_errs.std(axis=0, ddof=1) / math.sqrt(reps)
    return [
        PredMseRow(lam, th, float(m), float(s))
        for lam, th, m, s in zip(lambdas, theory, emp, emp_se)
    ]


def write_pred_mse_csv(rows: Sequence[PredMseRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PRED_MSE_FIELDS)
        for r in rows:
            w.writerow([_fmt(r.lam), _fmt(r.mse_theory), _fmt(r.mse_emp),
                        _fmt(r.mse_emp_se)])
