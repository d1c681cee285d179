"""Monte Carlo convergence experiments: sweep the sample size, replicate,
aggregate errors, fit log-log rate exponents, and attach the theoretical
prediction.

Replication r of the i-th sample size draws from generator streams keyed
(seed, i, r, purpose), so results are independent of worker count and of
later grid extensions. For gaussian designs in the diagonal model the
replications are run on exactly-distributed sufficient statistics (O(J) per
dataset) unless a materialized realization is requested.
"""

from __future__ import annotations

import concurrent.futures
import math
from dataclasses import dataclass, field, asdict
from functools import lru_cache

import numpy as np

from . import metrics, posterior, sampling, theory
from .spectra import (
    ModelConfig,
    SpectralSequence,
    TRUTH_S_STAR,
    matern_spectrum,
    prior_variance_grid,
    prior_variances_diagonal,
    truth_eigenvalues,
)

__all__ = [
    "DEFAULT_NOISE_SCALES",
    "TruncationPolicy",
    "ExperimentConfig",
    "PerNStat",
    "FitResult",
    "RateReport",
    "truncation_level",
    "fit_rate",
    "run_experiment",
    "theory_error_floor",
    "MATRIX_S_STAR",
]

# Paper-matched per-truth noise scales for the desk experiments.
DEFAULT_NOISE_SCALES = {
    "neg_laplacian": 1e-1,
    "identity": 1e-3,
    "inv_neg_laplacian": 1e-5,
    "elliptic": 1e-1,
    "inv_elliptic": 1e-5,
}

_DIAG_TRUTHS = ("neg_laplacian", "identity", "inv_neg_laplacian")
_MATRIX_TRUTHS = ("elliptic", "identity", "inv_elliptic")

# s* of the diagonal operator each matrix truth is the non-diagonal analogue of.
MATRIX_S_STAR = {"elliptic": -2.5, "identity": -0.5, "inv_elliptic": 1.5}

_ERROR_KINDS = ("test_error", "excess_risk", "gen_gap", "conditional_closed_form")

TRUNCATION_FLOOR = 8


@dataclass(frozen=True)
class TruncationPolicy:
    """Either a fixed mode count or the N-dependent rule ceil(c * J_N)."""

    kind: str  # "fixed" | "n_dependent"
    value: float

    def __post_init__(self):
        if self.kind not in ("fixed", "n_dependent"):
            raise ValueError("unknown truncation policy %r" % (self.kind,))
        if self.kind == "fixed" and (self.value < 1 or self.value != int(self.value)):
            raise ValueError("fixed truncation level must be a positive integer")
        if self.kind == "n_dependent" and self.value <= 0:
            raise ValueError("n_dependent constant must be positive")


def truncation_level(policy: TruncationPolicy, alpha: float, p: float, N: int) -> int:
    """Mode count kept at sample size N; n_dependent floors at 8 modes."""
    if policy.kind == "fixed":
        return int(policy.value)
    if not alpha + p > 0.0:
        raise ValueError("alpha + p must be positive under n_dependent truncation")
    raw = policy.value * float(N) ** (1.0 / (2.0 * (alpha + p)))
    return max(TRUNCATION_FLOOR, int(math.ceil(raw)))


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one rate experiment bit-for-bit."""

    name: str
    model: ModelConfig
    truth: str
    estimator: str = "diagonal"
    N_grid: tuple[int, ...] = tuple(2**k for k in range(4, 13))
    replications: int = 100
    j_policy: TruncationPolicy = TruncationPolicy("fixed", 4096)
    error_kind: str = "test_error"
    seed: int = 0
    law: str = "gaussian"
    realization: str = "auto"  # auto | sufficient | full
    fit_drop_fraction: float = 0.25
    data_gamma: float | None = None  # noise scale of the data; None = model.gamma
    a_rate: float = -3.0
    j_big_factor: int = 4

    def __post_init__(self):
        if self.estimator not in ("diagonal", "matrix"):
            raise ValueError("unknown estimator %r" % (self.estimator,))
        truths = _DIAG_TRUTHS if self.estimator == "diagonal" else _MATRIX_TRUTHS
        if self.truth not in truths:
            raise ValueError("truth %r not valid for %s estimator" % (self.truth, self.estimator))
        grid = tuple(int(n) for n in self.N_grid)
        if len(grid) < 4 or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("N_grid must be strictly increasing with length >= 4")
        object.__setattr__(self, "N_grid", grid)
        if self.replications < 2:
            raise ValueError("replications must be >= 2")
        if self.error_kind not in _ERROR_KINDS:
            raise ValueError("unknown error kind %r" % (self.error_kind,))
        if self.estimator == "matrix" and self.error_kind != "test_error":
            raise ValueError("matrix estimator supports error_kind=test_error only")
        if self.realization not in ("auto", "sufficient", "full"):
            raise ValueError("unknown realization %r" % (self.realization,))
        if self.realization == "sufficient" and (self.estimator != "diagonal" or self.law != "gaussian"):
            raise ValueError("sufficient-statistic realization needs a diagonal gaussian model")
        if not 0.0 <= self.fit_drop_fraction < 1.0:
            raise ValueError("fit_drop_fraction must lie in [0, 1)")
        if self.data_gamma is not None and self.data_gamma < 0.0:
            raise ValueError("data_gamma must be >= 0")
        if self.error_kind == "gen_gap" and self.effective_data_gamma == 0.0:
            raise ValueError("gen_gap requires noisy data (data gamma > 0)")
        if self.error_kind == "conditional_closed_form" and self.model.beta != 0.0:
            raise ValueError("conditional_closed_form is defined for white noise (beta = 0)")

    @property
    def effective_data_gamma(self) -> float:
        return self.model.gamma if self.data_gamma is None else self.data_gamma

    @property
    def effective_realization(self) -> str:
        if self.realization != "auto":
            return self.realization
        if self.estimator == "diagonal" and self.law == "gaussian":
            return "sufficient"
        return "full"

    def truncation(self, N: int) -> int:
        return truncation_level(self.j_policy, self.model.alpha, self.model.p, N)


@dataclass(frozen=True)
class PerNStat:
    """Aggregated replication statistics at one sample size.

    ``scale`` is the normalization the relative error kinds divide by
    (weighted truth energy over the kept modes); 1 for absolute kinds.
    """

    N: int
    J: int
    mean: float
    stderr: float
    median: float
    reps: int
    scale: float


@dataclass(frozen=True)
class FitResult:
    exponent: float
    intercept: float
    stderr: float
    degenerate: bool = False


@dataclass(frozen=True)
class RateReport:
    """Per-N Monte Carlo statistics plus the fitted and predicted exponents."""

    name: str
    estimator: str
    error_kind: str
    seed: int
    per_N: tuple[PerNStat, ...]
    fitted_exponent: float
    fit_intercept: float
    fit_stderr: float
    fit_degenerate: bool
    fit_window: tuple[int, ...]
    theory_exponent: float
    theory_log_factor: str
    theory_dominant_term: str
    config: dict = field(default_factory=dict)


def fit_rate(points) -> FitResult:
    """Least squares on (ln N, ln error); the exponent is minus the slope.

    Two points interpolate exactly and are flagged degenerate with zero
    standard error. Nonpositive errors are rejected.
    """
    pts = [(float(n), float(e)) for n, e in points]
    if len(pts) < 2:
        raise ValueError("need at least two points to fit a rate")
    if any(e <= 0.0 for _, e in pts):
        raise ValueError("rate fit requires strictly positive errors")
    x = np.log([n for n, _ in pts])
    y = np.log([e for _, e in pts])
    n = x.size
    xbar, ybar = x.mean(), y.mean()
    sxx = float(np.sum((x - xbar) ** 2))
    if sxx == 0.0:
        raise ValueError("rate fit requires distinct sample sizes")
    slope = float(np.sum((x - xbar) * (y - ybar))) / sxx
    intercept = ybar - slope * xbar
    if n == 2:
        return FitResult(exponent=-slope, intercept=intercept, stderr=0.0, degenerate=True)
    resid = y - (intercept + slope * x)
    sigma2 = float(np.sum(resid**2)) / (n - 2)
    return FitResult(
        exponent=-slope,
        intercept=intercept,
        stderr=math.sqrt(sigma2 / sxx),
        degenerate=False,
    )


@lru_cache(maxsize=32)
def _matrix_setup(truth: str, J: int, a_rate: float, j_big_factor: int, z: float):
    T = posterior.galerkin_truth_matrix(truth, J, a_rate=a_rate, j_big_factor=j_big_factor)
    prior = prior_variance_grid(truth, z, J)
    return T, prior


def _diag_arrays(cfg: ExperimentConfig, J: int):
    m = cfg.model
    theta2 = matern_spectrum(m.tau1, m.alpha, J)
    theta2_test = matern_spectrum(m.tau2, m.alpha_prime, J)
    prior = prior_variances_diagonal(m.p, m.tau3, J)
    truth = truth_eigenvalues(cfg.truth, J)
    noise_spec = None
    if m.beta > 0.0:
        j = np.arange(1, J + 1, dtype=float)
        noise_spec = SpectralSequence(j ** (-2.0 * m.beta), decay_exponent_hint=2.0 * m.beta)
    return theta2, theta2_test, prior, truth, noise_spec


def _diag_replicate(cfg: ExperimentConfig, arrays, N: int, iN: int, r: int) -> float:
    theta2, theta2_test, prior, truth, noise_spec = arrays
    m = cfg.model
    rng_design = sampling.make_rng(cfg.seed, (iN, r, sampling.STREAM_DESIGN))
    rng_noise = sampling.make_rng(cfg.seed, (iN, r, sampling.STREAM_NOISE))
    data_gamma = cfg.effective_data_gamma
    if cfg.effective_realization == "sufficient":
        ds = sampling.gen_diagonal_suffstats(
            truth, theta2, N, data_gamma, rng_design, rng_noise, noise_spectrum=noise_spec
        )
    else:
        design = sampling.draw_design(theta2, N, cfg.law, rng_design)
        ds = sampling.gen_diagonal_dataset(
            truth, design, data_gamma, rng_noise, noise_spectrum=noise_spec
        )
    if noise_spec is None:
        post = posterior.diag_posterior(ds, prior, m.gamma, N)
    else:
        post = posterior.diag_posterior_colored(ds, prior, m.gamma, noise_spec, N)
    kind = cfg.error_kind
    if kind == "test_error":
        return metrics.relative_error_diag(post.mean, truth, theta2_test)
    if kind == "excess_risk":
        return metrics.excess_risk(post.mean, truth, theta2)
    if kind == "gen_gap":
        # L^1 object: the expected absolute gap is what the rate theory bounds.
        return abs(metrics.generalization_gap_emp(ds, post.mean, truth, theta2.values, data_gamma))
    # conditional_closed_form: exact noise average of the posterior-mean test
    # error at this design, on the same relative scale as test_error.
    risk = metrics.conditional_risk_closed_form(ds, prior, truth, theta2_test, m.gamma, N)
    denom = float(np.sum(theta2_test.values * truth.eigenvalues**2))
    return risk.posterior_mean_total / denom


def _matrix_replicate(cfg: ExperimentConfig, setup, N: int, iN: int, r: int) -> float:
    T, prior, lam2, lam2_test = setup
    m = cfg.model
    rng_design = sampling.make_rng(cfg.seed, (iN, r, sampling.STREAM_DESIGN))
    rng_noise = sampling.make_rng(cfg.seed, (iN, r, sampling.STREAM_NOISE))
    x = sampling.draw_design(lam2, N, cfg.law, rng_design)
    ds = sampling.gen_matrix_dataset(T, x, None, cfg.effective_data_gamma, rng_noise)
    fit = posterior.matrix_posterior(ds.gram, ds.rhs, prior, m.gamma, N)
    return metrics.relative_error_matrix(fit.rows, T, lam2_test)


def _error_scale(cfg: ExperimentConfig, J: int) -> float:
    """Normalization dividing the relative error kinds; 1 for absolute kinds."""
    m = cfg.model
    if cfg.estimator == "matrix":
        T, _ = _matrix_setup(cfg.truth, J, cfg.a_rate, cfg.j_big_factor, m.z)
        lam2_test = matern_spectrum(m.tau2, m.alpha_prime, J)
        return float(np.sum(lam2_test.values[None, :] * T**2))
    if cfg.error_kind in ("test_error", "conditional_closed_form"):
        theta2_test = matern_spectrum(m.tau2, m.alpha_prime, J)
        truth = truth_eigenvalues(cfg.truth, J)
        return float(np.sum(theta2_test.values * truth.eigenvalues**2))
    return 1.0


def _run_block(args) -> tuple[int, int, list[float]]:
    """One worker task: replications [r0, r1) at the iN-th sample size."""
    cfg, iN, r0, r1 = args
    N = cfg.N_grid[iN]
    J = cfg.truncation(N)
    if cfg.estimator == "matrix":
        T, prior = _matrix_setup(cfg.truth, J, cfg.a_rate, cfg.j_big_factor, cfg.model.z)
        lam2 = matern_spectrum(cfg.model.tau1, cfg.model.alpha, J)
        lam2_test = matern_spectrum(cfg.model.tau2, cfg.model.alpha_prime, J)
        setup = (T, prior, lam2, lam2_test)
        vals = [_matrix_replicate(cfg, setup, N, iN, r) for r in range(r0, r1)]
    else:
        arrays = _diag_arrays(cfg, J)
        vals = [_diag_replicate(cfg, arrays, N, iN, r) for r in range(r0, r1)]
    return iN, r0, vals


def _theory_prediction(cfg: ExperimentConfig) -> theory.RatePrediction:
    m = cfg.model
    if cfg.estimator == "matrix":
        s_star = MATRIX_S_STAR[cfg.truth]
        p = s_star + 0.5 + m.z
        return theory.upper_rate_exponent(m.alpha, m.alpha_prime, p, s_star)
    if cfg.error_kind == "gen_gap":
        return theory.gap_rate_exponent(m.alpha - m.beta, m.p)
    if cfg.error_kind == "excess_risk":
        return excess_rates(m).upper if m.beta == 0.0 else theory.colored_rate_exponent(
            m.alpha, m.alpha, m.p, m.s, m.beta
        )
    if m.beta > 0.0:
        return theory.colored_rate_exponent(m.alpha, m.alpha_prime, m.p, m.s, m.beta)
    return theory.upper_rate_exponent(m.alpha, m.alpha_prime, m.p, m.s)


def excess_rates(model: ModelConfig) -> theory.ExcessRiskRates:
    return theory.excess_risk_exponents(model.alpha, model.p, model.s)


def _config_echo(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    d["j_policy"] = {"kind": cfg.j_policy.kind, "value": cfg.j_policy.value}
    d["N_grid"] = list(cfg.N_grid)
    return d


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> RateReport:
    """Run the full sweep and return the aggregated, fitted report.

    The report is a deterministic function of the config (seed included),
    independent of ``workers``; aggregation is reduced in (N, replication)
    order.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    n_sizes = len(cfg.N_grid)
    reps = cfg.replications
    block = max(1, reps // max(1, workers * 4))
    tasks = []
    for iN in range(n_sizes):
        for r0 in range(0, reps, block):
            tasks.append((cfg, iN, r0, min(r0 + block, reps)))

    errors = [np.empty(reps) for _ in range(n_sizes)]
    if workers == 1:
        results = map(_run_block, tasks)
    else:
        pool = concurrent.futures.ProcessPoolExecutor(max_workers=workers)
        try:
            results = list(pool.map(_run_block, tasks))
        finally:
            pool.shutdown()
    for iN, r0, vals in results:
        errors[iN][r0 : r0 + len(vals)] = vals

    per_N = []
    for iN, N in enumerate(cfg.N_grid):
        e = errors[iN]
        J = cfg.truncation(N)
        per_N.append(
            PerNStat(
                N=N,
                J=J,
                mean=float(e.mean()),
                stderr=float(e.std(ddof=1) / math.sqrt(reps)),
                median=float(np.median(e)),
                reps=reps,
                scale=_error_scale(cfg, J),
            )
        )

    n_drop = int(math.floor(cfg.fit_drop_fraction * n_sizes))
    window = per_N[n_drop:]
    fit = fit_rate([(st.N, st.mean) for st in window])
    pred = _theory_prediction(cfg)
    return RateReport(
        name=cfg.name,
        estimator=cfg.estimator,
        error_kind=cfg.error_kind,
        seed=cfg.seed,
        per_N=tuple(per_N),
        fitted_exponent=fit.exponent,
        fit_intercept=fit.intercept,
        fit_stderr=fit.stderr,
        fit_degenerate=fit.degenerate,
        fit_window=tuple(st.N for st in window),
        theory_exponent=pred.exponent,
        theory_log_factor=pred.log_factor,
        theory_dominant_term=pred.dominant_term,
        config=_config_echo(cfg),
    )


def theory_error_floor(cfg: ExperimentConfig, N: int, j_max: int = 10**6) -> float:
    """Lower-bound tail descriptor sum_{j > J_N} theta'_j^2 truth_j^2.

    The empirical mean test error (on the absolute scale) should stay above a
    constant fraction of this at every N; it is the bias the posterior mean
    cannot avoid past the critical truncation index.
    """
    m = cfg.model
    start = theory.J_N(m.alpha, m.p, N) + 1

    def weight(j):
        return m.tau2 ** (2.0 * m.alpha_prime - 1.0) * ((j * np.pi) ** 2 + m.tau2**2) ** (
            -m.alpha_prime
        )

    kind = cfg.truth
    if kind in ("neg_laplacian", "elliptic"):
        truth_fn = lambda j: (j * np.pi) ** 2
    elif kind == "identity":
        truth_fn = lambda j: np.ones_like(j)
    else:
        truth_fn = lambda j: (j * np.pi) ** (-2.0)
    return theory.tail_energy(weight, truth_fn, start, j_max=j_max)
