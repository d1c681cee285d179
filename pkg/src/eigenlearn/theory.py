"""Closed-form convergence-rate objects: the critical truncation index and
rate sequence, upper/sharp rate exponents, colored-noise shifts, contraction
rates, excess-risk and generalization-gap exponents, and numeric tail
descriptors.

Conventions: natural logarithm wherever a log factor appears; the boundary
branch alpha' = alpha + 1/2 is detected exactly on floats first and then
within relative tolerance 1e-12.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "RatePrediction",
    "ExcessRiskRates",
    "rho_N",
    "J_N",
    "upper_rate_exponent",
    "colored_rate_exponent",
    "excess_risk_exponents",
    "gap_rate_exponent",
    "contraction_rate",
    "sharp_rate_value",
    "slowly_varying_log",
    "tail_energy",
]

_BOUNDARY_RTOL = 1e-12

LOG_NONE = "none"
LOG_N = "log_N"
DOM_VARIANCE = "variance"
DOM_BIAS = "bias"


@dataclass(frozen=True)
class RatePrediction:
    """A predicted error decay error = Theta(N^-exponent), up to log factors.

    ``log_factor`` marks the boundary case where an extra log N multiplies
    the rate; ``dominant_term`` records whether the variance/spread sequence
    or the squared-bias term attains the exponent (ties count as variance).
    """

    exponent: float
    log_factor: str = LOG_NONE
    dominant_term: str = DOM_VARIANCE


@dataclass(frozen=True)
class ExcessRiskRates:
    """Upper rate of the expected excess risk plus its lower-bound tail handle."""

    upper: RatePrediction
    alpha: float
    p: float

    def lower_tail(self, truth_fn: Callable[[np.ndarray], np.ndarray], N: int,
                   j_max: int = 10**6) -> float:
        """Numeric tail sum_{j > J_N} j^(-2 alpha) truth(j)^2 for a given truth."""
        start = J_N(self.alpha, self.p, N) + 1
        return tail_energy(lambda j: j ** (-2.0 * self.alpha), truth_fn, start, j_max=j_max)


def _is_boundary(alpha: float, alpha_prime: float) -> bool:
    edge = alpha + 0.5
    if alpha_prime == edge:
        return True
    return math.isclose(alpha_prime, edge, rel_tol=_BOUNDARY_RTOL, abs_tol=_BOUNDARY_RTOL)


def _check_smoothness_range(alpha: float, alpha_prime: float, p: float, s: float,
                            beta: float = 0.0) -> None:
    a_eff = min(alpha - beta, alpha_prime)
    if not (a_eff + s > 0.0 and a_eff + p - 0.5 > 0.0):
        raise ValueError(
            "smoothness range violated: min(alpha-beta, alpha') + s > 0 and "
            "min(alpha-beta, alpha') + p - 1/2 > 0 required "
            "(alpha=%g, alpha'=%g, p=%g, s=%g, beta=%g)" % (alpha, alpha_prime, p, s, beta)
        )


def rho_N(alpha: float, alpha_prime: float, p: float, N: int) -> float:
    """The three-case rate sequence governing variance and posterior spread.

    N^-(1 - (alpha + 1/2 - alpha')/(alpha + p)) below the boundary
    alpha' = alpha + 1/2, N^-1 log N at it, and N^-1 above it.
    """
    if not alpha + p > 0.5:
        raise ValueError("alpha + p must exceed 1/2, got %g" % (alpha + p,))
    if N < 1:
        raise ValueError("N must be >= 1")
    if _is_boundary(alpha, alpha_prime):
        return math.log(N) / N
    if alpha_prime > alpha + 0.5:
        return 1.0 / N
    return float(N) ** -(1.0 - (alpha + 0.5 - alpha_prime) / (alpha + p))


def J_N(alpha: float, p: float, N: int) -> int:
    """Critical truncation index floor(N^(1/(2(alpha+p))))."""
    if not alpha + p > 0.0:
        raise ValueError("alpha + p must be positive, got %g" % (alpha + p,))
    if N < 1:
        raise ValueError("N must be >= 1")
    return int(math.floor(float(N) ** (1.0 / (2.0 * (alpha + p)))))


def upper_rate_exponent(alpha: float, alpha_prime: float, p: float, s: float) -> RatePrediction:
    """Sharp rate exponent min{rho-branch exponent, (alpha'+s)/(alpha+p)}.

    The rho-branch exponent is 1 - (alpha + 1/2 - alpha')/(alpha + p) below
    the boundary and 1 at or above it (with the log flag exactly at it). The
    returned exponent lies in (0, 1] for every admissible configuration.
    """
    _check_smoothness_range(alpha, alpha_prime, p, s)
    boundary = _is_boundary(alpha, alpha_prime)
    if boundary or alpha_prime > alpha + 0.5:
        rho_exp = 1.0
    else:
        rho_exp = 1.0 - (alpha + 0.5 - alpha_prime) / (alpha + p)
    bias_exp = (alpha_prime + s) / (alpha + p)
    # Matched priors make the two terms exactly equal; treat float-level ties
    # as variance-dominated so the label does not flip on rounding noise.
    tie = math.isclose(rho_exp, bias_exp, rel_tol=1e-12, abs_tol=1e-12)
    if tie or rho_exp < bias_exp:
        return RatePrediction(
            exponent=min(rho_exp, bias_exp) if tie else rho_exp,
            log_factor=LOG_N if boundary else LOG_NONE,
            dominant_term=DOM_VARIANCE,
        )
    return RatePrediction(exponent=bias_exp, log_factor=LOG_NONE, dominant_term=DOM_BIAS)


def colored_rate_exponent(alpha: float, alpha_prime: float, p: float, s: float,
                          beta: float) -> RatePrediction:
    """Rate exponent under colored noise with covariance decay exponent beta.

    Smoother noise effectively reduces the training-data smoothness: every
    instance of alpha in the white-noise rate (including the branch
    comparison against alpha + 1/2) is replaced by alpha - beta.
    """
    if beta < 0.0:
        raise ValueError("beta must be >= 0, got %r" % (beta,))
    _check_smoothness_range(alpha, alpha_prime, p, s, beta=beta)
    return upper_rate_exponent(alpha - beta, alpha_prime, p, s)


def excess_risk_exponents(alpha: float, p: float, s: float) -> ExcessRiskRates:
    """Expected excess-risk rates: the in-distribution case alpha' = alpha.

    The upper exponent is min{(alpha+p-1/2)/(alpha+p), (alpha+s)/(alpha+p)};
    the returned handle also evaluates the lower-bound tail descriptor
    sum_{j > J_N} j^(-2 alpha) truth_j^2 numerically.
    """
    upper = upper_rate_exponent(alpha, alpha, p, s)
    return ExcessRiskRates(upper=upper, alpha=alpha, p=p)


def gap_rate_exponent(alpha: float, p: float) -> RatePrediction:
    """Expected generalization-gap exponent min{1/2, (alpha+p-1/2)/(alpha+p)}.

    The 1/2 term is the Monte Carlo fluctuation scale; it is labeled as a
    variance term since neither branch is a squared-bias contribution.
    """
    if not alpha + p > 0.5:
        raise ValueError("alpha + p must exceed 1/2, got %g" % (alpha + p,))
    spread_exp = (alpha + p - 0.5) / (alpha + p)
    return RatePrediction(exponent=min(0.5, spread_exp), dominant_term=DOM_VARIANCE)


def contraction_rate(alpha: float, alpha_prime: float, p: float, s: float, N: int) -> float:
    """Posterior contraction rate eps_N = N^(-r/2) with r the sharp exponent,
    times sqrt(log N) at the boundary branch."""
    if N < 1:
        raise ValueError("N must be >= 1")
    pred = upper_rate_exponent(alpha, alpha_prime, p, s)
    eps = float(N) ** (-0.5 * pred.exponent)
    if pred.log_factor == LOG_N and N > 1:
        eps *= math.sqrt(math.log(N))
    return eps


def slowly_varying_log(x, q: float = 0.0):
    """The supported slowly varying family S(x) = (ln(e + x))^q; q = 0 gives 1."""
    return np.log(np.e + np.asarray(x, dtype=float)) ** q


def sharp_rate_value(alpha: float, alpha_prime: float, p: float, s: float, N: int,
                     q: float = 0.0) -> float:
    """Value rho_N + N^(-(alpha'+s)/(alpha+p)) S^2(J_N) of the sharp two-term rate."""
    _check_smoothness_range(alpha, alpha_prime, p, s)
    bias = float(N) ** (-(alpha_prime + s) / (alpha + p))
    S = float(slowly_varying_log(J_N(alpha, p, N), q))
    return rho_N(alpha, alpha_prime, p, N) + bias * S**2


def tail_energy(
    weight_fn: Callable[[np.ndarray], np.ndarray],
    truth_fn: Callable[[np.ndarray], np.ndarray],
    j_start: int,
    j_max: int = 10**6,
    chunk: int = 2**20,
) -> float:
    """Numeric tail sum_{j = j_start}^{j_max} weight(j) * truth(j)^2.

    Evaluated in chunks; both callables take a float array of mode indices.
    """
    if j_start < 1:
        raise ValueError("j_start must be >= 1")
    total = 0.0
    lo = int(j_start)
    while lo <= j_max:
        hi = min(lo + chunk - 1, j_max)
        j = np.arange(lo, hi + 1, dtype=float)
        total += float(np.sum(weight_fn(j) * truth_fn(j) ** 2))
        lo = hi + 1
    return total
