"""Error functionals: weighted test errors, relative errors, excess risk, the
empirical generalization gap, and the closed-form conditional risk used as a
variance-reduction oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .sampling import Dataset
from .spectra import SpectralSequence, TruthOperator, _as_readonly

__all__ = [
    "ErrorWeights",
    "ConditionalRisk",
    "weighted_sq_error",
    "relative_error_diag",
    "relative_error_matrix",
    "conditional_risk_closed_form",
    "excess_risk",
    "expected_risk",
    "empirical_risk",
    "generalization_gap_emp",
]


@dataclass(frozen=True)
class ErrorWeights:
    """Nonnegative per-mode weights of a test distribution in the output basis."""

    values: np.ndarray

    def __post_init__(self):
        v = _as_readonly(np.atleast_1d(self.values))
        if v.ndim != 1 or not np.all(np.isfinite(v)) or np.any(v < 0.0):
            raise ValueError("weights must be finite and nonnegative")
        object.__setattr__(self, "values", v)

    @property
    def J(self) -> int:
        return int(self.values.size)


def _weight_values(w) -> np.ndarray:
    if isinstance(w, ErrorWeights):
        return w.values
    if isinstance(w, SpectralSequence):
        return w.values
    return np.asarray(w, dtype=float)


def _truth_values(truth) -> np.ndarray:
    if isinstance(truth, TruthOperator):
        return truth.eigenvalues
    return np.asarray(truth, dtype=float)


def weighted_sq_error(est, truth, w) -> float:
    """Weighted squared distance sum_j w_j (truth_j - est_j)^2."""
    e = np.asarray(est, dtype=float)
    t = _truth_values(truth)
    wv = _weight_values(w)
    if not (e.shape == t.shape == wv.shape):
        raise ValueError("est/truth/weights length mismatch")
    return float(np.sum(wv * (t - e) ** 2))


def relative_error_diag(est, truth, w) -> float:
    """weighted_sq_error normalized by the weighted truth energy sum_j w_j truth_j^2."""
    t = _truth_values(truth)
    wv = _weight_values(w)
    denom = float(np.sum(wv * t**2))
    if denom <= 0.0:
        raise ValueError("relative error undefined: weighted truth energy is zero")
    return weighted_sq_error(est, truth, w) / denom


def relative_error_matrix(est: np.ndarray, truth: np.ndarray, input_spectrum) -> float:
    """Relative squared prediction error of a matrix estimate.

    For a test distribution diagonal in the input basis with eigenvalues
    lambda'_k, the expected squared output norm of T is
    sum_{j,k} lambda'_k T_jk^2, so the relative error is
    sum_{j,k} lambda'_k (truth - est)_jk^2 / sum_{j,k} lambda'_k truth_jk^2.
    """
    E = np.asarray(est, dtype=float)
    T = np.asarray(truth, dtype=float)
    lam = _weight_values(input_spectrum)
    if E.shape != T.shape or E.ndim != 2 or T.shape[1] != lam.size:
        raise ValueError("est/truth/spectrum shape mismatch")
    denom = float(np.sum(lam[None, :] * T**2))
    if denom <= 0.0:
        raise ValueError("relative error undefined: weighted truth energy is zero")
    return float(np.sum(lam[None, :] * (T - E) ** 2)) / denom


class ConditionalRisk(NamedTuple):
    """The three closed-form error series at fixed design.

    i1 + i2 is the noise-averaged test error of the posterior mean given the
    design; adding i3 (the posterior spread) gives the posterior-sample
    version.
    """

    i1: float
    i2: float
    i3: float

    @property
    def posterior_mean_total(self) -> float:
        return self.i1 + self.i2

    @property
    def posterior_sample_total(self) -> float:
        return self.i1 + self.i2 + self.i3


def conditional_risk_closed_form(
    ds: Dataset,
    prior: SpectralSequence,
    truth,
    w,
    gamma: float,
    N: int | None = None,
) -> ConditionalRisk:
    """Exact noise/posterior average of the test error at the realized design.

    With d_j = 1 + N gamma^-2 sigma_j^2 <g_j g_j>:
      i1 = sum_j w_j truth_j^2 / d_j^2            (squared estimation bias)
      i2 = sum_j N w_j gamma^-2 sigma_j^4 <g_j g_j> / d_j^2   (estimation variance)
      i3 = sum_j w_j sigma_j^2 / d_j              (posterior spread)
    """
    if gamma <= 0.0:
        raise ValueError("gamma must be positive, got %r" % (gamma,))
    N = ds.n_samples if N is None else int(N)
    sig2 = prior.values
    t = _truth_values(truth)
    wv = _weight_values(w)
    if not (sig2.size == t.size == wv.size == ds.J):
        raise ValueError("prior/truth/weights/dataset length mismatch")
    d = 1.0 + N * sig2 * ds.suff_gg / gamma**2
    i1 = float(np.sum(wv * t**2 / d**2))
    i2 = float(np.sum(N * wv * sig2**2 * ds.suff_gg / gamma**2 / d**2))
    i3 = float(np.sum(wv * sig2 / d))
    return ConditionalRisk(i1, i2, i3)


def excess_risk(est, truth, train_w) -> float:
    """In-distribution squared prediction error, i.e. weighted_sq_error with
    the training-distribution weights."""
    return weighted_sq_error(est, truth, train_w)


def expected_risk(est, truth, train_w) -> float:
    """Population risk of an eigenvalue estimate in coordinates:
    (1/2) sum_j w_j est_j^2 - sum_j w_j truth_j est_j."""
    e = np.asarray(est, dtype=float)
    t = _truth_values(truth)
    wv = _weight_values(train_w)
    if not (e.shape == t.shape == wv.shape):
        raise ValueError("est/truth/weights length mismatch")
    return float(0.5 * np.sum(wv * e**2) - np.sum(wv * t * e))


def empirical_risk(est, ds: Dataset) -> float:
    """Training risk of an eigenvalue estimate in coordinates:
    sum_j ((1/2) est_j^2 <g_j g_j> - est_j <y_j g_j>)."""
    e = np.asarray(est, dtype=float)
    if e.size != ds.J:
        raise ValueError("est length %d != dataset modes %d" % (e.size, ds.J))
    return float(np.sum(0.5 * e**2 * ds.suff_gg - e * ds.suff_yg))


def generalization_gap_emp(ds: Dataset, est, truth, train_w, gamma: float) -> float:
    """Expected-minus-empirical risk of an estimate, from stored per-mode products.

    Equals, as an algebraic identity, the sum of
      (1/2) sum_j (theta_j^2 - <g_j g_j>) (est_j - truth_j)^2
      (1/2) sum_j (<g_j g_j> - theta_j^2) truth_j^2
      sum_j gamma <g_j xi_j> est_j
    where the noise products gamma <g_j xi_j> = <y_j g_j> - truth_j <g_j g_j>
    are reconstructed exactly from the sufficient statistics; raw noise is
    never stored. Requires gamma > 0 (the reconstruction is meaningless for
    noise-free data).
    """
    if gamma <= 0.0:
        raise ValueError("gamma must be positive: noise products unavailable at gamma=0")
    e = np.asarray(est, dtype=float)
    t = _truth_values(truth)
    wv = _weight_values(train_w)
    if not (e.shape == t.shape == wv.shape) or e.size != ds.J:
        raise ValueError("est/truth/weights/dataset length mismatch")
    gap_fit = 0.5 * np.sum((wv - ds.suff_gg) * (e - t) ** 2)
    gap_truth = 0.5 * np.sum((ds.suff_gg - wv) * t**2)
    gap_noise = np.sum((ds.suff_yg - t * ds.suff_gg) * e)
    return float(gap_fit + gap_truth + gap_noise)
