"""Conjugate Gaussian posteriors: the per-mode diagonal posterior, posterior
sampling, the colored-noise variant, the row-wise ridge estimator of the
non-diagonal model, and Galerkin assembly of the non-diagonal truth matrices.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .sampling import Dataset
from .spectra import SpectralSequence, _as_readonly, mode_indices, overlap_matrix

__all__ = [
    "DiagonalPosterior",
    "MatrixFit",
    "PosteriorSolveError",
    "diag_posterior",
    "diag_posterior_colored",
    "sample_posterior",
    "matrix_posterior_row",
    "matrix_posterior",
    "int_exp_cos",
    "int_exp_sin",
    "stiffness_matrix_sine",
    "galerkin_truth_matrix",
]

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10


class PosteriorSolveError(RuntimeError):
    """Raised when a ridge system fails to factor; carries a condition estimate."""

    def __init__(self, message: str, condition_estimate: float):
        super().__init__(message)
        self.condition_estimate = condition_estimate


@dataclass(frozen=True)
class DiagonalPosterior:
    """Per-mode posterior means and variances of the diagonal model.

    The posterior is a product of independent scalar Gaussians; data can only
    shrink the variance, so 0 < variance_j <= prior variance for every mode.
    """

    mean: np.ndarray
    variance: np.ndarray

    def __post_init__(self):
        m = _as_readonly(self.mean)
        v = _as_readonly(self.variance)
        if m.shape != v.shape or m.ndim != 1:
            raise ValueError("mean and variance must be matching 1-d arrays")
        if np.any(v <= 0.0) or not np.all(np.isfinite(v)):
            raise ValueError("posterior variances must be positive and finite")
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "variance", v)

    @property
    def J(self) -> int:
        return int(self.mean.size)


@dataclass(frozen=True)
class MatrixFit:
    """Row-wise ridge estimate of the non-diagonal operator matrix.

    ``rows[j]`` solves (gram + (gamma^2/N) diag(1/prior[j]))) row = rhs[j].
    ``condition_estimates`` holds a cheap per-row 2-norm condition estimate
    from the Cholesky factor diagonal; ``max_residual`` is the largest
    relative residual over rows.
    """

    rows: np.ndarray
    prior: np.ndarray
    condition_estimates: np.ndarray
    max_residual: float


def _posterior_arrays(
    ds: Dataset,
    prior: SpectralSequence,
    noise_var: np.ndarray | float,
    N: int,
) -> tuple[np.ndarray, np.ndarray]:
    sig2 = prior.values
    if sig2.size != ds.J:
        raise ValueError("prior has %d modes, dataset has %d" % (sig2.size, ds.J))
    t = N * sig2 / noise_var
    denom = 1.0 + t * ds.suff_gg
    mean = t * ds.suff_yg / denom
    variance = sig2 / denom
    return mean, variance


def diag_posterior(
    ds: Dataset,
    prior: SpectralSequence,
    gamma: float,
    N: int | None = None,
) -> DiagonalPosterior:
    """Exact per-mode conjugate posterior of the diagonal sequence model.

    mean_j = N gamma^-2 sigma_j^2 <y_j g_j> / (1 + N gamma^-2 sigma_j^2 <g_j g_j>)
    var_j  = sigma_j^2 / (1 + N gamma^-2 sigma_j^2 <g_j g_j>)

    ``gamma`` is the noise scale assumed by the posterior (usually the data's
    own). N defaults to the dataset sample count.
    """
    if gamma <= 0.0:
        raise ValueError("gamma must be positive, got %r" % (gamma,))
    N = ds.n_samples if N is None else int(N)
    mean, variance = _posterior_arrays(ds, prior, gamma**2, N)
    return DiagonalPosterior(mean, variance)


def diag_posterior_colored(
    ds: Dataset,
    prior: SpectralSequence,
    gamma: float,
    gamma_spectrum: SpectralSequence,
    N: int | None = None,
) -> DiagonalPosterior:
    """Diagonal posterior under colored noise sharing the truth eigenbasis.

    Each gamma^2 in the white-noise formulas is replaced by the per-mode
    effective noise variance gamma^2 * lambda_j of the noise covariance.
    A unit gamma_spectrum reduces to ``diag_posterior`` exactly.
    """
    if gamma <= 0.0:
        raise ValueError("gamma must be positive, got %r" % (gamma,))
    if gamma_spectrum.J != ds.J:
        raise ValueError("noise spectrum has %d modes, dataset has %d" % (gamma_spectrum.J, ds.J))
    N = ds.n_samples if N is None else int(N)
    mean, variance = _posterior_arrays(ds, prior, gamma**2 * gamma_spectrum.values, N)
    return DiagonalPosterior(mean, variance)


def sample_posterior(
    post: DiagonalPosterior,
    M: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """M independent draws from the product posterior, shape (M, J)."""
    if M < 1:
        raise ValueError("M must be >= 1")
    z = rng.standard_normal((int(M), post.J))
    return post.mean[None, :] + np.sqrt(post.variance)[None, :] * z


def _chol_condition_estimate(L: np.ndarray) -> float:
    # (max/min diagonal of the Cholesky factor)^2 lower-bounds the 2-norm
    # condition number; cheap and adequate for logging.
    d = np.diagonal(L, axis1=-2, axis2=-1)
    return float((np.max(d) / np.min(d)) ** 2)


def matrix_posterior_row(
    gram: np.ndarray,
    rhs: np.ndarray,
    row_prior: np.ndarray,
    gamma: float,
    N: int,
) -> np.ndarray:
    """Solve one row of the non-diagonal normal equations.

    Returns the minimizer of the ridge system
    (gram + (gamma^2/N) diag(1/row_prior)) row = rhs
    via a Cholesky factorization. The ridge term makes the system strictly
    positive definite, so factorization failure indicates numerically invalid
    inputs and raises PosteriorSolveError with a condition diagnostic.
    """
    if gamma <= 0.0:
        raise ValueError("gamma must be positive, got %r" % (gamma,))
    if N < 1:
        raise ValueError("N must be >= 1")
    A = np.asarray(gram, dtype=float)
    b = np.asarray(rhs, dtype=float)
    sig2 = np.asarray(row_prior, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("gram must be square")
    if not np.allclose(A, A.T, rtol=0.0, atol=1e-12 * max(1.0, float(np.max(np.abs(A))))):
        raise ValueError("gram must be symmetric")
    if b.shape != (A.shape[0],) or sig2.shape != (A.shape[0],):
        raise ValueError("rhs/prior length mismatch with gram")
    if np.any(sig2 <= 0.0):
        raise ValueError("row prior variances must be strictly positive")
    system = A + np.diag(gamma**2 / (N * sig2))
    try:
        L = np.linalg.cholesky(system)
    except np.linalg.LinAlgError as exc:
        cond = float(np.linalg.cond(system))
        raise PosteriorSolveError(
            "ridge system failed to factor (condition estimate %.3e)" % cond, cond
        ) from exc
    w = solve_triangular(L, b, lower=True)
    row = solve_triangular(L.T, w, lower=False)
    scale = float(np.linalg.norm(b))
    resid = float(np.linalg.norm(system @ row - b)) / (scale if scale > 0.0 else 1.0)
    cond = _chol_condition_estimate(L)
    logger.debug("row solve: condition~%.3e residual=%.3e", cond, resid)
    if resid > RESIDUAL_TOL:
        raise PosteriorSolveError(
            "row solve residual %.3e exceeds %.0e (condition estimate %.3e)"
            % (resid, RESIDUAL_TOL, cond),
            cond,
        )
    return row


def matrix_posterior(
    gram: np.ndarray,
    rhs: np.ndarray,
    prior: np.ndarray,
    gamma: float,
    N: int,
) -> MatrixFit:
    """All rows of the non-diagonal posterior mean, batched over rows.

    ``rhs`` stacks the per-row right-hand sides (row j in rhs[j]); ``prior``
    is the J x J grid of per-row diagonal prior variances. Each row's ridge
    system is factored independently (the diagonal ridge differs per row).
    """
    if gamma <= 0.0:
        raise ValueError("gamma must be positive, got %r" % (gamma,))
    A = np.asarray(gram, dtype=float)
    B = np.asarray(rhs, dtype=float)
    sig2 = np.asarray(prior, dtype=float)
    J_out, J_in = B.shape
    if A.shape != (J_in, J_in) or sig2.shape != (J_out, J_in):
        raise ValueError("inconsistent gram/rhs/prior shapes")
    if np.any(sig2 <= 0.0):
        raise ValueError("prior variances must be strictly positive")
    systems = np.broadcast_to(A, (J_out, J_in, J_in)).copy()
    idx = np.arange(J_in)
    systems[:, idx, idx] += gamma**2 / (N * sig2)
    try:
        L = np.linalg.cholesky(systems)
    except np.linalg.LinAlgError as exc:
        conds = np.array([np.linalg.cond(systems[j]) for j in range(J_out)])
        worst = float(np.max(conds))
        raise PosteriorSolveError(
            "batched ridge factorization failed (worst condition %.3e)" % worst, worst
        ) from exc
    rows = np.empty((J_out, J_in))
    conds = np.empty(J_out)
    max_resid = 0.0
    for j in range(J_out):
        w = solve_triangular(L[j], B[j], lower=True)
        rows[j] = solve_triangular(L[j].T, w, lower=False)
        conds[j] = _chol_condition_estimate(L[j])
        scale = float(np.linalg.norm(B[j]))
        r = float(np.linalg.norm(systems[j] @ rows[j] - B[j])) / (scale if scale > 0.0 else 1.0)
        if r > max_resid:
            max_resid = r
    logger.debug("matrix posterior: worst condition~%.3e max residual=%.3e",
                 float(np.max(conds)), max_resid)
    if max_resid > RESIDUAL_TOL:
        raise PosteriorSolveError(
            "matrix posterior residual %.3e exceeds %.0e" % (max_resid, RESIDUAL_TOL),
            float(np.max(conds)),
        )
    return MatrixFit(rows=rows, prior=sig2, condition_estimates=conds, max_residual=max_resid)


def int_exp_cos(c: float, w) -> np.ndarray:
    """int_0^1 exp(c z) cos(w z) dz by the closed-form antiderivative."""
    w = np.asarray(w, dtype=float)
    if c == 0.0:
        return np.divide(np.sin(w), w, out=np.ones_like(w), where=w != 0.0)
    return (np.exp(c) * (c * np.cos(w) + w * np.sin(w)) - c) / (c * c + w * w)


def int_exp_sin(c: float, w) -> np.ndarray:
    """int_0^1 exp(c z) sin(w z) dz by the closed-form antiderivative."""
    w = np.asarray(w, dtype=float)
    if c == 0.0:
        return np.divide(1.0 - np.cos(w), w, out=np.zeros_like(w), where=w != 0.0)
    return (np.exp(c) * (c * np.sin(w) - w * np.cos(w)) + w) / (c * c + w * w)


def stiffness_matrix_sine(a_rate: float, J: int) -> np.ndarray:
    """Sine-basis Galerkin matrix of the divergence-form operator -d/dz(a d/dz .)
    with a(z) = exp(a_rate * z).

    Entry (k', k) is int_0^1 a(z) phi_k'(z)' phi_k(z)' dz for unit-norm sines
    phi_k(z) = sqrt(2) sin(k pi z); symmetric positive definite.
    """
    kp = mode_indices(J)[:, None] * np.pi
    k = mode_indices(J)[None, :] * np.pi
    icc = 0.5 * (int_exp_cos(a_rate, kp - k) + int_exp_cos(a_rate, kp + k))
    S = 2.0 * kp * k * icc
    return 0.5 * (S + S.T)


def _elliptic_block(a_rate: float, J_out: int, J_in: int) -> np.ndarray:
    # <cos_j, A_a sin_k> with A_a sin_k = -(a sin_k')' expanded directly:
    # -a_rate a (k pi) cos(k pi z) + a (k pi)^2 sin(k pi z), a(z) = e^{a_rate z}.
    A = (mode_indices(J_out)[:, None] - 0.5) * np.pi
    B = mode_indices(J_in)[None, :] * np.pi
    icc = 0.5 * (int_exp_cos(a_rate, A - B) + int_exp_cos(a_rate, A + B))
    ics = 0.5 * (int_exp_sin(a_rate, A + B) - int_exp_sin(a_rate, A - B))
    return -2.0 * a_rate * B * icc + 2.0 * B * B * ics


def galerkin_truth_matrix(
    kind: str,
    J: int,
    a_rate: float = -3.0,
    j_big_factor: int = 4,
) -> np.ndarray:
    """Truth matrix <cos_j, L sin_k> of the non-diagonal experiments.

    Rows index the half-integer cosine output basis, columns the sine input
    basis. ``elliptic`` is the divergence-form operator with coefficient
    a(z) = exp(a_rate * z); ``identity`` is the basis-change matrix itself;
    ``inv_elliptic`` inverts the sine-basis Galerkin matrix on a
    j_big_factor * J dimensional space before compressing to J x J, keeping
    the inversion's truncation bias below sampling noise.
    """
    if J < 1:
        raise ValueError("J must be >= 1")
    if kind == "identity":
        return overlap_matrix(J, J)
    if kind == "elliptic":
        return _elliptic_block(a_rate, J, J)
    if kind == "inv_elliptic":
        if j_big_factor < 1:
            raise ValueError("j_big_factor must be >= 1")
        J_big = int(j_big_factor) * J
        S = stiffness_matrix_sine(a_rate, J_big)
        M = overlap_matrix(J, J_big)
        # First J columns of S^{-1}, then compress through the overlap.
        cols = np.linalg.solve(S, np.eye(J_big, J))
        return M @ cols
    raise ValueError("unknown truth matrix kind %r" % (kind,))
