"""Deterministic scalar sequences: covariance spectra, prior variances, truth
eigenvalues, cross-basis variances, and Sobolev-scale diagnostics.

Everything here is a pure function of its arguments. Sequences are always
explicitly truncated at a mode count ``J``; there are no lazy infinite
sequences. All values are double precision; entries below ``TINY_FLOOR``
trigger a warning instead of silently denormalizing.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TINY_FLOOR",
    "SpectralSequence",
    "TruthOperator",
    "ModelConfig",
    "matern_spectrum",
    "truth_eigenvalues",
    "prior_variances_diagonal",
    "prior_variances_matrix",
    "prior_variance_grid",
    "overlap_entry",
    "overlap_matrix",
    "cross_basis_variance",
    "sobolev_norm",
]

# Below this magnitude a spectral value is flagged as a likely underflow of a
# (p, alpha) sweep at large j.
TINY_FLOOR = 1e-300

#: Sobolev exponents s* such that the truth eigenvalue sequence lies in H^s
#: for every s < s*.
TRUTH_S_STAR = {
    "neg_laplacian": -2.5,
    "identity": -0.5,
    "inv_neg_laplacian": 1.5,
}


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SpectralSequence:
    """A strictly positive scalar sequence indexed by mode j = 1..J.

    Holds covariance spectra, prior variance sequences, or noise-covariance
    eigenvalues. ``decay_exponent_hint`` is the nominal power-law exponent d
    such that values ~ j^(-d), kept for diagnostics only.
    """

    values: np.ndarray
    decay_exponent_hint: float | None = None

    def __post_init__(self):
        v = _as_readonly(np.atleast_1d(self.values))
        if v.ndim != 1 or v.size < 1:
            raise ValueError("spectral sequence must be a nonempty 1-d array")
        if not np.all(np.isfinite(v)):
            raise ValueError("spectral sequence contains non-finite values")
        if np.any(v <= 0.0):
            raise ValueError("spectral sequence values must be strictly positive")
        if np.any(v < TINY_FLOOR):
            warnings.warn(
                "spectral sequence has %d entries below %.0e (underflow risk)"
                % (int(np.sum(v < TINY_FLOOR)), TINY_FLOOR),
                RuntimeWarning,
                stacklevel=2,
            )
        object.__setattr__(self, "values", v)

    @property
    def J(self) -> int:
        return int(self.values.size)

    def __len__(self) -> int:
        return self.J


@dataclass(frozen=True)
class TruthOperator:
    """Eigenvalue sequence of the operator generating the data.

    ``s_star`` is the supremum Sobolev exponent: the sequence lies in H^s for
    every s < s_star.
    """

    kind: str
    eigenvalues: np.ndarray
    s_star: float

    def __post_init__(self):
        object.__setattr__(self, "eigenvalues", _as_readonly(self.eigenvalues))

    @property
    def J(self) -> int:
        return int(self.eigenvalues.size)


def mode_indices(J: int) -> np.ndarray:
    """Float array of mode indices 1..J."""
    if J < 1:
        raise ValueError("J must be >= 1, got %r" % (J,))
    return np.arange(1, int(J) + 1, dtype=float)


def matern_spectrum(tau: float, exponent: float, J: int) -> SpectralSequence:
    """Matern-like spectrum tau^(2e-1) * ((j*pi)^2 + tau^2)^(-e) for j = 1..J.

    Asymptotically Theta(j^(-2e)); strictly decreasing in j for exponent > 0
    and strictly increasing for exponent < 0.
    """
    if tau <= 0.0:
        raise ValueError("tau must be positive, got %r" % (tau,))
    j = mode_indices(J)
    vals = tau ** (2.0 * exponent - 1.0) * ((j * np.pi) ** 2 + tau**2) ** (-exponent)
    return SpectralSequence(vals, decay_exponent_hint=2.0 * exponent)


def truth_eigenvalues(
    kind: str,
    J: int,
    eigenvalues: np.ndarray | None = None,
    s_star: float | None = None,
) -> TruthOperator:
    """Eigenvalue sequences of the canonical truths, truncated at J modes.

    ``neg_laplacian`` has (j*pi)^2 (unbounded), ``identity`` has 1 (bounded),
    ``inv_neg_laplacian`` has (j*pi)^(-2) (compact). ``custom`` takes a
    caller-supplied sequence together with its s_star.
    """
    j = mode_indices(J)
    if kind == "neg_laplacian":
        vals = (j * np.pi) ** 2
    elif kind == "identity":
        vals = np.ones_like(j)
    elif kind == "inv_neg_laplacian":
        vals = (j * np.pi) ** (-2.0)
    elif kind == "custom":
        if eigenvalues is None or s_star is None:
            raise ValueError("custom truth requires eigenvalues and s_star")
        vals = np.asarray(eigenvalues, dtype=float)
        if vals.size != J:
            raise ValueError("custom eigenvalue sequence length %d != J=%d" % (vals.size, J))
        return TruthOperator("custom", vals, float(s_star))
    else:
        raise ValueError("unknown truth kind %r" % (kind,))
    return TruthOperator(kind, vals, TRUTH_S_STAR[kind])


def prior_variances_diagonal(p: float, tau3: float, J: int) -> SpectralSequence:
    """Diagonal prior variances sigma_j^2 = tau3^(2p-1)*((j*pi)^2 + tau3^2)^(-p)."""
    if tau3 <= 0.0:
        raise ValueError("tau3 must be positive, got %r" % (tau3,))
    return matern_spectrum(tau3, p, J)


def _prior_grid_elliptic(z: float, j: np.ndarray, k: np.ndarray) -> np.ndarray:
    return (j * k) ** (-(z - 2.0)) * ((1.0 + (k / j) ** 2) / (1.0 + (j - k) ** 2)) ** 2


def _prior_grid_identity(z: float, j: np.ndarray, k: np.ndarray) -> np.ndarray:
    return (j * k) ** (-z) * ((k + k / j) / (1.0 + j + (j - k) ** 2)) ** 2


def _prior_grid_inv_elliptic(z: float, j: np.ndarray, k: np.ndarray) -> np.ndarray:
    return (j * k) ** (-(z + 2.0)) * ((1.0 + j / k) / (1.0 + (j - k) ** 2)) ** 2


_MATRIX_PRIOR_CASES = {
    "neg_laplacian": _prior_grid_elliptic,
    "elliptic": _prior_grid_elliptic,
    "identity": _prior_grid_identity,
    "inv_neg_laplacian": _prior_grid_inv_elliptic,
    "inv_elliptic": _prior_grid_inv_elliptic,
}


def prior_variances_matrix(kind: str, z: float, j: int, k: int) -> float:
    """Entry sigma_jk^2 of the three-case non-diagonal prior variance grid.

    The case is selected by the truth the prior is matched to: the unbounded
    divergence-form operator, the identity, or the inverse operator. With
    z = 0 the prior matches the exact asymptotic behavior of the truth matrix
    in j, k, and along the diagonal.
    """
    if j < 1 or k < 1:
        raise ValueError("mode indices must be >= 1")
    try:
        case = _MATRIX_PRIOR_CASES[kind]
    except KeyError:
        raise ValueError("unsupported matrix prior kind %r" % (kind,)) from None
    return float(case(float(z), np.float64(j), np.float64(k)))


def prior_variance_grid(kind: str, z: float, J: int) -> np.ndarray:
    """Full J x J grid of prior variances sigma_jk^2 (rows j, columns k)."""
    try:
        case = _MATRIX_PRIOR_CASES[kind]
    except KeyError:
        raise ValueError("unsupported matrix prior kind %r" % (kind,)) from None
    j = mode_indices(J)[:, None]
    k = mode_indices(J)[None, :]
    return case(float(z), j, k)


def overlap_entry(j: int, k: int) -> float:
    """Inner product of the j-th half-integer cosine with the k-th sine mode.

    Closed form -8k / (pi * (4(j(j-1) - k^2) + 1)); the sign convention is
    fixed by the defining integral 2*int_0^1 cos((j-1/2) pi z) sin(k pi z) dz,
    which the test suite cross-checks by quadrature.
    """
    if j < 1 or k < 1:
        raise ValueError("mode indices must be >= 1")
    jf, kf = float(j), float(k)
    denom = 4.0 * (jf * (jf - 1.0) - kf * kf) + 1.0
    return -8.0 * kf / (math.pi * denom)


def overlap_matrix(J_out: int, J_in: int) -> np.ndarray:
    """Basis-change matrix M[j, k] = overlap_entry(j+1, k+1), shape (J_out, J_in).

    Columns have unit l2 norm in the limit J_out -> infinity (Parseval).
    """
    j = mode_indices(J_out)[:, None]
    k = mode_indices(J_in)[None, :]
    denom = 4.0 * (j * (j - 1.0) - k * k) + 1.0
    return -8.0 * k / (np.pi * denom)


def cross_basis_variance(
    lambda_sq,
    j: int,
    K: int | None = None,
    return_last_term: bool = False,
):
    """Variance of the j-th output-basis coefficient under a sine-basis KL law.

    Partial sum over k <= K of 64 pi^-2 lambda_k^2 k^2 (4(j(j-1)-k^2)+1)^-2,
    i.e. sum_k M_jk^2 lambda_k^2 for the cosine/sine overlap M. Monotone
    nondecreasing in K. ``lambda_sq`` is a SpectralSequence or any nonnegative
    array of input-basis variances (zeros allowed here). K defaults to
    min(2^21, len(lambda_sq)), matching the truncation used for the power-law
    decay diagnostics.

    With ``return_last_term`` the magnitude of the K-th summand is returned
    alongside as a convergence diagnostic.
    """
    if j < 1:
        raise ValueError("mode index must be >= 1")
    if isinstance(lambda_sq, SpectralSequence):
        lam = lambda_sq.values
    else:
        lam = np.asarray(lambda_sq, dtype=float)
        if lam.ndim != 1 or np.any(lam < 0.0) or not np.all(np.isfinite(lam)):
            raise ValueError("input spectrum must be a nonnegative finite 1-d array")
    if K is None:
        K = min(2**21, lam.size)
    if K < 1:
        raise ValueError("K must be >= 1")
    if K > lam.size:
        raise ValueError("K=%d exceeds spectrum length %d" % (K, lam.size))
    k = np.arange(1, K + 1, dtype=float)
    denom = 4.0 * (float(j) * (j - 1.0) - k * k) + 1.0
    terms = (64.0 / np.pi**2) * lam[:K] * k**2 / denom**2
    total = float(np.sum(terms))
    if return_last_term:
        return total, float(terms[-1])
    return total


def sobolev_norm(seq: np.ndarray, s: float) -> float:
    """Weighted l2 norm (sum_j j^(2s) v_j^2)^(1/2) of a truncated sequence."""
    v = np.asarray(seq, dtype=float)
    if v.size == 0:
        return 0.0
    j = mode_indices(v.size)
    return float(np.sqrt(np.sum(j ** (2.0 * s) * v**2)))


@dataclass(frozen=True)
class ModelConfig:
    """Smoothness and scale parameters of one diagonal learning problem.

    alpha/alpha_prime are the train/test data smoothness exponents, p the
    prior decay exponent, s the Sobolev exponent of the truth, tau1..tau3 the
    inverse length scales of the train/test/prior spectra, gamma the noise
    scale, and beta the noise smoothness (0 = white noise). z records the
    prior shift p - s - 1/2.

    Construction validates the smoothness-range condition
    min(alpha - beta, alpha') + s > 0 and
    min(alpha - beta, alpha') + p - 1/2 > 0; violations raise ValueError.
    """

    alpha: float
    alpha_prime: float
    p: float
    s: float
    gamma: float
    tau1: float = 15.0
    tau2: float = 15.0
    tau3: float = 1.0
    beta: float = 0.0
    z: float | None = None

    def __post_init__(self):
        if not self.alpha > 0.5:
            raise ValueError("alpha must exceed 1/2, got %r" % (self.alpha,))
        if self.alpha_prime < 0.0:
            raise ValueError("alpha_prime must be >= 0, got %r" % (self.alpha_prime,))
        for name in ("tau1", "tau2", "tau3", "gamma"):
            if getattr(self, name) <= 0.0:
                raise ValueError("%s must be positive" % name)
        if self.beta < 0.0:
            raise ValueError("beta must be >= 0, got %r" % (self.beta,))
        a_eff = min(self.alpha - self.beta, self.alpha_prime)
        if not (a_eff + self.s > 0.0 and a_eff + self.p - 0.5 > 0.0):
            raise ValueError(
                "smoothness range violated: need min(alpha-beta, alpha') + s > 0 "
                "and min(alpha-beta, alpha') + p - 1/2 > 0 "
                "(alpha=%g, alpha'=%g, beta=%g, p=%g, s=%g)"
                % (self.alpha, self.alpha_prime, self.beta, self.p, self.s)
            )
        if self.z is None:
            object.__setattr__(self, "z", self.p - self.s - 0.5)

    @classmethod
    def from_prior_shift(
        cls,
        truth_kind: str,
        z: float,
        alpha: float,
        alpha_prime: float,
        gamma: float,
        **kwargs,
    ) -> "ModelConfig":
        """Config with s = s*(truth) and matched-shift prior p = s* + 1/2 + z."""
        s_star = TRUTH_S_STAR[truth_kind]
        return cls(
            alpha=alpha,
            alpha_prime=alpha_prime,
            p=s_star + 0.5 + z,
            s=s_star,
            gamma=gamma,
            z=z,
            **kwargs,
        )
