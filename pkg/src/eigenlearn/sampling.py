"""Seeded random generation of designs and noise, realization of the diagonal
and matrix data models, and sufficient statistics.

All generators derive from ``numpy.random.SeedSequence`` spawn keys, so an
identical (seed, stream) pair reproduces an identical draw sequence across
runs and across worker counts. Datasets are immutable after generation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectra import SpectralSequence, TruthOperator, _as_readonly

__all__ = [
    "STREAM_DESIGN",
    "STREAM_NOISE",
    "STREAM_POSTERIOR",
    "make_rng",
    "DesignMatrix",
    "Dataset",
    "draw_design",
    "project_design",
    "gen_diagonal_dataset",
    "gen_diagonal_suffstats",
    "gen_matrix_dataset",
]

# Stream purposes. Keeping design and noise on distinct streams makes the
# independence of the design and the noise exact, not just statistical.
STREAM_DESIGN = 0
STREAM_NOISE = 1
STREAM_POSTERIOR = 2

_LAWS = ("gaussian", "uniform", "rademacher")


def make_rng(seed: int, stream: int | tuple[int, ...] = 0) -> np.random.Generator:
    """Independent, reproducible generator for a (seed, stream) pair.

    ``stream`` may be a single integer or a tuple of integers (e.g.
    (n_index, replication, purpose)); distinct streams under the same seed
    are statistically independent. seed=0 is a valid seed distinct from
    seed=1.
    """
    if isinstance(stream, (int, np.integer)):
        stream = (int(stream),)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class DesignMatrix:
    """Coefficients of N i.i.d. design draws in a fixed basis, shape (J, N).

    Row j holds the j-th coefficient of every draw; for a KL law the rows
    are lambda_j * zeta_jn with unit-variance zeta.
    """

    coeffs: np.ndarray
    law: str

    def __post_init__(self):
        c = _as_readonly(self.coeffs)
        if c.ndim != 2:
            raise ValueError("design coefficients must be a (J, N) array")
        if self.law not in _LAWS:
            raise ValueError("unknown design law %r" % (self.law,))
        object.__setattr__(self, "coeffs", c)

    @property
    def J(self) -> int:
        return int(self.coeffs.shape[0])

    @property
    def N(self) -> int:
        return int(self.coeffs.shape[1])


@dataclass(frozen=True)
class Dataset:
    """One realized training set together with its sufficient statistics.

    ``suff_gg[j] = <g_j g_j>`` and ``suff_yg[j] = <y_j g_j>`` are the per-mode
    averages (1/N) sum_n over the N samples; the per-mode posterior depends on
    the data only through them. ``design``/``outputs`` are retained when the
    data was materialized and are None for sufficient-statistic realizations.
    ``gram``/``rhs`` are the matrix-model empirical Gram <x_l x_k> and
    right-hand sides <y_j x_l>, populated by the matrix sampler only.
    """

    gamma: float
    n_samples: int
    suff_gg: np.ndarray
    suff_yg: np.ndarray
    design: DesignMatrix | None = None
    outputs: np.ndarray | None = None
    gram: np.ndarray | None = None
    rhs: np.ndarray | None = None

    def __post_init__(self):
        gg = _as_readonly(self.suff_gg)
        yg = _as_readonly(self.suff_yg)
        if gg.shape != yg.shape or gg.ndim != 1:
            raise ValueError("sufficient statistics must be matching 1-d arrays")
        if np.any(gg < 0.0):
            raise ValueError("<g_j g_j> must be nonnegative")
        object.__setattr__(self, "suff_gg", gg)
        object.__setattr__(self, "suff_yg", yg)
        if self.outputs is not None:
            object.__setattr__(self, "outputs", _as_readonly(self.outputs))
        if self.gram is not None:
            object.__setattr__(self, "gram", _as_readonly(self.gram))
        if self.rhs is not None:
            object.__setattr__(self, "rhs", _as_readonly(self.rhs))

    @property
    def J(self) -> int:
        return int(self.suff_gg.size)


def draw_design(
    spectrum: SpectralSequence,
    N: int,
    law: str,
    rng: np.random.Generator,
) -> DesignMatrix:
    """Draw N i.i.d. KL coefficient vectors: coeffs[k, n] = lambda_k zeta_kn.

    ``spectrum`` holds the variances lambda_k^2. The laws gaussian,
    uniform(-sqrt3, sqrt3), and rademacher all have mean zero and unit
    variance; gaussian is the default choice elsewhere.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    J = spectrum.J
    if law == "gaussian":
        zeta = rng.standard_normal((J, N))
    elif law == "uniform":
        r3 = np.sqrt(3.0)
        zeta = rng.uniform(-r3, r3, size=(J, N))
    elif law == "rademacher":
        zeta = rng.integers(0, 2, size=(J, N)).astype(float) * 2.0 - 1.0
    else:
        raise ValueError("unknown design law %r" % (law,))
    coeffs = np.sqrt(spectrum.values)[:, None] * zeta
    return DesignMatrix(coeffs, law)


def project_design(x: DesignMatrix, overlap: np.ndarray) -> DesignMatrix:
    """Change of basis g_jn = sum_k overlap[j, k] x_kn.

    Used to express a sine-basis KL design in the half-integer cosine output
    basis; the projected coefficients are correlated across modes.
    """
    overlap = np.asarray(overlap, dtype=float)
    if overlap.ndim != 2 or overlap.shape[1] != x.J:
        raise ValueError(
            "overlap shape %r incompatible with design J=%d" % (overlap.shape, x.J)
        )
    return DesignMatrix(overlap @ x.coeffs, x.law)


def _suff_stats(g: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.mean(g * g, axis=1), np.mean(y * g, axis=1)


def gen_diagonal_dataset(
    truth: TruthOperator,
    design: DesignMatrix,
    gamma: float,
    rng: np.random.Generator,
    noise_spectrum: SpectralSequence | None = None,
) -> Dataset:
    """Realize y_jn = g_jn * truth_j + gamma * xi_jn with standard normal xi.

    ``design`` must already be in the output basis. ``noise_spectrum``, when
    given, supplies per-mode noise covariance eigenvalues lambda_j so the
    noise standard deviation becomes gamma * sqrt(lambda_j) (smoother,
    colored noise); omitted means white noise. gamma = 0 is allowed and gives
    the exact noise-free model.
    """
    if gamma < 0.0:
        raise ValueError("gamma must be >= 0")
    g = design.coeffs
    lt = truth.eigenvalues
    if lt.size != design.J:
        raise ValueError("truth has %d modes, design has %d" % (lt.size, design.J))
    y = g * lt[:, None]
    if gamma > 0.0:
        xi = rng.standard_normal(g.shape)
        if noise_spectrum is not None:
            xi = xi * np.sqrt(noise_spectrum.values)[:, None]
        y = y + gamma * xi
    suff_gg, suff_yg = _suff_stats(g, y)
    return Dataset(
        gamma=float(gamma),
        n_samples=design.N,
        suff_gg=suff_gg,
        suff_yg=suff_yg,
        design=design,
        outputs=y,
    )


def gen_diagonal_suffstats(
    truth: TruthOperator,
    spectrum: SpectralSequence,
    N: int,
    gamma: float,
    rng_design: np.random.Generator,
    rng_noise: np.random.Generator,
    noise_spectrum: SpectralSequence | None = None,
) -> Dataset:
    """Sample the diagonal model's sufficient statistics directly.

    Valid for the gaussian design law in the simultaneously diagonal setting
    only, where per mode N<g_j g_j>/theta_j^2 ~ chi^2(N) and, conditionally
    on the design, <g_j xi_j> ~ N(0, <g_j g_j>/N), independently across
    modes. The returned statistics are equal in distribution to those of a
    materialized dataset, at O(J) cost instead of O(J N).
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if gamma < 0.0:
        raise ValueError("gamma must be >= 0")
    J = spectrum.J
    lt = truth.eigenvalues
    if lt.size != J:
        raise ValueError("truth has %d modes, spectrum has %d" % (lt.size, J))
    suff_gg = spectrum.values * rng_design.chisquare(N, size=J) / N
    suff_yg = lt * suff_gg
    if gamma > 0.0:
        gxi = np.sqrt(suff_gg / N) * rng_noise.standard_normal(J)
        if noise_spectrum is not None:
            gxi = gxi * np.sqrt(noise_spectrum.values)
        suff_yg = suff_yg + gamma * gxi
    return Dataset(gamma=float(gamma), n_samples=int(N), suff_gg=suff_gg, suff_yg=suff_yg)


def gen_matrix_dataset(
    truth_matrix: np.ndarray,
    x: DesignMatrix,
    overlap: np.ndarray | None,
    gamma: float,
    rng: np.random.Generator,
) -> Dataset:
    """Realize the non-diagonal model y_jn = sum_k truth[j, k] x_kn + gamma xi_jn.

    ``truth_matrix`` is expressed in (output-basis row, input-basis column)
    coordinates. ``overlap`` maps input- to output-basis coefficients for the
    per-mode sufficient statistics; None means the bases coincide. The
    empirical Gram <x_l x_k> and right-hand sides <y_j x_l> of the normal
    equations are populated.
    """
    if gamma < 0.0:
        raise ValueError("gamma must be >= 0")
    T = np.asarray(truth_matrix, dtype=float)
    if T.ndim != 2 or T.shape[1] != x.J:
        raise ValueError("truth matrix shape %r incompatible with design J=%d" % (T.shape, x.J))
    N = x.N
    y = T @ x.coeffs
    if gamma > 0.0:
        y = y + gamma * rng.standard_normal(y.shape)
    g_out = x.coeffs if overlap is None else project_design(x, overlap).coeffs
    if g_out.shape[0] != y.shape[0]:
        raise ValueError("overlap output dimension %d != truth rows %d" % (g_out.shape[0], y.shape[0]))
    suff_gg, suff_yg = _suff_stats(g_out, y)
    gram = x.coeffs @ x.coeffs.T / N
    gram = 0.5 * (gram + gram.T)  # kill fp asymmetry
    rhs = y @ x.coeffs.T / N
    return Dataset(
        gamma=float(gamma),
        n_samples=N,
        suff_gg=suff_gg,
        suff_yg=suff_yg,
        design=x,
        outputs=y,
        gram=gram,
        rhs=rhs,
    )
