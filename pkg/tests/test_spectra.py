import math

import numpy as np
import pytest
from scipy.integrate import quad

from eigenlearn.spectra import (
    ModelConfig,
    SpectralSequence,
    cross_basis_variance,
    matern_spectrum,
    overlap_entry,
    overlap_matrix,
    prior_variance_grid,
    prior_variances_diagonal,
    prior_variances_matrix,
    sobolev_norm,
    truth_eigenvalues,
)


class TestSpectralSequence:
    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            SpectralSequence(np.array([1.0, 0.0]))
        with pytest.raises(ValueError):
            SpectralSequence(np.array([-1.0]))

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            SpectralSequence(np.array([1.0, np.inf]))
        with pytest.raises(ValueError):
            SpectralSequence(np.array([np.nan]))

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            SpectralSequence(np.array([]))

    def test_underflow_flagged(self):
        with pytest.warns(RuntimeWarning):
            SpectralSequence(np.array([1.0, 1e-305]))

    def test_immutable(self):
        seq = matern_spectrum(1.0, 1.0, 4)
        with pytest.raises(ValueError):
            seq.values[0] = 2.0


class TestMaternSpectrum:
    def test_closed_form_value(self):
        # 15^8 (pi^2 + 225)^(-4.5), frozen from a 40-digit evaluation
        seq = matern_spectrum(15.0, 4.5, 1)
        assert seq.values[0] == pytest.approx(0.054955276733789557928, rel=1e-14)

    def test_zero_exponent_collapses(self):
        seq = matern_spectrum(1.0, 0.0, 16)
        assert np.all(seq.values == 1.0)
        seq = matern_spectrum(2.0, 0.0, 3)
        assert np.allclose(seq.values, 0.5)

    def test_power_law_limit(self):
        # values[j] * j^(2e) -> tau^(2e-1) pi^(-2e); frozen constant at tau=15, e=4.5
        seq = matern_spectrum(15.0, 4.5, 10**4)
        ratio = seq.values[-1] * (10.0**4) ** 9.0
        assert ratio == pytest.approx(85976.788373622618569, rel=1e-2)

    def test_monotone(self):
        inc = matern_spectrum(1.0, -1.5, 50).values
        dec = matern_spectrum(1.0, 1.5, 50).values
        assert np.all(np.diff(dec) < 0)
        assert np.all(np.diff(inc) > 0)

    def test_invalid_args(self):
        with pytest.raises(ValueError):
            matern_spectrum(0.0, 1.0, 4)
        with pytest.raises(ValueError):
            matern_spectrum(-2.0, 1.0, 4)
        with pytest.raises(ValueError):
            matern_spectrum(1.0, 1.0, 0)


class TestTruthEigenvalues:
    def test_neg_laplacian(self):
        t = truth_eigenvalues("neg_laplacian", 3)
        assert t.eigenvalues[0] == pytest.approx(math.pi**2, rel=1e-15)
        assert t.s_star == -2.5

    def test_identity(self):
        t = truth_eigenvalues("identity", 8)
        assert t.eigenvalues[6] == 1.0
        assert t.s_star == -0.5

    def test_inverse(self):
        t = truth_eigenvalues("inv_neg_laplacian", 4)
        assert t.eigenvalues[1] == pytest.approx(0.025330295910584442861, rel=1e-14)
        assert t.s_star == 1.5

    def test_custom(self):
        vals = np.array([3.0, 1.0, 0.5])
        t = truth_eigenvalues("custom", 3, eigenvalues=vals, s_star=0.25)
        assert np.array_equal(t.eigenvalues, vals)
        assert t.s_star == 0.25
        with pytest.raises(ValueError):
            truth_eigenvalues("custom", 3)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            truth_eigenvalues("laplacian", 3)


class TestPriorVariances:
    def test_p_zero(self):
        seq = prior_variances_diagonal(0.0, 1.0, 5)
        assert seq.values[2] == 1.0

    def test_negative_p_value(self):
        seq = prior_variances_diagonal(-2.0, 1.0, 1)
        assert seq.values[0] == pytest.approx(118.14829983618115447, rel=1e-14)

    def test_negative_p_increasing(self):
        seq = prior_variances_diagonal(-1.0, 1.0, 100)
        assert np.all(np.diff(seq.values) > 0)

    def test_invalid_tau(self):
        with pytest.raises(ValueError):
            prior_variances_diagonal(1.0, 0.0, 4)


class TestMatrixPriors:
    def test_unbounded_case(self):
        assert prior_variances_matrix("neg_laplacian", 0.0, 1, 1) == pytest.approx(4.0)
        assert prior_variances_matrix("elliptic", 0.0, 1, 1) == pytest.approx(4.0)

    def test_identity_case(self):
        assert prior_variances_matrix("identity", 0.0, 1, 1) == pytest.approx(1.0)

    def test_inverse_case(self):
        assert prior_variances_matrix("inv_neg_laplacian", 0.0, 1, 1) == pytest.approx(4.0)
        assert prior_variances_matrix("inv_elliptic", 0.0, 1, 1) == pytest.approx(4.0)

    def test_grid_matches_entries(self):
        grid = prior_variance_grid("identity", 0.5, 6)
        for j in (1, 3, 6):
            for k in (2, 5):
                # vectorized and scalar pow may differ in the last ulp
                assert grid[j - 1, k - 1] == pytest.approx(
                    prior_variances_matrix("identity", 0.5, j, k), rel=1e-14
                )

    def test_unsupported_kind(self):
        with pytest.raises(ValueError):
            prior_variances_matrix("fourier", 0.0, 1, 1)


class TestOverlap:
    def test_sign_and_value_vs_quadrature(self):
        # Convention fixed by 2 int_0^1 cos((j-1/2) pi z) sin(k pi z) dz.
        for j, k in ((1, 1), (2, 1), (1, 2), (3, 5), (6, 6), (9, 2)):
            oracle = quad(
                lambda z: 2.0 * math.cos((j - 0.5) * math.pi * z) * math.sin(k * math.pi * z),
                0.0,
                1.0,
            )[0]
            assert overlap_entry(j, k) == pytest.approx(oracle, abs=1e-12)

    def test_matrix_matches_entries(self):
        M = overlap_matrix(4, 7)
        assert M.shape == (4, 7)
        assert M[2, 4] == overlap_entry(3, 5)

    def test_parseval_columns(self):
        M = overlap_matrix(10**4, 32)
        colsums = np.sum(M**2, axis=0)
        assert np.max(np.abs(colsums - 1.0)) < 1e-4


class TestCrossBasisVariance:
    def test_single_mode(self):
        lam = np.zeros(8)
        lam[0] = 1.0
        assert cross_basis_variance(lam, 1) == pytest.approx(0.72050619478995748582, rel=1e-14)

    def test_zero_spectrum(self):
        assert cross_basis_variance(np.zeros(16), 3) == 0.0

    def test_monotone_in_terms(self):
        lam = matern_spectrum(15.0, 1.5, 256)
        vals = [cross_basis_variance(lam, 5, K) for K in (16, 64, 256)]
        assert vals[0] <= vals[1] <= vals[2]

    def test_last_term_diagnostic(self):
        lam = matern_spectrum(15.0, 1.5, 64)
        total, last = cross_basis_variance(lam, 2, return_last_term=True)
        assert last > 0.0
        assert last < total

    def test_matches_overlap_series(self):
        lam = matern_spectrum(15.0, 2.0, 128)
        M = overlap_matrix(4, 128)
        direct = float(np.sum(M[3] ** 2 * lam.values))
        assert cross_basis_variance(lam, 4) == pytest.approx(direct, rel=1e-13)

    def test_decay_exponent_midscale(self):
        # Fitted log-log slope approaches -2*min(alpha_tilde, 2); a reduced
        # window keeps this quick, the full-window check runs with acceptance.
        lam = matern_spectrum(15.0, 1.5, 2**18)
        js = np.unique(np.round(np.logspace(math.log10(2**6), math.log10(2**11), 12)).astype(int))
        theta = np.log([cross_basis_variance(lam, int(j)) for j in js])
        slope = np.polyfit(np.log(js.astype(float)), theta, 1)[0]
        assert slope == pytest.approx(-3.0, abs=0.1)

    def test_bad_args(self):
        lam = matern_spectrum(1.0, 1.0, 8)
        with pytest.raises(ValueError):
            cross_basis_variance(lam, 0)
        with pytest.raises(ValueError):
            cross_basis_variance(lam, 1, K=9)
        with pytest.raises(ValueError):
            cross_basis_variance(lam, 1, K=0)


class TestSobolevNorm:
    def test_unit_first_mode(self):
        for s in (-3.0, 0.0, 2.5):
            assert sobolev_norm([1.0], s) == 1.0

    def test_hand_sum(self):
        v = np.array([1.0, 1.0, 1.0, 1.0, 0.0, 0.0])
        assert sobolev_norm(v, 0.5) == pytest.approx(math.sqrt(10.0), rel=1e-15)

    def test_zero(self):
        assert sobolev_norm(np.zeros(5), 1.0) == 0.0
        assert sobolev_norm([], 1.0) == 0.0


class TestModelConfig:
    def test_accepts_all_table_configurations(self):
        for kind in ("neg_laplacian", "identity", "inv_neg_laplacian"):
            for z in (-0.75, 0.0, 0.75):
                for ap in (4.0, 4.5, 5.25):
                    ModelConfig.from_prior_shift(kind, z, alpha=4.5, alpha_prime=ap, gamma=0.1)

    def test_rejects_smoothness_violation(self):
        # alpha' + s <= 0
        with pytest.raises(ValueError):
            ModelConfig(alpha=4.5, alpha_prime=2.0, p=-2.0, s=-2.5, gamma=0.1)
        # alpha' + p - 1/2 <= 0
        with pytest.raises(ValueError):
            ModelConfig(alpha=4.5, alpha_prime=1.0, p=-0.5, s=0.5, gamma=0.1)

    def test_rejects_colored_violation(self):
        ModelConfig(alpha=4.5, alpha_prime=4.5, p=-2.0, s=-2.5, gamma=0.1, beta=1.0)
        with pytest.raises(ValueError):
            ModelConfig(alpha=4.5, alpha_prime=4.5, p=-2.0, s=-2.5, gamma=0.1, beta=2.1)

    def test_basic_field_validation(self):
        with pytest.raises(ValueError):
            ModelConfig(alpha=0.5, alpha_prime=1.0, p=1.0, s=1.0, gamma=0.1)
        with pytest.raises(ValueError):
            ModelConfig(alpha=1.0, alpha_prime=-0.1, p=1.0, s=1.0, gamma=0.1)
        with pytest.raises(ValueError):
            ModelConfig(alpha=1.0, alpha_prime=1.0, p=1.0, s=1.0, gamma=0.0)

    def test_shift_recorded(self):
        cfg = ModelConfig(alpha=4.5, alpha_prime=4.5, p=-2.0, s=-2.5, gamma=0.1)
        assert cfg.z == pytest.approx(0.0)
        cfg = ModelConfig.from_prior_shift("identity", 0.75, 4.5, 4.5, 1e-3)
        assert cfg.p == pytest.approx(0.75)
        assert cfg.s == -0.5
