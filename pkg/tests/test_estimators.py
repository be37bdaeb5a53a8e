import numpy as np
import pytest

from mimo_ce.correlation import ChannelStats, sample_channel
from mimo_ce.estimators import (
    MaterializationCapExceeded,
    OlmmseEstimator,
    RankDeficientPilots,
    llmmse_estimate,
    llmmse_estimator,
    ls_estimate,
    mse_llmmse_awgn,
    mse_ls_awgn,
    mse_olmmse_awgn,
    olmmse_estimate,
    operation_counts,
)
from mimo_ce.interference import mse_olmmse_pc
from mimo_ce.linalg import SingularCorrelation, complex_normal


def _observations(stats, a_p, noise_var, rng):
    taps = sample_channel(stats, rng).taps
    noise = complex_normal(rng, (stats.n_antennas, a_p.n_pilots), noise_var)
    return taps, taps @ a_p.a_p.T + noise


class TestLeastSquares:
    def test_exact_without_noise(self, stats, a_p, rng):
        taps = sample_channel(stats, rng).taps
        assert np.allclose(ls_estimate(taps @ a_p.a_p.T, a_p), taps)

    def test_rank_deficient(self):
        with pytest.raises(RankDeficientPilots):
            ls_estimate(np.zeros(2), np.ones((2, 3)))
        with pytest.raises(RankDeficientPilots):
            ls_estimate(np.zeros(4), np.ones((4, 2)))

    def test_awgn_formula(self):
        assert mse_ls_awgn(10, 4, 100.0, 8) == pytest.approx(0.05)


class TestLocalizedLmmse:
    def test_matches_covariance_form(self, stats, a_p, ofdm, rng):
        _, y = _observations(stats, a_p, ofdm.noise_variance, rng)
        a_mat, r_tap = a_p.a_p, stats.r_tap
        outer = a_mat @ r_tap @ a_mat.conj().T + ofdm.noise_variance * np.eye(8)
        gain = r_tap @ a_mat.conj().T @ np.linalg.inv(outer)
        est = llmmse_estimate(y, a_p, r_tap, ofdm.noise_variance)
        assert np.allclose(est.h_hat, y @ gain.T)
        assert np.allclose(est.err_cov, r_tap - gain @ a_mat @ r_tap)

    def test_weighted_form(self, stats, a_p, ofdm, rng):
        _, y = _observations(stats, a_p, ofdm.noise_variance, rng)
        plain = llmmse_estimate(y, a_p, stats.r_tap, ofdm.noise_variance)
        weighted = llmmse_estimate(
            y, a_p, stats.r_tap, ofdm.noise_variance, weighted=True
        )
        assert weighted.weighted
        assert np.allclose(weighted.to_plain().h_hat, plain.h_hat)
        assert np.allclose(plain.to_weighted().err_cov, weighted.err_cov)

    def test_error_trace_matches_formula(self, stats, a_p, ofdm):
        est = llmmse_estimator(a_p, stats.r_tap, ofdm.noise_variance)
        total = stats.n_antennas * np.real(np.trace(est.err_cov))
        expected = mse_llmmse_awgn(stats.n_antennas, stats.eigenvalues_tap, ofdm.snr, 8)
        assert total == pytest.approx(expected)

    def test_singular_tap_correlation(self, a_p):
        with pytest.raises(SingularCorrelation):
            llmmse_estimate(np.zeros(8), a_p, np.diag([1.0, 0.5, 0.0, 0.1]), 0.1)

    def test_needs_noise(self, stats, a_p):
        with pytest.raises(SingularCorrelation):
            llmmse_estimate(np.zeros(8), a_p, stats.r_tap, 0.0)


class TestOptimalLmmse:
    def test_eigen_and_dense_routes_agree(self, stats, a_p, ofdm, rng):
        _, y = _observations(stats, a_p, ofdm.noise_variance, rng)
        eig = OlmmseEstimator(a_p, stats, ofdm.noise_variance)
        dense = OlmmseEstimator(a_p, stats, ofdm.noise_variance, method="dense")
        assert eig.method == "eig" and dense.method == "dense"
        assert np.allclose(eig.apply(y), dense.apply(y))
        assert eig.error_trace() == pytest.approx(dense.error_trace())
        assert np.allclose(eig.error_covariance(), dense.error_covariance(), atol=1e-10)

    def test_contaminated_routes_agree(self, stats, a_p, ofdm, rng):
        _, y = _observations(stats, a_p, ofdm.noise_variance, rng)
        eig = OlmmseEstimator(a_p, stats, ofdm.noise_variance, sigma_i2=0.05)
        dense = OlmmseEstimator(a_p, stats, ofdm.noise_variance, 0.05, method="dense")
        assert np.allclose(eig.apply(y), dense.apply(y))
        etas = np.clip(stats.eigenvalues_array, 0.0, None)
        expected = mse_olmmse_pc(etas, stats.eigenvalues_tap, ofdm.snr, 8, 0.05)
        assert dense.error_trace() == pytest.approx(expected)

    def test_error_trace_matches_formula(self, stats, a_p, ofdm):
        est = OlmmseEstimator(a_p, stats, ofdm.noise_variance)
        etas = np.clip(stats.eigenvalues_array, 0.0, None)
        expected = mse_olmmse_awgn(etas, stats.eigenvalues_tap, ofdm.snr, 8)
        assert est.error_trace() == pytest.approx(expected)

    def test_uncorrelated_array_reduces_to_localized(self, stats, a_p, ofdm, rng):
        white = ChannelStats(np.eye(stats.n_antennas, dtype=complex), stats.r_tap)
        _, y = _observations(white, a_p, ofdm.noise_variance, rng)
        central = olmmse_estimate(y, a_p, white, ofdm.noise_variance)
        local = llmmse_estimate(y, a_p, stats.r_tap, ofdm.noise_variance)
        assert np.allclose(central.h_hat, local.h_hat)

    def test_batch_axes_and_flat_input(self, stats, a_p, ofdm, rng):
        est = OlmmseEstimator(a_p, stats, ofdm.noise_variance)
        batch = complex_normal(rng, (3, stats.n_antennas, 8))
        out = est.apply(batch)
        assert out.shape == (3, stats.n_antennas, 4)
        assert np.allclose(out[1], est.apply(batch[1]))
        flat = olmmse_estimate(batch[0].reshape(-1), a_p, stats, ofdm.noise_variance)
        assert np.allclose(flat.h_hat, out[0])

    def test_beats_localized(self, stats, a_p, ofdm):
        central = OlmmseEstimator(a_p, stats, ofdm.noise_variance).error_trace()
        local = mse_llmmse_awgn(stats.n_antennas, stats.eigenvalues_tap, ofdm.snr, 8)
        assert central < local

    def test_cap(self, stats, a_p, ofdm):
        with pytest.raises(MaterializationCapExceeded):
            OlmmseEstimator(a_p, stats, ofdm.noise_variance, method="dense", cap=10)
        est = OlmmseEstimator(a_p, stats, ofdm.noise_variance, cap=10)
        with pytest.raises(MaterializationCapExceeded):
            est.error_covariance()

    def test_eigen_route_needs_orthogonal_pilots(self, stats):
        a_mat = np.random.default_rng(3).standard_normal((8, 4)) + 0j
        with pytest.raises(ValueError):
            OlmmseEstimator(a_mat, stats, 0.1, method="eig")


class TestOperationCounts:
    def test_scaling_in_array_size(self):
        small = operation_counts(16, 4, 16, 3)
        large = operation_counts(32, 4, 16, 3)
        assert set(small) == {"ls", "llmmse", "olmmse", "dlmmse"}
        assert large["dlmmse"][0] == 2 * small["dlmmse"][0]
        assert large["olmmse"][0] > 4 * small["olmmse"][0]
