import numpy as np
import pytest

from mimo_ce.correlation import (
    AntennaIndexError,
    ArrayGeometry,
    ChannelStats,
    DecompositionError,
    DegenerateCorrelation,
    InvalidGeometry,
    build_r_array,
    build_r_az,
    build_r_el,
    build_r_tap,
    make_channel_stats,
    sample_channel,
    spatial_correlation_entry,
)
from mimo_ce.linalg import is_hermitian, min_eigenvalue


class TestArrayGeometry:
    def test_column_major_indexing(self, geom):
        assert geom.n_antennas == 12
        assert geom.antenna_index(0, 1) == 3
        assert geom.antenna_index(2, 3) == 11
        assert all(geom.antenna_index(*geom.position(r)) == r for r in range(12))

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"m_rows": 0, "g_cols": 2},
            {"m_rows": 2, "g_cols": 2, "dx": 0.0},
            {"m_rows": 2, "g_cols": 2, "sigma": -0.1},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidGeometry):
            ArrayGeometry(**kwargs)

    def test_index_out_of_range(self, geom):
        with pytest.raises(AntennaIndexError):
            geom.antenna_index(3, 0)
        with pytest.raises(AntennaIndexError):
            geom.position(12)


class TestArrayCorrelation:
    def test_exact_is_unit_diagonal_hermitian_psd(self, geom):
        r_array = build_r_array(geom)
        assert r_array.shape == (12, 12)
        assert np.allclose(np.diag(r_array), 1.0)
        assert is_hermitian(r_array)
        assert min_eigenvalue(r_array) > -1e-10

    def test_entry_matches_matrix(self, geom):
        r_array = build_r_array(geom)
        for r, r_prime in [(0, 0), (0, 5), (7, 2), (11, 4)]:
            assert spatial_correlation_entry(geom, r, r_prime) == pytest.approx(
                r_array[r, r_prime]
            )

    def test_kronecker_shape(self, geom):
        r_kron = build_r_array(geom, "kronecker")
        assert r_kron.shape == (12, 12)
        assert np.allclose(r_kron, np.kron(build_r_az(geom), build_r_el(geom)))
        assert np.allclose(np.diag(r_kron), 1.0)

    def test_kronecker_exact_without_elevation_spread(self):
        geom = ArrayGeometry(3, 3, phi=np.pi / 2, theta=np.pi / 3, sigma=0.2, xi=0.0)
        kronecker = build_r_array(geom, "kronecker")
        assert np.allclose(kronecker, build_r_array(geom), atol=1e-12)

    def test_unknown_mode(self, geom):
        with pytest.raises(ValueError):
            build_r_array(geom, "separable")

    def test_correlation_decays_with_distance(self, geom):
        r_array = build_r_array(geom)
        assert abs(r_array[0, 1]) < 1.0
        assert abs(r_array[0, 3]) < 1.0


class TestTapCorrelation:
    def test_exponential_profile(self):
        r_tap = build_r_tap(4, decay=0.5)
        assert np.allclose(np.diag(r_tap), np.exp(-0.5 * np.arange(4)))
        assert np.count_nonzero(r_tap - np.diag(np.diag(r_tap))) == 0

    def test_invalid(self):
        with pytest.raises(ValueError):
            build_r_tap(0)
        with pytest.raises(ValueError):
            build_r_tap(3, decay=-1.0)

    @pytest.mark.parametrize("decay", [0.0, -0.5])
    def test_flat_or_growing_profile_rejected(self, decay):
        with pytest.raises(InvalidGeometry):
            build_r_tap(4, decay=decay)


class TestChannelStats:
    def test_blocks_and_composite(self, stats):
        assert stats.n_antennas == 12 and stats.l_taps == 4
        assert np.allclose(stats.block(0, 5), stats.r_array[0, 5] * stats.r_tap)
        composite = stats.composite([0, 3, 1])
        assert composite.shape == (12, 12)
        assert np.allclose(composite[4:8, :4], stats.block(3, 0))
        assert stats.composite().shape == (48, 48)

    def test_eigenvalues_descending(self, stats):
        assert np.all(np.diff(stats.eigenvalues_array) <= 1e-12)
        assert np.allclose(stats.eigenvalues_tap, np.exp(-np.arange(4)))

    def test_rejects_non_hermitian(self):
        with pytest.raises(DecompositionError):
            ChannelStats(np.array([[1.0, 0.5], [0.0, 1.0]]), np.eye(2))

    def test_rejects_zero(self):
        with pytest.raises(DegenerateCorrelation):
            ChannelStats(np.eye(2), np.zeros((2, 2)))


class TestSampleChannel:
    def test_shape(self, stats, rng):
        realization = sample_channel(stats, rng)
        assert realization.taps.shape == (12, 4)
        assert realization.h.shape == (48,)

    def test_empirical_covariance(self, rng):
        geom = ArrayGeometry(2, 2, sigma=0.3, xi=0.3)
        stats = make_channel_stats(geom, 2, decay=0.5)
        draws = np.stack([sample_channel(stats, rng).h for _ in range(20_000)])
        empirical = draws.T @ draws.conj() / len(draws)
        assert np.allclose(empirical, stats.composite(), atol=0.05)
