import numpy as np
import pytest

from mimo_ce.linalg import (
    DecompositionError,
    SingularCorrelation,
    complex_normal,
    eigh_descending,
    hermitian_inverse,
    hermitian_solve,
    hermitian_sqrt,
    is_hermitian,
    is_positive_definite,
    min_eigenvalue,
)


def _random_pd(rng, n):
    g = complex_normal(rng, (n, n))
    return g @ g.conj().T + n * np.eye(n)


class TestComplexNormal:
    def test_variance(self, rng):
        x = complex_normal(rng, 100_000, variance=2.0)
        assert np.mean(np.abs(x) ** 2) == pytest.approx(2.0, rel=0.02)
        assert np.var(x.real) == pytest.approx(1.0, rel=0.03)


class TestHermitianHelpers:
    def test_eigh_descending_order(self, rng):
        vals, vecs = eigh_descending(_random_pd(rng, 5))
        assert np.all(np.diff(vals) <= 0)
        assert np.allclose(vecs.conj().T @ vecs, np.eye(5))

    def test_sqrt_squares_back(self, rng):
        mat = _random_pd(rng, 6)
        root = hermitian_sqrt(mat)
        assert is_hermitian(root)
        assert np.allclose(root @ root, mat)

    def test_sqrt_rejects_non_hermitian(self):
        with pytest.raises(DecompositionError):
            hermitian_sqrt(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_sqrt_clips_tiny_negative_eigenvalues(self):
        vec = np.array([1.0, 1.0j]) / np.sqrt(2)
        mat = np.outer(vec, vec.conj())
        root = hermitian_sqrt(mat)
        assert np.all(np.isfinite(root))
        assert np.allclose(root @ root, mat)

    def test_inverse_matches_numpy(self, rng):
        mat = _random_pd(rng, 4)
        assert np.allclose(hermitian_inverse(mat), np.linalg.inv(mat))

    def test_solve_matrix_rhs(self, rng):
        mat = _random_pd(rng, 4)
        rhs = complex_normal(rng, (4, 3))
        assert np.allclose(mat @ hermitian_solve(mat, rhs), rhs)

    def test_zero_matrix_is_singular(self):
        with pytest.raises(SingularCorrelation):
            hermitian_inverse(np.zeros((3, 3)))

    def test_positive_definite_checks(self, rng):
        mat = _random_pd(rng, 3)
        assert is_positive_definite(mat)
        assert not is_positive_definite(-mat)
        assert min_eigenvalue(mat) > 0
