"""
Hermitian linear algebra helpers.

All matrix inversions in the package go through this module so that the
ridge policy is applied consistently: a Hermitian matrix whose condition
number exceeds ``MAX_CONDITION`` is regularized with
``RIDGE_SCALE * trace / dim`` on its diagonal before the Cholesky solve.

"""

import logging

import numpy as np
import scipy.linalg

from mimo_ce import MimoCeError

logger = logging.getLogger(__name__)

MAX_CONDITION = 1e12
RIDGE_SCALE = 1e-12
EIGEN_CLIP = 1e-12
HERMITIAN_TOL = 1e-10
PINV_RCOND = 1e-10


class SingularCorrelation(MimoCeError, ValueError):
    """Exception is raised when a matrix stays singular after regularization."""


class DecompositionError(MimoCeError, ValueError):
    """Exception is raised when a square root is asked of a non-Hermitian matrix."""


def complex_normal(rng, shape, variance=1.0):
    """Draw circularly-symmetric complex Gaussian samples with the given variance."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def is_hermitian(mat, tol=HERMITIAN_TOL):
    """Check Hermitian symmetry relative to the matrix norm."""
    mat = np.asarray(mat)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        return False
    scale = max(np.abs(mat).max(initial=0.0), 1.0)
    return np.abs(mat - mat.conj().T).max(initial=0.0) <= tol * scale


def hermitize(mat):
    """Return the Hermitian part of a square matrix."""
    return 0.5 * (mat + mat.conj().T)


def eigh_descending(mat):
    """Eigen-decomposition of a Hermitian matrix, eigenvalues sorted descending."""
    vals, vecs = scipy.linalg.eigh(hermitize(np.asarray(mat)))
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order]


def hermitian_sqrt(mat, clip=EIGEN_CLIP):
    """
    Hermitian square root via eigen-decomposition.

    Eigenvalues below ``clip`` are set to zero so that numerically singular
    correlation matrices still produce a valid factor.

    Raises
    ------
    DecompositionError
        If the input is not Hermitian.

    """
    mat = np.asarray(mat, dtype=complex)
    if not is_hermitian(mat):
        raise DecompositionError("Cannot take a square root of a non-Hermitian matrix.")
    vals, vecs = scipy.linalg.eigh(hermitize(mat))
    vals = np.where(vals < clip, 0.0, vals)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def _regularized(mat):
    mat = hermitize(np.asarray(mat, dtype=complex))
    dim = mat.shape[0]
    vals = scipy.linalg.eigvalsh(mat)
    top = np.abs(vals).max(initial=0.0)
    low = vals.min(initial=0.0)
    if top == 0.0:
        raise SingularCorrelation("Cannot invert a zero matrix.")
    if low <= 0.0 or top / low > MAX_CONDITION:
        ridge = RIDGE_SCALE * np.real(np.trace(mat)) / dim
        if ridge <= 0.0:
            raise SingularCorrelation("Matrix has a non-positive trace.")
        logger.debug(
            "Adding ridge %.3e to a %dx%d matrix (min eigenvalue %.3e).",
            ridge,
            dim,
            dim,
            low,
        )
        mat = mat + ridge * np.eye(dim)
    return mat


def hermitian_solve(mat, rhs):
    """
    Solve ``mat @ x = rhs`` for a Hermitian positive (semi)definite ``mat``.

    The right-hand side may be a vector or a matrix with any number of
    columns.
    """
    reg = _regularized(mat)
    try:
        factor = scipy.linalg.cho_factor(reg, lower=True, check_finite=False)
    except np.linalg.LinAlgError as err:
        raise SingularCorrelation(
            "Matrix is not positive definite after regularization."
        ) from err
    return scipy.linalg.cho_solve(factor, rhs, check_finite=False)


def hermitian_inverse(mat):
    """Inverse of a Hermitian positive (semi)definite matrix."""
    mat = np.asarray(mat)
    return hermitize(hermitian_solve(mat, np.eye(mat.shape[0], dtype=complex)))


def hermitian_pinv(mat, rcond=PINV_RCOND):
    """
    Pseudo-inverse of a Hermitian positive semidefinite matrix.

    The matrix is scaled to unit diagonal first, so ``rcond`` is relative to
    the correlation structure rather than to the magnitudes of the entries.
    Eigenvalues of the scaled matrix below ``rcond`` times the largest are
    dropped.
    """
    mat = hermitize(np.asarray(mat, dtype=complex))
    diag = np.real(np.diag(mat))
    scale = np.zeros_like(diag)
    np.divide(1.0, np.sqrt(diag), out=scale, where=diag > 0)
    scaled = scipy.linalg.pinvh(
        hermitize(mat * np.outer(scale, scale)), atol=0.0, rtol=rcond
    )
    return hermitize(scaled * np.outer(scale, scale))


def min_eigenvalue(mat):
    """Smallest eigenvalue of the Hermitian part of ``mat``."""
    return scipy.linalg.eigvalsh(hermitize(np.asarray(mat))).min()


def is_positive_definite(mat):
    """Check that the Hermitian part of ``mat`` has a Cholesky factor."""
    try:
        np.linalg.cholesky(hermitize(np.asarray(mat, dtype=complex)))
    except np.linalg.LinAlgError:
        return False
    return True
