"""
Spatial and tap correlation models for a uniform planar antenna array.

Antennas are indexed column-major with 0-based indices: the element in row
``m`` and column ``g`` has index ``r = m + M * g``. Spacings are expressed in
wavelengths and angles in radians.

"""

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from mimo_ce import MimoCeError
from mimo_ce.linalg import (
    DecompositionError,
    complex_normal,
    eigh_descending,
    hermitian_sqrt,
    is_hermitian,
)

logger = logging.getLogger(__name__)

ARRAY_MODES = ("exact", "kronecker")

__all__ = [
    "ARRAY_MODES",
    "ArrayGeometry",
    "ChannelRealization",
    "ChannelStats",
    "DecompositionError",
    "DegenerateCorrelation",
    "build_r_array",
    "build_r_az",
    "build_r_el",
    "build_r_tap",
    "make_channel_stats",
    "sample_channel",
    "spatial_correlation_entry",
]


class InvalidGeometry(MimoCeError, ValueError):
    """Exception is raised when array dimensions, spacings or spreads are invalid."""


class AntennaIndexError(MimoCeError, IndexError):
    """Exception is raised when an antenna index falls outside the array."""


class DegenerateCorrelation(MimoCeError, ValueError):
    """Exception is raised when a correlation matrix carries no energy."""


@dataclass(frozen=True)
class ArrayGeometry:
    """
    Uniform planar array with a single mean angle of arrival.

    Attributes
    ----------
    m_rows, g_cols : int
        Number of rows and columns.
    dx, dy : float
        Row and column spacing, in wavelengths.
    phi, theta : float
        Mean azimuth and elevation angles of arrival.
    sigma, xi : float
        Standard deviations of azimuth and elevation spreads.

    """

    m_rows: int
    g_cols: int
    dx: float = 0.5
    dy: float = 0.5
    phi: float = np.pi / 6
    theta: float = np.pi / 4
    sigma: float = np.pi / 18
    xi: float = np.pi / 18

    def __post_init__(self):
        if int(self.m_rows) < 1 or int(self.g_cols) < 1:
            raise InvalidGeometry(
                f"Array must have at least one row and column, got "
                f"{self.m_rows}x{self.g_cols}."
            )
        if self.dx <= 0 or self.dy <= 0:
            raise InvalidGeometry("Element spacings must be positive.")
        if self.sigma < 0 or self.xi < 0:
            raise InvalidGeometry("Angular spreads must be non-negative.")

    @property
    def n_antennas(self):
        return self.m_rows * self.g_cols

    def antenna_index(self, m, g):
        """Return the linear index of the element in row ``m``, column ``g``."""
        if not (0 <= m < self.m_rows and 0 <= g < self.g_cols):
            raise AntennaIndexError(f"Element ({m}, {g}) is outside the array.")
        return m + self.m_rows * g

    def position(self, r):
        """Return ``(m, g)`` for linear index ``r``."""
        if not 0 <= r < self.n_antennas:
            raise AntennaIndexError(
                f"Antenna {r} is outside an array of {self.n_antennas} elements."
            )
        return r % self.m_rows, r // self.m_rows


def _spatial_kernel(geom, dm, dg):
    """Correlation between two elements separated by ``dm`` rows, ``dg`` columns."""
    dm = np.asarray(dm, dtype=float)
    dg = np.asarray(dg, dtype=float)
    kx = 2 * np.pi * geom.dx
    ky = 2 * np.pi * geom.dy
    sin_t, cos_t = np.sin(geom.theta), np.cos(geom.theta)
    spread = np.sin(geom.phi) * geom.sigma

    d1 = np.exp(1j * kx * dm * cos_t) * np.exp(
        -0.5 * (geom.xi * kx) ** 2 * dm**2 * sin_t**2
    )
    d2 = ky * dg * sin_t
    d3 = geom.xi * ky * dg * cos_t
    d4 = 0.5 * geom.xi**2 * kx * ky * dm * dg * np.sin(2 * geom.theta)
    d5 = d3**2 * spread**2 + 1
    d6 = d4 * spread**2 + np.cos(geom.phi)
    d7 = d3**2 * np.cos(geom.phi) ** 2 - d4**2 * spread**2 - 2 * d4 * np.cos(geom.phi)
    return (
        d1
        / np.sqrt(d5)
        * np.exp(-(d7 + (d2 * spread) ** 2) / (2 * d5))
        * np.exp(1j * d2 * d6 / d5)
    )


def spatial_correlation_entry(geom, r, r_prime):
    """Single entry of the exact array correlation matrix."""
    m, g = geom.position(r)
    p, q = geom.position(r_prime)
    return complex(_spatial_kernel(geom, p - m, q - g))


def build_r_el(geom):
    """Correlation along a column (between rows), ``M x M``."""
    idx = np.arange(geom.m_rows)
    return _spatial_kernel(geom, idx[None, :] - idx[:, None], 0.0)


def build_r_az(geom):
    """Correlation along a row (between columns), ``G x G``."""
    idx = np.arange(geom.g_cols)
    dg = idx[None, :] - idx[:, None]
    ky = 2 * np.pi * geom.dy
    d2 = ky * dg * np.sin(geom.theta)
    d3 = geom.xi * ky * dg * np.cos(geom.theta)
    d5 = d3**2 * (np.sin(geom.phi) * geom.sigma) ** 2 + 1
    return (
        1
        / np.sqrt(d5)
        * np.exp(-(d3**2) * np.cos(geom.phi) ** 2 / (2 * d5))
        * np.exp(1j * d2 * np.cos(geom.phi) / d5)
        * np.exp(-0.5 * (d2 * geom.sigma) ** 2 / d5)
    )


def build_r_array(geom, mode="exact"):
    """
    Full ``R x R`` array correlation matrix.

    Parameters
    ----------
    geom : ArrayGeometry
    mode : {"exact", "kronecker"}
        ``"exact"`` evaluates every pair directly, ``"kronecker"`` returns
        the separable approximation ``R_az (x) R_el``.

    """
    if mode == "kronecker":
        return np.kron(build_r_az(geom), build_r_el(geom))
    if mode != "exact":
        raise ValueError(f"Unknown array mode {mode!r}, expected one of {ARRAY_MODES}.")
    idx = np.arange(geom.n_antennas)
    rows, cols = idx % geom.m_rows, idx // geom.m_rows
    return _spatial_kernel(
        geom, rows[None, :] - rows[:, None], cols[None, :] - cols[:, None]
    )


def build_r_tap(l_taps, decay=1.0):
    """Diagonal exponential power delay profile ``diag(exp(-decay * l))``."""
    if int(l_taps) < 1:
        raise ValueError(f"Need at least one tap, got {l_taps}.")
    if not decay > 0:
        raise InvalidGeometry(f"Delay profile decay must be positive, got {decay}.")
    return np.diag(np.exp(-decay * np.arange(l_taps))).astype(complex)


@dataclass(frozen=True, eq=False)
class ChannelStats:
    """Second-order statistics of the composite channel ``R_array (x) R_tap``."""

    r_array: np.ndarray
    r_tap: np.ndarray

    def __post_init__(self):
        for name in ("r_array", "r_tap"):
            mat = getattr(self, name)
            if not is_hermitian(mat):
                raise DecompositionError(f"{name} is not Hermitian.")
            if not np.any(mat):
                raise DegenerateCorrelation(f"{name} is the zero matrix.")

    @property
    def n_antennas(self):
        return self.r_array.shape[0]

    @property
    def l_taps(self):
        return self.r_tap.shape[0]

    @cached_property
    def array_eigen(self):
        """Eigenvalues (descending) and eigenvectors of ``R_array``."""
        return eigh_descending(self.r_array)

    @cached_property
    def tap_eigen(self):
        """Eigenvalues (descending) and eigenvectors of ``R_tap``."""
        return eigh_descending(self.r_tap)

    @property
    def eigenvalues_array(self):
        return self.array_eigen[0]

    @property
    def eigenvalues_tap(self):
        return self.tap_eigen[0]

    @cached_property
    def sqrt_factors(self):
        return hermitian_sqrt(self.r_array), hermitian_sqrt(self.r_tap)

    def block(self, i, j):
        """Cross-correlation ``E[h_i h_j^H]`` between antennas ``i`` and ``j``."""
        return self.r_array[i, j] * self.r_tap

    def composite(self, antennas=None):
        """Dense correlation of the stacked channels of ``antennas`` (default all)."""
        if antennas is None:
            return np.kron(self.r_array, self.r_tap)
        antennas = np.asarray(antennas)
        return np.kron(self.r_array[np.ix_(antennas, antennas)], self.r_tap)


def make_channel_stats(geom, l_taps, decay=1.0, mode="exact"):
    """Build :class:`ChannelStats` for an array geometry and delay profile."""
    stats = ChannelStats(build_r_array(geom, mode), build_r_tap(l_taps, decay))
    logger.debug(
        "Channel statistics for %dx%d array, L=%d, mode=%s.",
        geom.m_rows,
        geom.g_cols,
        l_taps,
        mode,
    )
    return stats


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """One draw of the stacked channel; ``taps[r]`` is the response of antenna ``r``."""

    taps: np.ndarray

    @property
    def h(self):
        return self.taps.reshape(-1)


def sample_channel(stats, rng):
    """
    Draw ``h ~ CN(0, R_array (x) R_tap)``.

    The draw is ``(S_a (x) S_t) g`` with Hermitian square roots ``S_a`` and
    ``S_t`` and ``g`` standard complex Gaussian, evaluated as
    ``S_a @ G @ S_t^T`` on the ``R x L`` reshaping.
    """
    s_array, s_tap = stats.sqrt_factors
    white = complex_normal(rng, (stats.n_antennas, stats.l_taps))
    return ChannelRealization(s_array @ white @ s_tap.T)
