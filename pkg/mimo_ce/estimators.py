"""
Batch pilot-based channel estimators.

``ls_estimate`` and ``llmmse_estimate`` work antenna by antenna on the
``K`` pilot tones; ``olmmse_estimate`` processes the stacked ``R*K``
observations of the whole array. All of them optionally account for pilot
contamination through an interference variance ``sigma_i2``, in which case
the noise covariance becomes ``sigma_w^2 I + sigma_i2 A R A^H``.

Observations may be stacked: the last axis is the pilot axis and, for the
centralized estimator, the second to last axis is the antenna axis.

"""

import logging
from dataclasses import dataclass

import numpy as np

from mimo_ce import MimoCeError
from mimo_ce.linalg import (
    SingularCorrelation,
    eigh_descending,
    hermitian_inverse,
    hermitian_solve,
    hermitize,
)
from mimo_ce.ofdm import ObservationMatrix

logger = logging.getLogger(__name__)

MATERIALIZATION_CAP = 4096
STRICT_PD_TOL = 1e-12
OLMMSE_METHODS = ("auto", "eig", "dense")


class RankDeficientPilots(MimoCeError, ValueError):
    """Exception is raised when the pilot observation matrix has rank below L."""


class MaterializationCapExceeded(MimoCeError, MemoryError):
    """Exception is raised when a composite RL x RL matrix would exceed the cap."""


def _matrix(a_p):
    return a_p.a_p if isinstance(a_p, ObservationMatrix) else np.asarray(a_p)


@dataclass(eq=False)
class EstimateWithCovariance:
    """
    Channel estimate with its error covariance.

    In weighted form ``h_hat`` holds ``P @ h`` and ``err_cov`` holds
    ``P = C_e^{-1}``; otherwise they hold the estimate and ``C_e``. Stacked
    estimates keep the vector on the last axis and share one covariance.
    """

    h_hat: np.ndarray
    err_cov: np.ndarray
    weighted: bool = False

    @property
    def precision(self):
        return self.err_cov if self.weighted else hermitian_inverse(self.err_cov)

    @property
    def covariance(self):
        return hermitian_inverse(self.err_cov) if self.weighted else self.err_cov

    def to_weighted(self):
        if self.weighted:
            return self
        precision = hermitian_inverse(self.err_cov)
        return EstimateWithCovariance(self.h_hat @ precision.T, precision, True)

    def to_plain(self):
        if not self.weighted:
            return self
        covariance = hermitian_inverse(self.err_cov)
        return EstimateWithCovariance(self.h_hat @ covariance.T, covariance, False)


def noise_covariance(a_p, noise_var, r_tap=None, sigma_i2=0.0):
    """Per-antenna pilot noise plus contamination covariance ``R_E``."""
    a_mat = _matrix(a_p)
    cov = noise_var * np.eye(a_mat.shape[0], dtype=complex)
    if sigma_i2 > 0:
        cov = cov + sigma_i2 * a_mat @ r_tap @ a_mat.conj().T
    return hermitize(cov)


def data_precision(a_p, noise_var, r_tap=None, sigma_i2=0.0):
    """``A^H R_E^{-1} A`` and the whitened matched filter ``A^H R_E^{-1}``."""
    a_mat = _matrix(a_p)
    r_e = noise_covariance(a_mat, noise_var, r_tap, sigma_i2)
    if noise_var <= 0 and sigma_i2 <= 0:
        raise SingularCorrelation("LMMSE estimation needs a positive noise variance.")
    matched = hermitian_solve(r_e, a_mat).conj().T
    return hermitize(matched @ a_mat), matched


def _check_rank(a_mat):
    k, l = a_mat.shape
    if k < l:
        raise RankDeficientPilots(f"{k} pilots cannot resolve {l} taps.")
    if np.linalg.matrix_rank(a_mat) < l:
        raise RankDeficientPilots("Pilot observation matrix is rank deficient.")


def _check_strictly_pd(mat, name):
    vals = np.linalg.eigvalsh(hermitize(mat))
    if vals.min() <= STRICT_PD_TOL * max(vals.max(), 0.0):
        raise SingularCorrelation(f"{name} is singular.")


@dataclass(eq=False)
class LinearEstimator:
    """Per-antenna linear estimator ``h_hat = gain @ y``."""

    name: str
    gain: np.ndarray
    err_cov: np.ndarray

    def apply(self, y):
        return np.asarray(y) @ self.gain.T


def ls_estimator(a_p):
    """Least-squares gain ``(A^H A)^{-1} A^H``; error covariance per unit noise."""
    a_mat = _matrix(a_p)
    _check_rank(a_mat)
    gram = hermitize(a_mat.conj().T @ a_mat)
    gain = hermitian_solve(gram, a_mat.conj().T)
    return LinearEstimator("ls", gain, hermitian_inverse(gram))


def ls_estimate(y, a_p):
    """
    Least-squares estimate ``(A^H A)^{-1} A^H y``.

    Raises
    ------
    RankDeficientPilots
        When fewer pilots than taps are available or ``A`` loses rank.

    """
    return ls_estimator(a_p).apply(y)


def llmmse_estimator(a_p, r_tap, noise_var, sigma_i2=0.0):
    """Localized LMMSE gain and error covariance of a single antenna."""
    a_mat = _matrix(a_p)
    _check_strictly_pd(r_tap, "Tap correlation")
    info, matched = data_precision(a_mat, noise_var, r_tap, sigma_i2)
    precision = hermitian_inverse(r_tap) + info
    err_cov = hermitian_inverse(precision)
    return LinearEstimator("llmmse", err_cov @ matched, err_cov)


def llmmse_estimate(y, a_p, r_tap, noise_var, sigma_i2=0.0, weighted=False):
    """
    Localized LMMSE estimate using only the antenna's own pilot tones.

    Parameters
    ----------
    y : np.ndarray
        Received pilots, pilot axis last.
    a_p : ObservationMatrix or np.ndarray
    r_tap : np.ndarray
        ``L x L`` tap correlation, strictly positive definite.
    noise_var : float
    sigma_i2 : float, optional
        Pilot-contamination interference variance.
    weighted : bool, optional
        Return ``(P h, P)`` instead of ``(h, C_e)``.

    Returns
    -------
    EstimateWithCovariance

    """
    a_mat = _matrix(a_p)
    _check_strictly_pd(r_tap, "Tap correlation")
    info, matched = data_precision(a_mat, noise_var, r_tap, sigma_i2)
    precision = hermitian_inverse(r_tap) + info
    h_w = np.asarray(y) @ matched.T
    if weighted:
        return EstimateWithCovariance(h_w, precision, True)
    err_cov = hermitian_inverse(precision)
    return EstimateWithCovariance(h_w @ err_cov.T, err_cov, False)


class OlmmseEstimator:
    """
    Centralized LMMSE over the stacked observations of all antennas.

    With orthogonal pilots (``A^H A = c I``) the estimator is diagonal in the
    eigenbasis ``V (x) Q`` of ``R_h``: projecting every antenna onto the
    pilot subspace leaves one scalar observation per eigenmode with gain
    ``sqrt(c) lam / (c lam (1 + sigma_i2) + sigma_w^2)``. Otherwise, or when
    ``method="dense"``, the covariance form
    ``R_h A'^H ((1 + sigma_i2) A' R_h A'^H + sigma_w^2 I)^{-1}`` is used.
    """

    def __init__(
        self,
        a_p,
        stats,
        noise_var,
        sigma_i2=0.0,
        method="auto",
        cap=MATERIALIZATION_CAP,
    ):
        if method not in OLMMSE_METHODS:
            raise ValueError(f"Unknown method {method!r}, expected {OLMMSE_METHODS}.")
        self.a_mat = _matrix(a_p)
        self.stats = stats
        self.noise_var = noise_var
        self.sigma_i2 = sigma_i2
        self.cap = cap
        _check_rank(self.a_mat)
        scale = ObservationMatrix(self.a_mat).orthogonal_scale()
        if method == "eig" and scale is None:
            raise ValueError("Eigen route requires pilots with A^H A = c I.")
        self.method = "eig" if method != "dense" and scale is not None else "dense"
        self.dim = stats.n_antennas * stats.l_taps
        if self.method == "eig":
            self._setup_eig(scale)
        else:
            self._setup_dense()
        logger.debug("O-LMMSE over %d unknowns via %s route.", self.dim, self.method)

    def _check_cap(self):
        if self.dim > self.cap:
            raise MaterializationCapExceeded(
                f"R*L = {self.dim} exceeds the materialization cap {self.cap}."
            )

    def _setup_eig(self, scale):
        etas, v_arr = self.stats.array_eigen
        deltas, q_tap = self.stats.tap_eigen
        lam = np.clip(np.outer(etas, deltas), 0.0, None)
        denom = scale * lam * (1 + self.sigma_i2) + self.noise_var
        if np.any(denom <= 0):
            raise SingularCorrelation("O-LMMSE needs a positive noise variance.")
        self.scale = scale
        self.v_arr, self.q_tap = v_arr, q_tap
        self.mode_gain = np.sqrt(scale) * lam / denom
        self.mode_error = lam * (scale * lam * self.sigma_i2 + self.noise_var) / denom

    def _setup_dense(self):
        self._check_cap()
        r_dim = self.stats.n_antennas
        r_h = self.stats.composite()
        a_big = np.kron(np.eye(r_dim), self.a_mat)
        a_rh = a_big @ r_h
        outer = (1 + self.sigma_i2) * a_rh @ a_big.conj().T + self.noise_var * np.eye(
            a_big.shape[0]
        )
        self.gain = hermitian_solve(outer, a_rh).conj().T
        self._err_cov = hermitize(r_h - self.gain @ a_rh)

    def apply(self, y_all):
        """Estimate from observations ``(..., R, K)``; returns ``(..., R, L)``."""
        y_all = np.asarray(y_all)
        r_dim, l_taps = self.stats.n_antennas, self.stats.l_taps
        if self.method == "eig":
            proj = y_all @ self.a_mat.conj() / np.sqrt(self.scale)
            modes = self.v_arr.conj().T @ proj @ self.q_tap.conj()
            return self.v_arr @ (modes * self.mode_gain) @ self.q_tap.T
        flat = y_all.reshape(y_all.shape[:-2] + (-1,))
        return (flat @ self.gain.T).reshape(y_all.shape[:-2] + (r_dim, l_taps))

    def error_trace(self):
        if self.method == "eig":
            return float(self.mode_error.sum())
        return float(np.real(np.trace(self._err_cov)))

    def error_covariance(self):
        if self.method == "dense":
            return self._err_cov
        self._check_cap()
        basis = np.kron(self.v_arr, self.q_tap)
        return hermitize((basis * self.mode_error.reshape(-1)) @ basis.conj().T)


def olmmse_estimate(
    y_all, a_p, stats, noise_var, sigma_i2=0.0, method="auto", cap=MATERIALIZATION_CAP
):
    """
    Optimal LMMSE estimate of the composite channel.

    Parameters
    ----------
    y_all : np.ndarray
        Observations shaped ``(R, K)`` or the stacked ``R*K`` vector.
    a_p : ObservationMatrix or np.ndarray
    stats : ChannelStats
    noise_var : float
    sigma_i2 : float, optional
    method : {"auto", "eig", "dense"}
    cap : int
        Largest ``R*L`` for which a composite matrix is materialized.

    Returns
    -------
    EstimateWithCovariance
        ``h_hat`` shaped ``(R, L)`` and the ``RL x RL`` error covariance.

    """
    estimator = OlmmseEstimator(a_p, stats, noise_var, sigma_i2, method, cap)
    y_all = np.asarray(y_all)
    if y_all.ndim == 1:
        y_all = y_all.reshape(stats.n_antennas, -1)
    return EstimateWithCovariance(estimator.apply(y_all), estimator.error_covariance())


def mse_ls_awgn(r, l, rho, k):
    """Total LS error ``R L / (rho K)``."""
    return r * l / (rho * k)


def mse_llmmse_awgn(r, deltas, rho, k):
    """Total localized LMMSE error ``R sum_i d_i / (1 + rho K d_i)``."""
    deltas = np.asarray(deltas, dtype=float)
    return float(r * np.sum(deltas / (1 + rho * k * deltas)))


def mse_olmmse_awgn(etas, deltas, rho, k):
    """Total centralized LMMSE error over the products of array and tap eigenvalues."""
    lam = np.outer(np.asarray(etas, dtype=float), np.asarray(deltas, dtype=float))
    return float(np.sum(lam / (1 + rho * k * lam)))


def operation_counts(r, l, k, d):
    """
    Complex multiplications and additions per estimate of the whole array.

    Returns
    -------
    dict
        ``{name: (multiplications, additions)}`` for ``ls``, ``llmmse``,
        ``olmmse`` and ``dlmmse``; the distributed count assumes a five-element
        neighborhood for every antenna.

    """
    nb = 5
    return {
        "ls": (r * k * (l + 1), r * (k * l - 1)),
        "llmmse": (r * (2 * l**3 + l**2 + k * (l + 1)), r * l * (l + k - 1)),
        "olmmse": (
            r * ((l**3 + 1) * r**2 + r * l * (l + k) + k) + l**3,
            r**2 * l * k,
        ),
        "dlmmse": (
            r * ((nb**3 + 1) * l**3 + 2 * (nb * l) ** 2 + l * (k + 1) + nb**3),
            r * (d * (nb * l) ** 3 + (nb * l) ** 2 + l * (k - 1) - d),
        ),
    }
