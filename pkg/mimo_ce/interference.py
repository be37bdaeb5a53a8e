"""
Pilot contamination from a Poisson field of co-channel users.

Interferers are scattered by a homogeneous PPP over the annulus
``gamma_o < gamma < gamma_m`` around the receiver, each transmitting a unit
energy symbol through Rayleigh fading and pathloss ``gamma^-beta``. The
module samples such fields, aggregates their contribution per tone, gives
the first two moments in closed form and evaluates the MSE of the batch
estimators under the resulting contamination.

"""

import logging
from dataclasses import dataclass

import numpy as np

from mimo_ce import MimoCeError
from mimo_ce.correlation import sample_channel
from mimo_ce.linalg import complex_normal, hermitize
from mimo_ce.ofdm import ObservationMatrix, qam_constellation

logger = logging.getLogger(__name__)

SYNTHESIS_MODES = ("sum", "gaussian")


class InvalidScenario(MimoCeError, ValueError):
    """Exception is raised when PPP radii, density or pathloss are inconsistent."""


class DivergentInterference(MimoCeError, ValueError):
    """Exception is raised when the pathloss exponent gives infinite power."""


@dataclass(frozen=True)
class PppScenario:
    """
    Interferer field around the receiver.

    Attributes
    ----------
    lam : float
        Density of interferers per square meter.
    gamma_o, gamma_m : float
        Inner (protection) and outer radius in meters; ``gamma_m`` may be
        ``inf`` for analytic use.
    beta : float
        Pathloss exponent.
    e_x : float
        Interferer symbol energy.
    omega : float
        Mean power of the Rayleigh fading.

    """

    lam: float
    gamma_o: float = 2.0
    gamma_m: float = 5.0
    beta: float = 2.0
    e_x: float = 1.0
    omega: float = 1.0

    def __post_init__(self):
        if self.lam < 0:
            raise InvalidScenario("Interferer density must be non-negative.")
        if not 0 < self.gamma_o < self.gamma_m:
            raise InvalidScenario(
                f"Need 0 < gamma_o < gamma_m, got {self.gamma_o} and {self.gamma_m}."
            )
        if not self.beta > 1:
            raise DivergentInterference(
                f"Pathloss exponent {self.beta} <= 1 gives unbounded interference."
            )
        if self.e_x <= 0 or self.omega <= 0:
            raise InvalidScenario("Symbol energy and fading power must be positive.")

    @property
    def mean_count(self):
        return self.lam * np.pi * (self.gamma_m**2 - self.gamma_o**2)


@dataclass(frozen=True, eq=False)
class InterfererRealization:
    """Positions, fading and symbols of one PPP draw (one entry per interferer)."""

    radii: np.ndarray
    angles: np.ndarray
    alphas: np.ndarray
    phases: np.ndarray
    symbols: np.ndarray

    @property
    def count(self):
        return len(self.radii)

    @property
    def positions(self):
        return np.column_stack(
            (self.radii * np.cos(self.angles), self.radii * np.sin(self.angles))
        )

    @property
    def fading(self):
        return self.alphas * np.exp(1j * self.phases)


def _check_finite(scenario):
    if not np.isfinite(scenario.gamma_m):
        raise InvalidScenario("Sampling needs a finite outer radius.")


def _annulus_radii(scenario, rng, size):
    u = rng.uniform(size=size)
    inner, outer = scenario.gamma_o**2, scenario.gamma_m**2
    return np.sqrt(inner + u * (outer - inner))


def _rayleigh(scenario, rng, size):
    """Amplitudes ``|CN(0, omega)|``."""
    return np.abs(complex_normal(rng, size, scenario.omega))


def sample_ppp(scenario, rng, constellation=None):
    """
    Draw interferer positions, fading and symbols.

    The count is Poisson with mean ``lam * pi * (gamma_m^2 - gamma_o^2)`` and
    positions are uniform on the annulus.
    """
    _check_finite(scenario)
    if constellation is None:
        constellation = qam_constellation(4)
    count = rng.poisson(scenario.mean_count)
    return InterfererRealization(
        radii=_annulus_radii(scenario, rng, count),
        angles=rng.uniform(0, 2 * np.pi, size=count),
        alphas=_rayleigh(scenario, rng, count),
        phases=rng.uniform(0, 2 * np.pi, size=count),
        symbols=rng.choice(constellation, size=count),
    )


def aggregate_interference(realization, scenario):
    """Per-tone aggregate ``sum_i sqrt(E_x) x_i alpha_i e^{j phi_i} / gamma_i^beta``."""
    terms = (
        np.sqrt(scenario.e_x)
        * realization.symbols
        * realization.fading
        / realization.radii**scenario.beta
    )
    return complex(np.sum(terms))


def sample_interference(scenario, n_samples, rng, n_tones=1, constellation=None):
    """
    Aggregate interference for many independent PPP draws.

    Every sample has its own interferer field; within a sample each of the
    ``n_tones`` tones sees fresh fading and symbols.

    Returns
    -------
    np.ndarray
        Complex array shaped ``(n_samples, n_tones)``.

    """
    _check_finite(scenario)
    if constellation is None:
        constellation = qam_constellation(4)
    counts = rng.poisson(scenario.mean_count, size=n_samples)
    owner = np.repeat(np.arange(n_samples), counts)
    total = owner.size
    radii = _annulus_radii(scenario, rng, total)
    out = np.empty((n_samples, n_tones), dtype=complex)
    for tone in range(n_tones):
        fading = complex_normal(rng, total, scenario.omega)
        symbols = rng.choice(constellation, size=total)
        terms = np.sqrt(scenario.e_x) * symbols * fading / radii**scenario.beta
        out[:, tone] = np.bincount(
            owner, weights=terms.real, minlength=n_samples
        ) + 1j * np.bincount(owner, weights=terms.imag, minlength=n_samples)
    return out


def interference_moments(scenario, symbol_power=1.0):
    """
    Mean and variance of the per-tone aggregate interference.

    The variance is ``pi lam / (beta - 1) E|x|^2 E_x omega (t(gamma_o) - t(gamma_m))``
    with ``t(g) = g^{-(2 beta - 2)}``;
    the ``gamma_m`` term vanishes for an unbounded field.
    """
    power = 2 * scenario.beta - 2
    outer = 0.0 if np.isinf(scenario.gamma_m) else scenario.gamma_m ** (-power)
    variance = (
        np.pi
        * scenario.lam
        / (scenario.beta - 1)
        * symbol_power
        * scenario.e_x
        * scenario.omega
        * (scenario.gamma_o ** (-power) - outer)
    )
    return 0.0, float(variance)


def interference_covariance_single(a_p, r_tap, sigma_i2):
    """Pilot-domain contamination covariance ``sigma_i2 A R_tap A^H`` of one antenna."""
    a_mat = a_p.a_p if isinstance(a_p, ObservationMatrix) else np.asarray(a_p)
    return hermitize(sigma_i2 * a_mat @ r_tap @ a_mat.conj().T)


def interference_covariance_array(a_p, stats, sigma_i2):
    """Contamination covariance ``sigma_i2 A' R_h A'^H`` of the stacked observations."""
    a_mat = a_p.a_p if isinstance(a_p, ObservationMatrix) else np.asarray(a_p)
    single = interference_covariance_single(a_mat, stats.r_tap, sigma_i2)
    return np.kron(stats.r_array, single)


def synthesize_pilot_contamination(scenario, stats, a_p, rng, mode="sum"):
    """
    Contamination on the pilot tones of every antenna, shaped ``(R, K)``.

    In ``"sum"`` mode each interferer of a fresh PPP draw reuses the same
    pilots through its own channel ``h_i ~ CN(0, omega R_h)`` scaled by
    ``sqrt(E_x) x_i gamma_i^-beta``. In ``"gaussian"`` mode a single channel
    with covariance ``sigma_i^2 R_h`` stands in for the whole field.
    """
    a_mat = a_p.a_p if isinstance(a_p, ObservationMatrix) else np.asarray(a_p)
    if mode == "gaussian":
        _, sigma_i2 = interference_moments(scenario)
        taps = sample_channel(stats, rng).taps
        return np.sqrt(sigma_i2) * taps @ a_mat.T
    if mode != "sum":
        raise ValueError(
            f"Unknown synthesis mode {mode!r}, expected {SYNTHESIS_MODES}."
        )
    field = sample_ppp(scenario, rng)
    total = np.zeros((stats.n_antennas, a_mat.shape[1]), dtype=complex)
    amplitudes = np.sqrt(scenario.e_x) * field.symbols / field.radii**scenario.beta
    for amplitude in amplitudes:
        total += amplitude * np.sqrt(scenario.omega) * sample_channel(stats, rng).taps
    return total @ a_mat.T


def mse_ls_pc(r, l, rho, k, sigma_i2, deltas):
    """Total LS error under contamination: ``R L / (rho K) + R sigma_i2 tr(Lambda)``."""
    return r * l / (rho * k) + r * sigma_i2 * float(np.sum(deltas))


def _contaminated_terms(lam, rho, k, sigma_i2):
    snr = rho * k * lam
    return lam * (1 + snr * sigma_i2) / (1 + snr + snr * sigma_i2)


def mse_llmmse_pc(r, deltas, rho, k, sigma_i2):
    """Total localized LMMSE error under contamination."""
    terms = _contaminated_terms(np.asarray(deltas, float), rho, k, sigma_i2)
    return float(r * np.sum(terms))


def mse_llmmse_pc_limit(r, deltas, sigma_i2):
    """High-SNR floor ``R sigma_i2 / (1 + sigma_i2) tr(Lambda)``."""
    return r * sigma_i2 / (1 + sigma_i2) * float(np.sum(deltas))


def mse_olmmse_pc(etas, deltas, rho, k, sigma_i2):
    """Total centralized LMMSE error under contamination."""
    lam = np.outer(np.asarray(etas, float), np.asarray(deltas, float))
    return float(np.sum(_contaminated_terms(lam, rho, k, sigma_i2)))


def mse_olmmse_pc_limit(etas, deltas, sigma_i2):
    """High-SNR floor ``sigma_i2 / (1 + sigma_i2) tr(R_array) tr(Lambda)``."""
    return sigma_i2 / (1 + sigma_i2) * float(np.sum(etas)) * float(np.sum(deltas))
