"""
OFDM pilot observation model.

Builds Gray-labeled square QAM alphabets, pilot placements, the truncated DFT
and the pilot observation matrix ``A = sqrt(N) diag(X_P) F_P``, and
synthesizes received pilot tones.

"""

import logging
from dataclasses import dataclass

import numpy as np

from mimo_ce import MimoCeError
from mimo_ce.linalg import complex_normal

logger = logging.getLogger(__name__)

SUPPORTED_QAM = (4, 16, 64)
ORTHOGONALITY_TOL = 1e-10


class UnsupportedConstellation(MimoCeError, ValueError):
    """Exception is raised when a QAM order other than 4, 16 or 64 is requested."""


class InvalidPilotPattern(MimoCeError, ValueError):
    """Exception is raised when pilot indices or symbols are inconsistent."""


class InvalidNoiseVariance(MimoCeError, ValueError):
    """Exception is raised when a negative noise variance is supplied."""


def _gray_pam(levels):
    """Amplitudes ordered by Gray label for a ``levels``-ary PAM axis."""
    amplitudes = 2 * np.arange(levels) - levels + 1
    labels = np.arange(levels) ^ (np.arange(levels) >> 1)
    out = np.empty(levels)
    out[labels] = amplitudes
    return out


def qam_constellation(order):
    """
    Gray-labeled square QAM alphabet with unit mean energy.

    Point ``i`` carries label ``i``: the high half of the bits selects the
    in-phase level and the low half the quadrature level.

    Parameters
    ----------
    order : int
        Alphabet size, one of 4, 16 or 64.

    Returns
    -------
    np.ndarray
        Complex constellation points indexed by label.

    """
    if order not in SUPPORTED_QAM:
        raise UnsupportedConstellation(
            f"QAM order {order} not supported, use one of {SUPPORTED_QAM}."
        )
    side = int(round(np.sqrt(order)))
    axis = _gray_pam(side)
    labels = np.arange(order)
    points = axis[labels // side] + 1j * axis[labels % side]
    return points / np.sqrt(2 * (order - 1) / 3)


def hard_decision(x_hat, constellation):
    """Nearest-point decisions; returns ``(indices, symbols)``."""
    x_hat = np.asarray(x_hat)
    dist = np.abs(x_hat[..., None] - constellation) ** 2
    idx = np.argmin(dist, axis=-1)
    return idx, constellation[idx]


def truncated_dft(n, l):
    """First ``l`` columns of the unitary ``n``-point DFT matrix."""
    if l > n:
        raise ValueError(f"Cannot keep {l} columns of a {n}-point DFT.")
    k = np.arange(n)[:, None]
    tap = np.arange(l)[None, :]
    return np.exp(-2j * np.pi * k * tap / n) / np.sqrt(n)


def uniform_pilot_indices(n, k):
    """Evenly spaced pilot tones ``floor(i * n / k + 1/2)``, ``i = 0..k-1``."""
    if k < 1:
        raise InvalidPilotPattern("At least one pilot is required.")
    if k > n:
        raise InvalidPilotPattern(f"Cannot place {k} pilots on {n} subcarriers.")
    return np.floor(np.arange(k) * n / k + 0.5).astype(int)


def random_pilot_indices(n, k, rng):
    """Sorted pilot tones drawn without replacement."""
    if k < 1 or k > n:
        raise InvalidPilotPattern(f"Cannot place {k} pilots on {n} subcarriers.")
    return np.sort(rng.choice(n, size=k, replace=False))


def default_pilot_symbols(k, symbol_energy=1.0):
    """Fixed constant-modulus 4-QAM pilot sequence shared by every user."""
    qpsk = qam_constellation(4)
    return np.sqrt(symbol_energy) * qpsk[(np.arange(k) * (np.arange(k) + 1) // 2) % 4]


@dataclass(frozen=True)
class OfdmConfig:
    """Numerology and power settings of one OFDM symbol."""

    n_subcarriers: int
    n_pilots: int
    qam_order: int = 4
    noise_variance: float = 1.0
    symbol_energy: float = 1.0

    def __post_init__(self):
        if self.n_subcarriers < 1 or self.n_pilots < 1:
            raise InvalidPilotPattern("Subcarrier and pilot counts must be positive.")
        if self.n_pilots > self.n_subcarriers:
            raise InvalidPilotPattern(
                f"{self.n_pilots} pilots exceed {self.n_subcarriers} subcarriers."
            )
        if self.qam_order not in SUPPORTED_QAM:
            raise UnsupportedConstellation(f"QAM order {self.qam_order} not supported.")
        if self.noise_variance < 0:
            raise InvalidNoiseVariance("Noise variance must be non-negative.")
        if self.symbol_energy <= 0:
            raise ValueError("Symbol energy must be positive.")

    @classmethod
    def from_snr_db(
        cls, n_subcarriers, n_pilots, snr_db, qam_order=4, symbol_energy=1.0
    ):
        noise = symbol_energy / 10 ** (snr_db / 10)
        return cls(n_subcarriers, n_pilots, qam_order, noise, symbol_energy)

    @property
    def snr(self):
        return self.symbol_energy / self.noise_variance

    @property
    def constellation(self):
        return qam_constellation(self.qam_order)


@dataclass(frozen=True, eq=False)
class PilotPattern:
    """Pilot subcarrier indices and the symbols transmitted on them."""

    indices: np.ndarray
    pilot_symbols: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices)
        if idx.ndim != 1 or idx.size == 0:
            raise InvalidPilotPattern("Pilot indices must be a non-empty vector.")
        if np.any(np.diff(idx) <= 0):
            raise InvalidPilotPattern("Pilot indices must be strictly increasing.")
        if len(self.pilot_symbols) != idx.size:
            raise InvalidPilotPattern(
                f"{idx.size} pilot indices but {len(self.pilot_symbols)} symbols."
            )

    @classmethod
    def uniform(cls, n, k, symbol_energy=1.0):
        return cls(uniform_pilot_indices(n, k), default_pilot_symbols(k, symbol_energy))

    @classmethod
    def random(cls, n, k, rng, symbol_energy=1.0):
        return cls(
            random_pilot_indices(n, k, rng), default_pilot_symbols(k, symbol_energy)
        )

    @property
    def n_pilots(self):
        return len(self.indices)

    def data_indices(self, n):
        """Subcarriers not used by pilots."""
        return np.setdiff1d(np.arange(n), self.indices)


@dataclass(frozen=True, eq=False)
class ObservationMatrix:
    """The ``K x L`` pilot observation matrix ``A(P)``."""

    a_p: np.ndarray

    @property
    def n_pilots(self):
        return self.a_p.shape[0]

    @property
    def l_taps(self):
        return self.a_p.shape[1]

    @property
    def gram(self):
        return self.a_p.conj().T @ self.a_p

    def orthogonal_scale(self):
        """
        Return ``c`` when ``A^H A = c I``, else ``None``.

        Uniform pilots with constant-modulus symbols give ``c = K * E_x``.
        """
        gram = self.gram
        scale = np.real(np.trace(gram)) / self.l_taps
        off = gram - scale * np.eye(self.l_taps)
        if np.abs(off).max(initial=0.0) <= ORTHOGONALITY_TOL * max(scale, 1.0):
            return scale
        return None


def full_observation_matrix(symbols, l):
    """``sqrt(N) diag(X) F`` over all ``N`` tones of a frequency-domain symbol."""
    n = len(symbols)
    return np.sqrt(n) * np.asarray(symbols)[:, None] * truncated_dft(n, l)


def build_observation_matrix(cfg, pattern, l):
    """Pilot rows of :func:`full_observation_matrix`."""
    if pattern.n_pilots < 1:
        raise InvalidPilotPattern("At least one pilot is required.")
    if np.any(pattern.indices >= cfg.n_subcarriers) or np.any(pattern.indices < 0):
        raise InvalidPilotPattern("Pilot index outside the symbol.")
    f_p = truncated_dft(cfg.n_subcarriers, l)[pattern.indices]
    return ObservationMatrix(
        np.sqrt(cfg.n_subcarriers) * np.asarray(pattern.pilot_symbols)[:, None] * f_p
    )


def frequency_response(taps, n):
    """Channel frequency response ``sqrt(N) F h`` for each trailing-axis CIR."""
    taps = np.asarray(taps)
    return np.sqrt(n) * taps @ truncated_dft(n, taps.shape[-1]).T


def synthesize_rx(h_r, a_p, noise_var, interference=None, rng=None):
    """
    Received pilot tones ``y = A h + i + w``.

    ``h_r`` may be a single CIR of length ``L`` or a stack with the CIRs on
    the last axis; the result has the pilot tones on the last axis.
    """
    if noise_var < 0:
        raise InvalidNoiseVariance("Noise variance must be non-negative.")
    a_mat = a_p.a_p if isinstance(a_p, ObservationMatrix) else np.asarray(a_p)
    h_r = np.asarray(h_r)
    if h_r.shape[-1] != a_mat.shape[1]:
        raise ValueError(
            f"Channel has {h_r.shape[-1]} taps, observation matrix expects "
            f"{a_mat.shape[1]}."
        )
    y = h_r @ a_mat.T
    if interference is not None:
        y = y + interference
    if noise_var > 0:
        if rng is None:
            raise ValueError("A random generator is required for noisy observations.")
        y = y + complex_normal(rng, y.shape, noise_var)
    return y
