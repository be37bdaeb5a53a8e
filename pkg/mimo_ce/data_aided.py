"""
Data-aided refinement of the distributed estimate.

After the pilot-based local step each antenna equalizes its data carriers,
keeps the carriers whose hard decision is more likely than all alternatives
together, treats those decisions as extra pilots in a block RLS update and
then resumes the neighbor sharing rounds.

"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from mimo_ce.dlmmse import DEFAULT_A_WEIGHT, DEFAULT_ITERATIONS, DlmmseNetwork
from mimo_ce.linalg import hermitian_inverse, hermitian_solve, hermitize
from mimo_ce.ofdm import (
    UnsupportedConstellation,
    frequency_response,
    hard_decision,
    truncated_dft,
)

logger = logging.getLogger(__name__)

MIN_CFR_POWER = 1e-12


@dataclass(frozen=True, eq=False)
class ReliabilitySet:
    """
    Data carriers accepted as virtual pilots.

    Attributes
    ----------
    indices : np.ndarray
        Selected subcarriers.
    decisions : np.ndarray
        Hard decisions on the selected subcarriers.
    metric : np.ndarray
        Reliability ratio of every candidate carrier (NaN when excluded).

    """

    indices: np.ndarray
    decisions: np.ndarray
    metric: np.ndarray

    @property
    def size(self):
        return len(self.indices)


def zf_equalize(y_k, h_hat_k):
    """Zero-forcing ``Y / H``; carriers with a vanishing CFR estimate give NaN."""
    y_k = np.asarray(y_k, dtype=complex)
    h_hat_k = np.asarray(h_hat_k, dtype=complex)
    usable = np.abs(h_hat_k) ** 2 >= MIN_CFR_POWER
    safe = np.where(usable, h_hat_k, 1.0)
    return np.where(usable, y_k / safe, np.nan + 0j)


def reliability_metric(x_hat_k, noise_var_k, constellation):
    """
    Ratio of the decided symbol's likelihood to the sum over all other symbols.

    Under circular Gaussian distortion of variance ``noise_var_k`` the ratio
    is ``exp(-|x - <x>|^2 / s) / sum_{a != <x>} exp(-|x - a|^2 / s)``; it is
    evaluated in the log domain.
    """
    constellation = np.asarray(constellation)
    if constellation.size == 0:
        raise UnsupportedConstellation("Reliability needs a non-empty constellation.")
    noise_var_k = np.asarray(noise_var_k, dtype=float)
    if np.any(noise_var_k <= 0):
        raise ValueError("Distortion variance must be positive.")
    x_hat_k = np.asarray(x_hat_k)
    log_f = -np.abs(x_hat_k[..., None] - constellation) ** 2 / noise_var_k[..., None]
    decided, _ = hard_decision(x_hat_k, constellation)
    others = np.ones(log_f.shape, dtype=bool)
    np.put_along_axis(others, decided[..., None], False, axis=-1)
    numerator = np.take_along_axis(log_f, decided[..., None], axis=-1)[..., 0]
    denominator = logsumexp(log_f, axis=-1, b=others.astype(float))
    return np.exp(numerator - denominator)


def select_reliable(x_hat, h_hat_freq, noise_var, constellation, indices=None):
    """
    Keep data carriers whose reliability ratio exceeds one.

    Parameters
    ----------
    x_hat : np.ndarray
        Equalized data carriers.
    h_hat_freq : np.ndarray
        CFR estimate on the same carriers; sets ``noise_var / |H|^2``.
    noise_var : float
    constellation : np.ndarray
    indices : np.ndarray, optional
        Subcarrier index of every entry; positions are used by default.

    Returns
    -------
    ReliabilitySet

    """
    x_hat = np.asarray(x_hat, dtype=complex)
    power = np.abs(np.asarray(h_hat_freq)) ** 2
    if indices is None:
        indices = np.arange(len(x_hat))
    indices = np.asarray(indices)
    usable = (power >= MIN_CFR_POWER) & np.isfinite(x_hat)
    metric = np.full(len(x_hat), np.nan)
    if np.any(usable):
        metric[usable] = reliability_metric(
            x_hat[usable], noise_var / power[usable], constellation
        )
    keep = usable & (np.nan_to_num(metric, nan=0.0) > 1)
    _, decisions = hard_decision(x_hat[keep], np.asarray(constellation))
    return ReliabilitySet(indices[keep], decisions, metric)


def build_data_matrix(decisions, indices, n, l, width=None):
    """
    Observation rows ``sqrt(N) <X(k)> F(k, :)`` of the selected carriers,
    zero-padded on the right to ``width`` columns.
    """
    rows = np.sqrt(n) * np.asarray(decisions)[:, None] * truncated_dft(n, l)[indices]
    width = l if width is None else width
    padded = np.zeros((len(indices), width), dtype=complex)
    padded[:, :l] = rows
    return padded


def rls_refine(h_hat, c_e, a_d, y_d, noise_var):
    """
    Block RLS update of an estimate with extra observations ``y_d = A_d h + w``.

    Returns
    -------
    tuple
        ``(h_d, C_ed)`` with ``h_d = h + C A^H G (y_d - A h)``,
        ``C_ed = C - C A^H G A C`` and ``G = (sigma_w^2 I + A C A^H)^{-1}``.

    """
    a_d = np.asarray(a_d)
    if a_d.shape[0] == 0:
        return h_hat, c_e
    a_c = a_d @ c_e
    innovation = hermitize(noise_var * np.eye(a_d.shape[0]) + a_c @ a_d.conj().T)
    gain = hermitian_solve(innovation, a_c).conj().T
    h_d = h_hat + gain @ (np.asarray(y_d) - a_d @ h_hat)
    return h_d, hermitize(c_e - gain @ a_c)


@dataclass(eq=False)
class DadResult:
    """Per-antenna estimates, center covariances and reliable-set sizes."""

    h_hat: np.ndarray
    err_covs: np.ndarray
    reliable_counts: np.ndarray


def run_dad_lmmse(
    y_full,
    pattern,
    a_p,
    stats,
    noise_var,
    constellation,
    d_iters=DEFAULT_ITERATIONS,
    a_weight=DEFAULT_A_WEIGHT,
    *,
    neighborhoods,
):
    """
    Data-aided distributed LMMSE estimate from one received OFDM symbol.

    Parameters
    ----------
    y_full : np.ndarray
        All ``N`` received tones of every antenna, shaped ``(R, N)``.
    pattern : PilotPattern
    a_p : ObservationMatrix or np.ndarray
        Pilot observation matrix matching ``pattern``.
    stats : ChannelStats
    noise_var : float
    constellation : np.ndarray
        Data alphabet.
    d_iters, a_weight :
        Sharing rounds and null-block weight of the distributed phase.
    neighborhoods : NeighborhoodMap

    Returns
    -------
    DadResult

    """
    y_full = np.asarray(y_full)
    n = y_full.shape[1]
    l_taps = stats.l_taps
    data_idx = pattern.data_indices(n)
    network = DlmmseNetwork(
        neighborhoods, stats, a_p, noise_var, a_weight, share="explicit", cache=False
    )
    states = network.start(y_full[:, pattern.indices])
    counts = np.zeros(len(states), dtype=int)
    for state in states:
        c_e = hermitian_inverse(state.p_mat)
        h_hat = c_e @ state.h_w
        h_freq = frequency_response(h_hat[:l_taps], n)[data_idx]
        y_d = y_full[state.antenna, data_idx]
        selected = select_reliable(
            zf_equalize(y_d, h_freq), h_freq, noise_var, constellation, data_idx
        )
        counts[state.antenna] = selected.size
        if selected.size == 0:
            continue
        a_d = build_data_matrix(
            selected.decisions, selected.indices, n, l_taps, width=len(h_hat)
        )
        h_d, c_ed = rls_refine(
            h_hat, c_e, a_d, y_full[state.antenna, selected.indices], noise_var
        )
        precision = hermitian_inverse(c_ed)
        state.reset_local(precision, precision @ h_d)
    logger.debug("Reliable carriers per antenna: %s", counts.tolist())
    states = network.run(states, d_iters)
    result = network.collect(states, d_iters)
    return DadResult(result.h_hat, result.err_covs, counts)
