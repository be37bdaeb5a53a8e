"""
Distributed LMMSE estimation over the antenna grid.

Every antenna ``c`` keeps an information-form estimate ``(h_w, P)`` of the
composite channel of its neighborhood ``[c, left, right, up, down]``. After a
local estimation step on its own pilots, antennas exchange partial weighted
estimates with their direct neighbors for ``D`` synchronous rounds.

A message from ``j`` to ``c`` is the marginal weighted estimate ``j`` holds
about the two blocks ``j`` and ``c``. In the first round it carries nothing
but ``j``'s own pilots, which are independent of what ``c`` holds, and ``c``
adds it the way independent LMMSE estimates combine: ``h_w`` gains the
message and ``P`` gains ``partial P - partial R^{-1}``, both masked to the
shared blocks with ``a I`` and ``I`` on the rest. From the second round on a
message also repeats what ``c`` and its other neighbors sent earlier, so each
antenna fuses its previous estimate with the messages using their exact
cross-covariances. Those depend on the pilots and the channel statistics
only; the network computes them once by running the schedule on a basis of
the matched-filter outputs.

Antenna indices are 0-based, ``r = m + M * g``.

"""

import logging
from dataclasses import dataclass

import numpy as np

from mimo_ce import MimoCeError
from mimo_ce.estimators import (
    MATERIALIZATION_CAP,
    MaterializationCapExceeded,
    data_precision,
)
from mimo_ce.linalg import (
    hermitian_inverse,
    hermitian_pinv,
    hermitian_solve,
    hermitize,
)
from mimo_ce.ofdm import ObservationMatrix

logger = logging.getLogger(__name__)

DIRECTIONS = ("left", "right", "up", "down")
DEFAULT_A_WEIGHT = 1e-6
DEFAULT_ITERATIONS = 3
SHARE_MODES = ("derived", "explicit")


class InvalidWeight(MimoCeError, ValueError):
    """Exception is raised when the null-block weight is outside (0, 1)."""


class MisalignedBlocks(MimoCeError, KeyError):
    """Exception is raised when a block lies outside the receiver's neighborhood."""


class AsymmetricNeighborhoods(MimoCeError, ValueError):
    """Exception is raised when receivers cannot derive their neighbors' matrices."""


@dataclass(frozen=True)
class NeighborhoodMap:
    """
    Direct neighbors of every antenna in canonical left, right, up, down order.

    ``neighbors[r]`` lists global antenna indices and ``directions[r]`` the
    matching direction names, seen from ``r``.
    """

    geometry: object
    neighbors: tuple
    directions: tuple

    @property
    def n_antennas(self):
        return len(self.neighbors)

    def composite(self, r):
        """Global indices of the composite blocks of antenna ``r``, own block first."""
        return (r,) + self.neighbors[r]

    def direction(self, r, j):
        """Direction of neighbor ``j`` as seen from ``r``."""
        return self.directions[r][self.neighbors[r].index(j)]

    def is_interior(self, r):
        return len(self.neighbors[r]) == 4


def build_neighborhoods(geom):
    """Four-neighbor adjacency of a planar array."""
    neighbors, directions = [], []
    for r in range(geom.n_antennas):
        m, g = geom.position(r)
        steps = {
            "left": (m, g - 1),
            "right": (m, g + 1),
            "up": (m - 1, g),
            "down": (m + 1, g),
        }
        found, ways = [], []
        for way in DIRECTIONS:
            p, q = steps[way]
            if 0 <= p < geom.m_rows and 0 <= q < geom.g_cols:
                found.append(geom.antenna_index(p, q))
                ways.append(way)
        neighbors.append(tuple(found))
        directions.append(tuple(ways))
    return NeighborhoodMap(geom, tuple(neighbors), tuple(directions))


def max_iterations_bound(r):
    """Largest ``D`` whose coverage ``2 D (D + 1) + 1`` does not exceed ``R``."""
    return max(int(np.floor(np.sqrt(r / 2 - 0.25) - 0.5 + 1e-12)), 0)


def tier_size(d):
    """Number of antennas whose pilots reach a given antenna in ``d`` rounds."""
    return 2 * d * (d + 1) + 1


def trivial_iterations(geom):
    return max(geom.m_rows, geom.g_cols)


def _block_slice(pos, l_taps):
    return np.arange(pos * l_taps, (pos + 1) * l_taps)


@dataclass(eq=False)
class NodeState:
    """
    Information-form state of one antenna.

    ``local_p``/``local_h`` hold what the antenna learned from its own
    observations and ``own_info`` the information these add to its own
    block. ``h_w`` may carry trailing batch axes.
    """

    antenna: int
    block_index: tuple
    r_hc: np.ndarray
    local_p: np.ndarray
    local_h: np.ndarray
    p_mat: np.ndarray = None
    h_w: np.ndarray = None
    iteration: int = 0
    own_info: np.ndarray = None

    def __post_init__(self):
        if self.p_mat is None:
            self.p_mat = self.local_p.copy()
        if self.h_w is None:
            self.h_w = self.local_h.copy()

    @property
    def l_taps(self):
        return self.r_hc.shape[0] // len(self.block_index)

    def position(self, antenna):
        try:
            return self.block_index.index(antenna)
        except ValueError:
            raise MisalignedBlocks(
                f"Antenna {antenna} is not in the neighborhood of {self.antenna}."
            ) from None

    def reset_local(self, local_p, local_h):
        """Replace the own information and drop everything received."""
        local_p = hermitize(local_p)
        l_taps = self.l_taps
        if self.own_info is not None:
            self.own_info = hermitize(
                self.own_info + (local_p - self.local_p)[:l_taps, :l_taps]
            )
        self.local_p = local_p
        self.local_h = local_h
        self.p_mat = self.local_p.copy()
        self.h_w = np.array(local_h, copy=True)
        self.iteration = 0

    def estimate(self):
        """Composite estimate ``P^{-1} h_w``."""
        return hermitian_solve(self.p_mat, self.h_w)

    def center_estimate(self):
        return self.estimate()[: self.l_taps]

    def center_covariance(self):
        return hermitian_inverse(self.p_mat)[: self.l_taps, : self.l_taps]


@dataclass(frozen=True, eq=False)
class PartialMessage:
    """Weighted-estimate blocks from ``sender`` to ``receiver``, sender block first."""

    sender: int
    receiver: int
    blocks: tuple

    def size(self):
        """Complex values carried per observation."""
        return sum(len(block) for _, block in self.blocks)


@dataclass(frozen=True, eq=False)
class PartialMatrices:
    """Masked precision and inverse correlation a node builds for one neighbor."""

    neighbor: int
    p_mat: np.ndarray
    r_inv: np.ndarray
    shared: tuple


@dataclass(frozen=True, eq=False)
class FusionGain:
    """
    Gain of one antenna for one round after the first.

    ``gain`` maps ``[previous estimate, messages in sender order]`` to the
    fused composite estimate and ``p_mat`` is the inverse of its error
    covariance.
    """

    senders: tuple
    gain: np.ndarray
    p_mat: np.ndarray


def local_estimation_step(
    y_c, a_p, r_hc, noise_var, antenna=0, block_index=None, r_tap=None, sigma_i2=0.0
):
    """
    Reduced-dimension WLS estimate of an antenna's neighborhood.

    Parameters
    ----------
    y_c : np.ndarray
        Own pilot observations, pilot axis first; further axes are batch axes.
    a_p : ObservationMatrix or np.ndarray
    r_hc : np.ndarray
        Correlation of the composite neighborhood channel.
    noise_var : float
    antenna : int, optional
    block_index : tuple, optional
        Global antenna of every composite block, own antenna first.
    r_tap, sigma_i2 : optional
        Tap correlation and interference variance for contaminated pilots.

    Returns
    -------
    NodeState
        ``P = R_hc^{-1} + A_bar^H R_E^{-1} A_bar`` and ``h_w = A_bar^H R_E^{-1} y``
        with ``A_bar = [A, 0, ..., 0]``.

    """
    a_mat = a_p.a_p if isinstance(a_p, ObservationMatrix) else np.asarray(a_p)
    l_taps = a_mat.shape[1]
    dim = r_hc.shape[0]
    if block_index is None:
        block_index = tuple(range(dim // l_taps))
    if dim != len(block_index) * l_taps:
        raise MisalignedBlocks(
            f"Composite correlation of size {dim} does not match "
            f"{len(block_index)} blocks."
        )
    info, matched = data_precision(a_mat, noise_var, r_tap, sigma_i2)
    precision = hermitian_inverse(r_hc)
    precision[:l_taps, :l_taps] += info
    y_c = np.asarray(y_c)
    h_w = np.zeros((dim,) + y_c.shape[1:], dtype=complex)
    h_w[:l_taps] = matched @ y_c
    return NodeState(
        antenna, tuple(block_index), r_hc, hermitize(precision), h_w, own_info=info
    )


def _shared_blocks(node, other):
    l_taps = node.l_taps
    return np.concatenate(
        [_block_slice(0, l_taps), _block_slice(node.position(other), l_taps)]
    )


def _marginalizer(node, other):
    """Shared indices, the rest, ``P_UU^{-1} P_US`` and the Schur complement ``P_S``."""
    keep = _shared_blocks(node, other)
    rest = np.setdiff1d(np.arange(node.p_mat.shape[0]), keep)
    p_keep = node.p_mat[np.ix_(keep, keep)]
    if rest.size == 0:
        return keep, rest, None, hermitize(p_keep)
    coupling = hermitian_solve(
        node.p_mat[np.ix_(rest, rest)], node.p_mat[np.ix_(rest, keep)]
    )
    p_shared = p_keep - node.p_mat[np.ix_(keep, rest)] @ coupling
    return keep, rest, coupling, hermitize(p_shared)


def _marginal_weighted(node, marginalizer):
    keep, rest, coupling, _ = marginalizer
    if coupling is None:
        return node.h_w[keep]
    return node.h_w[keep] - coupling.conj().T @ node.h_w[rest]


def shared_information(node, other):
    """
    Marginal information form of a node's state on its own and ``other``'s block.

    Returns
    -------
    tuple
        ``(P_S, h_S)`` ordered ``[own, other]``. ``P_S`` is the inverse of the
        error covariance of the two blocks and ``P_S^{-1} h_S`` their estimate.

    """
    marginalizer = _marginalizer(node, other)
    return marginalizer[3], _marginal_weighted(node, marginalizer)


def _message(node, receiver, h_shared):
    l_taps = node.l_taps
    return PartialMessage(
        node.antenna,
        receiver,
        ((node.antenna, h_shared[:l_taps]), (receiver, h_shared[l_taps:])),
    )


def make_partial_matrices(
    node, for_neighbor, a_weight=DEFAULT_A_WEIGHT, precision=None
):
    """
    Mask a node's matrices down to the blocks it shares with ``for_neighbor``.

    Unshared diagonal blocks become ``I`` in the correlation and ``a I`` in
    the precision; off-diagonal blocks touching an unshared block are zero.

    Parameters
    ----------
    node : NodeState
    for_neighbor : int
        Global antenna index of the neighbor.
    a_weight : float
        Weight of the unshared precision blocks, in (0, 1).
    precision : np.ndarray, optional
        Precision over the composite to mask instead of ``node.p_mat``.

    Returns
    -------
    PartialMatrices

    """
    if not 0 < a_weight < 1:
        raise InvalidWeight(f"Null-block weight must be in (0, 1), got {a_weight}.")
    shared = tuple(sorted({0, node.position(for_neighbor)}))
    l_taps = node.l_taps
    keep = np.zeros(node.r_hc.shape[0], dtype=bool)
    for pos in shared:
        keep[_block_slice(pos, l_taps)] = True
    mask = np.outer(keep, keep)
    fill = np.diag(~keep).astype(float)
    p_full = node.p_mat if precision is None else precision
    partial_r = np.where(mask, node.r_hc, 0.0) + fill
    partial_p = np.where(mask, p_full, 0.0) + a_weight * fill
    return PartialMatrices(
        for_neighbor, partial_p, hermitian_inverse(partial_r), shared
    )


def update_step(node, messages, partials):
    """
    Add independent neighbor estimates to a node state.

    ``h_w`` gains the message blocks and ``P`` gains ``partial P - partial R^{-1}``
    over the whole composite, so every block a sender does not share picks up
    ``(a - 1) I``. Messages are applied in sender order so the result does not
    depend on delivery order.

    Raises
    ------
    MisalignedBlocks
        When a message or its matrices do not belong to this node.

    """
    by_sender = {part.neighbor: part for part in partials}
    l_taps = node.l_taps
    for message in sorted(messages, key=lambda msg: msg.sender):
        if message.receiver != node.antenna or message.sender not in by_sender:
            raise MisalignedBlocks(
                f"Message {message.sender}->{message.receiver} cannot be fused at "
                f"antenna {node.antenna}."
            )
        part = by_sender[message.sender]
        delta_h = np.zeros_like(node.h_w)
        for antenna, block in message.blocks:
            delta_h[_block_slice(node.position(antenna), l_taps)] += block
        node.h_w = node.h_w + delta_h
        node.p_mat = hermitize(node.p_mat + part.p_mat - part.r_inv)
    return node


def fusion_step(node, messages, fusion):
    """
    Fuse messages that may repeat information the node already holds.

    The new estimate is ``K [x_hat, m_1, ..., m_n]`` with the gain ``K`` of
    ``fusion``, the node's previous composite estimate ``x_hat`` and the
    message blocks taken in sender order.

    Raises
    ------
    MisalignedBlocks
        When the senders differ from the ones the gain was computed for.

    """
    messages = sorted(messages, key=lambda msg: msg.sender)
    senders = tuple(msg.sender for msg in messages)
    if senders != fusion.senders or any(
        msg.receiver != node.antenna for msg in messages
    ):
        raise MisalignedBlocks(
            f"Messages from {senders} do not match the gain of antenna {node.antenna}."
        )
    parts = [node.estimate()]
    for msg in messages:
        parts.extend(block for _, block in msg.blocks)
    estimate = fusion.gain @ np.concatenate(parts, axis=0)
    node.p_mat = fusion.p_mat
    node.h_w = fusion.p_mat @ estimate
    return node


@dataclass(eq=False)
class DlmmseResult:
    """Per-antenna estimates ``(R, L, ...)`` with center error covariances."""

    h_hat: np.ndarray
    err_covs: np.ndarray
    states: list
    messages_sent: int = 0
    values_sent: int = 0


class DlmmseNetwork:
    """
    Synchronous message-passing schedule of the distributed estimator.

    The matrices a node works with only depend on the pilots and the channel
    statistics. With ``cache=True`` they are computed once, together with the
    fusion gains, and reused for every observation set run through the
    network. States whose local precisions were replaced need ``cache=False``.
    With ``share="derived"`` the interior antennas must share their matrices,
    which is checked when the network is built.
    """

    def __init__(
        self,
        neighborhoods,
        stats,
        a_p,
        noise_var,
        a_weight=DEFAULT_A_WEIGHT,
        sigma_i2=0.0,
        share="derived",
        cache=True,
    ):
        if not 0 < a_weight < 1:
            raise InvalidWeight(f"Null-block weight must be in (0, 1), got {a_weight}.")
        if share not in SHARE_MODES:
            raise ValueError(f"Unknown share mode {share!r}, expected {SHARE_MODES}.")
        if neighborhoods.n_antennas != stats.n_antennas:
            raise MisalignedBlocks(
                "Neighborhood map and channel statistics disagree on R."
            )
        self.neighborhoods = neighborhoods
        self.stats = stats
        self.a_mat = a_p.a_p if isinstance(a_p, ObservationMatrix) else np.asarray(a_p)
        self.noise_var = noise_var
        self.a_weight = a_weight
        self.sigma_i2 = sigma_i2
        self.share = share
        self.cache = cache
        if share == "derived" and not verify_symmetry_properties(
            neighborhoods, stats, self.a_mat, noise_var
        ):
            raise AsymmetricNeighborhoods(
                "Interior antennas do not share their matrices, "
                "use share='explicit'."
            )
        self.r_hc = [
            stats.composite(neighborhoods.composite(r)) for r in range(stats.n_antennas)
        ]
        self.info, self.matched = data_precision(
            self.a_mat, noise_var, stats.r_tap, sigma_i2
        )
        self._noise = hermitize(noise_var * self.matched @ self.matched.conj().T)
        self._marginalizers = {}
        self._basis = None

    @property
    def l_taps(self):
        return self.stats.l_taps

    def message_size(self):
        """Complex values per message, including the matrix when shared explicitly."""
        values = 2 * self.l_taps
        if self.share == "explicit":
            values += values**2
        return values

    def start(self, y_all):
        """Local estimation at every antenna from observations ``(R, K, ...)``."""
        y_all = np.asarray(y_all)
        return [
            local_estimation_step(
                y_all[r],
                self.a_mat,
                self.r_hc[r],
                self.noise_var,
                antenna=r,
                block_index=self.neighborhoods.composite(r),
                r_tap=self.stats.r_tap,
                sigma_i2=self.sigma_i2,
            )
            for r in range(self.stats.n_antennas)
        ]

    def _marginal(self, state, receiver):
        if not self.cache:
            return _marginalizer(state, receiver)
        key = (state.iteration, state.antenna, receiver)
        if key not in self._marginalizers:
            self._marginalizers[key] = _marginalizer(state, receiver)
        return self._marginalizers[key]

    def _neighbor_precision(self, node, sender, own, sent):
        """
        Precision ``node`` attributes to ``sender``'s first message, placed on
        the two shared blocks of its composite.

        Explicitly shared matrices arrive in the sender's block order. Derived
        ones keep the pair's prior and move the node's own information onto
        the sender's block.
        """
        l_taps = self.l_taps
        idx = _shared_blocks(node, sender)
        swap = np.concatenate([np.arange(l_taps, 2 * l_taps), np.arange(l_taps)])
        if self.share == "explicit":
            shared = sent[np.ix_(swap, swap)]
        else:
            prior = hermitian_inverse(node.r_hc[np.ix_(idx, idx)])
            shared = prior + (own - prior)[np.ix_(swap, swap)]
        precision = np.zeros_like(node.p_mat)
        precision[np.ix_(idx, idx)] = shared
        return precision

    def _round(self, states, fusions=None):
        """One sharing round; all messages come from the previous round's states."""
        iteration = states[0].iteration
        marginals = {}
        for state in states:
            for receiver in self.neighborhoods.neighbors[state.antenna]:
                marginals[(state.antenna, receiver)] = self._marginal(state, receiver)
        messages = {
            (sender, receiver): _message(
                states[sender], receiver, _marginal_weighted(states[sender], marg)
            )
            for (sender, receiver), marg in marginals.items()
        }
        partials = {}
        if iteration == 0:
            for sender, receiver in marginals:
                node = states[receiver]
                precision = self._neighbor_precision(
                    node,
                    sender,
                    marginals[(receiver, sender)][3],
                    marginals[(sender, receiver)][3],
                )
                partials[(sender, receiver)] = make_partial_matrices(
                    node, sender, self.a_weight, precision
                )
        for node in states:
            senders = sorted(self.neighborhoods.neighbors[node.antenna])
            incoming = [messages[(j, node.antenna)] for j in senders]
            if iteration == 0:
                update_step(
                    node, incoming, [partials[(j, node.antenna)] for j in senders]
                )
            else:
                fusion_step(node, incoming, fusions[node.antenna])
            node.iteration += 1
        return states

    def _observation_covariance(self, z_map):
        """``Z Cov(b) Z^H`` for a linear map ``Z`` of the matched-filter outputs."""
        z = z_map.reshape(len(z_map), self.stats.n_antennas, self.l_taps)
        response = np.einsum("qrl,rlm->qrm", z, self._response)
        cov = self._spatial_form(response, response)
        if self.sigma_i2 > 0:
            pilot = z @ self.info
            cov = cov + self.sigma_i2 * self._spatial_form(pilot, pilot)
        noisy = np.einsum("qrl,rlm->qrm", z, self._own_noise)
        cov = cov + noisy.reshape(len(z), -1) @ z.reshape(len(z), -1).conj().T
        return hermitize(cov)

    def _spatial_form(self, left, right):
        """``sum_rs left_r R_array[r, s] R_tap right_s^H`` for ``(q, R, L)`` stacks."""
        mixed = np.swapaxes(np.swapaxes(left, 1, 2) @ self.stats.r_array, 1, 2)
        mixed = mixed @ self.stats.r_tap
        return mixed.reshape(len(left), -1) @ right.reshape(len(right), -1).conj().T

    def _cross_covariance(self, antennas, z_map):
        """``Cov(h_antennas, Z b)`` for a linear map ``Z`` of the outputs ``b``."""
        z = z_map.reshape(len(z_map), self.stats.n_antennas, self.l_taps)
        response = np.einsum("qrl,rlm->qrm", z, self._response)
        tap = response.conj() @ self.stats.r_tap.T
        antennas = np.asarray(antennas)
        cross = np.tensordot(self.stats.r_array[antennas], tap, axes=(1, 1))
        return cross.transpose(0, 2, 1).reshape(len(antennas) * self.l_taps, -1)

    def _fusion_gain(self, states, antenna):
        node = states[antenna]
        senders = tuple(sorted(self.neighborhoods.neighbors[antenna]))
        parts = [node.estimate()]
        for j in senders:
            parts.append(
                _marginal_weighted(states[j], self._marginal(states[j], antenna))
            )
        z_map = np.concatenate(parts, axis=0)
        cross = self._cross_covariance(self.neighborhoods.composite(antenna), z_map)
        gain = cross @ hermitian_pinv(self._observation_covariance(z_map))
        err_cov = hermitize(node.r_hc - gain @ cross.conj().T)
        return FusionGain(senders, gain, hermitian_inverse(err_cov))

    def _reset_basis(self, states):
        """
        Start the schedule on a basis of the matched-filter outputs, with the
        local precisions of ``states``.
        """
        l_taps, r_dim = self.l_taps, self.stats.n_antennas
        self._basis = []
        for state in states:
            h_w = np.zeros((state.r_hc.shape[0], r_dim * l_taps), dtype=complex)
            first = state.antenna * l_taps
            h_w[:l_taps, first : first + l_taps] = np.eye(l_taps)
            self._basis.append(
                NodeState(
                    state.antenna,
                    state.block_index,
                    state.r_hc,
                    state.local_p,
                    h_w,
                    own_info=state.own_info,
                )
            )
        self._response = np.stack([state.own_info for state in states])
        self._own_noise = np.stack(
            [self._noise + state.own_info - self.info for state in states]
        )
        self._fusions = {}
        self._maps = [self._center_map(self._basis)]

    @staticmethod
    def _center_map(states):
        return np.concatenate([state.center_estimate() for state in states])

    def prepare(self, d_iters):
        """
        Compute the fusion gains for ``d_iters`` rounds.

        Also records, for every round, the map from the matched-filter
        outputs to the center estimates.
        """
        if self._basis is None:
            silent = np.zeros((self.stats.n_antennas, len(self.a_mat)))
            self._reset_basis(self.start(silent))
        while len(self._maps) <= d_iters:
            iteration = self._basis[0].iteration
            if iteration >= 1:
                self._fusions[iteration] = [
                    self._fusion_gain(self._basis, r)
                    for r in range(self.stats.n_antennas)
                ]
            self._round(self._basis, self._fusions.get(iteration))
            self._maps.append(self._center_map(self._basis))
            logger.debug("Prepared sharing round %d.", iteration + 1)
        return self

    def output_maps(self, d_iters):
        """Maps from the matched-filter outputs to the center estimates per round."""
        self.prepare(d_iters)
        return self._maps[: d_iters + 1]

    def run(self, states, d_iters, trace=None):
        """Run ``d_iters`` rounds, calling ``trace(iteration, states)`` after each."""
        if d_iters < 0:
            raise ValueError("Number of iterations must be non-negative.")
        if not self.cache:
            self._reset_basis(states)
        self.prepare(d_iters)
        if trace is not None:
            trace(0, states)
        for i in range(1, d_iters + 1):
            states = self._round(states, self._fusions.get(states[0].iteration))
            logger.debug("Finished sharing round %d/%d.", i, d_iters)
            if trace is not None:
                trace(i, states)
        return states

    def collect(self, states, d_iters=0):
        """Center estimates and covariances of every antenna."""
        h_hat = np.stack([state.center_estimate() for state in states])
        err_covs = np.stack([state.center_covariance() for state in states])
        messages = d_iters * sum(len(nb) for nb in self.neighborhoods.neighbors)
        return DlmmseResult(
            h_hat, err_covs, states, messages, messages * self.message_size()
        )


def run_dlmmse(
    y_all,
    a_p,
    stats,
    noise_var,
    d_iters=DEFAULT_ITERATIONS,
    a_weight=DEFAULT_A_WEIGHT,
    *,
    neighborhoods,
    sigma_i2=0.0,
    share="derived",
    trace=None,
    network=None,
):
    """
    Distributed LMMSE estimate of every antenna's channel.

    Parameters
    ----------
    y_all : np.ndarray
        Pilot observations shaped ``(R, K)``; extra trailing axes are batch axes.
    a_p : ObservationMatrix or np.ndarray
    stats : ChannelStats
    noise_var : float
    d_iters : int
        Number of sharing rounds.
    a_weight : float
        Weight of unshared precision blocks.
    neighborhoods : NeighborhoodMap
    sigma_i2 : float, optional
        Pilot-contamination variance accounted for in the local step.
    share : {"derived", "explicit"}
        Whether receivers regenerate the shared matrices or senders ship them.
    trace : callable, optional
        Called as ``trace(iteration, states)`` after the local step and every round.
    network : DlmmseNetwork, optional
        Reuse a schedule built for the same pilots and statistics.

    Returns
    -------
    DlmmseResult

    """
    if network is None:
        network = DlmmseNetwork(
            neighborhoods, stats, a_p, noise_var, a_weight, sigma_i2, share
        )
    states = network.run(network.start(y_all), d_iters, trace)
    return network.collect(states, d_iters)


def dlmmse_linear_maps(network, d_iters):
    """
    Linear maps ``W_i`` with ``h_hat = W_i y`` after ``i = 0..d_iters`` rounds.

    The network already tracks the maps from the matched-filter outputs
    ``b_r = M y_r``; composing them with ``M`` gives the ``RL x RK`` maps.
    """
    r_dim, l_taps = network.stats.n_antennas, network.l_taps
    return [
        (w_map.reshape(r_dim * l_taps, r_dim, l_taps) @ network.matched).reshape(
            r_dim * l_taps, -1
        )
        for w_map in network.output_maps(d_iters)
    ]


def linear_map_mse(w_map, a_p, stats, noise_var, sigma_i2=0.0, cap=MATERIALIZATION_CAP):
    """Exact total MSE of a linear estimator ``W`` of the composite channel."""
    a_mat = a_p.a_p if isinstance(a_p, ObservationMatrix) else np.asarray(a_p)
    dim = stats.n_antennas * stats.l_taps
    if dim > cap:
        raise MaterializationCapExceeded(f"R*L = {dim} exceeds the cap {cap}.")
    r_h = stats.composite()
    a_big = np.kron(np.eye(stats.n_antennas), a_mat)
    residual = np.eye(dim) - w_map @ a_big
    wa = w_map @ a_big
    total = np.trace(residual @ r_h @ residual.conj().T)
    total += noise_var * np.sum(np.abs(w_map) ** 2)
    total += sigma_i2 * np.trace(wa @ r_h @ wa.conj().T)
    return float(np.real(total))


def dlmmse_linear_mse(network, d_iters):
    """Exact total MSE after each of ``0..d_iters`` rounds."""
    return [
        linear_map_mse(
            w_map, network.a_mat, network.stats, network.noise_var, network.sigma_i2
        )
        for w_map in dlmmse_linear_maps(network, d_iters)
    ]


def _central_antenna(geom):
    return geom.antenna_index(geom.m_rows // 2, geom.g_cols // 2)


def predicted_mse_per_iteration(stats, rho, k, i, neighborhoods=None, antenna=None):
    """
    Predicted per-antenna MSE after ``i`` rounds, ``i`` in {0, 1}.

    Round 0 is the localized LMMSE value; round 1 averages the
    centralized expression over the first-tier neighborhood of ``antenna``
    (the most central antenna by default).
    """
    deltas = stats.eigenvalues_tap
    if i == 0:
        return float(np.sum(deltas / (1 + rho * k * deltas)))
    if i != 1:
        raise ValueError("Closed-form prediction exists for rounds 0 and 1 only.")
    if neighborhoods is None:
        raise ValueError("Round 1 prediction needs the neighborhood map.")
    if antenna is None:
        antenna = _central_antenna(neighborhoods.geometry)
    tier = np.asarray(neighborhoods.composite(antenna))
    etas = np.linalg.eigvalsh(hermitize(stats.r_array[np.ix_(tier, tier)]))
    lam = np.outer(np.clip(etas, 0.0, None), deltas)
    return float(np.sum(lam / (1 + rho * k * lam)) / len(tier))


def verify_symmetry_properties(neighborhoods, stats, a_p, noise_var, atol=1e-10):
    """
    Check that all interior antennas share one composite correlation and one
    initial precision, so receivers can regenerate their neighbors' matrices.
    """
    interior = [
        r for r in range(neighborhoods.n_antennas) if neighborhoods.is_interior(r)
    ]
    if len(interior) < 2:
        return True
    a_mat = a_p.a_p if isinstance(a_p, ObservationMatrix) else np.asarray(a_p)
    k = a_mat.shape[0]
    reference = None
    for r in interior:
        r_hc = stats.composite(neighborhoods.composite(r))
        state = local_estimation_step(np.zeros(k), a_mat, r_hc, noise_var)
        if reference is None:
            reference = (r_hc, state.p_mat)
            continue
        if not (
            np.allclose(r_hc, reference[0], atol=atol)
            and np.allclose(state.p_mat, reference[1], atol=atol)
        ):
            logger.warning("Antenna %d breaks the shared-matrix symmetry.", r)
            return False
    return True
