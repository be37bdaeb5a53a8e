"""
Experiment configuration.

Settings are grouped in frozen dataclasses; ``DESK`` and ``PAPER`` are the
two named profiles. ``apply_settings`` overlays ``key = value`` pairs read
from a configuration file (see ``mimo_ce.reader.read_config``) or given on
the command line.

"""

import dataclasses
import re
from dataclasses import dataclass, field

import numpy as np

from mimo_ce import MimoCeError
from mimo_ce.correlation import ARRAY_MODES, ArrayGeometry
from mimo_ce.dlmmse import DEFAULT_A_WEIGHT, DEFAULT_ITERATIONS, SHARE_MODES
from mimo_ce.interference import SYNTHESIS_MODES, PppScenario
from mimo_ce.ofdm import SUPPORTED_QAM

ESTIMATORS = ("ls", "llmmse", "olmmse", "dlmmse", "dad")
PILOT_MODES = ("uniform", "random")
DEFAULT_SEED = 20240601
DEFAULT_WORKERS = 2
DEFAULT_DAD_TRIALS = 200


class InvalidConfig(MimoCeError, ValueError):
    """Exception is raised when a configuration key or value is not applicable."""


@dataclass(frozen=True)
class OfdmSettings:
    n: int
    k: int
    qam: int = 4
    pilot_mode: str = "uniform"


@dataclass(frozen=True)
class ChannelSettings:
    l: int  # noqa: E741
    decay: float = 1.0


@dataclass(frozen=True)
class PppSettings:
    """Interferer field; ``lambdas`` of ``None`` lets each preset pick its grid."""

    lambdas: tuple = None
    gamma_o: float = 2.0
    gamma_m: float = 5.0
    beta: float = 2.0
    mode: str = "sum"

    def __post_init__(self):
        self.scenario(0.0)

    def scenario(self, lam):
        return PppScenario(lam, self.gamma_o, self.gamma_m, self.beta)


@dataclass(frozen=True)
class DlmmseSettings:
    d: int = DEFAULT_ITERATIONS
    a: float = DEFAULT_A_WEIGHT
    share: str = "derived"


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Everything a preset needs to run.

    ``snr_db`` of ``None`` lets each preset use its own default grid. ``ppp``
    stays ``None`` unless a profile or a ``ppp.*`` setting provides it, and the
    presets that need interferers refuse to run without it.
    """

    geometry: ArrayGeometry
    ofdm: OfdmSettings
    channel: ChannelSettings
    trials: int
    snr_db: tuple = None
    array_mode: str = "exact"
    ppp: PppSettings = None
    dlmmse: DlmmseSettings = field(default_factory=DlmmseSettings)
    estimators: tuple = ESTIMATORS
    seed: int = DEFAULT_SEED
    workers: int = DEFAULT_WORKERS
    dad_trials: int = DEFAULT_DAD_TRIALS

    def __post_init__(self):
        if self.trials < 1:
            raise InvalidConfig(f"Need at least one trial, got {self.trials}.")
        if self.snr_db is not None and len(self.snr_db) == 0:
            raise InvalidConfig("SNR grid must not be empty.")
        if self.array_mode not in ARRAY_MODES:
            raise InvalidConfig(f"array.mode must be one of {ARRAY_MODES}.")
        if self.ofdm.qam not in SUPPORTED_QAM:
            raise InvalidConfig(f"ofdm.qam must be one of {SUPPORTED_QAM}.")
        if self.ofdm.pilot_mode not in PILOT_MODES:
            raise InvalidConfig(f"ofdm.pilot_mode must be one of {PILOT_MODES}.")
        if not self.channel.l <= self.ofdm.k <= self.ofdm.n:
            raise InvalidConfig(
                f"Need L <= K <= N, got L={self.channel.l}, K={self.ofdm.k}, "
                f"N={self.ofdm.n}."
            )
        if not self.channel.decay > 0:
            raise InvalidConfig("channel.decay must be positive.")
        if self.dlmmse.d < 0:
            raise InvalidConfig("dlmmse.d must be non-negative.")
        if not 0 < self.dlmmse.a < 1:
            raise InvalidConfig("dlmmse.a must lie in (0, 1).")
        if self.dlmmse.share not in SHARE_MODES:
            raise InvalidConfig(f"dlmmse.share must be one of {SHARE_MODES}.")
        if self.ppp is not None and self.ppp.mode not in SYNTHESIS_MODES:
            raise InvalidConfig(f"ppp.mode must be one of {SYNTHESIS_MODES}.")
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown:
            raise InvalidConfig(f"Unknown estimators: {sorted(unknown)}.")
        if self.workers < 1:
            raise InvalidConfig("mc.workers must be positive.")
        if self.dad_trials < 1:
            raise InvalidConfig("mc.dad_trials must be positive.")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


ARRAY_ANGLES = dict(
    dx=0.3, dy=0.5, phi=np.pi / 3, theta=3 * np.pi / 8, sigma=np.pi / 12, xi=np.pi / 36
)

DESK = ExperimentConfig(
    geometry=ArrayGeometry(6, 6, **ARRAY_ANGLES),
    ofdm=OfdmSettings(n=64, k=16),
    channel=ChannelSettings(l=4),
    trials=2000,
    ppp=PppSettings(),
)

PAPER = ExperimentConfig(
    geometry=ArrayGeometry(10, 10, **ARRAY_ANGLES),
    ofdm=OfdmSettings(n=256, k=32),
    channel=ChannelSettings(l=8),
    trials=100,
    ppp=PppSettings(),
)

PROFILES = {"desk": DESK, "paper": PAPER}

_PI_VALUE = re.compile(r"^\s*([-+]?[\d.]+)?\s*\*?\s*pi\s*(?:/\s*([\d.]+))?\s*$")


def parse_float(value):
    """Parse a float; ``pi``, ``pi/6``, ``3*pi/8`` and ``inf`` are accepted."""
    text = str(value).strip().lower()
    match = _PI_VALUE.match(text)
    if match:
        scale = float(match.group(1)) if match.group(1) else 1.0
        div = float(match.group(2)) if match.group(2) else 1.0
        return scale * np.pi / div
    try:
        return float(text)
    except ValueError:
        raise InvalidConfig(f"Cannot read '{value}' as a number.") from None


def parse_int(value):
    try:
        return int(str(value).strip())
    except ValueError:
        raise InvalidConfig(f"Cannot read '{value}' as an integer.") from None


def parse_list(value):
    return tuple(parse_float(v) for v in str(value).split(",") if v.strip())


def parse_names(value):
    return tuple(v.strip() for v in str(value).split(",") if v.strip())


# key -> (section, field, parser)
CONFIG_KEYS = {
    "array.m": ("geometry", "m_rows", parse_int),
    "array.g": ("geometry", "g_cols", parse_int),
    "array.dx": ("geometry", "dx", parse_float),
    "array.dy": ("geometry", "dy", parse_float),
    "array.phi": ("geometry", "phi", parse_float),
    "array.theta": ("geometry", "theta", parse_float),
    "array.sigma": ("geometry", "sigma", parse_float),
    "array.xi": ("geometry", "xi", parse_float),
    "array.mode": (None, "array_mode", str),
    "ofdm.n": ("ofdm", "n", parse_int),
    "ofdm.k": ("ofdm", "k", parse_int),
    "ofdm.qam": ("ofdm", "qam", parse_int),
    "ofdm.pilot_mode": ("ofdm", "pilot_mode", str),
    "channel.l": ("channel", "l", parse_int),
    "channel.decay": ("channel", "decay", parse_float),
    "noise.snr_db": (None, "snr_db", parse_list),
    "ppp.lambda": ("ppp", "lambdas", parse_list),
    "ppp.gamma_o": ("ppp", "gamma_o", parse_float),
    "ppp.gamma_m": ("ppp", "gamma_m", parse_float),
    "ppp.beta": ("ppp", "beta", parse_float),
    "ppp.mode": ("ppp", "mode", str),
    "mc.trials": (None, "trials", parse_int),
    "mc.workers": (None, "workers", parse_int),
    "mc.dad_trials": (None, "dad_trials", parse_int),
    "mc.estimators": (None, "estimators", parse_names),
    "dlmmse.d": ("dlmmse", "d", parse_int),
    "dlmmse.a": ("dlmmse", "a", parse_float),
    "dlmmse.share": ("dlmmse", "share", str),
    "seed": (None, "seed", parse_int),
}


def apply_settings(config, settings):
    """
    Return ``config`` with ``settings`` (``{key: raw value}``) applied.

    Raises
    ------
    InvalidConfig
        On an unknown key or a value that does not parse or validate.

    """
    top, sections = {}, {}
    for key, raw in settings.items():
        try:
            section, name, parser = CONFIG_KEYS[key]
        except KeyError:
            available = "\n\t".join(CONFIG_KEYS)
            raise InvalidConfig(
                f"Unknown configuration key '{key}'.\n"
                f"Available keys are:\n\t{available}"
            ) from None
        value = parser(raw)
        if section is None:
            top[name] = value
        else:
            sections.setdefault(section, {})[name] = value

    for section, values in sections.items():
        current = getattr(config, section)
        if current is None:
            current = PppSettings()
        try:
            top[section] = dataclasses.replace(current, **values)
        except ValueError as err:
            raise InvalidConfig(str(err)) from err
    try:
        return config.replace(**top)
    except InvalidConfig:
        raise
    except ValueError as err:
        raise InvalidConfig(str(err)) from err
