import numpy as np
import pandas as pd
import pytest

from mimo_ce.config import (
    ARRAY_ANGLES,
    ChannelSettings,
    ExperimentConfig,
    OfdmSettings,
    PppSettings,
)
from mimo_ce.correlation import ArrayGeometry, make_channel_stats
from mimo_ce.dlmmse import build_neighborhoods
from mimo_ce.ofdm import OfdmConfig, PilotPattern, build_observation_matrix

N_SUBCARRIERS = 32
N_PILOTS = 8
L_TAPS = 4
SNR_DB = 10.0


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def geom():
    """A 3x4 array with the reference angular parameters."""
    return ArrayGeometry(3, 4, **ARRAY_ANGLES)


@pytest.fixture
def stats(geom):
    return make_channel_stats(geom, L_TAPS, decay=1.0)


@pytest.fixture
def neighborhoods(geom):
    return build_neighborhoods(geom)


@pytest.fixture
def ofdm():
    return OfdmConfig.from_snr_db(N_SUBCARRIERS, N_PILOTS, SNR_DB)


@pytest.fixture
def pattern():
    return PilotPattern.uniform(N_SUBCARRIERS, N_PILOTS)


@pytest.fixture
def a_p(ofdm, pattern):
    return build_observation_matrix(ofdm, pattern, L_TAPS)


@pytest.fixture
def tiny_config():
    """Small enough for every preset to finish in seconds."""
    return ExperimentConfig(
        geometry=ArrayGeometry(3, 3, **ARRAY_ANGLES),
        ofdm=OfdmSettings(n=16, k=8),
        channel=ChannelSettings(l=2),
        trials=20,
        workers=2,
        dad_trials=4,
        ppp=PppSettings(),
    )


@pytest.fixture
def read_table():
    """Reader for the csv tables the harness writes."""
    return pd.read_csv
