"""Desk-profile runs of the presets; deselected by default, use ``pytest -m slow``."""

import pytest

from mimo_ce.config import DESK
from mimo_ce.run_experiment import check_report, run_experiment

pytestmark = pytest.mark.slow


def test_interference_moments():
    report = run_experiment(3, DESK)
    assert check_report(report, DESK) == []


def test_pilot_contamination_matches_closed_forms():
    config = DESK.replace(estimators=("ls", "llmmse", "olmmse"), workers=4)
    report = run_experiment(4, config)
    assert check_report(report, config) == []


def test_distributed_without_sharing_is_localized():
    report = run_experiment(1, DESK.replace(trials=200))
    table = report.tables["d"].set_index(["d", "estimator"])
    assert table.loc[(0, "dlmmse"), "empirical_mse"] == pytest.approx(
        table.loc[(0, "llmmse"), "empirical_mse"], rel=1e-9
    )
    distributed = table.xs("dlmmse", level="estimator")["analytic_mse"]
    optimal = table.xs("olmmse", level="estimator")["analytic_mse"]
    assert (distributed >= optimal * (1 - 1e-9)).all()


def test_distributed_rounds_approach_centralized():
    report = run_experiment(1, DESK)
    assert check_report(report, DESK) == []
    table = report.tables["d"].set_index(["d", "estimator"])
    exact = table.xs("dlmmse", level="estimator")["analytic_mse"].to_numpy()
    assert all(
        later <= earlier * (1 + 1e-9) for earlier, later in zip(exact[1:], exact[2:])
    )


def test_awgn_matches_closed_forms_with_data_aided_gain():
    report = run_experiment(2, DESK)
    assert check_report(report, DESK) == []
    gain = report.tables["dad_gain"].set_index("snr_db")
    assert gain.loc[20.0, "gain"] > 3 * gain.loc[20.0, "stderr"]
    k_table = report.tables["k"].set_index(["k", "estimator"])
    half = k_table.loc[(DESK.ofdm.k // 2, "dad"), "empirical_mse"]
    full = k_table.loc[(DESK.ofdm.k, "dlmmse"), "empirical_mse"]
    assert half <= 1.25 * full


def test_runtime_ratio_grows_with_array_size():
    report = run_experiment(5, DESK)
    assert check_report(report, DESK) == []
