import os

import numpy as np
import pandas as pd
import pytest

from mimo_ce.config import DESK, apply_settings
from mimo_ce.main import build_config, main, parser
from mimo_ce.misc_os import sibling_path
from mimo_ce.run_experiment import (
    ITERATION_GRID,
    RESULT_COLUMNS,
    IncorrectPreset,
    MseReport,
    ScenarioMismatch,
    build_point,
    check_report,
    draw_trial,
    emit_csv,
    parse_preset,
    run_experiment,
    run_point,
    run_trial,
    trace_dlmmse,
)
from mimo_ce.workers import trial_rng


class TestParsePreset:
    @pytest.mark.parametrize("value", [3, "3", "preset3", "Preset3"])
    def test_accepts(self, value):
        assert parse_preset(value) == 3

    @pytest.mark.parametrize("value", [0, "6", "presetx", None])
    def test_rejects(self, value):
        with pytest.raises(IncorrectPreset):
            parse_preset(value)


class TestBuildPoint:
    def test_estimators_and_analytic(self, tiny_config):
        point = build_point(tiny_config, 10.0)
        assert set(point.estimators) == {"ls", "llmmse", "olmmse", "dlmmse", "dad"}
        assert point.analytic["dad"] is None
        mse = point.analytic
        assert mse["olmmse"] < mse["llmmse"] < mse["ls"]
        assert mse["dlmmse"] < mse["llmmse"]
        assert mse["olmmse"] <= mse["dlmmse"] * (1 + 1e-9)

    def test_rounds_as_rows(self, tiny_config):
        point = build_point(
            tiny_config, 0.0, estimators=("llmmse", "dlmmse"), d_values=(0, 2)
        )
        assert set(point.estimators) == {"llmmse", "dlmmse@0", "dlmmse@2"}
        assert point.analytic["dlmmse@0"] == pytest.approx(point.analytic["llmmse"])

    def test_contamination(self, tiny_config):
        point = build_point(tiny_config, 10.0, lam=0.1)
        assert point.sigma_i2 > 0
        assert "dad" not in point.estimators
        clean = build_point(tiny_config, 10.0)
        assert point.analytic["llmmse"] > clean.analytic["llmmse"]

    def test_contamination_needs_ppp(self, tiny_config):
        with pytest.raises(ScenarioMismatch):
            build_point(tiny_config.replace(ppp=None), 10.0, lam=0.1)

    def test_random_pilots_have_no_closed_form(self, tiny_config):
        config = apply_settings(
            tiny_config, {"ofdm.pilot_mode": "random", "ofdm.k": "5"}
        )
        point = build_point(config, 10.0, estimators=("ls", "llmmse"))
        if point.a_p.orthogonal_scale() is None:
            assert point.analytic["ls"] is None


class TestTrials:
    def test_trial_carries_pilots(self, tiny_config):
        point = build_point(tiny_config, 20.0, estimators=("ls",))
        trial = draw_trial(point, trial_rng(1, 0))
        assert trial.y_pilots.shape == (9, 8)
        assert trial.y_full.shape == (9, 16)
        assert np.allclose(trial.y_full[:, point.pattern.indices], trial.y_pilots)

    def test_common_random_numbers(self, tiny_config):
        low = build_point(tiny_config, 0.0, estimators=("ls",))
        high = build_point(tiny_config, 20.0, estimators=("ls",))
        a = run_trial(low, trial_rng(3, 1))
        b = run_trial(high, trial_rng(3, 1))
        assert a["ls"] > b["ls"] >= 0

    def test_run_point_is_reproducible(self, tiny_config):
        point = build_point(tiny_config, 10.0, estimators=("ls", "olmmse"))
        first, dropped = run_point(point, 12, seed=4, workers=1)
        second, _ = run_point(point, 12, seed=4, workers=3)
        assert dropped == 0
        assert first == second
        assert first["olmmse"][0] < first["ls"][0]


class TestPresets:
    def test_iterations(self, tiny_config, tmp_path, read_table):
        report = run_experiment(1, tiny_config)
        table = report.tables["d"]
        assert list(table.columns) == ["d"] + RESULT_COLUMNS
        assert len(table) == 3 * len(ITERATION_GRID)
        assert set(table["estimator"]) == {"llmmse", "olmmse", "dlmmse"}
        rows = table[table["d"] == 0].set_index("estimator")
        assert rows.loc["dlmmse", "empirical_mse"] == pytest.approx(
            rows.loc["llmmse", "empirical_mse"]
        )
        out = tmp_path / "preset1.csv"
        emit_csv(report, str(out))
        assert list(read_table(str(out)).columns) == ["d"] + RESULT_COLUMNS

    def test_awgn_with_data_aided(self, tiny_config, tmp_path, read_table):
        report = run_experiment("preset2", tiny_config)
        assert set(report.tables) == {"snr_db", "k", "dad_gain"}
        snr = report.tables["snr_db"]
        assert set(snr["estimator"]) == {"ls", "llmmse", "olmmse", "dlmmse", "dad"}
        assert snr.loc[snr["estimator"] == "dad", "analytic_mse"].isna().all()
        assert set(report.tables["k"]["k"]) == {8, 16}
        out = tmp_path / "preset2.csv"
        emit_csv(report, str(out))
        gain = read_table(sibling_path(str(out), "dad_gain"))
        assert list(gain.columns) == ["snr_db", "gain", "stderr"]

    def test_moments(self, tiny_config, tmp_path):
        report = run_experiment(3, tiny_config, moment_samples=20_000)
        moments = report.tables["lambda"]
        assert len(moments) == 4
        assert np.allclose(
            moments["empirical_var"], moments["analytic_var"], rtol=0.1
        )
        assert {"x", "y", "radius"} <= set(report.tables["realization"].columns)

    def test_contamination(self, tiny_config):
        config = tiny_config.replace(trials=10, estimators=("ls", "llmmse", "olmmse"))
        report = run_experiment(4, config)
        assert set(report.tables) == {"snr_db", "lambda"}
        assert len(report.tables["snr_db"]) == 5 * 3
        assert len(report.tables["lambda"]) == 3 * 3

    def test_contamination_needs_ppp(self, tiny_config):
        with pytest.raises(ScenarioMismatch):
            run_experiment(4, tiny_config.replace(ppp=None))

    def test_moments_need_ppp(self, tiny_config):
        with pytest.raises(ScenarioMismatch):
            run_experiment(3, tiny_config.replace(ppp=None))

    def test_csv_is_byte_reproducible(self, tiny_config, tmp_path):
        config = tiny_config.replace(estimators=("ls", "llmmse"), snr_db=(10.0,))
        paths = []
        for name in ("a.csv", "b.csv"):
            emit_csv(run_experiment(2, config), str(tmp_path / name))
            paths.append(tmp_path / name)
        assert paths[0].read_bytes() == paths[1].read_bytes()

    @pytest.mark.slow
    def test_timing(self, tiny_config):
        report = run_experiment(5, tiny_config)
        timing = report.tables["r"]
        assert set(timing["r"]) == {16, 36, 64, 100}
        assert (timing["seconds"] > 0).all()
        assert set(report.tables["operations"]["estimator"]) == {
            "ls",
            "llmmse",
            "olmmse",
            "dlmmse",
        }


def _report(preset, name, df):
    return MseReport(preset, {name: df})


class TestChecks:
    def test_timing_ratio(self):
        rows = []
        for r, (central, distributed) in zip((16, 36), ((1.0, 1.0), (4.0, 2.0))):
            rows += [
                {"r": r, "estimator": "olmmse", "seconds": central},
                {"r": r, "estimator": "dlmmse", "seconds": distributed},
            ]
        assert check_report(_report(5, "r", pd.DataFrame(rows)), DESK) == []
        rows[3]["seconds"] = 8.0
        assert len(check_report(_report(5, "r", pd.DataFrame(rows)), DESK)) == 1

    def test_moments(self):
        good = {
            "lambda": 0.1,
            "empirical_mean": 0.0001,
            "mean_stderr": 0.001,
            "analytic_var": 0.066,
            "empirical_var": 0.0655,
        }
        bad = dict(good, empirical_var=0.08, empirical_mean=0.01)
        assert check_report(_report(3, "lambda", pd.DataFrame([good])), DESK) == []
        assert len(check_report(_report(3, "lambda", pd.DataFrame([bad])), DESK)) == 2

    def test_iterations(self):
        rows = []
        for d, mse in enumerate((10.0, 8.0, 7.0, 6.5)):
            rows += [
                {"d": d, "estimator": "llmmse", "empirical_mse": 10.0, "stderr": 0.1},
                {"d": d, "estimator": "olmmse", "empirical_mse": 6.0, "stderr": 0.1},
                {"d": d, "estimator": "dlmmse", "empirical_mse": mse, "stderr": 0.1},
            ]
        assert check_report(_report(1, "d", pd.DataFrame(rows)), DESK) == []
        rows[-1]["empirical_mse"] = 7.5
        assert len(check_report(_report(1, "d", pd.DataFrame(rows)), DESK)) == 2


class TestTraceAndMain:
    def test_trace(self, tiny_config, tmp_path, read_table):
        out = tmp_path / "trace.csv"
        df = trace_dlmmse(tiny_config, str(out))
        assert len(df) == (tiny_config.dlmmse.d + 1) * 9
        columns = list(read_table(str(out)).columns)
        assert columns == ["iteration", "antenna", "squared_error"]

    def test_bad_preset(self):
        assert main(["experiment", "preset9", "--quiet"]) == 2

    def test_missing_config(self, tmp_path):
        assert main(["experiment", "1", "--config", str(tmp_path / "none.cfg")]) == 2

    def test_paper_profile(self):
        args = parser.parse_args(["experiment", "1", "--profile", "paper"])
        config = build_config(args)
        assert config.geometry.n_antennas == 100
        assert config.ppp is not None

    def test_moments_run(self, tmp_path):
        out = tmp_path / "m.csv"
        argv = ["experiment", "3", "--out", str(out), "--quiet", "--seed", "3"]
        assert main(argv) == 0
        assert out.exists()
        assert os.path.exists(sibling_path(str(out), "realization"))

    def test_config_file_run(self, tmp_path, read_table):
        cfg = tmp_path / "tiny.cfg"
        cfg.write_text(
            "array.m = 2\narray.g = 2\nofdm.n = 16\nofdm.k = 8\nchannel.l = 2\n"
            "mc.trials = 5\nnoise.snr_db = 10\nmc.estimators = ls, olmmse\n"
        )
        out = tmp_path / "awgn.csv"
        argv = ["experiment", "2", "--config", str(cfg), "--out", str(out), "--quiet"]
        assert main(argv) == 0
        df = read_table(str(out))
        assert set(df["estimator"]) == {"ls", "olmmse"}
