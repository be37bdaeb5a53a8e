import dataclasses
import logging
import time
from dataclasses import dataclass, field
from functools import partial
from queue import Queue

import numpy as np
import pandas as pd

from mimo_ce import MimoCeError
from mimo_ce.collector import Collector
from mimo_ce.correlation import make_channel_stats, sample_channel
from mimo_ce.data_aided import run_dad_lmmse
from mimo_ce.dlmmse import (
    DlmmseNetwork,
    build_neighborhoods,
    dlmmse_linear_maps,
    linear_map_mse,
    run_dlmmse,
)
from mimo_ce.estimators import (
    MATERIALIZATION_CAP,
    OlmmseEstimator,
    llmmse_estimator,
    ls_estimator,
    operation_counts,
)
from mimo_ce.interference import (
    interference_moments,
    mse_llmmse_pc,
    mse_llmmse_pc_limit,
    mse_ls_pc,
    mse_olmmse_pc,
    mse_olmmse_pc_limit,
    sample_interference,
    sample_ppp,
    synthesize_pilot_contamination,
)
from mimo_ce.linalg import complex_normal
from mimo_ce.misc_os import sibling_path, write_csv
from mimo_ce.ofdm import (
    OfdmConfig,
    PilotPattern,
    build_observation_matrix,
    frequency_response,
)
from mimo_ce.workers import TrialWorker, trial_rng

logger = logging.getLogger(__name__)

PRESETS = (1, 2, 3, 4, 5)
AWGN_SNR_DB = (0.0, 10.0, 20.0)
PC_SNR_DB = (0.0, 10.0, 20.0, 30.0, 40.0)
ITERATION_SNR_DB = 0.0
ITERATION_GRID = tuple(range(7))
PILOT_GRID = (8, 16, 24, 32, 48, 64)
PILOT_SNR_DB = 20.0
MOMENT_LAMBDAS = (0.05, 0.1, 0.2, 0.3)
MOMENT_SAMPLES = 100_000
REALIZATION_LAMBDA = 0.3
PC_LAMBDA = 0.1
PC_LAMBDAS = (0.01, 0.1, 0.5)
PC_LAMBDA_SNR_DB = 10.0
TIMING_SIDES = (4, 6, 8, 10)
TIMING_REPEATS = 5
RESULT_COLUMNS = ["estimator", "empirical_mse", "analytic_mse", "stderr", "seconds"]
MOMENT_COLUMNS = [
    "lambda",
    "analytic_mean",
    "empirical_mean",
    "mean_stderr",
    "analytic_var",
    "empirical_var",
    "tone_correlation",
]

# tolerances of the acceptance checks
ORACLE_STDERRS = 3.0
IDENTITY_RTOL = 1e-9
OPTIMALITY_GAP = 0.10
MOMENT_VAR_RTOL = 0.05
PC_RTOL = 0.10
FLOOR_RTOL = 0.15
HALF_PILOT_RTOL = 0.25


class IncorrectPreset(MimoCeError, ValueError):
    """Exception is raised when the requested preset does not exist."""


class ScenarioMismatch(MimoCeError, ValueError):
    """Exception is raised when a preset needs settings the configuration lacks."""


class AcceptanceCheckFailed(MimoCeError, RuntimeError):
    """Exception is raised when a report violates an acceptance check."""


@dataclass(eq=False)
class SweepPoint:
    """
    Everything shared by the trials of one grid point.

    ``estimators`` maps a row name to a function of a ``Trial`` returning
    the ``(R, L)`` estimate; ``analytic`` holds the matching closed-form or
    exact MSE, ``None`` where no formula applies.
    """

    stats: object
    pattern: PilotPattern
    a_p: object
    ofdm: OfdmConfig
    constellation: np.ndarray
    estimators: dict = field(default_factory=dict)
    analytic: dict = field(default_factory=dict)
    scenario: object = None
    ppp_mode: str = "sum"
    sigma_i2: float = 0.0


@dataclass(eq=False)
class Trial:
    taps: np.ndarray
    y_pilots: np.ndarray
    y_full: np.ndarray


@dataclass
class MseReport:
    """
    Tables produced by one preset; the first table is the primary one.

    Attributes
    ----------
    preset : int
    tables : dict of str to pd.DataFrame
    discarded : int
        Number of trials dropped because an estimator failed.

    """

    preset: int
    tables: dict = field(default_factory=dict)
    discarded: int = 0

    @classmethod
    def empty(cls, preset=0, sweep="snr_db"):
        return cls(preset, {sweep: pd.DataFrame(columns=[sweep] + RESULT_COLUMNS)})

    @property
    def primary(self):
        return next(iter(self.tables.values()))


def build_point(
    config, snr_db, *, n_pilots=None, lam=None, estimators=None, d_values=None
):
    """
    Prepare estimators and analytic references of one grid point.

    Parameters
    ----------
    config : ExperimentConfig
    snr_db : float
    n_pilots : int, optional
        Overrides ``config.ofdm.k``.
    lam : float, optional
        Interferer density; enables pilot contamination.
    estimators : sequence of str, optional
        Overrides ``config.estimators``.
    d_values : sequence of int, optional
        Report the distributed estimator after each of these round counts,
        as rows ``dlmmse@d``, instead of once after ``config.dlmmse.d``.

    """
    names = config.estimators if estimators is None else estimators
    stats = make_channel_stats(
        config.geometry, config.channel.l, config.channel.decay, config.array_mode
    )
    k = config.ofdm.k if n_pilots is None else n_pilots
    ofdm = OfdmConfig.from_snr_db(config.ofdm.n, k, snr_db, config.ofdm.qam)
    if config.ofdm.pilot_mode == "random":
        pilot_rng = np.random.default_rng(config.seed)
        pattern = PilotPattern.random(ofdm.n_subcarriers, k, pilot_rng)
    else:
        pattern = PilotPattern.uniform(ofdm.n_subcarriers, k)
    a_p = build_observation_matrix(ofdm, pattern, config.channel.l)
    point = SweepPoint(stats, pattern, a_p, ofdm, ofdm.constellation)
    if lam is not None:
        if config.ppp is None:
            raise ScenarioMismatch("Pilot contamination needs PPP settings.")
        point.scenario = config.ppp.scenario(lam)
        point.ppp_mode = config.ppp.mode
        point.sigma_i2 = interference_moments(point.scenario)[1]

    r_dim, l_taps = stats.n_antennas, stats.l_taps
    noise, sigma_i2, rho = ofdm.noise_variance, point.sigma_i2, ofdm.snr
    orthogonal = a_p.orthogonal_scale() is not None
    deltas = stats.eigenvalues_tap
    etas = np.clip(stats.eigenvalues_array, 0.0, None)

    if "ls" in names:
        est = ls_estimator(a_p)
        point.estimators["ls"] = lambda t, est=est: est.apply(t.y_pilots)
        point.analytic["ls"] = (
            mse_ls_pc(r_dim, l_taps, rho, k, sigma_i2, deltas) if orthogonal else None
        )
    if "llmmse" in names:
        est = llmmse_estimator(a_p, stats.r_tap, noise, sigma_i2)
        point.estimators["llmmse"] = lambda t, est=est: est.apply(t.y_pilots)
        point.analytic["llmmse"] = (
            mse_llmmse_pc(r_dim, deltas, rho, k, sigma_i2) if orthogonal else None
        )
    if "olmmse" in names:
        est = OlmmseEstimator(a_p, stats, noise, sigma_i2)
        point.estimators["olmmse"] = lambda t, est=est: est.apply(t.y_pilots)
        point.analytic["olmmse"] = (
            mse_olmmse_pc(etas, deltas, rho, k, sigma_i2) if orthogonal else None
        )
    if "dlmmse" in names:
        rounds = (config.dlmmse.d,) if d_values is None else tuple(d_values)
        network = DlmmseNetwork(
            build_neighborhoods(config.geometry),
            stats,
            a_p,
            noise,
            config.dlmmse.a,
            sigma_i2,
            config.dlmmse.share,
        )
        maps = dlmmse_linear_maps(network, max(rounds))
        for d in rounds:
            name = "dlmmse" if d_values is None else f"dlmmse@{d}"
            point.estimators[name] = partial(_apply_map, maps[d], r_dim, l_taps)
            point.analytic[name] = (
                linear_map_mse(maps[d], a_p, stats, noise, sigma_i2)
                if r_dim * l_taps <= MATERIALIZATION_CAP
                else None
            )
    if "dad" in names and point.scenario is None:
        neighborhoods = build_neighborhoods(config.geometry)
        point.estimators["dad"] = partial(
            _apply_dad, point, config.dlmmse.d, config.dlmmse.a, neighborhoods
        )
        point.analytic["dad"] = None
    return point


def _apply_map(w_map, r_dim, l_taps, trial):
    return (w_map @ trial.y_pilots.reshape(-1)).reshape(r_dim, l_taps)


def _apply_dad(point, d_iters, a_weight, neighborhoods, trial):
    return run_dad_lmmse(
        trial.y_full,
        point.pattern,
        point.a_p,
        point.stats,
        point.ofdm.noise_variance,
        point.constellation,
        d_iters,
        a_weight,
        neighborhoods=neighborhoods,
    ).h_hat


def draw_trial(point, rng):
    """
    One channel, one OFDM symbol and its noise, then the contamination.

    The transmitted symbol carries the pilots on the pilot tones and random
    data elsewhere; every antenna receives the same symbol.
    """
    taps = sample_channel(point.stats, rng).taps
    n = point.ofdm.n_subcarriers
    symbols = rng.choice(point.constellation, size=n)
    symbols[point.pattern.indices] = point.pattern.pilot_symbols
    noise = complex_normal(rng, (point.stats.n_antennas, n), point.ofdm.noise_variance)
    y_full = frequency_response(taps, n) * symbols + noise
    if point.scenario is not None:
        y_full[:, point.pattern.indices] += synthesize_pilot_contamination(
            point.scenario, point.stats, point.a_p, rng, point.ppp_mode
        )
    return Trial(taps, y_full[:, point.pattern.indices], y_full)


def run_trial(point, rng):
    """
    Squared error ``||h - h_hat||^2`` over the whole array for every estimator.

    All estimators see the same channel, noise and contamination.
    """
    trial = draw_trial(point, rng)
    return {
        name: float(np.sum(np.abs(trial.taps - estimate(trial)) ** 2))
        for name, estimate in point.estimators.items()
    }


def run_point(point, trials, seed, workers=1, trial_fn=run_trial):
    """
    Run ``trials`` paired trials on worker threads.

    Returns
    -------
    tuple
        ``({estimator: (mean, stderr)}, discarded trial count)``.

    """
    tasks, results = Queue(), Queue()
    collector = Collector(results)
    collector.start()

    for index in range(trials):
        tasks.put(index)
    for _ in range(workers):
        tasks.put(None)

    run = partial(trial_fn, point)
    threads = [TrialWorker(run, seed, tasks, results) for _ in range(workers)]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()

    collector.stop()
    collector.join()
    if collector.discarded:
        logger.warning("Discarded %d of %d trials.", len(collector.discarded), trials)
    return collector.summary(), len(collector.discarded)


def _rows(sweep, value, summary, analytic, rename=None):
    rows = []
    for name, (mse, stderr) in summary.items():
        rows.append(
            {
                sweep: value,
                "estimator": rename(name) if rename else name,
                "empirical_mse": mse,
                "analytic_mse": analytic.get(name),
                "stderr": stderr,
                "seconds": np.nan,
            }
        )
        logger.info(
            "%s=%s %-8s empirical %.6g analytic %s",
            sweep,
            value,
            name,
            mse,
            analytic.get(name),
        )
    return rows


def _table(sweep, rows):
    df = pd.DataFrame(rows, columns=[sweep] + RESULT_COLUMNS)
    df["analytic_mse"] = pd.to_numeric(df["analytic_mse"])
    return df


def _sweep(config, sweep, values, point_kwargs, estimators=None):
    rows, discarded = [], 0
    for value in values:
        point = build_point(config, **point_kwargs(value), estimators=estimators)
        summary, dropped = run_point(point, config.trials, config.seed, config.workers)
        rows.extend(_rows(sweep, value, summary, point.analytic))
        discarded += dropped
    return _table(sweep, rows), discarded


def _data_aided_sweep(config, sweep, values, point_kwargs):
    """Data-aided rows plus the paired gain over the pilot-only distributed estimate."""

    def paired_trial(point, rng):
        errors = run_trial(point, rng)
        errors["dad_gain"] = errors["dlmmse"] - errors["dad"]
        return errors

    rows, gains, discarded = [], [], 0
    for value in values:
        point = build_point(config, **point_kwargs(value), estimators=("dlmmse", "dad"))
        summary, dropped = run_point(
            point, config.dad_trials, config.seed, config.workers, paired_trial
        )
        discarded += dropped
        if not summary:
            continue
        gain, gain_stderr = summary.pop("dad_gain")
        gains.append({sweep: value, "gain": gain, "stderr": gain_stderr})
        rows.extend(_rows(sweep, value, {"dad": summary["dad"]}, point.analytic))
    return rows, pd.DataFrame(gains, columns=[sweep, "gain", "stderr"]), discarded


def _preset_iterations(config, **_):
    """MSE versus sharing rounds at 0 dB next to the localized and centralized ones."""
    snr = config.snr_db[0] if config.snr_db else ITERATION_SNR_DB
    point = build_point(
        config,
        snr,
        estimators=("llmmse", "olmmse", "dlmmse"),
        d_values=ITERATION_GRID,
    )
    summary, discarded = run_point(point, config.trials, config.seed, config.workers)
    rows = []
    for d in ITERATION_GRID:
        name = f"dlmmse@{d}"
        keys = ("llmmse", "olmmse", name)
        picked = {key: summary[key] for key in keys if key in summary}
        rows.extend(
            _rows("d", d, picked, point.analytic, rename=lambda n: n.split("@")[0])
        )
    return MseReport(1, {"d": _table("d", rows)}, discarded)


def _preset_awgn(config, **_):
    """MSE versus SNR without interference, then versus the number of pilots."""
    grid = config.snr_db or AWGN_SNR_DB
    batch = tuple(e for e in config.estimators if e != "dad")
    snr_table, discarded = _sweep(
        config, "snr_db", grid, lambda v: {"snr_db": v}, batch
    )
    pilots = [k for k in PILOT_GRID if config.channel.l <= k <= config.ofdm.n]
    k_table, dropped = _sweep(
        config,
        "k",
        pilots,
        lambda v: {"snr_db": PILOT_SNR_DB, "n_pilots": v},
        batch,
    )
    discarded += dropped
    tables = {"snr_db": snr_table, "k": k_table}
    if "dad" in config.estimators:
        rows, gain, dropped = _data_aided_sweep(
            config, "snr_db", grid, lambda v: {"snr_db": v}
        )
        tables["snr_db"] = pd.concat(
            [snr_table, _table("snr_db", rows)], ignore_index=True
        )
        tables["dad_gain"] = gain
        discarded += dropped
        rows, _, dropped = _data_aided_sweep(
            config, "k", pilots, lambda v: {"snr_db": PILOT_SNR_DB, "n_pilots": v}
        )
        tables["k"] = pd.concat([k_table, _table("k", rows)], ignore_index=True)
        discarded += dropped
    return MseReport(2, tables, discarded)


def _require_ppp(config, preset):
    if config.ppp is None:
        raise ScenarioMismatch(f"Preset {preset} needs PPP interferer settings.")


def _preset_moments(config, moment_samples=MOMENT_SAMPLES, **_):
    """Per-tone interference moments versus density, plus one sampled field."""
    _require_ppp(config, 3)
    rows = []
    for i, lam in enumerate(config.ppp.lambdas or MOMENT_LAMBDAS):
        scenario = config.ppp.scenario(lam)
        mean, var = interference_moments(scenario)
        rng = trial_rng(config.seed, i)
        samples = sample_interference(scenario, moment_samples, rng, 2)
        tone = samples[:, 0]
        cross = np.mean(tone * samples[:, 1].conj())
        emp_var = float(np.mean(np.abs(tone - tone.mean()) ** 2))
        rows.append(
            {
                "lambda": lam,
                "analytic_mean": mean,
                "empirical_mean": float(np.abs(tone.mean())),
                "mean_stderr": float(np.sqrt(emp_var / moment_samples)),
                "analytic_var": var,
                "empirical_var": emp_var,
                "tone_correlation": float(np.abs(cross) / emp_var) if emp_var else 0.0,
            }
        )
        logger.info(
            "lambda=%s variance analytic %.6g empirical %.6g", lam, var, emp_var
        )
    draw = sample_ppp(
        config.ppp.scenario(REALIZATION_LAMBDA), trial_rng(config.seed, len(rows))
    )
    positions = draw.positions
    realization = pd.DataFrame(
        {"x": positions[:, 0], "y": positions[:, 1], "radius": draw.radii}
    )
    return MseReport(
        3,
        {
            "lambda": pd.DataFrame(rows, columns=MOMENT_COLUMNS),
            "realization": realization,
        },
    )


def _preset_contamination(config, **_):
    """MSE versus SNR and versus density under pilot contamination."""
    _require_ppp(config, 4)
    batch = tuple(e for e in config.estimators if e != "dad")
    snr_table, discarded = _sweep(
        config,
        "snr_db",
        config.snr_db or PC_SNR_DB,
        lambda v: {"snr_db": v, "lam": PC_LAMBDA},
        batch,
    )
    lam_table, dropped = _sweep(
        config,
        "lambda",
        config.ppp.lambdas or PC_LAMBDAS,
        lambda v: {"snr_db": PC_LAMBDA_SNR_DB, "lam": v},
        batch,
    )
    return MseReport(4, {"snr_db": snr_table, "lambda": lam_table}, discarded + dropped)


def _median_seconds(func, repeats=TIMING_REPEATS):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        func()
        times.append(time.perf_counter() - start)
    return float(np.median(times))


def _preset_timing(config, **_):
    """
    Wall-clock of the centralized and distributed estimators versus array size.

    The centralized time includes building its gain. The distributed gains
    depend on the statistics only and are prepared before timing, so its time
    covers the local steps and the sharing rounds.
    """
    rows, counts = [], []
    snr = config.snr_db[0] if config.snr_db else ITERATION_SNR_DB
    for side in TIMING_SIDES:
        sized = config.replace(
            geometry=dataclasses.replace(config.geometry, m_rows=side, g_cols=side)
        )
        point = build_point(sized, snr, estimators=())
        r_dim = point.stats.n_antennas
        noise = point.ofdm.noise_variance
        shape = (r_dim, point.ofdm.n_pilots)
        y_all = complex_normal(trial_rng(config.seed, side), shape)
        central = partial(
            OlmmseEstimator, point.a_p, point.stats, noise, method="dense"
        )
        neighborhoods = build_neighborhoods(sized.geometry)
        network = DlmmseNetwork(
            neighborhoods, point.stats, point.a_p, noise, config.dlmmse.a
        ).prepare(config.dlmmse.d)
        timings = {
            "olmmse": _median_seconds(lambda: central().apply(y_all)),
            "dlmmse": _median_seconds(
                lambda: run_dlmmse(
                    y_all,
                    point.a_p,
                    point.stats,
                    noise,
                    config.dlmmse.d,
                    neighborhoods=neighborhoods,
                    network=network,
                )
            ),
        }
        for name, seconds in timings.items():
            rows.append(
                {
                    "r": r_dim,
                    "estimator": name,
                    "empirical_mse": np.nan,
                    "analytic_mse": np.nan,
                    "stderr": np.nan,
                    "seconds": seconds,
                }
            )
            logger.info("R=%d %-8s %.4f s", r_dim, name, seconds)
        ops = operation_counts(
            r_dim, config.channel.l, point.ofdm.n_pilots, config.dlmmse.d
        )
        for name, (mults, adds) in ops.items():
            counts.append(
                {
                    "r": r_dim,
                    "estimator": name,
                    "multiplications": mults,
                    "additions": adds,
                }
            )
    return MseReport(
        5,
        {
            "r": pd.DataFrame(rows, columns=["r"] + RESULT_COLUMNS),
            "operations": pd.DataFrame(
                counts, columns=["r", "estimator", "multiplications", "additions"]
            ),
        },
    )


_PRESETS = {
    1: _preset_iterations,
    2: _preset_awgn,
    3: _preset_moments,
    4: _preset_contamination,
    5: _preset_timing,
}


def parse_preset(preset):
    """Accept ``3``, ``"3"`` or ``"preset3"``."""
    text = str(preset).lower().replace("preset", "").strip()
    try:
        number = int(text)
    except ValueError:
        number = None
    if number not in _PRESETS:
        raise IncorrectPreset(
            f"Incorrect preset: '{preset}'\n"
            f"This can be: {', '.join(map(str, PRESETS))}."
        )
    return number


def finish_report(report, failed_checks=()):
    """Summarize the experiment run."""
    lines = [
        "\n{}".format("*" * 50),
        "\nSummary:",
        "\n\tPreset: '{}'.".format(report.preset),
        "\n\tGrid points: '{}'.".format(len(report.primary)),
        "\n\tDiscarded trials: '{}'.".format(report.discarded),
        "\n\tFailed checks: '{}'.".format(len(failed_checks)),
        "\n{}".format("*" * 50),
    ]
    print("".join(lines))


def run_experiment(preset, config, moment_samples=MOMENT_SAMPLES):
    """
    This is a main function to run one of the experiment presets.

    Parameters
    ----------
    preset : {1, 2, 3, 4, 5} or str
        1: MSE versus sharing rounds; 2: MSE versus SNR and pilot count
        without interference, including data-aided estimation;
        3: interference moments versus density; 4: MSE under pilot
        contamination versus SNR and density; 5: runtime versus array size.
    config : ExperimentConfig
    moment_samples : int
        Samples per density in preset 3.

    Returns
    -------
    MseReport

    """
    number = parse_preset(preset)
    logger.info(
        "Running preset %d on a %dx%d array, seed %d.",
        number,
        config.geometry.m_rows,
        config.geometry.g_cols,
        config.seed,
    )
    start = time.perf_counter()
    report = _PRESETS[number](config, moment_samples=moment_samples)
    logger.info("Preset %d finished in %.1f s.", number, time.perf_counter() - start)
    return report


def emit_csv(report, path):
    """
    Write the primary table to ``path`` and further tables next to it.

    Secondary tables go to ``<name>_<table>.csv``.
    """
    tables = list(report.tables.items())
    if not tables:
        tables = list(MseReport.empty(report.preset).tables.items())
    write_csv(tables[0][1], path)
    for name, df in tables[1:]:
        write_csv(df, sibling_path(path, name))


def _lookup(df, sweep, value, estimator):
    row = df[(df[sweep] == value) & (df["estimator"] == estimator)]
    return None if row.empty else row.iloc[0]


def _off(value, target, rtol):
    return abs(value - target) > rtol * target


def _check_oracles(df, sweep, names, tolerance=ORACLE_STDERRS):
    failed = []
    for _, row in df[df["estimator"].isin(names)].iterrows():
        if pd.isna(row["analytic_mse"]):
            continue
        if abs(row["empirical_mse"] - row["analytic_mse"]) > tolerance * row["stderr"]:
            failed.append(
                f"{row['estimator']} at {sweep}={row[sweep]}: empirical "
                f"{row['empirical_mse']:.6g} vs analytic {row['analytic_mse']:.6g}"
            )
    return failed


def _check_iterations(report, config):
    df = report.tables["d"]
    failed = []
    base, ref = _lookup(df, "d", 0, "dlmmse"), _lookup(df, "d", 0, "llmmse")
    if _off(base["empirical_mse"], ref["empirical_mse"], IDENTITY_RTOL):
        failed.append("distributed estimate without sharing differs from localized")
    curve = df[df["estimator"] == "dlmmse"].sort_values("d")
    mse, stderr = curve["empirical_mse"].to_numpy(), curve["stderr"].to_numpy()
    for i in range(1, len(mse)):
        if mse[i] > mse[i - 1] + stderr[i]:
            failed.append(f"MSE increases from D={i - 1} to D={i}")
    d3, opt = _lookup(df, "d", 3, "dlmmse"), _lookup(df, "d", 3, "olmmse")
    gap = 1 + OPTIMALITY_GAP
    if d3 is not None and d3["empirical_mse"] > gap * opt["empirical_mse"]:
        failed.append(
            f"D=3 MSE {d3['empirical_mse']:.6g} not within 10% of "
            f"centralized {opt['empirical_mse']:.6g}"
        )
    return failed


def _check_awgn(report, config):
    df = report.tables["snr_db"]
    failed = _check_oracles(df, "snr_db", ("ls", "llmmse", "olmmse"))
    gain = report.tables.get("dad_gain")
    if gain is not None:
        for _, row in gain.iterrows():
            significant = row["gain"] > ORACLE_STDERRS * row["stderr"]
            if row["snr_db"] >= PILOT_SNR_DB and not significant:
                failed.append(f"data-aided gain not significant at {row['snr_db']} dB")
        k_df, k = report.tables["k"], config.ofdm.k
        half = _lookup(k_df, "k", k // 2, "dad")
        full = _lookup(k_df, "k", k, "dlmmse")
        if half is not None and full is not None:
            if half["empirical_mse"] > (1 + HALF_PILOT_RTOL) * full["empirical_mse"]:
                failed.append("data-aided estimate with half the pilots falls behind")
    return failed


def _check_moments(report, config):
    failed = []
    for _, row in report.tables["lambda"].iterrows():
        if abs(row["empirical_mean"]) > ORACLE_STDERRS * row["mean_stderr"]:
            failed.append(f"interference mean not zero at lambda={row['lambda']}")
        if _off(row["empirical_var"], row["analytic_var"], MOMENT_VAR_RTOL):
            failed.append(f"interference variance off at lambda={row['lambda']}")
    return failed


def _contamination_floors(config):
    point = build_point(config, PC_SNR_DB[-1], lam=PC_LAMBDA, estimators=())
    stats, sigma_i2 = point.stats, point.sigma_i2
    deltas = stats.eigenvalues_tap
    r_dim = stats.n_antennas
    return {
        "ls": mse_ls_pc(r_dim, stats.l_taps, np.inf, 1, sigma_i2, deltas),
        "llmmse": mse_llmmse_pc_limit(r_dim, deltas, sigma_i2),
        "olmmse": mse_olmmse_pc_limit(
            np.clip(stats.eigenvalues_array, 0, None), deltas, sigma_i2
        ),
    }


def _check_contamination(report, config):
    failed = []
    df = report.tables["snr_db"]
    for _, row in df[df["estimator"].isin(("ls", "llmmse", "olmmse"))].iterrows():
        if row["snr_db"] > 30 or pd.isna(row["analytic_mse"]):
            continue
        if _off(row["empirical_mse"], row["analytic_mse"], PC_RTOL):
            failed.append(f"{row['estimator']} at {row['snr_db']} dB off its formula")
    top = df["snr_db"].max()
    if top >= PC_SNR_DB[-1]:
        for name, floor in _contamination_floors(config).items():
            row = _lookup(df, "snr_db", top, name)
            if row is not None and _off(row["empirical_mse"], floor, FLOOR_RTOL):
                failed.append(f"{name} does not reach its error floor")
    lam_df = report.tables["lambda"]
    for name, curve in lam_df.groupby("estimator"):
        curve = curve.sort_values("lambda")
        mse, stderr = curve["empirical_mse"].to_numpy(), curve["stderr"].to_numpy()
        if np.any(mse[1:] + stderr[1:] < mse[:-1]):
            failed.append(f"{name} MSE decreases with interferer density")
    return failed


def _check_timing(report, config):
    df = report.tables["r"].pivot(index="r", columns="estimator", values="seconds")
    ratios = (df["olmmse"] / df["dlmmse"]).to_numpy()
    if np.any(np.diff(ratios) <= 0):
        return [f"runtime ratio not increasing with R: {np.round(ratios, 3).tolist()}"]
    return []


_CHECKS = {
    1: _check_iterations,
    2: _check_awgn,
    3: _check_moments,
    4: _check_contamination,
    5: _check_timing,
}


def check_report(report, config):
    """Return the list of violated acceptance checks of a preset report."""
    failed = _CHECKS[report.preset](report, config)
    for msg in failed:
        logger.warning("Check failed: %s", msg)
    return failed


def trace_dlmmse(config, path, snr_db=None):
    """
    Write per-antenna squared errors after every sharing round of one trial.

    Columns: iteration, antenna, squared_error.
    """
    snr = snr_db if snr_db is not None else (config.snr_db or (ITERATION_SNR_DB,))[0]
    point = build_point(config, snr, estimators=())
    trial = draw_trial(point, trial_rng(config.seed, 0))
    rows = []

    def record(iteration, states):
        for state in states:
            diff = state.center_estimate() - trial.taps[state.antenna]
            rows.append(
                {
                    "iteration": iteration,
                    "antenna": state.antenna,
                    "squared_error": float(np.sum(np.abs(diff) ** 2)),
                }
            )

    run_dlmmse(
        trial.y_pilots,
        point.a_p,
        point.stats,
        point.ofdm.noise_variance,
        config.dlmmse.d,
        config.dlmmse.a,
        neighborhoods=build_neighborhoods(config.geometry),
        share=config.dlmmse.share,
        trace=record,
    )
    df = pd.DataFrame(rows, columns=["iteration", "antenna", "squared_error"])
    write_csv(df, path)
    return df
