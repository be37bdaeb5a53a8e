import logging
from queue import Queue

import numpy as np
import pytest

from mimo_ce import MimoCeError
from mimo_ce.collector import Collector
from mimo_ce.workers import TrialWorker, trial_rng


def _run(run_trial, trials, workers, seed=11):
    tasks, results = Queue(), Queue()
    collector = Collector(results)
    collector.start()
    for index in range(trials):
        tasks.put(index)
    for _ in range(workers):
        tasks.put(None)
    threads = [TrialWorker(run_trial, seed, tasks, results) for _ in range(workers)]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()
    collector.stop()
    collector.join()
    return collector


def _gaussian_trial(rng):
    return {"a": float(rng.standard_normal()), "b": float(rng.uniform())}


class TestTrialRng:
    def test_reproducible_and_independent(self):
        first = trial_rng(5, 3).standard_normal(4)
        assert np.array_equal(first, trial_rng(5, 3).standard_normal(4))
        assert not np.array_equal(first, trial_rng(5, 4).standard_normal(4))
        assert not np.array_equal(first, trial_rng(6, 3).standard_normal(4))


class TestCollector:
    def test_summary_independent_of_worker_count(self):
        single = _run(_gaussian_trial, 50, 1).summary()
        several = _run(_gaussian_trial, 50, 4).summary()
        assert single == several

    def test_errors_in_trial_order(self):
        errors = _run(_gaussian_trial, 20, 3).errors()
        expected = [trial_rng(11, i).standard_normal() for i in range(20)]
        assert np.allclose(errors["a"], expected)

    def test_summary_statistics(self):
        collector = _run(_gaussian_trial, 30, 2)
        values = collector.errors()["b"]
        mean, stderr = collector.summary()["b"]
        assert mean == pytest.approx(values.mean())
        assert stderr == pytest.approx(values.std(ddof=1) / np.sqrt(30))

    def test_failed_trials_are_discarded(self):
        def flaky(rng):
            value = rng.uniform()
            if value < 0.3:
                raise MimoCeError("estimator failed")
            return {"a": value}

        collector = _run(flaky, 40, 2)
        assert len(collector.discarded) + len(collector.results) == 40
        assert all(v >= 0.3 for v in collector.errors()["a"])

    def test_unexpected_errors_are_discarded(self, caplog):
        def broken(rng):
            if rng.uniform() < 0.5:
                raise RuntimeError("bug in trial")
            return {"a": 1.0}

        with caplog.at_level(logging.ERROR, logger="mimo_ce.workers"):
            collector = _run(broken, 20, 3)
        assert len(collector.discarded) + len(collector.results) == 20
        assert collector.discarded
        assert all(rec.exc_info for rec in caplog.records)

    def test_empty(self):
        assert _run(_gaussian_trial, 0, 2).summary() == {}
