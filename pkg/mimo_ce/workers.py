""" Worker threads running Monte Carlo trials. """

import logging
from threading import Thread

import numpy as np

from mimo_ce import MimoCeError

logger = logging.getLogger(__name__)


def trial_rng(seed, trial):
    """Independent generator of one trial, derived from the master seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))


class TrialWorker(Thread):
    """
    A thread running trials taken from a task queue.

    Each task is a trial index; the worker derives the trial's generator
    from the master seed, runs the trial function and passes
    ``(index, errors)`` into the results queue for the ``Collector``.
    A trial that raises is reported with ``errors=None`` and never
    retried, so a failing trial cannot stall the collector.

    Parameters
    ----------
    run_trial : callable
        ``run_trial(rng) -> {estimator: squared error}``.
    seed : int
        Master seed.
    tasks : Queue
        Trial indices, terminated by ``None``.
    results : Queue
        A queue object to communicate with the collector.

    """

    def __init__(self, run_trial, seed, tasks, results):
        super().__init__(daemon=True)
        self.run_trial = run_trial
        self.seed = seed
        self.tasks = tasks
        self.results = results

    def run(self):
        """Run trials until the task queue is exhausted."""
        while True:
            index = self.tasks.get()
            if index is None:
                break
            try:
                errors = self.run_trial(trial_rng(self.seed, index))
            except (MimoCeError, np.linalg.LinAlgError, FloatingPointError) as err:
                logger.warning("Trial %d discarded: %s", index, err)
                errors = None
            except Exception:
                logger.exception("Trial %d discarded after an unexpected error.", index)
                errors = None
            self.results.put((index, errors))
