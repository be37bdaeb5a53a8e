import logging
from threading import Thread

import numpy as np

logger = logging.getLogger(__name__)


class Collector(Thread):
    """
    Collects per-trial squared errors.

    This thread monitors a queue fed by trial workers. Every item is a
    ``(trial_index, errors)`` pair where ``errors`` maps an estimator name to
    the squared error of that trial, or is ``None`` for a discarded trial.
    Results are reduced in trial order so that the summary does not depend
    on which worker finished first.

    Parameters
    ----------
    queue : Queue
        A queue object to communicate with worker threads.

    """

    def __init__(self, queue):
        super().__init__()
        self._running = False
        self.queue = queue
        self.results = {}
        self.discarded = []

    def stop(self):
        """Stop monitoring."""
        self.queue.put("DONE")

    def run(self):
        """Wait for queue updates and store results."""
        self._running = True

        while self._running:
            res = self.queue.get()

            if res == "DONE":
                break

            index, errors = res
            if errors is None:
                self.discarded.append(index)
            else:
                self.results[index] = errors

    def errors(self):
        """Squared errors per estimator, ordered by trial index."""
        ordered = [self.results[i] for i in sorted(self.results)]
        names = ordered[0].keys() if ordered else []
        return {name: np.array([trial[name] for trial in ordered]) for name in names}

    def summary(self):
        """
        Reduce collected errors.

        Returns
        -------
        dict
            ``{estimator: (mean, standard error)}``; the standard error is
            NaN when fewer than two trials survived.

        """
        out = {}
        for name, values in self.errors().items():
            stderr = np.nan
            if len(values) > 1:
                stderr = values.std(ddof=1) / np.sqrt(len(values))
            out[name] = (float(values.mean()), float(stderr))
        return out
