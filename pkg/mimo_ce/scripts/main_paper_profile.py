import logging
import os

from mimo_ce.config import PAPER
from mimo_ce.run_experiment import emit_csv, run_experiment, trace_dlmmse

# CHANGE THIS TO A VALID PATH!
out = os.path.join(os.getcwd(), "paper_results")

if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)
    os.makedirs(out, exist_ok=True)

    config = PAPER.replace(trials=200, workers=4)
    for preset in (1, 2, 4):
        report = run_experiment(preset, config)
        emit_csv(report, os.path.join(out, f"preset{preset}.csv"))

    trace_dlmmse(config, os.path.join(out, "dlmmse_trace.csv"))
