import logging
import os

from mimo_ce.config import DESK
from mimo_ce.run_experiment import (
    PRESETS,
    AcceptanceCheckFailed,
    check_report,
    emit_csv,
    run_experiment,
)

# CHANGE THIS TO A VALID PATH!
out = os.path.join(os.getcwd(), "desk_results")

if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)
    os.makedirs(out, exist_ok=True)

    failed = {}
    for preset in PRESETS:
        report = run_experiment(preset, DESK)
        emit_csv(report, os.path.join(out, f"preset{preset}.csv"))
        failed[preset] = check_report(report, DESK)

    for preset, msgs in failed.items():
        status = "ok" if not msgs else "\n\t\t".join(msgs)
        print(f"\tpreset{preset} : {status}")

    if any(failed.values()):
        raise AcceptanceCheckFailed(
            f"Checks failed for presets {[p for p, m in failed.items() if m]}."
        )
