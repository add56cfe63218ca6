"""Run the bundled Monte Carlo scenarios and print one summary row each.

    python scripts/run_bound_validation.py [--workers 4] [--out results/]
"""

import argparse
import dataclasses
import json
from pathlib import Path

from resilient_recon import harness

HERE = Path(__file__).resolve().parent
SCENARIOS = ["static_sigma", "static_robust", "lti_window", "datadriven"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--trials", type=int, default=None)
    ap.add_argument("--out", type=Path, default=None, help="directory for per-trial CSV and summary JSON")
    args = ap.parse_args()

    print(f"{'scenario':<12} {'trials':>6} {'rate':>6} {'thresh':>7} {'clean':>6} {'mean err':>9} {'max err':>9}  delta")
    for name in SCENARIOS:
        sc = harness.load_config(HERE / "configs" / f"{name}.cfg")
        if args.trials:
            sc = dataclasses.replace(sc, trials=args.trials)
        results, s = harness.run_scenario(sc, workers=args.workers)
        delta = s.get("delta_n", s.get("delta_ng"))
        print(
            f"{name:<12} {s['trials']:>6} {s['satisfaction_rate']:>6.3f} {s['eta_threshold']:>7.4f} "
            f"{s['clean_safe_rate']:>6.3f} {s['mean_error']:>9.2e} {s['max_error']:>9.2e}  {delta}"
        )
        if args.out:
            args.out.mkdir(parents=True, exist_ok=True)
            (args.out / f"{name}.csv").write_text(harness.results_to_csv(results))
            (args.out / f"{name}.json").write_text(json.dumps(harness.to_jsonable(s), indent=1, sort_keys=True))


if __name__ == "__main__":
    main()
