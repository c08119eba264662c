#!/usr/bin/env python3
"""Run the three synthetic benchmark presets and write one CSV each.

Usage:
    python3 scripts/run_fig1.py [--trials 1000] [--out results/]

Each CSV compares the empirical MSE of all seven sampling methods across
the configured sampling percentages; plot mse vs q_pct per method to
reproduce the benchmark figures.
"""

import argparse
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from gsample.harness import emit_results, load_config, run_monte_carlo  # noqa: E402

CONFIG_DIR = pathlib.Path(__file__).resolve().parents[1] / "configs"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=None,
                        help="override the Monte-Carlo trial count")
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument("--presets", nargs="*", default=["fig1a", "fig1b", "fig1c"])
    args = parser.parse_args()

    out_dir = pathlib.Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for preset in args.presets:
        config = load_config(CONFIG_DIR / f"{preset}.json")
        if args.trials is not None:
            config.trials = args.trials
        records = run_monte_carlo(config)
        path = out_dir / f"{preset}.csv"
        emit_results(records, path)
        print(f"{preset}: {len(records)} records -> {path}")
        for r in records:
            print(f"  {r.method:10s} q={r.q_pct:5.1f}%  mse={r.mse:.6g}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
