"""Markov-switching simulation study: mean (sd) MLS and cumulative log score over seeds.

    python3 scripts/simulation_study.py --seeds 10 --levels markov_constant
"""

import argparse
import time

import numpy as np

from ldf.benchmarks import BestNConfig, best_n_run, bma_run, dma_run, simple_average_run
from ldf.core import LdfConfig, ldf_run
from ldf.evaluation import summarize_runs
from ldf.io import write_table
from ldf.simulation import LEVEL_KINDS, study_panel


def methods():
    out = [(f"DMA(alpha={a:g})", lambda p, a=a: dma_run(p, a, 1e-20)) for a in (0.95, 0.9, 0.8, 0.7, 0.6)]
    for code in ("ss", "sa"):
        for a in (1.0, 0.95, 0.9, 0.8):
            out.append((f"LDF2_{code}(alpha={a:g})", lambda p, a=a, code=code: ldf_run(p, LdfConfig.from_code(code, a))))
    out += [
        ("BMA", bma_run),
        ("Average", simple_average_run),
        ("Best-3(rw=5)", lambda p: best_n_run(p, BestNConfig(3, 5))),
    ]
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--levels", choices=LEVEL_KINDS, default="markov_constant")
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--calibration", type=int, default=0)
    ap.add_argument("--csv", help="write the summary table here")
    args = ap.parse_args()

    t0 = time.perf_counter()
    runs = {}
    for seed in range(args.seeds):
        panel = study_panel(args.levels, seed).panel
        for name, fn in methods():
            runs.setdefault(name, []).append(fn(panel).log_scores)
    rows = summarize_runs(runs, args.calibration)
    print(f"{'method':<24} {'MLS':>8} {'sd':>7} {'sum log p':>11} {'sd':>8}")
    for r in sorted(rows, key=lambda r: -r["mean_mls"]):
        print(
            f"{r['method']:<24} {r['mean_mls']:8.3f} {r['sd_mls']:7.3f} "
            f"{r['mean_sum_log_p']:11.1f} {r['sd_sum_log_p']:8.1f}"
        )
    print(f"({args.seeds} seeds, {time.perf_counter() - t0:.1f}s)")
    if args.csv:
        cols = ["method", "mean_mls", "sd_mls", "mean_sum_log_p", "sd_sum_log_p", "runs"]
        write_table(args.csv, cols, [[r[c] for c in cols] for r in rows])


if __name__ == "__main__":
    main()
