"""Fixed-level schedule: method comparison, LPDR against LDF2_ss and the average
discount factor chosen by the first layer over time.

    python3 scripts/fixed_schedule.py --seed 0 --out results/fixed
"""

import argparse
from pathlib import Path

import numpy as np

from ldf.benchmarks import BestNConfig, best_n_run, bma_run, dma_run, dml_run
from ldf.core import LdfConfig, ldf_run
from ldf.io import write_table
from ldf.simulation import study_panel


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=None, help="directory for lpdr.csv and alpha.csv")
    args = ap.parse_args()

    sim = study_panel("fixed", args.seed)
    panel = sim.panel
    ref = ldf_run(panel, LdfConfig.from_code("ss", 0.6))
    traces = [
        ref,
        ldf_run(panel, LdfConfig.from_code("sa", 0.9)),
        ldf_run(panel, LdfConfig.from_code("as", 0.9)),
        dma_run(panel, 0.5, 1e-20),
        dml_run(panel, (1.0, 0.99, 0.95, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.001)),
        bma_run(panel),
        best_n_run(panel, BestNConfig(3, 5)),
    ]
    for tr in traces:
        print(f"{tr.name:<24} MLS {tr.mls():8.3f}   LPDR(T) vs {ref.name}: {np.sum(tr.log_scores - ref.log_scores):9.1f}")

    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        L = np.column_stack([np.cumsum(tr.log_scores - ref.log_scores) for tr in traces])
        write_table(out / "lpdr.csv", ["t", *[tr.name for tr in traces]], [[t + 1, *L[t]] for t in range(panel.T)])
        alpha = ref.mean_alpha(0)
        write_table(out / "alpha.csv", ["t", "level", "mean_alpha"], [[t, sim.levels[t], alpha[t]] for t in range(panel.T)])


if __name__ == "__main__":
    main()
