"""Depth at which stacked layers stop changing the base weights."""

import argparse

from ldf.core import ARGMAX, DEFAULT_GRID, SOFTMAX, LayerSpec, LdfConfig, ldf_infinity
from ldf.simulation import study_panel


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--tol", type=float, default=1e-8)
    args = ap.parse_args()

    panel = study_panel("markov_constant", args.seed).panel
    for op, final in [(SOFTMAX, LdfConfig.dma(0.9)), (ARGMAX, LdfConfig.from_code("a", 1.0, c=0.0))]:
        res = ldf_infinity(panel, LayerSpec(op, DEFAULT_GRID), final, tol=args.tol)
        deltas = " ".join(f"{d:.1e}" for d in res.deltas)
        print(f"{op:<8} converged={res.converged} depth={res.depth} MLS={res.trace.mls():.3f}")
        print(f"         deltas: {deltas}")


if __name__ == "__main__":
    main()
