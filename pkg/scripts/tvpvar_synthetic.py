"""TVP-VAR universe on synthetic drifting-coefficient data: combination scores and
a selection-based portfolio backtest.

    python3 scripts/tvpvar_synthetic.py --seed 1 --T 240
"""

import argparse

import numpy as np

from ldf.benchmarks import EwmaRwConfig, bma_run, dma_run, ewma_rw_densities
from ldf.core import LdfConfig, ldf_run
from ldf.density import log_density
from ldf.evaluation import PortfolioConfig, focused_sharpe_score, portfolio_backtest
from ldf.tvpvar import TvpVarSpec, UniverseGrids, enumerate_universe, simulate_tvp_var, universe_panel

GRID = (1.0, 0.95, 0.9, 0.8)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--T", type=int, default=240)
    ap.add_argument("--calibration", type=int, default=24)
    args = ap.parse_args()

    gen = TvpVarSpec(3, 1, 0, 0, (1.0, 0.5, 0.5), lam=1.0, kappa=1.0)
    Y, _ = simulate_tvp_var(gen, args.T, 0.01, args.seed, sigma=0.09 * np.eye(3))
    Y = Y[1:]
    grids = UniverseGrids(m=3, gamma1=(0.0, 10.0), gamma2=(0.0, 0.1, 0.5), gamma3=(0.0, 0.1), lam=(0.95, 1.0))
    specs = enumerate_universe(grids)
    panel = universe_panel(specs, Y, calibration=args.calibration)
    s = args.calibration
    print(f"{len(specs)} models, {panel.T} periods, evaluation from t={s}")

    pcfg = PortfolioConfig()
    runs = [
        bma_run(panel),
        dma_run(panel, 0.95, 1e-20),
        ldf_run(panel, LdfConfig.from_code("ss", 0.95, GRID)),
        ldf_run(panel, LdfConfig.from_code("aa", 1.0, GRID)),
        ldf_run(panel, LdfConfig.from_code("aa", 1.0, GRID, score=focused_sharpe_score(pcfg)), name="LDF2_aa(focused)"),
    ]
    ewma = ewma_rw_densities(panel.y, EwmaRwConfig(0.97), np.cov(panel.y[:s], rowvar=False))
    ewma_mls = np.mean([log_density(d, y) for d, y in zip(ewma[s:], panel.y[s:])])
    print(f"{'EWMA-RW':<24} MLS {ewma_mls:8.3f}")
    for tr in runs:
        line = f"{tr.name:<24} MLS {tr.mls(s):8.3f}"
        if tr.name.startswith(("LDF2_aa", "DML")):
            bt = portfolio_backtest([tr.density(t) for t in range(s, panel.T)], panel.y[s:], pcfg)
            line += f"   Sharpe {bt.sharpe:5.2f} (gross {bt.gross_sharpe:5.2f})  wealth {bt.wealth[-1]:.2f}"
        print(line)


if __name__ == "__main__":
    main()
