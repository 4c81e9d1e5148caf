"""Command line runner.

    ldf simulate  --config cfg.yaml --out results/ [--seed N] [--jobs J]
    ldf combine   --config cfg.yaml --out results/
    ldf tvpvar    --config cfg.yaml --out results/
    ldf portfolio --config cfg.yaml --out results/
    ldf report    --out results/ [--config cfg.yaml]

Outputs (CSV): scores.csv (seed, t, one log-score column per method),
summary.csv (mean / sd of MLS and of the cumulative log score over seeds),
weights.csv (combination weights over the base models), lpdr.csv when a
reference method is set, and wealth.csv / sharpe.csv for portfolio runs.
Files are staged in a scratch directory and only moved into place when the
whole run succeeds.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import shutil
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import benchmarks, core, simulation, tvpvar
from .config import ConfigFileError, ExperimentConfig, MethodSpec, load_config
from .density import MvGaussian, moments
from .evaluation import PortfolioConfig, focused_sharpe_score, lpdr, portfolio_backtest, summarize_runs
from .io import CsvFormatError, load_panel_csv, read_table, write_table
from .panel import ForecastPanel

log = logging.getLogger("ldf")


class RunError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# methods


def method_name(spec: MethodSpec) -> str:
    if spec.name:
        return spec.name
    k = spec.kind
    if k == "dma":
        return f"DMA(alpha={spec.alpha:g})"
    if k == "bma":
        return "BMA"
    if k == "dml":
        return f"DML(alpha={spec.alpha:g})"
    if k == "ldf":
        suffix = "" if spec.score == "log" else f",{spec.score}"
        return f"LDF{len(spec.code)}_{spec.code}(alpha={spec.alpha:g}{suffix})"
    if k == "ldf_infinity":
        return f"LDFinf_{spec.code[0]}(alpha={spec.alpha:g})"
    if k == "average":
        return "Average"
    if k == "best_n":
        return f"Best-{spec.n}(rw={spec.window})"
    return f"EWMA-RW(decay={spec.decay:g})"


def _score(spec: MethodSpec, pcfg: PortfolioConfig):
    if spec.score == "log":
        return core.LogScore()
    return focused_sharpe_score(pcfg or PortfolioConfig())


def run_method(spec: MethodSpec, panel: ForecastPanel, calibration: int = 0, pcfg=None) -> core.LdfTrace:
    name = method_name(spec)
    k = spec.kind
    if k == "dma":
        tr = benchmarks.dma_run(panel, spec.alpha, spec.c)
    elif k == "bma":
        tr = benchmarks.bma_run(panel)
    elif k == "dml":
        tr = benchmarks.dml_run(panel, spec.grid, spec.alpha)
    elif k == "ldf":
        cfg = core.LdfConfig.from_code(
            spec.code, spec.alpha, spec.grid, spec.c, score=_score(spec, pcfg), convention=spec.convention
        )
        tr = core.ldf_run(panel, cfg)
    elif k == "ldf_infinity":
        template = core.LayerSpec(spec.code[0], tuple(spec.grid))
        final = core.LdfConfig.from_code(spec.code[-1], spec.alpha, spec.grid, spec.c, score=_score(spec, pcfg))
        tr = core.ldf_infinity(panel, template, final, spec.tol, spec.max_layers).trace
    elif k == "average":
        tr = benchmarks.simple_average_run(panel)
    elif k == "best_n":
        tr = benchmarks.best_n_run(panel, benchmarks.BestNConfig(spec.n, spec.window))
    else:
        if spec.initial_variance is not None:
            v0 = spec.initial_variance
            init = None
        elif calibration >= 2:
            v0 = 1.0
            init = benchmarks.calibrated_initial_variance(panel.y, calibration)
            if np.ndim(init) == 0:
                v0, init = float(init), None
        else:
            v0, init = 1.0, None
        dens = benchmarks.ewma_rw_densities(panel.y, benchmarks.EwmaRwConfig(spec.decay, v0), init)
        single = ForecastPanel([[d] for d in dens], panel.y, model_names=["ewma_rw"])
        tr = benchmarks.simple_average_run(single)
    tr.name = name
    return tr


# ---------------------------------------------------------------------------
# panels


def simulated_panel(cfg: ExperimentConfig, seed: int) -> ForecastPanel:
    src = cfg.panel
    params = dataclasses.replace(
        simulation.study_params(src.T, src.K),
        phi_x=src.phi, sigma_x=src.sigma_x, sigma_y=src.sigma_y, sigma_obs=(src.sigma_obs,) * src.K,
    )
    return simulation.study_panel(src.levels, seed, params).panel


def load_return_csv(path):
    """(Y, asset, common) from a return CSV: t, y_1..y_m, x<j>_<i>..., xx<j>..."""
    header, rows = read_table(path)
    col = {h: i for i, h in enumerate(header)}
    if "t" not in col or "y_1" not in col:
        raise CsvFormatError(f"{path}: needs columns t and y_1..y_m")
    m = 0
    while f"y_{m + 1}" in col:
        m += 1
    n_x = 0
    while f"x{n_x + 1}_1" in col:
        n_x += 1
    n_xx = 0
    while f"xx{n_xx + 1}" in col:
        n_xx += 1
    ycols = [f"y_{i + 1}" for i in range(m)]
    xcols = [[f"x{j + 1}_{i + 1}" for j in range(n_x)] for i in range(m)]
    xxcols = [f"xx{j + 1}" for j in range(n_xx)]
    used = {"t", *ycols, *xxcols, *(c for r in xcols for c in r)}
    extra = [h for h in header if h not in used]
    if extra:
        raise CsvFormatError(f"{path}: unexpected columns {extra}")

    def num(r, c):
        try:
            return float(rows[r][col[c]])
        except (ValueError, IndexError):
            raise CsvFormatError(f"row {r + 1}, column {c}: not a number") from None

    for r in range(len(rows)):
        if rows[r][col["t"]] != str(r):
            raise CsvFormatError(f"row {r + 1}, column t: expected {r}")
    Y = np.array([[num(r, c) for c in ycols] for r in range(len(rows))])
    asset = np.array([[[num(r, c) for c in xc] for xc in xcols] for r in range(len(rows))]) if n_x else None
    common = np.array([[num(r, c) for c in xxcols] for r in range(len(rows))]) if n_xx else None
    return Y, asset, common


def var_data(cfg: ExperimentConfig, seed: int):
    src = cfg.data
    if src.csv is not None:
        return load_return_csv(cfg.resolve(src.csv))
    gamma = (1.0, 0.5, 0.5)
    spec = tvpvar.TvpVarSpec(src.m, src.p, 0, 0, gamma, lam=1.0, kappa=1.0)
    Y, _ = tvpvar.simulate_tvp_var(spec, src.T, src.state_sd, seed, sigma=src.noise_sd**2 * np.eye(src.m))
    return Y[src.p :], None, None


def universe_grids(cfg: ExperimentConfig, m: int, n_x: int, n_xx: int) -> tvpvar.UniverseGrids:
    u = cfg.universe
    if len(u.gamma_exog) != n_x + n_xx:
        raise RunError(f"universe.gamma_exog needs {n_x + n_xx} grids for this data, got {len(u.gamma_exog)}")
    return tvpvar.UniverseGrids(
        m=m, n_x=n_x, n_xx=n_xx, gamma1=tuple(u.gamma1), gamma2=tuple(u.gamma2), gamma3=tuple(u.gamma3),
        gamma_exog=tuple(tuple(g) for g in u.gamma_exog), lam=tuple(u.lam), alpha=tuple(u.alpha),
        kappa=tuple(u.kappa), p=tuple(int(p) for p in u.p),
    )


def var_panel(cfg: ExperimentConfig, seed: int):
    """Universe panel plus the standardisation used (mu, sd) for mapping back to raw returns."""
    Y, asset, common = var_data(cfg, seed)
    m = Y.shape[1]
    n_x = 0 if asset is None else asset.shape[2]
    n_xx = 0 if common is None else common.shape[1]
    s = cfg.calibration
    mu, sd = np.zeros(m), np.ones(m)
    if cfg.standardize:
        if s < 2:
            raise RunError("standardize needs a calibration prefix of at least two rows")
        Y, mu, sd = tvpvar.standardize(Y, s)
        if asset is not None:
            flat, _, _ = tvpvar.standardize(asset.reshape(asset.shape[0], -1), s)
            asset = flat.reshape(asset.shape)
        if common is not None:
            common, _, _ = tvpvar.standardize(common, s)
    specs = tvpvar.enumerate_universe(universe_grids(cfg, m, n_x, n_xx))
    panel = tvpvar.universe_panel(specs, Y, asset, common, calibration=s)
    # rows dropped for lags at the start
    offset = Y.shape[0] - panel.T
    return panel, mu, sd, offset


def _raw_density(d, mu, sd):
    mean, cov = moments(d)
    D = np.diag(sd)
    return MvGaussian(mu + sd * np.atleast_1d(mean), D @ np.atleast_2d(cov) @ D)


# ---------------------------------------------------------------------------
# per-seed work


def run_seed(cfg: ExperimentConfig, seed: int) -> dict:
    pcfg = None
    if cfg.portfolio is not None:
        p = cfg.portfolio
        pcfg = PortfolioConfig(p.target_vol, p.transaction_cost, p.periods_per_year, p.sharpe_window)
    mu = sd = None
    if cfg.experiment == "simulate":
        panel = simulated_panel(cfg, seed)
    elif cfg.experiment == "combine":
        panel = load_panel_csv(cfg.resolve(cfg.panel.csv))
    else:
        panel, mu, sd, _ = var_panel(cfg, seed)
    s = cfg.calibration
    if cfg.experiment in ("tvpvar", "portfolio"):
        # the panel starts after the lag window; calibration counts raw rows
        s = max(0, min(s, panel.T - 1))
    if s >= panel.T:
        raise RunError(f"calibration {s} leaves no evaluation periods (T={panel.T})")
    out = {"seed": seed, "names": [], "scores": [], "weights": [], "models": list(panel.model_names)}
    backtests = []
    for spec in cfg.methods:
        tr = run_method(spec, panel, s, pcfg)
        if not (np.all(np.isfinite(tr.log_scores)) and np.all(np.isfinite(tr.base_weights))):
            raise RunError(f"method {tr.name} produced non-finite output")
        out["names"].append(tr.name)
        out["scores"].append(np.asarray(tr.log_scores))
        out["weights"].append(tr.base_weights if spec.kind != "ewma_rw" else None)
        if pcfg is not None:
            dens = [_raw_density(tr.density(t), mu, sd) for t in range(s, panel.T)]
            raw = mu + sd * np.asarray(panel.y)[s:]
            backtests.append(portfolio_backtest(dens, raw, pcfg))
    out["backtests"] = backtests
    return out


def _seed_worker(args):
    cfg, seed = args
    return run_seed(cfg, seed)


# ---------------------------------------------------------------------------
# outputs


def _write_outputs(cfg: ExperimentConfig, results: list, stage: Path) -> list:
    names = results[0]["names"]
    if len(set(names)) != len(names):
        raise RunError(f"method names are not unique: {names}")
    s = cfg.calibration
    if cfg.experiment in ("tvpvar", "portfolio"):
        s = max(0, min(s, len(results[0]["scores"][0]) - 1))
    files = []

    rows = []
    for res in results:
        S = np.column_stack(res["scores"])
        rows += [[res["seed"], t, *S[t]] for t in range(S.shape[0])]
    write_table(stage / "scores.csv", ["seed", "t", *names], rows)
    files.append("scores.csv")

    per_method = {n: [res["scores"][i] for res in results] for i, n in enumerate(names)}
    summary = summarize_runs(per_method, s)
    cols = ["method", "mean_mls", "sd_mls", "mean_sum_log_p", "sd_sum_log_p", "runs"]
    write_table(stage / "summary.csv", cols, [[r[c] for c in cols] for r in summary])
    files.append("summary.csv")

    if cfg.weights != "none":
        keep = results if cfg.weights == "all" else results[:1]
        models = keep[0]["models"]
        rows = []
        for res in keep:
            for name, W in zip(res["names"], res["weights"]):
                if W is None:
                    continue
                rows += [[res["seed"], t, name, *W[t]] for t in range(W.shape[0])]
        write_table(stage / "weights.csv", ["seed", "t", "method", *models], rows)
        files.append("weights.csv")

    if cfg.reference is not None:
        if cfg.reference not in names:
            raise RunError(f"reference method {cfg.reference!r} is not among {names}")
        ref = names.index(cfg.reference)
        rows = []
        for res in results:
            L = np.column_stack([lpdr(sc, res["scores"][ref], s) for sc in res["scores"]])
            rows += [[res["seed"], s + 1 + i, *L[i]] for i in range(L.shape[0])]
        write_table(stage / "lpdr.csv", ["seed", "t", *names], rows)
        files.append("lpdr.csv")

    if cfg.experiment == "portfolio":
        wealth, sharpe = [], []
        for res in results:
            W = np.column_stack([b.wealth for b in res["backtests"]])
            wealth += [[res["seed"], s + i, *W[i]] for i in range(W.shape[0])]
            for name, b in zip(res["names"], res["backtests"]):
                sharpe.append([res["seed"], name, b.sharpe, b.gross_sharpe, str(b.zero_std).lower(), b.wealth[-1]])
        write_table(stage / "wealth.csv", ["seed", "t", *names], wealth)
        write_table(
            stage / "sharpe.csv", ["seed", "method", "sharpe", "gross_sharpe", "zero_std", "final_wealth"], sharpe
        )
        files += ["wealth.csv", "sharpe.csv"]
    return files


def run_experiment(cfg: ExperimentConfig, out, jobs: int = 1) -> list:
    """Run every seed, then write all outputs into ``out`` (or nothing on failure)."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    seeds = cfg.seeds
    if cfg.experiment == "combine" or (cfg.data is not None and cfg.data.csv is not None):
        # fixed input data: one run
        seeds = seeds[:1]
    stage = Path(tempfile.mkdtemp(prefix=".partial-", dir=out))
    try:
        if jobs > 1 and len(seeds) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as ex:
                results = list(ex.map(_seed_worker, [(cfg, s) for s in seeds]))
        else:
            results = [run_seed(cfg, s) for s in seeds]
        files = _write_outputs(cfg, results, stage)
        for f in files:
            shutil.move(str(stage / f), str(out / f))
    finally:
        shutil.rmtree(stage, ignore_errors=True)
    return [out / f for f in files]


def report(out, calibration: int = 0, reference=None) -> list:
    """Recompute summary.csv (and lpdr.csv) from an existing scores.csv."""
    out = Path(out)
    header, rows = read_table(out / "scores.csv")
    names = header[2:]
    by_seed = {}
    for r in rows:
        by_seed.setdefault(int(r[0]), []).append([float(v) for v in r[2:]])
    per_method = {n: [np.array(v)[:, i] for v in by_seed.values()] for i, n in enumerate(names)}
    summary = summarize_runs(per_method, calibration)
    cols = ["method", "mean_mls", "sd_mls", "mean_sum_log_p", "sd_sum_log_p", "runs"]
    write_table(out / "summary.csv", cols, [[r[c] for c in cols] for r in summary])
    if reference is not None:
        if reference not in names:
            raise RunError(f"reference method {reference!r} is not among {names}")
        lrows = []
        for seed, v in by_seed.items():
            v = np.array(v)
            ref = v[:, names.index(reference)]
            L = np.column_stack([lpdr(v[:, i], ref, calibration) for i in range(len(names))])
            lrows += [[seed, calibration + 1 + i, *L[i]] for i in range(L.shape[0])]
        write_table(out / "lpdr.csv", ["seed", "t", *names], lrows)
    return summary


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ldf", description="Online forecast combination experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    for cmd in ("simulate", "combine", "tvpvar", "portfolio", "report"):
        p = sub.add_parser(cmd)
        p.add_argument("--config", required=cmd != "report", help="YAML experiment config")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--seed", type=int, help="run this single seed instead of the configured ones")
        p.add_argument("--jobs", type=int, default=1, help="worker processes across seeds")
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config) if args.config else None
        if args.command == "report":
            if args.out is None and (cfg is None or cfg.output is None):
                raise ConfigFileError("report needs --out")
            out = args.out or cfg.resolve(cfg.output)
            rows = report(out, cfg.calibration if cfg else 0, cfg.reference if cfg else None)
            for r in rows:
                print(f"{r['method']:<32} {r['mean_mls']: .4f} ({r['sd_mls']:.4f})  {r['mean_sum_log_p']: .2f}")
            return 0
        if cfg.experiment != args.command:
            raise ConfigFileError(f"config is for {cfg.experiment!r}, not {args.command!r}")
        if args.seed is not None:
            cfg.seeds = [args.seed]
        if args.jobs < 1:
            raise ConfigFileError("--jobs must be at least 1")
        out = args.out or (cfg.resolve(cfg.output) if cfg.output else None)
        if out is None:
            raise ConfigFileError("no output directory: pass --out or set output in the config")
    except (ConfigFileError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    try:
        files = run_experiment(cfg, out, args.jobs)
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    for f in files:
        log.info("wrote %s", f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
