"""Experiment configuration files (YAML).

Every mapping is checked against its dataclass fields and unknown keys are
rejected. A minimal ``simulate`` config::

    experiment: simulate
    seeds: 10                 # int n means seeds 0..n-1, or an explicit list
    calibration: 0
    panel:
      levels: markov_constant # fixed | markov_constant | markov_time_varying
      T: 2001
      K: 20
    methods:
      - {kind: dma, alpha: 0.95}
      - {kind: ldf, code: ss, alpha: 0.8}
      - {kind: best_n, n: 3, window: 5}

``combine`` reads ``panel: {csv: path}``. ``tvpvar`` and ``portfolio`` read
``data`` (a return CSV or a synthetic generator) and a ``universe`` of grids.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .core import DEFAULT_C, DEFAULT_GRID

EXPERIMENTS = ("simulate", "combine", "tvpvar", "portfolio")
METHOD_KINDS = ("dma", "bma", "dml", "ldf", "ldf_infinity", "average", "best_n", "ewma_rw")
LEVELS = ("fixed", "markov_constant", "markov_time_varying")


class ConfigFileError(ValueError):
    pass


def _build(cls, data, where: str):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigFileError(f"{where}: expected a mapping, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigFileError(f"{where}: unknown keys {unknown}")
    try:
        return cls(**data)
    except TypeError as e:
        raise ConfigFileError(f"{where}: {e}") from None


@dataclass
class PanelSource:
    csv: Optional[str] = None
    levels: str = "markov_constant"
    T: int = 2001
    K: int = 20
    phi: float = 0.9
    sigma_x: float = 0.3
    sigma_y: float = 0.3
    sigma_obs: float = 0.1

    def __post_init__(self):
        if self.csv is None and self.levels not in LEVELS:
            raise ConfigFileError(f"panel.levels must be one of {LEVELS}, got {self.levels!r}")


@dataclass
class MethodSpec:
    kind: str
    name: Optional[str] = None
    alpha: float = 1.0
    c: float = DEFAULT_C
    code: str = "ss"
    grid: list = field(default_factory=lambda: list(DEFAULT_GRID))
    convention: str = "alpha_i"
    score: str = "log"
    n: int = 3
    window: int = 5
    decay: float = 0.97
    initial_variance: Optional[float] = None
    tol: float = 1e-8
    max_layers: int = 200

    def __post_init__(self):
        if self.kind not in METHOD_KINDS:
            raise ConfigFileError(f"unknown method kind {self.kind!r}; choose from {METHOD_KINDS}")
        if self.score not in ("log", "focused_sharpe"):
            raise ConfigFileError(f"unknown score {self.score!r}")
        self.grid = [float(a) for a in self.grid]


@dataclass
class DataSource:
    """Return data for VAR experiments.

    ``csv`` columns: ``t, y_1..y_m`` then optional ``x<j>_<i>`` (regressor j of
    asset i) and ``xx<j>`` (common regressor j). Without ``csv`` a synthetic
    drifting-coefficient VAR is generated.
    """

    csv: Optional[str] = None
    m: int = 3
    p: int = 1
    T: int = 240
    state_sd: float = 0.01
    noise_sd: float = 0.3


@dataclass
class UniverseSpec:
    p: list = field(default_factory=lambda: [1])
    gamma1: list = field(default_factory=lambda: [0.0, 10.0])
    gamma2: list = field(default_factory=lambda: [0.0, 0.1, 0.5, 0.9])
    gamma3: list = field(default_factory=lambda: [0.0, 0.1, 0.5, 0.9])
    gamma_exog: list = field(default_factory=list)
    lam: list = field(default_factory=lambda: [1.0])
    alpha: list = field(default_factory=lambda: [1.0])
    kappa: list = field(default_factory=lambda: [0.97])


@dataclass
class PortfolioSpec:
    target_vol: float = 0.1
    transaction_cost: float = 0.0008
    periods_per_year: int = 12
    sharpe_window: int = 12


@dataclass
class ExperimentConfig:
    experiment: str
    methods: list
    seeds: object = 1
    calibration: int = 0
    output: Optional[str] = None
    weights: str = "first"
    panel: Optional[PanelSource] = None
    data: Optional[DataSource] = None
    universe: Optional[UniverseSpec] = None
    standardize: bool = True
    portfolio: Optional[PortfolioSpec] = None
    reference: Optional[str] = None
    base_dir: Path = field(default=Path("."), repr=False)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigFileError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        if isinstance(self.seeds, int):
            if self.seeds < 1:
                raise ConfigFileError("seeds must be positive")
            self.seeds = list(range(self.seeds))
        elif isinstance(self.seeds, list) and self.seeds and all(isinstance(s, int) for s in self.seeds):
            self.seeds = list(self.seeds)
        else:
            raise ConfigFileError("seeds must be a positive integer or a non-empty list of integers")
        if self.calibration < 0:
            raise ConfigFileError("calibration must be nonnegative")
        if self.weights not in ("first", "all", "none"):
            raise ConfigFileError("weights must be first, all or none")
        if not self.methods:
            raise ConfigFileError("at least one method is required")
        if self.experiment in ("simulate", "combine") and self.panel is None:
            self.panel = PanelSource()
        if self.experiment in ("tvpvar", "portfolio"):
            self.data = self.data or DataSource()
            self.universe = self.universe or UniverseSpec()
        if self.experiment == "portfolio":
            self.portfolio = self.portfolio or PortfolioSpec()
        if self.experiment == "combine" and (self.panel is None or self.panel.csv is None):
            raise ConfigFileError("combine needs panel.csv")

    def resolve(self, rel: Optional[str]) -> Optional[Path]:
        if rel is None:
            return None
        p = Path(rel)
        return p if p.is_absolute() else self.base_dir / p


def parse_config(data: dict, base_dir=".") -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigFileError("config must be a mapping")
    data = dict(data)
    methods = data.get("methods")
    if not isinstance(methods, list):
        raise ConfigFileError("methods must be a list")
    data["methods"] = [_build(MethodSpec, m, f"methods[{i}]") for i, m in enumerate(methods)]
    for key, cls in (("panel", PanelSource), ("data", DataSource), ("universe", UniverseSpec), ("portfolio", PortfolioSpec)):
        if key in data:
            data[key] = _build(cls, data[key], key)
    if "base_dir" in data:
        raise ConfigFileError("unknown keys ['base_dir']")
    cfg = _build(ExperimentConfig, data, "config")
    cfg.base_dir = Path(base_dir)
    for path in (cfg.panel and cfg.panel.csv, cfg.data and cfg.data.csv):
        if path is not None and not cfg.resolve(path).is_file():
            raise ConfigFileError(f"referenced file does not exist: {path}")
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigFileError(f"cannot read config {path}: {e}") from None
    return parse_config(data, base_dir=path.parent)
