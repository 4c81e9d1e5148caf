"""Online forecast combination with discounted scores and stacked meta-model layers."""

from .benchmarks import (
    BestNConfig,
    EwmaRwConfig,
    best_n_run,
    bma_run,
    dma_run,
    dml_run,
    ewma_rw_densities,
    simple_average_run,
)
from .core import (
    ARGMAX,
    DEFAULT_C,
    DEFAULT_GRID,
    SOFTMAX,
    ConfigError,
    CustomScore,
    LayerSpec,
    LdfConfig,
    LdfFilter,
    LdfTrace,
    LogScore,
    flatten_weights,
    ldf_infinity,
    ldf_run,
)
from .density import Gaussian, Mixture, MvGaussian, StudentT, log_density, mixture, moments
from .evaluation import (
    EvalReport,
    PortfolioConfig,
    focused_score,
    focused_sharpe_score,
    lpdr,
    mls,
    portfolio_backtest,
    portfolio_weights,
)
from .panel import ForecastPanel
