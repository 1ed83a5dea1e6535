"""Wasserstein distributionally robust mean-lower-semi-absolute-deviation
portfolio selection: solvers, radius selection and backtesting."""
from .admm import AdmmConfig, dadmm_solve, padmm_solve
from .backtest import (BacktestConfig, MetricsReport, Strategy, compute_metrics,
                       cumulative_wealth, rolling_backtest)
from .core import (DrMlsadProblem, PrimalDualIterate, ReturnsDataset, ScenarioModel,
                   SolveReport, Status, build_scenario_model, kkt_residual,
                   objective_value)
from .data import SyntheticSpec, bench_defaults, gen_synthetic, load_returns_csv, save_returns_csv
from .estimators import DrMlsadPortfolio, NaivePortfolio, solve
from .exceptions import *  # noqa: F401,F403
from .ppdssn import SsnConfig, ppa_solve
from .prox import HalfspaceSimplex, project_C, project_simplex, soft_threshold
from .rwpi import (RadiusEstimate, choose_target_return, cv_radius, estimate_multipliers,
                   rwpi_radius, solve_erm)

__version__ = "0.1.0"
