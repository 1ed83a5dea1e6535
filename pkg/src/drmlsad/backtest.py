"""Rolling-window out-of-sample evaluation and performance metrics."""
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum

import numpy as np

from .core import DrMlsadProblem, ReturnsDataset, Status, build_scenario_model
from .exceptions import (EmptySetError, InfeasibleProblemError, InsufficientHistoryError,
                         WindowInfeasibleError)
from .ppdssn import ppa_solve
from .rwpi import DEFAULT_CV_GRID, choose_target_return, cv_radius, rwpi_radius, solve_erm

logger = logging.getLogger(__name__)


class Strategy(str, Enum):
    RWPI = "rwpi"
    CV = "cv"
    SAA = "saa"
    NAIVE = "naive"


@dataclass(frozen=True)
class BacktestConfig:
    tau: int = 90
    step: int = 1
    strategy: Strategy = Strategy.RWPI
    alpha_bar: float = 0.05
    cv_grid: tuple = DEFAULT_CV_GRID
    cv_folds: int = 5
    seed: int = 0
    cvar_level: float = 0.95
    tol: float = 1e-5
    scaling: str = "theorem"
    fixed_epsilon: float = None  # overrides the strategy's radius when set

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if self.tau < 2:
            raise ValueError("tau must be at least 2")
        if self.step < 1:
            raise ValueError("step must be at least 1")
        if not 0 < self.cvar_level < 1:
            raise ValueError("cvar_level must lie in (0, 1)")


@dataclass
class MetricsReport:
    mean: float
    variance: float
    sharpe: float
    turnover: float
    cvar: float
    wealth: np.ndarray = field(repr=False)
    unit: str = "fraction"
    cvar_level: float = 0.95
    n_periods: int = 0

    def to_dict(self):
        d = asdict(self)
        d["wealth"] = np.asarray(self.wealth).tolist()
        return d


def _to_fraction(r, unit):
    return np.asarray(r, dtype=float) / (100.0 if unit == "percent" else 1.0)


def cumulative_wealth(port_returns, unit="fraction"):
    """``W_0 = 1``, ``W_{t+1} = W_t (1 + r_{t+1})`` with ``r`` in fractions."""
    r = _to_fraction(port_returns, unit)
    return np.concatenate([[1.0], np.cumprod(1.0 + r)])


def cvar_sorted_tail(losses, level=0.95):
    """Mean of the worst ``(1 - level)`` fraction of losses, with a partial atom."""
    ls = np.sort(np.asarray(losses, dtype=float))[::-1]
    n = ls.size
    q = n * (1.0 - level)
    j = int(math.floor(q))
    total = ls[:j].sum()
    if j < n:
        total += (q - j) * ls[j]
    return float(total / q)


def turnover(weights, asset_returns, unit="fraction"):
    """Average L1 rebalancing against weights drifted by the realized returns."""
    w = np.asarray(weights, dtype=float)
    r = _to_fraction(asset_returns, unit)
    if w.shape[0] < 2:
        raise InsufficientHistoryError("turnover needs at least two weight vectors")
    grown = w[:-1] * (1.0 + r[:-1])
    drifted = grown / grown.sum(axis=1, keepdims=True)
    return float(np.abs(w[1:] - drifted).sum(axis=1).mean())


def compute_metrics(weights, realized, cvar_level=0.95, unit="fraction"):
    """Out-of-sample metrics.

    Parameters
    ----------
    weights : array_like, shape (n, m)
        ``w_t`` chosen before period ``t + 1``.
    realized : array_like, shape (n, m)
        Asset returns ``r_{t+1}`` earned by ``w_t``.
    """
    w = np.atleast_2d(np.asarray(weights, dtype=float))
    r = np.atleast_2d(np.asarray(realized, dtype=float))
    if w.shape != r.shape:
        raise ValueError(f"weights {w.shape} and returns {r.shape} differ in shape")
    n = w.shape[0]
    if n < 2:
        raise InsufficientHistoryError("need at least two out-of-sample periods")
    port = np.einsum("ij,ij->i", w, r)
    mean = float(port.mean())
    var = float(port.var(ddof=1))
    sharpe = mean / math.sqrt(var) if var > 0 else float("nan")
    return MetricsReport(
        mean=mean, variance=var, sharpe=sharpe, turnover=turnover(w, r, unit),
        cvar=cvar_sorted_tail(-port, cvar_level), wealth=cumulative_wealth(port, unit),
        unit=unit, cvar_level=cvar_level, n_periods=n)


def _window_radius(window, rho_bar, cfg, t):
    if cfg.fixed_epsilon is not None:
        return cfg.fixed_epsilon
    if cfg.strategy is Strategy.SAA:
        return 0.0
    if cfg.strategy is Strategy.CV:
        return cv_radius(window, cfg.cv_grid, cfg.cv_folds, tol=cfg.tol)
    x_erm = solve_erm(window, rho_bar)
    est = rwpi_radius(window, rho_bar, cfg.alpha_bar, seed=[cfg.seed, t],
                      scaling=cfg.scaling, x_erm=x_erm)
    return est.epsilon


def fit_window(window, cfg, t=0):
    """Weights for one estimation window; returns ``(w, record)``."""
    m = window.shape[1]
    if cfg.strategy is Strategy.NAIVE:
        return np.full(m, 1.0 / m), {"epsilon": None, "rho": None, "objective": None,
                                     "status": None}
    scen = build_scenario_model(window)
    rho_bar = choose_target_return(window, tol=min(cfg.tol, 1e-6))
    eps = _window_radius(window, rho_bar, cfg, t)
    for attempt in range(4):
        # SAA keeps rho = rho_bar; the DR strategies use rho = rho_bar - eps
        rho = rho_bar - eps
        try:
            it, rep = ppa_solve(DrMlsadProblem(scen, eps, rho), tol=cfg.tol)
        except (InfeasibleProblemError, EmptySetError):
            if attempt == 3:
                raise WindowInfeasibleError(t) from None
            eps *= 0.9
            continue
        if rep.status is not Status.CONVERGED:
            logger.warning("window %d: solver stopped with %s (R_kkt=%.2e)",
                           t, rep.status.value, rep.kkt_residual)
        return it.x, {"epsilon": eps, "rho": rho, "objective": rep.objective,
                      "status": rep.status.value}
    raise WindowInfeasibleError(t)


def rolling_backtest(data, cfg, window_log=None):
    """Refit every ``cfg.step`` periods on the last ``cfg.tau`` rows.

    Returns
    -------
    weights : ndarray, shape (T - tau, m)
        One vector per out-of-sample period (held for ``step`` periods).
    metrics : MetricsReport
    """
    r = data.returns if isinstance(data, ReturnsDataset) else np.asarray(data, dtype=float)
    unit = data.unit if isinstance(data, ReturnsDataset) else "fraction"
    T = r.shape[0]
    if cfg.tau >= T:
        raise InsufficientHistoryError(f"window exceeds data: tau={cfg.tau} >= T={T}")
    weights = []
    for t in range(cfg.tau, T, cfg.step):
        w, rec = fit_window(r[t - cfg.tau:t], cfg, t)
        for s in range(t, min(t + cfg.step, T)):
            weights.append(w)
            if window_log is not None:
                window_log.append({"t": s, **rec, "realized": float(w @ r[s])})
    weights = np.array(weights)
    return weights, compute_metrics(weights, r[cfg.tau:], cfg.cvar_level, unit)
