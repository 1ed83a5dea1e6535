"""Wasserstein radius selection.

The profile-inference rule estimates the multipliers of the empirical
risk-minimization problem, forms the covariance of a bounding function
``h(xi) = (1 + |lam1|)|xi| + |lam2| e + lam3`` and takes a Monte Carlo
quantile of ``||H||_inf`` with ``H ~ N(0, Sigma)``.  A k-fold
cross-validation rule over a fixed grid is provided as the alternative.
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from sklearn.model_selection import KFold

from .core import DrMlsadProblem, ReturnsDataset, ScenarioModel, build_scenario_model
from .exceptions import DegenerateDenominatorError, InfeasibleTargetError
from .ppdssn import ppa_solve

logger = logging.getLogger(__name__)

DEFAULT_CV_GRID = tuple(round(0.01 + 0.02 * i, 2) for i in range(8))
DENOM_TOL = 1e-10


@dataclass
class RadiusEstimate:
    epsilon: float
    eta_quantile: float
    alpha_bar: float
    lambda1: float
    lambda2: float
    lambda3: np.ndarray
    k_samples: int
    seed: Optional[int]
    scaling: str = "theorem"
    epsilon_over_sqrt_n: float = 0.0
    epsilon_times_sqrt_n: float = 0.0
    n_samples: int = 0
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        if self.epsilon < 0 or self.eta_quantile < 0:
            raise ValueError("epsilon and eta_quantile must be nonnegative")

    def to_dict(self):
        d = asdict(self)
        d["lambda3"] = np.asarray(self.lambda3).tolist()
        return d


def _returns(data):
    return data.returns if isinstance(data, ReturnsDataset) else np.asarray(data, dtype=float)


def choose_target_return(data, tol=1e-6):
    """Mean return of the minimum-downside-risk portfolio (no return floor)."""
    scen = build_scenario_model(_returns(data))
    prob = DrMlsadProblem(scen, 0.0, -np.inf)
    it, _ = ppa_solve(prob, tol=tol)
    return float(scen.mu_hat @ it.x)


def solve_erm(data, rho_bar, tol=1e-6):
    """Minimum-downside-risk portfolio with mean return exactly ``rho_bar``.

    Solved with the floor ``mu'x >= rho_bar``; when the floor is slack at the
    solution the problem is re-solved with the ceiling ``mu'x <= rho_bar``
    (written as ``(-mu)'x >= -rho_bar``), which is then active by convexity.
    """
    scen = build_scenario_model(_returns(data))
    mu = scen.mu_hat
    if not mu.min() - 1e-12 <= rho_bar <= mu.max() + 1e-12:
        raise InfeasibleTargetError(
            f"target {rho_bar:.6g} outside [{mu.min():.6g}, {mu.max():.6g}]")
    rho_bar = float(np.clip(rho_bar, mu.min(), mu.max()))
    it, _ = ppa_solve(DrMlsadProblem(scen, 0.0, rho_bar), tol=tol)
    x = it.x
    if mu @ x - rho_bar > 1e-8:
        flipped = ScenarioModel(-mu, scen.A)
        it, _ = ppa_solve(DrMlsadProblem(flipped, 0.0, -rho_bar), tol=tol)
        x = it.x
    return x


def estimate_multipliers(data, x_erm, rho_bar, support_tol=0.0):
    """Sample versions of the limit multipliers ``(lam1, lam2, lam3)``.

    ``lam1`` is computed per support index of ``x_erm`` and averaged over the
    indices whose denominator ``|mean_i - rho_bar|`` exceeds ``1e-10``.
    """
    xi = _returns(data)
    x = np.asarray(x_erm, dtype=float)
    mu = xi.mean(axis=0)
    below = (xi @ x - rho_bar) < 0
    e_xi1 = (xi * below[:, None]).mean(axis=0)
    xe = float(x @ e_xi1)
    support = np.flatnonzero(np.abs(x) > support_tol)
    denom = mu[support] - rho_bar
    ok = np.abs(denom) > DENOM_TOL
    if not ok.any():
        raise DegenerateDenominatorError(
            "every support asset has mean return equal to the target")
    lam1 = float(np.mean((-e_xi1[support][ok] + xe) / denom[ok]))
    lam2 = xe - lam1 * rho_bar
    lam3 = np.maximum(0.0, e_xi1 - lam1 * mu - lam2)
    return lam1, float(lam2), lam3


def linf_normal_quantile(cov, alpha_bar, k, rng):
    """Empirical ``(1 - alpha_bar)``-quantile of ``||H||_inf``, ``H ~ N(0, cov)``.

    The square root of ``cov`` comes from a symmetric eigendecomposition with
    negative eigenvalues set to zero, so singular covariances are fine.
    """
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    vals, vecs = np.linalg.eigh(0.5 * (cov + cov.T))
    root = vecs * np.sqrt(np.maximum(vals, 0.0))
    draws = rng.standard_normal((int(k), cov.shape[0])) @ root.T
    return float(np.quantile(np.abs(draws).max(axis=1), 1.0 - alpha_bar))


def rwpi_radius(data, rho_bar, alpha_bar=0.05, k=None, seed=None, scaling="theorem",
                x_erm=None):
    """Radius from the profile-inference rule.

    Parameters
    ----------
    scaling : {"theorem", "paper-literal"}
        ``eps = eta / sqrt(N)`` (the rate of the profile function) or
        ``eps = sqrt(N) * eta``.  Both values are stored on the result.
    k : int, optional
        Number of Gaussian draws, default ``floor(0.2 N)``.
    """
    xi = _returns(data)
    n = xi.shape[0]
    if n < 5:
        raise ValueError("need at least 5 samples")
    if not 0 < alpha_bar < 1:
        raise ValueError("alpha_bar must lie in (0, 1)")
    if scaling not in ("theorem", "paper-literal"):
        raise ValueError(f"unknown scaling {scaling!r}")
    k = int(k) if k is not None else int(math.floor(0.2 * n))
    warnings = []
    if x_erm is None:
        x_erm = solve_erm(xi, rho_bar)
    try:
        lam1, lam2, lam3 = estimate_multipliers(xi, x_erm, rho_bar)
    except DegenerateDenominatorError as exc:
        warnings.append(f"{exc}; lambda1 set to 0")
        xe_below = (xi @ x_erm - rho_bar) < 0
        e_xi1 = (xi * xe_below[:, None]).mean(axis=0)
        lam1 = 0.0
        lam2 = float(x_erm @ e_xi1)
        lam3 = np.maximum(0.0, e_xi1 - lam2)
    h = (1.0 + abs(lam1)) * np.abs(xi) + abs(lam2) + lam3
    cov = np.cov(h, rowvar=False)
    # identical samples: np.cov can leave rounding noise instead of exact zeros
    if not np.any(np.ptp(h, axis=0)):
        warnings.append("covariance is zero; radius set to 0")
        eta = 0.0
    else:
        eta = linf_normal_quantile(cov, alpha_bar, k, np.random.default_rng(seed))
    eps_th = eta / math.sqrt(n)
    eps_lit = math.sqrt(n) * eta
    for w in warnings:
        logger.warning(w)
    return RadiusEstimate(
        epsilon=eps_th if scaling == "theorem" else eps_lit, eta_quantile=eta,
        alpha_bar=alpha_bar, lambda1=lam1, lambda2=lam2, lambda3=lam3, k_samples=k,
        seed=seed, scaling=scaling, epsilon_over_sqrt_n=eps_th, epsilon_times_sqrt_n=eps_lit,
        n_samples=n, warnings=warnings)


def lsad_risk(returns, x):
    """Lower semi-absolute deviation ``mean(max(0, mean(r'x) - r'x))``."""
    port = np.asarray(returns, dtype=float) @ x
    return float(np.maximum(port.mean() - port, 0.0).mean())


def cv_radius(data, grid=DEFAULT_CV_GRID, folds=5, tol=1e-5):
    """Radius minimizing held-out downside risk over ``grid`` (k-fold, contiguous).

    Each training set fixes ``rho_bar`` by :func:`choose_target_return` and is
    solved with ``rho = rho_bar - eps``.  Ties go to the smallest radius.
    """
    xi = _returns(data)
    grid = sorted(float(g) for g in grid)
    if not grid:
        raise ValueError("grid must be nonempty")
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if len(grid) == 1:
        return grid[0]
    risk = np.zeros(len(grid))
    for train, test in KFold(n_splits=folds, shuffle=False).split(xi):
        scen = build_scenario_model(xi[train])
        rho_bar = choose_target_return(xi[train])
        for j, eps in enumerate(grid):
            it, _ = ppa_solve(DrMlsadProblem(scen, eps, rho_bar - eps), tol=tol)
            risk[j] += lsad_risk(xi[test], it.x)
    risk /= folds
    best = risk.min()
    j = int(np.flatnonzero(risk <= best + 1e-12 * max(1.0, abs(best)))[0])
    return grid[j]
