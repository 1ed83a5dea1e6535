"""scikit-learn style wrappers around the portfolio solvers.

``fit(X)`` takes an ``(N, m)`` returns panel; ``predict(X)`` gives the
portfolio return of each row under the fitted weights.
"""
import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .admm import AdmmConfig, dadmm_solve, padmm_solve
from .core import DrMlsadProblem, build_scenario_model
from .ppdssn import ppa_solve
from .rwpi import DEFAULT_CV_GRID, choose_target_return, cv_radius, lsad_risk, rwpi_radius

SOLVERS = {
    "ppdssn": lambda prob, tol: ppa_solve(prob, tol=tol),
    "padmm": lambda prob, tol: padmm_solve(prob, AdmmConfig(tol=tol)),
    "dadmm": lambda prob, tol: dadmm_solve(prob, AdmmConfig(tol=tol)),
}


def solve(prob, solver="ppdssn", tol=1e-5):
    """Dispatch to one of ``ppdssn``, ``padmm``, ``dadmm``."""
    try:
        fn = SOLVERS[solver]
    except KeyError:
        raise ValueError(f"unknown solver {solver!r}") from None
    return fn(prob, tol)


class _PortfolioMixin:
    def predict(self, X):
        """Portfolio return of every row of ``X``."""
        check_is_fitted(self, "weights_")
        X = check_array(X)
        if X.shape[1] != self.weights_.size:
            raise ValueError(f"X has {X.shape[1]} assets, fitted with {self.weights_.size}")
        return X @ self.weights_

    def score(self, X, y=None):
        """Negative lower semi-absolute deviation of the portfolio on ``X``."""
        check_is_fitted(self, "weights_")
        return -lsad_risk(check_array(X), self.weights_)


class DrMlsadPortfolio(_PortfolioMixin, BaseEstimator):
    """Distributionally robust downside-risk portfolio.

    Parameters
    ----------
    epsilon : float or {"rwpi", "cv"}
        Wasserstein radius, or the rule used to pick it.
    rho : float, optional
        Return floor is ``rho + epsilon``.  By default ``rho`` is the target
        return of the minimum-risk portfolio minus ``epsilon``.
    solver : {"ppdssn", "padmm", "dadmm"}
    tol : float
        KKT tolerance.
    alpha_bar, scaling, seed
        Passed to :func:`drmlsad.rwpi.rwpi_radius`.
    cv_grid, cv_folds
        Passed to :func:`drmlsad.rwpi.cv_radius`.

    Attributes
    ----------
    weights_ : ndarray of shape (n_assets,)
    epsilon_, rho_, rho_bar_ : float
    report_ : SolveReport
    radius_ : RadiusEstimate or None
    """

    def __init__(self, epsilon="rwpi", rho=None, solver="ppdssn", tol=1e-5,
                 alpha_bar=0.05, scaling="theorem", seed=None,
                 cv_grid=DEFAULT_CV_GRID, cv_folds=5):
        self.epsilon = epsilon
        self.rho = rho
        self.solver = solver
        self.tol = tol
        self.alpha_bar = alpha_bar
        self.scaling = scaling
        self.seed = seed
        self.cv_grid = cv_grid
        self.cv_folds = cv_folds

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_samples=2)
        self.n_features_in_ = X.shape[1]
        self.radius_ = None
        self.rho_bar_ = choose_target_return(X) if self.rho is None else None
        if self.epsilon == "rwpi":
            rho_bar = self.rho_bar_ if self.rho_bar_ is not None else choose_target_return(X)
            self.radius_ = rwpi_radius(X, rho_bar, self.alpha_bar, seed=self.seed,
                                       scaling=self.scaling)
            eps = self.radius_.epsilon
        elif self.epsilon == "cv":
            eps = cv_radius(X, self.cv_grid, self.cv_folds, tol=self.tol)
        elif isinstance(self.epsilon, str):
            raise ValueError(f"unknown radius rule {self.epsilon!r}")
        else:
            eps = float(self.epsilon)
        rho = self.rho_bar_ - eps if self.rho is None else float(self.rho)
        prob = DrMlsadProblem(build_scenario_model(X), eps, rho)
        it, self.report_ = solve(prob, self.solver, self.tol)
        self.weights_ = it.x
        self.epsilon_, self.rho_ = eps, rho
        return self


class NaivePortfolio(_PortfolioMixin, BaseEstimator):
    """Equal weights ``1/m``."""

    def fit(self, X, y=None):
        X = check_array(X)
        self.n_features_in_ = X.shape[1]
        self.weights_ = np.full(X.shape[1], 1.0 / X.shape[1])
        return self
