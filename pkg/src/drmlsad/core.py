"""Domain types and objective / KKT evaluation for the DR-MLSAD program.

The convex program solved throughout the package is::

    min_x  (1/2N) sum_i |a_i'x - eps| + (1/2N) sum_i (a_i'x - eps) + eps
    s.t.   e'x = 1, x >= 0, mu_hat'x >= rho + eps

with ``a_i = mu_hat - xi_i`` the rows of the deviation matrix ``A``.
"""
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .exceptions import InfeasibleProblemError, InvalidDataError
from .prox import HalfspaceSimplex, project_C, soft_threshold


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ReturnsDataset:
    """An ``N x m`` panel of per-period asset returns.

    Parameters
    ----------
    returns : array_like, shape (N, m)
        Period returns, one row per period.
    asset_names : sequence of str, optional
        Column labels; defaults to ``asset0 .. asset{m-1}``.
    period_labels : sequence of str, optional
        Opaque row labels (dates, typically).
    unit : {"percent", "fraction"}
        Unit of the stored values.  Formulas are unit-agnostic but ``eps``
        and ``rho`` must be given in the same unit.
    """

    returns: np.ndarray
    asset_names: Sequence[str] = None
    period_labels: Optional[Sequence[str]] = None
    unit: str = "fraction"

    def __post_init__(self):
        r = np.asarray(self.returns, dtype=float)
        if r.ndim != 2:
            raise InvalidDataError(f"returns must be 2-D, got shape {r.shape}")
        n, m = r.shape
        if n < 2 or m < 1:
            raise InvalidDataError(f"need N >= 2 and m >= 1, got N={n}, m={m}")
        if not np.all(np.isfinite(r)):
            raise InvalidDataError("returns contain non-finite values")
        if self.unit not in ("percent", "fraction"):
            raise InvalidDataError(f"unknown unit {self.unit!r}")
        names = self.asset_names
        if names is None:
            names = [f"asset{j}" for j in range(m)]
        names = tuple(str(s) for s in names)
        if len(names) != m:
            raise InvalidDataError(f"{len(names)} asset names for {m} columns")
        labels = self.period_labels
        if labels is not None:
            labels = tuple(str(s) for s in labels)
            if len(labels) != n:
                raise InvalidDataError(f"{len(labels)} period labels for {n} rows")
        object.__setattr__(self, "returns", _frozen(r))
        object.__setattr__(self, "asset_names", names)
        object.__setattr__(self, "period_labels", labels)

    @property
    def n_periods(self):
        return self.returns.shape[0]

    @property
    def n_assets(self):
        return self.returns.shape[1]

    def window(self, start, stop):
        """Rows ``start:stop`` as a new dataset."""
        labels = None if self.period_labels is None else self.period_labels[start:stop]
        return ReturnsDataset(self.returns[start:stop], self.asset_names, labels, self.unit)


@dataclass(frozen=True)
class ScenarioModel:
    """Sample mean ``mu_hat`` and deviation matrix ``A`` (rows ``mu_hat - xi_i``)."""

    mu_hat: np.ndarray
    A: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mu_hat", _frozen(self.mu_hat))
        object.__setattr__(self, "A", _frozen(self.A))

    @property
    def n_samples(self):
        return self.A.shape[0]

    @property
    def n_assets(self):
        return self.A.shape[1]


def build_scenario_model(data):
    """Mean-center a :class:`ReturnsDataset` into a :class:`ScenarioModel`."""
    r = data.returns if isinstance(data, ReturnsDataset) else np.asarray(data, dtype=float)
    mu = r.mean(axis=0)
    return ScenarioModel(mu, mu[None, :] - r)


@dataclass(frozen=True)
class DrMlsadProblem:
    """One instance ``(A, mu_hat, eps, rho)`` of the DR-MLSAD convex program.

    ``rho = -inf`` drops the return constraint.  Infeasible instances are
    rejected here so every solver can assume the projection is defined.
    """

    scenario: ScenarioModel
    epsilon: float
    rho: float
    b: float = field(init=False)

    def __post_init__(self):
        eps = float(self.epsilon)
        if not eps >= 0:
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "rho", float(self.rho))
        object.__setattr__(self, "b", float(self.rho) + eps)
        if not check_feasible(self):
            raise InfeasibleProblemError(
                f"max(mu_hat) = {self.scenario.mu_hat.max():.6g} < "
                f"rho + eps = {self.b:.6g}")

    @property
    def A(self):
        return self.scenario.A

    @property
    def mu_hat(self):
        return self.scenario.mu_hat

    @property
    def constraint_set(self):
        return HalfspaceSimplex(self.scenario.mu_hat, self.b)

    def to_dict(self):
        return {
            "n_samples": int(self.scenario.n_samples),
            "n_assets": int(self.scenario.n_assets),
            "epsilon": self.epsilon,
            "rho": self.rho if np.isfinite(self.rho) else None,
            "b": self.b if np.isfinite(self.b) else None,
        }


@dataclass(frozen=True)
class PrimalDualIterate:
    """Portfolio ``x``, auxiliary ``y = Ax - eps*e`` and multiplier ``u``."""

    x: np.ndarray
    y: np.ndarray
    u: np.ndarray


class Status(str, Enum):
    CONVERGED = "Converged"
    ITER_LIMIT = "IterLimit"
    INFEASIBLE = "Infeasible"


@dataclass
class SolveReport:
    solver_name: str
    outer_iterations: int
    inner_iterations: int
    kkt_residual: float
    objective: float
    wall_time: float
    status: Status
    tol: float = None
    trace: list = field(default_factory=list, repr=False)

    @property
    def iteration_label(self):
        """``"2(5)"`` style for PpdSsn, plain count otherwise."""
        if self.inner_iterations:
            return f"{self.outer_iterations}({self.inner_iterations})"
        return str(self.outer_iterations)

    def to_dict(self, include_trace=False):
        d = asdict(self)
        d["status"] = Status(self.status).value
        if not include_trace:
            d.pop("trace")
        return d


def check_feasible(prob):
    """``True`` iff the constraint set of ``prob`` is nonempty."""
    return bool(prob.scenario.mu_hat.max() >= prob.b)


def objective_value(x, prob):
    """Objective in the absolute-value form."""
    r = prob.A @ np.asarray(x, dtype=float) - prob.epsilon
    n = r.size
    return float(np.abs(r).sum() / (2 * n) + r.sum() / (2 * n) + prob.epsilon)


def objective_value_maxform(x, prob):
    """Equivalent form ``(1/N) sum max(0, a_i'x - eps) + eps``."""
    r = prob.A @ np.asarray(x, dtype=float) - prob.epsilon
    return float(np.maximum(r, 0.0).mean() + prob.epsilon)


def kkt_residuals(it, prob, sign=1.0):
    """Return ``(s1, s2, res2)``: the x-, y- and feasibility residuals.

    ``sign=-1`` gives the ADMM convention in which the multiplier ``u``
    enters with flipped sign.
    """
    x, y, u = (np.asarray(v, dtype=float) for v in (it.x, it.y, it.u))
    n = y.size
    su = sign * u
    ax = prob.A @ x
    nx, ny, nu, nax = (np.linalg.norm(v) for v in (x, y, u, ax))
    s1 = np.linalg.norm(x - project_C(x + prob.A.T @ su, prob.constraint_set)) / (1 + nx + nu)
    s2 = np.linalg.norm(y - soft_threshold(y - 1.0 / (2 * n) - su, 1.0 / (2 * n))) / (1 + ny + nu)
    res2 = np.linalg.norm(y - ax + prob.epsilon) / (1 + ny + nax)
    return float(s1), float(s2), float(res2)


def kkt_residual(it, prob, sign=1.0):
    """Relative KKT residual ``max(Res1, Res2)``."""
    return max(kkt_residuals(it, prob, sign))
