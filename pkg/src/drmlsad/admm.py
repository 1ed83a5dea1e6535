"""First-order baselines: ADMM on the primal split and on the dual split.

Both solvers keep the multiplier of ``Ax - eps e - y = 0`` with the sign
opposite to the proximal point solver, so their KKT residual is evaluated
with ``sign=-1``.  The reported portfolio is always a point of C.
"""
import logging
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .core import PrimalDualIterate, SolveReport, Status, kkt_residuals, objective_value
from .prox import project_C, project_linf_ball, soft_threshold

logger = logging.getLogger(__name__)

GOLDEN = (1 + 5 ** 0.5) / 2


@dataclass(frozen=True)
class AdmmConfig:
    """Penalty ``rho_tilde`` (solver default when ``None``), step ``tau``."""

    rho_tilde: Optional[float] = None
    tau: float = 1.618
    max_iter: int = 50000
    tol: float = 1e-5

    def __post_init__(self):
        if not 0 < self.tau <= GOLDEN:
            raise ValueError(f"tau must lie in (0, {GOLDEN:.6f}]")
        if self.rho_tilde is not None and not self.rho_tilde > 0:
            raise ValueError("rho_tilde must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")


class GramSolver:
    """Cached solver for ``(I + A'A) v = r`` (``side="m"``) or ``(I + AA') v = r`` (``side="n"``).

    Factors whichever of ``I_m + A'A`` and ``I_N + AA'`` is smaller and uses
    the Sherman-Morrison-Woodbury identity when that is not the requested
    system.  ``method`` may force ``"direct"`` or ``"smw"``.
    """

    def __init__(self, A, side, method="auto"):
        n, m = A.shape
        if side not in ("m", "n"):
            raise ValueError("side must be 'm' or 'n'")
        own = m if side == "m" else n
        other = n if side == "m" else m
        if method == "auto":
            method = "smw" if other < own else "direct"
        self.A = A
        self.side = side
        self.method = method
        small = "n" if (side == "m") == (method == "smw") else "m"
        G = A @ A.T if small == "n" else A.T @ A
        G[np.diag_indices_from(G)] += 1.0
        self._factor = scipy.linalg.cho_factor(G, lower=True, check_finite=False)

    def _inv(self, r):
        return scipy.linalg.cho_solve(self._factor, r, check_finite=False)

    def solve(self, r):
        if self.method == "direct":
            return self._inv(r)
        A = self.A
        if self.side == "m":
            return r - A.T @ self._inv(A @ r)
        return r - A @ self._inv(A.T @ r)


def _finish(name, x, y, u, prob, k, rkkt, tol, t0, records):
    status = Status.CONVERGED if rkkt <= tol else Status.ITER_LIMIT
    rep = SolveReport(solver_name=name, outer_iterations=k, inner_iterations=0,
                      kkt_residual=rkkt, objective=objective_value(x, prob),
                      wall_time=time.perf_counter() - t0, status=status, tol=tol,
                      trace=records)
    return PrimalDualIterate(x, y, u), rep


def padmm_solve(prob, cfg=None, trace=False):
    """ADMM for ``min f(y) + delta_C(alpha)`` s.t. ``Ax - eps e = y``, ``x = alpha``."""
    cfg = cfg or AdmmConfig()
    rt = 0.01 if cfg.rho_tilde is None else cfg.rho_tilde
    tau, tol = cfg.tau, cfg.tol
    t0 = time.perf_counter()
    A = prob.A
    n, m = A.shape
    eps = prob.epsilon
    cset = prob.constraint_set
    gram = GramSolver(A, "m")
    x = np.zeros(m)
    y = np.zeros(n)
    alpha = project_C(x, cset)
    u = np.zeros(n)
    xi = np.zeros(m)
    records = []
    rkkt = np.inf
    k = 0
    while k < cfg.max_iter:
        x = gram.solve(A.T @ (y + eps - u / rt) + alpha - xi / rt)
        ax = A @ x
        y = soft_threshold(ax - eps - (1.0 / (2 * n) - u) / rt, 1.0 / (2 * n * rt))
        alpha = project_C(x + xi / rt, cset)
        r_y = ax - eps - y
        r_x = x - alpha
        u = u + tau * rt * r_y
        xi = xi + tau * rt * r_x
        k += 1
        rkkt = max(kkt_residuals(PrimalDualIterate(alpha, y, u), prob, sign=-1.0))
        if trace:
            records.append({"outer": k, "inner": 0, "kkt": rkkt})
        if rkkt <= tol and (
                np.linalg.norm(r_y) <= tol * (1 + np.linalg.norm(y) + np.linalg.norm(ax))
                and np.linalg.norm(r_x) <= tol * (1 + np.linalg.norm(x))):
            break
    logger.debug("padmm: %d iterations, R_kkt=%.3e", k, rkkt)
    return _finish("padmm", alpha, y, u, prob, k, rkkt, tol, t0, records)


def dadmm_solve(prob, cfg=None, trace=False):
    """ADMM on the dual, with ``x`` and ``y`` the multipliers of its two constraints."""
    cfg = cfg or AdmmConfig()
    rt = 1.0 if cfg.rho_tilde is None else cfg.rho_tilde
    tau, tol = cfg.tau, cfg.tol
    t0 = time.perf_counter()
    A = prob.A
    n, m = A.shape
    eps = prob.epsilon
    cset = prob.constraint_set
    half = 1.0 / (2 * n)
    gram = GramSolver(A, "n")
    x = np.zeros(m)
    y = np.zeros(n)
    xi = np.zeros(m)
    z = np.zeros(n)
    u = np.zeros(n)
    records = []
    rkkt = np.inf
    k = 0
    while k < cfg.max_iter:
        u = gram.solve(A @ (x / rt - xi) + z + half - y / rt - eps / rt)
        atu = A.T @ u
        v = x / rt - atu
        xi = v - project_C(rt * v, cset) / rt
        z = project_linf_ball(u - half + y / rt, half)
        r_x = -atu - xi
        r_y = u - half - z
        x = x + tau * rt * r_x
        y = y + tau * rt * r_y
        k += 1
        xc = project_C(x, cset)
        rkkt = max(kkt_residuals(PrimalDualIterate(xc, y, u), prob, sign=-1.0))
        if trace:
            records.append({"outer": k, "inner": 0, "kkt": rkkt})
        if rkkt <= tol and np.linalg.norm(r_y) <= tol * (1 + np.linalg.norm(z)):
            break
    logger.debug("dadmm: %d iterations, R_kkt=%.3e", k, rkkt)
    return _finish("dadmm", project_C(x, cset), y, u, prob, k, rkkt, tol, t0, records)
