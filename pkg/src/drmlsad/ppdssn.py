"""Preconditioned proximal point method with a semismooth Newton inner solver.

Outer loop (proximal point on the primal, preconditioned by
``I + (sigma/gamma) A'A``)::

    u+ ~ argmin_u psi_k(u)
    x+ = Pi_C(x + sigma A'u+)
    y+ = soft(A x - eps e - gamma (e/2N + u+), gamma/2N)

The inner problem is smooth and convex; its gradient is
``-eps e + A Pi_C(x + sigma A'u) - soft(A x - eps e - gamma(e/2N + u), gamma/2N)``
and a generalized Hessian is ``sigma A N0 A' + gamma U``.
"""
import logging
import time
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import LinearOperator, cg

from .core import (PrimalDualIterate, SolveReport, Status, kkt_residuals,
                   objective_value)
from .exceptions import IndefiniteSystemError, LineSearchStall
from .jacobian import apply_N0, assemble_ANAt, l1_prox_jacobian, projC_hs_jacobian
from .prox import project_C, project_C_multiplier, soft_threshold

logger = logging.getLogger(__name__)

SIGMA0 = 7.6
GAMMA0 = 9400.0


@dataclass(frozen=True)
class PpaState:
    sigma: float
    gamma: float
    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    outer_iter: int = 0

    def __post_init__(self):
        if not (self.sigma > 0 and self.gamma > 0):
            raise ValueError("sigma and gamma must be positive")


@dataclass(frozen=True)
class SsnConfig:
    """Inner-solver parameters.

    ``reg_rule="experimental"`` uses ``eps_j = max(reg_floor, reg_scale*||g||)``;
    ``reg_rule="algorithm"`` uses ``eps_j = upsilon1 * min(upsilon2, ||g||)``.
    """

    vartheta: float = 1e-4
    varrho: float = 0.5
    bar_varrho: float = 0.5
    bar_tau: float = 1.0
    upsilon1: float = 2.0
    upsilon2: float = 0.5
    reg_rule: str = "experimental"
    reg_floor: float = 1e-6
    reg_scale: float = 100.0
    max_inner: int = 200
    cg_switch_n: int = 3000
    cg_rtol: float = 1e-8  # CG also stops no later than this relative residual
    stopping: str = "kkt"  # or "gap" for the duality-gap criteria

    def __post_init__(self):
        if not 0 < self.vartheta < 0.5:
            raise ValueError("vartheta must lie in (0, 1/2)")
        if not 0 < self.varrho < 1 or not 0 < self.bar_varrho < 1:
            raise ValueError("varrho and bar_varrho must lie in (0, 1)")
        if not 0 < self.bar_tau <= 1:
            raise ValueError("bar_tau must lie in (0, 1]")
        if not (self.upsilon1 > 1 and 0 < self.upsilon2 < 1):
            raise ValueError("need upsilon1 > 1 and upsilon2 in (0, 1)")
        if self.reg_rule not in ("experimental", "algorithm"):
            raise ValueError(f"unknown reg_rule {self.reg_rule!r}")
        if self.stopping not in ("kkt", "gap"):
            raise ValueError(f"unknown stopping rule {self.stopping!r}")


class _Eval:
    """Everything computed at one dual point ``u``; reused by the Jacobian."""

    __slots__ = ("u", "psi", "psi_err", "grad", "zhat", "p", "lam", "w", "q")


def _evaluate(u, state, prob, with_psi=True):
    A = prob.A
    n = A.shape[0]
    eps = prob.epsilon
    sigma, gamma = state.sigma, state.gamma
    x = state.x
    c = A @ x - eps
    s = A.T @ u
    zhat = x + sigma * s
    p, lam = project_C_multiplier(zhat, prob.constraint_set)
    w = c - gamma * (1.0 / (2 * n) + u)
    t = gamma / (2 * n)
    q = soft_threshold(w, t)
    ev = _Eval()
    ev.u, ev.zhat, ev.p, ev.lam, ev.w, ev.q = u, zhat, p, lam, w, q
    ev.grad = -eps + A @ p - q
    if with_psi:
        # the two Moreau envelopes folded so no O(gamma) terms cancel
        dp = p - x
        terms = (s @ p, -(dp @ dp) / (2 * sigma), (q @ q) / (2 * gamma),
                 -(c @ c) / (2 * gamma), -eps * (1.0 + u.sum()))
        ev.psi = float(sum(terms))
        # rough bound on the floating-point error of psi
        ev.psi_err = 16 * np.finfo(float).eps * float(sum(abs(t) for t in terms))
    else:
        ev.psi = ev.psi_err = None
    return ev


def psi_value(u, state, prob):
    """Value of the dual subproblem objective ``psi_k(u)``."""
    return _evaluate(np.asarray(u, dtype=float), state, prob).psi


def psi_grad(u, state, prob):
    """Gradient of ``psi_k`` at ``u``."""
    return _evaluate(np.asarray(u, dtype=float), state, prob, with_psi=False).grad


def primal_value(x, y, state, prob):
    """``f_k(x, y)`` without the indicator terms."""
    n = y.size
    c = prob.A @ state.x - prob.epsilon
    dx = x - state.x
    dy = y - c
    return float(y.sum() / (2 * n) + np.abs(y).sum() / (2 * n) + prob.epsilon
                 + (dx @ dx) / (2 * state.sigma) + (dy @ dy) / (2 * state.gamma))


def augmented_gap(it, u, state, prob):
    """``f_k(x, Ax - eps e) + psi_k(u)``; nonnegative by weak duality.

    ``it.x`` is assumed to lie in C; ``y`` is replaced by ``Ax - eps e`` so
    the primal point is feasible for the proximal subproblem.
    """
    y = prob.A @ it.x - prob.epsilon
    return primal_value(it.x, y, state, prob) + psi_value(u, state, prob)


def regularization(gnorm, cfg):
    if cfg.reg_rule == "experimental":
        return max(cfg.reg_floor, max(1e-8, cfg.reg_scale * gnorm))
    return max(cfg.upsilon1 * min(cfg.upsilon2, gnorm), 1e-12)


def newton_system_solve(Vj_parts, eps_j, rhs, cfg):
    """Solve ``(sigma A N0 A' + gamma U + eps_j I) d = rhs``.

    ``Vj_parts`` is ``(A, hs_jacobian, l1_jacobian, sigma, gamma)``.
    Dense Cholesky for ``N <= cfg.cg_switch_n``, matrix-free CG otherwise.
    """
    A, jac, ujac, sigma, gamma = Vj_parts
    n = A.shape[0]
    rhs = np.asarray(rhs, dtype=float)
    diag = gamma * ujac.active
    if n <= cfg.cg_switch_n:
        V = sigma * assemble_ANAt(A, jac) if jac.k2.size else np.zeros((n, n))
        V[np.diag_indices(n)] += diag
        for attempt, e in enumerate((eps_j, 10.0 * eps_j)):
            M = V.copy()
            M[np.diag_indices(n)] += e
            try:
                factor = scipy.linalg.cho_factor(M, lower=True, check_finite=False)
            except np.linalg.LinAlgError:
                logger.debug("Cholesky failed with eps_j=%g", e)
                continue
            return scipy.linalg.cho_solve(factor, rhs, check_finite=False)
        raise IndefiniteSystemError(f"Newton matrix not positive definite (eps_j={eps_j:g})")

    def matvec(v):
        return sigma * (A @ apply_N0(jac, A.T @ v)) + (diag + eps_j) * v

    op = LinearOperator((n, n), matvec=matvec, dtype=float)
    gnorm = np.linalg.norm(rhs)
    bound = min(cfg.bar_varrho, gnorm ** (1 + cfg.bar_tau), cfg.cg_rtol * gnorm)
    d, info = cg(op, rhs, rtol=0.0, atol=bound, maxiter=max(10 * n, 100))
    if info < 0:
        raise IndefiniteSystemError("CG breakdown")
    return d


def ssn_solve(u0, state, prob, cfg, tol_inner, stop=None, trace=None):
    """Semismooth Newton method for ``min_u psi_k(u)``.

    Parameters
    ----------
    u0 : ndarray
        Starting dual point (warm start).
    tol_inner : float
        Absolute tolerance on ``||grad psi||``.
    stop : callable, optional
        ``stop(ev) -> bool`` checked at every iterate; used by the outer loop
        to end the inner solve as soon as the outer test already passes.
    trace : list, optional
        Receives one dict per inner iteration.

    Returns
    -------
    u : ndarray
    inner_iters : int
    """
    u = np.array(u0, dtype=float)
    ev = _evaluate(u, state, prob)
    A = prob.A
    n = A.shape[0]
    j = 0
    while True:
        g = ev.grad
        gnorm = float(np.linalg.norm(g))
        if gnorm <= tol_inner or (stop is not None and stop(ev)):
            break
        if j >= cfg.max_inner:
            break
        jac = projC_hs_jacobian(ev.zhat, prob.constraint_set, point=(ev.p, ev.lam))
        ujac = l1_prox_jacobian(ev.w, state.gamma / (2 * n))
        eps_j = regularization(gnorm, cfg)
        d = newton_system_solve((A, jac, ujac, state.sigma, state.gamma), eps_j, -g, cfg)
        slope = float(g @ d)
        if slope >= 0:
            # inexact solve lost descent; fall back to steepest descent
            d = -g
            slope = -gnorm ** 2
        alpha = 1.0
        while True:
            trial = _evaluate(u + alpha * d, state, prob)
            if trial.psi - ev.psi <= cfg.vartheta * alpha * slope + ev.psi_err:
                break
            alpha *= cfg.varrho
            if alpha < 1e-12:
                raise LineSearchStall(
                    f"step underflow at inner iteration {j} (||grad||={gnorm:.3e})")
        u = u + alpha * d
        ev = trial
        j += 1
        if trace is not None:
            trace.append({"inner": j, "psi": ev.psi,
                          "grad_norm": float(np.linalg.norm(ev.grad)),
                          "step": alpha, "eps_j": eps_j})
    return u, j


def adapt_parameters(state, s1, s2, res2):
    """Adaptive update of ``(sigma, gamma)`` from the latest residuals."""
    res1 = max(s1, s2)
    if res1 <= res2:
        if s2 > s1:
            r1, r2 = 0.9, 1.2
        elif s2 == s1:
            r1, r2 = 0.95, 1.3
        else:
            r1, r2 = 0.98, 1.4
        sigma = max(1e-3, r1 * state.sigma)
        gamma = min(1e6, r2 * state.gamma)
    else:
        if s2 < s1 and s1 > 1.5 * res2:
            r1 = 1.02
        elif 1.5 * res2 > s1 and s1 > s2:
            r1 = 1.05
        elif s2 > s1 and s1 > 1.1 * res2:
            r1 = 1.03
        else:
            r1 = 1.01
        if s2 > s1 and s2 > 1.5 * res2:
            r2 = 1.2
        elif 1.5 * res2 >= s2 and s2 == s1:
            r2 = 1.15
        elif s2 < s1 and s2 > 1.1 * res2:
            r2 = 1.1
        else:
            r2 = 1.0
        sigma = max(1e-2, r1 * state.sigma)
        gamma = max(2e6, r2 * state.gamma)
    return replace(state, sigma=sigma, gamma=gamma)


def _outer_candidate(ev, state, prob):
    """``(x+, y+)`` implied by the dual point in ``ev``."""
    n = prob.A.shape[0]
    return ev.p, soft_threshold(ev.w, state.gamma / (2 * n))


def ppa_solve(prob, tol=1e-5, cfg=None, max_outer=500, sigma0=SIGMA0,
              gamma0=GAMMA0, x0=None, u0=None, trace=False):
    """Solve a :class:`DrMlsadProblem` with the PpdSsn method.

    Returns
    -------
    (PrimalDualIterate, SolveReport)
    """
    cfg = cfg or SsnConfig()
    t0 = time.perf_counter()
    A = prob.A
    n, m = A.shape
    eps = prob.epsilon
    cset = prob.constraint_set
    x = project_C(np.zeros(m) if x0 is None else np.asarray(x0, float), cset)
    u = np.zeros(n) if u0 is None else np.array(u0, dtype=float)
    y = A @ x - eps
    state = PpaState(sigma0, gamma0, x, y, u, 0)
    records = []
    inner_total = 0
    s1, s2, res2 = kkt_residuals(PrimalDualIterate(x, y, u), prob)
    rkkt = max(s1, s2, res2)

    k = 0
    while rkkt > tol and k < max_outer:
        outer_k = k

        def stop(ev):
            xp, yp = _outer_candidate(ev, state, prob)
            if max(kkt_residuals(PrimalDualIterate(xp, yp, ev.u), prob)) <= tol:
                return True
            if cfg.stopping == "gap":
                return _gap_test(ev, xp, state, prob, outer_k)
            # relative primal infeasibility of the candidate, loosened early on
            rel = np.linalg.norm(ev.grad) / (1 + np.linalg.norm(yp) + np.linalg.norm(A @ xp))
            return rel <= max(0.5 * tol, min(0.1 * rkkt, 0.1 / (outer_k + 1) ** 2))

        inner_trace = [] if trace else None
        u, nin = ssn_solve(state.u, state, prob, cfg, tol_inner=0.0, stop=stop,
                           trace=inner_trace)
        inner_total += nin
        ev = _evaluate(u, state, prob, with_psi=False)
        x_new, y_new = _outer_candidate(ev, state, prob)
        k += 1
        s1, s2, res2 = kkt_residuals(PrimalDualIterate(x_new, y_new, u), prob)
        rkkt = max(s1, s2, res2)
        if trace:
            for rec in inner_trace:
                records.append({"outer": k, **rec, "kkt": None,
                                "sigma": state.sigma, "gamma": state.gamma})
            records.append({"outer": k, "inner": nin, "psi": None,
                            "grad_norm": float(np.linalg.norm(ev.grad)),
                            "kkt": rkkt, "sigma": state.sigma, "gamma": state.gamma})
        logger.debug("outer %d: inner=%d R_kkt=%.3e sigma=%.3g gamma=%.3g",
                     k, nin, rkkt, state.sigma, state.gamma)
        state = replace(state, x=x_new, y=y_new, u=u, outer_iter=k)
        state = adapt_parameters(state, s1, s2, res2)

    status = Status.CONVERGED if rkkt <= tol else Status.ITER_LIMIT
    it = PrimalDualIterate(state.x, state.y, state.u)
    report = SolveReport(
        solver_name="ppdssn", outer_iterations=k, inner_iterations=inner_total,
        kkt_residual=rkkt, objective=objective_value(state.x, prob),
        wall_time=time.perf_counter() - t0, status=status, tol=tol, trace=records)
    return it, report


def _gap_test(ev, xp, state, prob, k):
    """Duality-gap versions of the inexactness criteria with 1/k^2 sequences."""
    gap = augmented_gap(PrimalDualIterate(xp, None, ev.u), ev.u, state, prob)
    seq = 1.0 / (k + 1) ** 2
    if gap > seq ** 2 / (2 * state.sigma):
        return False
    yp = prob.A @ xp - prob.epsilon
    c = prob.A @ state.x - prob.epsilon
    dist2 = np.sum((xp - state.x) ** 2) + state.sigma / state.gamma * np.sum((yp - c) ** 2)
    return gap <= seq ** 2 / (2 * state.sigma) * dist2
