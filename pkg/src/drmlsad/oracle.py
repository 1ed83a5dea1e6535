"""Slow, independent references for testing: brute-force projection and
reference solvers for the DR-MLSAD program.  Not for production use."""
import itertools

import numpy as np
import scipy.optimize

from .exceptions import EmptySetError, InfeasibleProblemError
from .prox import project_C

MAX_ENUM_M = 12


def _face_candidate(z, mu, b, S, active):
    """Closest point to ``z`` on the face ``{x_S' = 0, e'x = 1 [, mu'x = b]}``.

    Returns ``(x, nu, lam)`` with ``x_S = z_S + nu e + lam mu_S`` or ``None``
    when the face is empty.
    """
    zs, ms = z[S], mu[S]
    k = S.size
    if active:
        M = np.array([[k, ms.sum()], [ms.sum(), ms @ ms]])
        rhs = np.array([1.0 - zs.sum(), b - ms @ zs])
        sol, *_ = np.linalg.lstsq(M, rhs, rcond=None)
        nu, lam = sol
        if not np.allclose(M @ sol, rhs, atol=1e-10 * max(1.0, np.abs(M).max()), rtol=1e-10):
            return None
    else:
        nu, lam = (1.0 - zs.sum()) / k, 0.0
    x = np.zeros_like(z)
    x[S] = zs + nu + lam * ms
    return x, nu, lam


def activeset_project(z, cset, tol=1e-10):
    """Projection onto ``cset`` by enumerating all active sets (``m <= 12``)."""
    z = np.asarray(z, dtype=float)
    mu, b = cset.mu_hat, cset.b
    m = z.size
    if m > MAX_ENUM_M:
        raise ValueError(f"enumeration limited to m <= {MAX_ENUM_M}")
    if not cset.nonempty:
        raise EmptySetError("constraint set is empty")
    scale = max(1.0, float(np.abs(z).max()), float(np.abs(mu).max()),
                abs(b) if np.isfinite(b) else 0.0)
    tol = tol * scale
    best, best_d = None, np.inf
    modes = (False, True) if np.isfinite(b) else (False,)
    for r in range(1, m + 1):
        for S in itertools.combinations(range(m), r):
            S = np.array(S)
            off = np.setdiff1d(np.arange(m), S)
            for active in modes:
                cand = _face_candidate(z, mu, b, S, active)
                if cand is None:
                    continue
                x, nu, lam = cand
                if x[S].min() < -tol or lam < -tol:
                    continue
                if np.isfinite(b) and mu @ x < b - tol:
                    continue
                # multipliers of the bounds x_i >= 0 outside S
                if off.size and (-z[off] - nu - lam * mu[off]).min() < -tol:
                    continue
                d = np.linalg.norm(x - z)
                if d < best_d:
                    best, best_d = x, d
    if best is None:
        raise EmptySetError("no KKT point found")
    return np.maximum(best, 0.0)


def subgradient_reference_solve(prob, iters=200_000, step=None, x0=None):
    """Projected subgradient on ``(1/N) sum max(0, a_i'x - eps) + eps``.

    Step ``c/sqrt(k)`` along the normalized subgradient, with ``c`` defaulting
    to half the diameter of the simplex.  Returns the best iterate seen.

    Returns
    -------
    x : ndarray
    objective : float
    """
    A = prob.A
    n, m = A.shape
    eps = prob.epsilon
    cset = prob.constraint_set
    if not cset.nonempty:
        raise InfeasibleProblemError("constraint set is empty")
    c = np.sqrt(2.0) / 2 if step is None else step
    x = project_C(np.full(m, 1.0 / m) if x0 is None else x0, cset)
    best_x, best_f = x, np.inf
    for k in range(1, iters + 1):
        r = A @ x - eps
        f = np.maximum(r, 0.0).mean() + eps
        if f < best_f:
            best_x, best_f = x, f
        hit = r > 0
        if not hit.any():
            break  # objective equals its lower bound eps
        g = A[hit].sum(axis=0) / n
        gn = np.linalg.norm(g)
        if gn == 0:
            break
        x = project_C(x - (c / np.sqrt(k)) * g / gn, cset)
    return best_x, float(best_f)


def lp_reference_solve(prob):
    """Exact optimum of the same program as a linear program (HiGHS).

    Variables ``(x, t)`` with ``t_i >= a_i'x - eps``, ``t >= 0``.
    """
    A = prob.A
    n, m = A.shape
    eps = prob.epsilon
    cost = np.concatenate([np.zeros(m), np.full(n, 1.0 / n)])
    A_ub = [np.hstack([A, -np.eye(n)])]
    b_ub = [np.full(n, eps)]
    if np.isfinite(prob.b):
        A_ub.append(np.concatenate([-prob.mu_hat, np.zeros(n)])[None, :])
        b_ub.append([-prob.b])
    A_eq = np.concatenate([np.ones(m), np.zeros(n)])[None, :]
    res = scipy.optimize.linprog(cost, A_ub=np.vstack(A_ub), b_ub=np.concatenate(b_ub),
                                 A_eq=A_eq, b_eq=[1.0], bounds=(0, None), method="highs")
    if res.status == 2:
        raise InfeasibleProblemError(res.message)
    if not res.success:
        raise RuntimeError(res.message)
    return res.x[:m], float(res.fun + eps)
