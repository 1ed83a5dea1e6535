"""Proximal maps, projections and Moreau envelopes.

Everything here works on 1-D float arrays and is pure.  The projection onto
``C = {x : e'x = 1, x >= 0, mu'x >= b}`` is computed by a one-dimensional
root search over the multiplier of the return constraint, with the simplex
projection as the inner map.
"""
from dataclasses import dataclass

import numpy as np

from .exceptions import EmptySetError

#: components of a projection below this magnitude are snapped to zero
ZERO_CLAMP = 1e-14
#: tolerance used to classify the return half-space as active
ACTIVE_TOL = 1e-10


@dataclass(frozen=True)
class HalfspaceSimplex:
    """The set ``{x : e'x = 1, x >= 0, mu_hat'x >= b}``.

    ``b = -inf`` is allowed and gives the plain probability simplex.
    """

    mu_hat: np.ndarray
    b: float

    def __post_init__(self):
        mu = np.asarray(self.mu_hat, dtype=float)
        object.__setattr__(self, "mu_hat", mu)
        object.__setattr__(self, "b", float(self.b))

    @property
    def nonempty(self):
        return bool(self.mu_hat.max() >= self.b)

    def contains(self, x, tol=1e-10):
        x = np.asarray(x, dtype=float)
        return bool(
            abs(x.sum() - 1.0) <= tol
            and x.min() >= -tol
            and self.mu_hat @ x >= self.b - tol * max(1.0, abs(self.b) if np.isfinite(self.b) else 1.0)
        )


def soft_threshold(z, t):
    """Proximal map of ``t * ||.||_1``: ``sign(z) * max(|z| - t, 0)``."""
    z = np.asarray(z, dtype=float)
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


def project_linf_ball(z, t):
    """Projection onto ``{x : ||x||_inf <= t}``."""
    return np.clip(np.asarray(z, dtype=float), -t, t)


def project_simplex(z):
    """Euclidean projection onto the probability simplex (sort-and-shift)."""
    z = np.asarray(z, dtype=float)
    u = np.sort(z)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, z.size + 1)
    cond = u - css / k > 0
    r = k[cond][-1]
    theta = css[r - 1] / r
    return np.maximum(z - theta, 0.0)


def _simplex_piece(z):
    """Simplex projection plus its support mask."""
    x = project_simplex(z)
    return x, x > 0


def _project_C_with_multiplier(z, mu, b, max_iter=200):
    """Return ``(Pi_C(z), lam)`` where ``lam >= 0`` multiplies the return row.

    ``x(lam) = Pi_simplex(z + lam*mu)`` and ``g(lam) = mu'x(lam) - b`` is
    nondecreasing and piecewise linear.  Each step solves ``g = 0`` on the
    linear piece of the current iterate (exact when the support is right),
    safeguarded by bisection whenever the bracket fails to halve.
    """
    x0 = project_simplex(z)
    if not np.isfinite(b) or mu @ x0 >= b:
        return x0, 0.0

    scale = max(1.0, abs(b), float(np.abs(mu).max()))
    gtol = 1e-12 * scale

    def g_and_slope(lam):
        x, supp = _simplex_piece(z + lam * mu)
        ms = mu[supp]
        slope = ms @ ms - ms.sum() ** 2 / ms.size
        return x, mu @ x - b, slope

    lo, g_lo = 0.0, mu @ x0 - b
    # bracket the root; lam = spread/gap puts all mass on argmax(mu)
    spread = float(z.max() - z.min()) + 1.0
    hi = spread / max(float(np.ptp(mu)), 1e-300)
    hi = max(hi, 1e-12)
    x_hi, g_hi, _ = g_and_slope(hi)
    it = 0
    while g_hi < 0:
        lo, g_lo = hi, g_hi
        hi *= 2.0
        x_hi, g_hi, _ = g_and_slope(hi)
        it += 1
        if it > 2000:
            raise EmptySetError("return constraint unreachable on the simplex")
    if g_hi <= gtol:
        return x_hi, hi

    _, _, s_lo = g_and_slope(lo)
    _, _, s_hi = g_and_slope(hi)
    x, g = x_hi, g_hi
    lam = hi
    for _ in range(max_iter):
        width = hi - lo
        # Newton on the linear piece of either bracket end; exact when that
        # piece contains the root
        cand = np.nan
        for c in (lo - g_lo / s_lo if s_lo > 0 else np.nan,
                  hi - g_hi / s_hi if s_hi > 0 else np.nan):
            if lo < c < hi:
                cand = c
                break
        if np.isnan(cand):
            cand = 0.5 * (lo + hi)
        lam = cand
        x, g, slope = g_and_slope(lam)
        if abs(g) <= gtol:
            return x, lam
        if g < 0:
            lo, g_lo, s_lo = lam, g, slope
        else:
            hi, g_hi, s_hi = lam, g, slope
        if hi - lo > 0.5 * width:
            # slow progress: force a bisection step
            lam = 0.5 * (lo + hi)
            x, g, slope = g_and_slope(lam)
            if abs(g) <= gtol:
                return x, lam
            if g < 0:
                lo, g_lo, s_lo = lam, g, slope
            else:
                hi, g_hi, s_hi = lam, g, slope
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    if g < 0:
        # stay feasible: the upper end of the bracket satisfies g >= 0
        x, g, _ = g_and_slope(hi)
        lam = hi
    return x, lam


def project_C(z, cset):
    """Euclidean projection onto ``cset`` (a :class:`HalfspaceSimplex`)."""
    if not cset.nonempty:
        raise EmptySetError(
            f"max(mu_hat) = {cset.mu_hat.max():.6g} < b = {cset.b:.6g}")
    x, _ = _project_C_with_multiplier(np.asarray(z, dtype=float), cset.mu_hat, cset.b)
    x[x < ZERO_CLAMP] = 0.0
    return x


def project_C_multiplier(z, cset):
    """Like :func:`project_C` but also returns the return-row multiplier."""
    if not cset.nonempty:
        raise EmptySetError(
            f"max(mu_hat) = {cset.mu_hat.max():.6g} < b = {cset.b:.6g}")
    x, lam = _project_C_with_multiplier(np.asarray(z, dtype=float), cset.mu_hat, cset.b)
    x[x < ZERO_CLAMP] = 0.0
    return x, lam


def huber(z, t):
    """Componentwise Huber function with threshold ``t``."""
    a = np.abs(np.asarray(z, dtype=float))
    return np.where(a <= t, 0.5 * a * a, t * a - 0.5 * t * t)


def moreau_env_l1(z, t):
    """``min_y t*||y||_1 + 0.5*||y - z||^2``, i.e. the summed Huber function."""
    return float(huber(z, t).sum())


def moreau_env_indicator_C(z, sigma, cset):
    """Moreau envelope of the indicator of C: ``dist(z, C)^2 / (2 sigma)``."""
    z = np.asarray(z, dtype=float)
    d = z - project_C(z, cset)
    return float(d @ d) / (2.0 * sigma)
