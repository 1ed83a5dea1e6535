"""Generalized Jacobians of the projection onto C and of the l1 prox.

An element ``N0`` of the HS-Jacobian of ``Pi_C`` at ``z`` is the orthogonal
projector onto ``{d : d_K1 = 0, e_K2'd = 0 [, mu_K2'd = 0]}`` where ``K2`` is
the support of ``Pi_C(z)`` and the bracketed row is present only when the
return constraint is active.  It is stored as ``Diag(w) - B B'`` with ``B``
holding one or two orthonormal columns supported on ``K2``.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .prox import ACTIVE_TOL, project_C_multiplier


class JacobianCase(str, Enum):
    HALFSPACE_INACTIVE = "HalfspaceInactive"
    HALFSPACE_ACTIVE_GENERAL = "HalfspaceActiveGeneral"
    HALFSPACE_ACTIVE_DEGENERATE = "HalfspaceActiveDegenerate"


#: relative threshold on eta = ||mu_K||^2 |K| - (mu_K'e)^2
ETA_RTOL = 1e-12


@dataclass(frozen=True)
class HsJacobian:
    k2: np.ndarray  # sorted indices of the support
    case_tag: JacobianCase
    basis: np.ndarray  # shape (|K2|, r), orthonormal columns, r in {1, 2}
    m: int

    @property
    def w(self):
        w = np.zeros(self.m)
        w[self.k2] = 1.0
        return w

    def dense(self):
        """Dense ``m x m`` matrix; intended for tests and small problems."""
        out = np.diag(self.w)
        B = self.basis
        out[np.ix_(self.k2, self.k2)] -= B @ B.T
        return out


@dataclass(frozen=True)
class L1ProxJacobian:
    active: np.ndarray  # 0/1 float vector

    def dense(self):
        return np.diag(self.active)


def projC_hs_jacobian(z, cset, point=None):
    """HS-Jacobian element of ``Pi_C`` at ``z``.

    ``point`` may pass a precomputed ``(Pi_C(z), multiplier)`` pair to avoid
    a second projection.
    """
    if point is None:
        p, lam = project_C_multiplier(z, cset)
    else:
        p, lam = point
    m = p.size
    k2 = np.flatnonzero(p > 0)
    k = k2.size
    e_k = np.full(k, 1.0 / np.sqrt(k))
    mu = cset.mu_hat
    b = cset.b
    active = np.isfinite(b) and (
        lam > 0 or abs(mu @ p - b) <= ACTIVE_TOL * max(1.0, abs(b)))
    if not active:
        return HsJacobian(k2, JacobianCase.HALFSPACE_INACTIVE, e_k[:, None], m)
    mu_k = mu[k2]
    scale = (mu_k @ mu_k) * k
    eta = scale - mu_k.sum() ** 2
    if eta > ETA_RTOL * scale:
        # Gram-Schmidt of mu_K against e_K
        v = mu_k - mu_k.mean()
        v /= np.linalg.norm(v)
        basis = np.column_stack([e_k, v])
        return HsJacobian(k2, JacobianCase.HALFSPACE_ACTIVE_GENERAL, basis, m)
    return HsJacobian(k2, JacobianCase.HALFSPACE_ACTIVE_DEGENERATE, e_k[:, None], m)


def l1_prox_jacobian(z, t):
    """Clarke Jacobian element of ``soft_threshold(., t)``: ``1{|z_i| > t}``."""
    return L1ProxJacobian((np.abs(np.asarray(z, dtype=float)) > t).astype(float))


def apply_N0(j, d):
    """``N0 @ d`` in ``O(|K2|)``."""
    d = np.asarray(d, dtype=float)
    out = np.zeros(j.m)
    dk = d[j.k2]
    out[j.k2] = dk - j.basis @ (j.basis.T @ dk)
    return out


def assemble_ANAt(A, j):
    """Dense ``A N0 A'`` built from the ``K2`` column block; ``O(N^2 |K2|)``."""
    Ak = A[:, j.k2]
    G = Ak @ Ak.T
    C = Ak @ j.basis
    G -= C @ C.T
    return G
