import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from drmlsad.exceptions import EmptySetError
from drmlsad.oracle import activeset_project
from drmlsad.prox import (HalfspaceSimplex, huber, moreau_env_indicator_C, moreau_env_l1,
                          project_C, project_C_multiplier, project_linf_ball,
                          project_simplex, soft_threshold)

floats = st.floats(-1e3, 1e3, allow_nan=False)
vecs = arrays(float, st.integers(1, 12), elements=floats)


def test_soft_threshold_examples():
    np.testing.assert_array_equal(soft_threshold([3.0, -0.5, -2.0], 1.0), [2.0, 0.0, -1.0])


@given(vecs, st.floats(0, 10))
def test_soft_threshold_is_prox_of_l1(z, t):
    # optimality: z - x in t * subdifferential of |x|
    x = soft_threshold(z, t)
    r = z - x
    assert np.all(np.abs(r) <= t + 1e-9)
    nz = x != 0
    np.testing.assert_allclose(r[nz], t * np.sign(x[nz]), atol=1e-9)


@given(vecs, st.floats(0, 10))
def test_moreau_decomposition_linf_l1(z, t):
    np.testing.assert_allclose(soft_threshold(z, t) + project_linf_ball(z, t), z,
                               atol=1e-9 * (1 + np.abs(z).max()))


@given(vecs)
def test_project_simplex_feasible_and_optimal(z):
    x = project_simplex(z)
    assert abs(x.sum() - 1) < 1e-9 and x.min() >= 0
    # the shift is common on the support and bounds the rest
    theta = (z - x)[x > 0]
    assert np.ptp(theta) < 1e-8 * (1 + np.abs(z).max())
    assert np.all(z[x == 0] <= theta[0] + 1e-9 * (1 + np.abs(z).max()))


def test_project_C_hand_geometry():
    cs = HalfspaceSimplex(np.array([2.0, 1.0]), 1.5)
    np.testing.assert_allclose(project_C([0.0, 1.0], cs), [0.5, 0.5], atol=1e-12)


def test_project_C_empty_set():
    with pytest.raises(EmptySetError):
        project_C([0.0, 0.0], HalfspaceSimplex(np.array([1.0, 2.0]), 3.0))


def test_project_C_plain_simplex_when_b_infinite():
    z = np.array([0.3, -0.2, 1.4])
    np.testing.assert_allclose(project_C(z, HalfspaceSimplex(np.ones(3), -np.inf)),
                               project_simplex(z))


def test_project_C_flat_piece_regression():
    # root of the multiplier equation sits just below a flat piece of g(lambda)
    z = np.array([0.34192314, -0.76094721, 2.3137924, 3.928182, -1.97869372])
    mu = np.array([-0.48696224, 0.69861143, 0.29894394, -0.57608687, -0.99759484])
    cs = HalfspaceSimplex(mu, 0.2989114464281335)
    np.testing.assert_allclose(project_C(z, cs), activeset_project(z, cs), atol=1e-10)


@given(st.integers(0, 10_000), st.integers(2, 6))
def test_project_C_matches_enumeration(seed, m):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(m) * 2
    mu = rng.standard_normal(m)
    b = rng.uniform(mu.min() - 0.5, mu.max())
    cs = HalfspaceSimplex(mu, b)
    np.testing.assert_allclose(project_C(z, cs), activeset_project(z, cs), atol=1e-8)


@given(st.integers(0, 10_000), st.integers(2, 8))
def test_project_C_idempotent_and_nonexpansive(seed, m):
    rng = np.random.default_rng(seed)
    mu = rng.standard_normal(m)
    cs = HalfspaceSimplex(mu, rng.uniform(mu.min(), mu.max()))
    z1, z2 = rng.standard_normal((2, m)) * 3
    p1, p2 = project_C(z1, cs), project_C(z2, cs)
    assert cs.contains(p1, 1e-9)
    np.testing.assert_allclose(project_C(p1, cs), p1, atol=1e-10)
    assert np.linalg.norm(p1 - p2) <= np.linalg.norm(z1 - z2) + 1e-10


def test_multiplier_is_nonnegative_and_complementary():
    rng = np.random.default_rng(3)
    for _ in range(200):
        m = rng.integers(2, 9)
        mu = rng.standard_normal(m)
        cs = HalfspaceSimplex(mu, rng.uniform(mu.min(), mu.max()))
        p, lam = project_C_multiplier(rng.standard_normal(m) * 2, cs)
        assert lam >= 0
        if lam > 1e-9:
            assert abs(mu @ p - cs.b) <= 1e-9 * max(1, abs(cs.b))


def test_huber_and_envelopes():
    z = np.array([0.5, -2.0])
    np.testing.assert_allclose(huber(z, 1.0), [0.125, 1.5])
    # envelope equals its defining minimization at the prox point
    t = 0.7
    x = soft_threshold(z, t)
    assert moreau_env_l1(z, t) == pytest.approx(t * np.abs(x).sum() + 0.5 * np.sum((x - z) ** 2))
    cs = HalfspaceSimplex(np.array([1.0, 0.0]), -np.inf)
    assert moreau_env_indicator_C([2.0, 0.0], 2.0, cs) == pytest.approx(1.0 / 4)
