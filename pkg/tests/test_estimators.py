import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from drmlsad.estimators import DrMlsadPortfolio, NaivePortfolio, solve


def _X(seed=0):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((60, 5)) * 0.05 + 0.01


def test_params_round_trip_and_clone():
    est = DrMlsadPortfolio(epsilon=0.05, solver="padmm")
    assert est.get_params()["epsilon"] == 0.05
    c = clone(est).set_params(tol=1e-6)
    assert c.tol == 1e-6 and c.solver == "padmm"


def test_fixed_radius_fit_predict_score():
    X = _X()
    est = DrMlsadPortfolio(epsilon=0.02).fit(X)
    w = est.weights_
    assert abs(w.sum() - 1) < 1e-10 and w.min() >= 0
    assert X.mean(0) @ w >= est.rho_ + est.epsilon_ - 1e-8
    np.testing.assert_allclose(est.predict(X), X @ w)
    assert est.score(X) <= 0


def test_rwpi_radius_rule():
    est = DrMlsadPortfolio(epsilon="rwpi", seed=3).fit(_X(1))
    assert est.radius_.epsilon == est.epsilon_ >= 0


def test_unfitted_and_bad_input():
    with pytest.raises(NotFittedError):
        DrMlsadPortfolio().predict(_X())
    with pytest.raises(ValueError):
        DrMlsadPortfolio(epsilon="guess").fit(_X())
    est = NaivePortfolio().fit(_X())
    with pytest.raises(ValueError):
        est.predict(np.ones((3, 2)))


def test_naive():
    np.testing.assert_allclose(NaivePortfolio().fit(_X()).weights_, 0.2)


def test_solver_dispatch(hand_problem):
    for name in ("ppdssn", "padmm", "dadmm"):
        _, rep = solve(hand_problem, name, 1e-8)
        assert rep.objective == pytest.approx(0.1, abs=1e-8)
    with pytest.raises(ValueError):
        solve(hand_problem, "gurobi")
