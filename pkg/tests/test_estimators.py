import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from slitlab import (CampanatoEstimator, DegenerateSolver, HolderAverageEstimator, LinearPolyRegressor,
                     SignoriniSolver)
from slitlab.coefficients import CoeffField
from slitlab.dsolve import DegenerateProblem
from slitlab.fields import get_field, model_solution
from slitlab.geometry import perp_weights
from slitlab.grid import SlitGrid
from slitlab.signorini import SignoriniProblem


def test_params_and_clone():
    est = LinearPolyRegressor(center=(0.1,), kappa=2.0, weighted=False)
    assert est.get_params() == {"center": (0.1,), "kappa": 2.0, "weighted": False}
    c = clone(est)
    assert c.get_params() == est.get_params() and c is not est
    for cls in (CampanatoEstimator, HolderAverageEstimator, DegenerateSolver, SignoriniSolver):
        assert clone(cls()).get_params() == cls().get_params()


def test_linear_poly_regressor_recovers_coefficients(rng):
    X = rng.uniform(-1, 1, (200, 3))
    y = 0.5 + 2 * X[:, 0] - X[:, 1] + 0.7 * perp_weights(X)[0]
    est = LinearPolyRegressor().fit(X, y)
    np.testing.assert_allclose(est.coef_, [0.5, 2, -1, 0.7], atol=1e-10)
    np.testing.assert_allclose(est.predict(X), y, atol=1e-10)
    assert est.score(X, y) == pytest.approx(1.0)


def test_linear_poly_regressor_errors(rng):
    with pytest.raises(NotFittedError):
        LinearPolyRegressor().predict(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        LinearPolyRegressor(kappa=0.0).fit(rng.uniform(size=(5, 2)), np.ones(5))
    with pytest.raises(ValueError):
        LinearPolyRegressor().fit(np.zeros((5, 2)), np.ones(5))
    est = LinearPolyRegressor().fit(rng.uniform(0.1, 1, (10, 2)), np.ones(10))
    with pytest.raises(ValueError):
        est.predict(np.zeros((2, 3)))


def test_campanato_and_holder_estimators():
    g = SlitGrid.box(1, 1 / 32, 1.0, coords="sqrt")
    w = g.sample(get_field("harmonic_linear"))
    est = CampanatoEstimator(radii=(0.4, 0.2, 0.1)).fit(w)
    np.testing.assert_allclose(est.poly_.coef, [0, 1, -0.5], atol=1e-9)
    pts = np.array([[0.3, 0.2]])
    np.testing.assert_allclose(est.predict(pts), get_field("harmonic_linear")(pts), atol=1e-9)
    u = g.sample(lambda p: 3 * perp_weights(p)[1])
    hol = HolderAverageEstimator(radii=(0.4, 0.2, 0.1)).fit(u)
    assert hol.cbar_ == pytest.approx(3.0)
    np.testing.assert_allclose(hol.transform(u).values, u.values / 3)
    with pytest.raises(TypeError):
        CampanatoEstimator().fit(np.zeros((3, 3)))


def test_degenerate_solver_estimator():
    hl = get_field("harmonic_linear")
    est = DegenerateSolver(h=1 / 32).fit(DegenerateProblem(CoeffField.identity(1), boundary=hl))
    pts = np.array([[0.2, 0.1], [-0.3, 0.05]])
    np.testing.assert_allclose(est.predict(pts), hl(pts), atol=2e-3)
    with pytest.raises(TypeError):
        DegenerateSolver().fit("problem")


def test_signorini_solver_estimator_is_even():
    est = SignoriniSolver(h=1 / 32).fit(SignoriniProblem(1, CoeffField.identity(1), model_solution))
    pts = np.array([[0.2, 0.3], [0.2, -0.3]])
    a = est.predict(pts)
    assert a[0] == pytest.approx(a[1])
    assert a[0] == pytest.approx(model_solution(pts[:1])[0], abs=1e-3)
    with pytest.raises(NotFittedError):
        SignoriniSolver().predict(pts)
