import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from conereg.cone import ConeGrid, dtn_perturbed, harmonic_extension_model, normal_derivative
from conereg.estimators import DirichletToNeumann, HolderExponentEstimator
from conereg.links import Circle
from conereg.morrey import LOG_CORRECTED, POWER


def test_holder_estimator_power():
    r = np.geomspace(1e-3, 0.2, 16)
    est = HolderExponentEstimator().fit(r[:, None], 3.0 * r ** -0.8)
    assert est.alpha_ == pytest.approx(0.6) and est.regime_ == POWER
    assert np.allclose(est.predict(r[:, None]), 3.0 * r ** -0.8, rtol=1e-10)
    assert est.score(r[:, None], 3.0 * r ** -0.8) == pytest.approx(1.0)


def test_holder_estimator_log():
    r = np.geomspace(1e-4, 0.3, 16)
    est = HolderExponentEstimator().fit(r[:, None], np.abs(np.log(r)))
    assert est.regime_ == LOG_CORRECTED and est.gamma_ == pytest.approx(0.5)
    assert np.allclose(est.predict(r[:, None]), np.abs(np.log(r)), rtol=1e-10)


def test_holder_estimator_params_and_clone():
    est = HolderExponentEstimator(tol=0.1)
    assert est.get_params() == {"tol": 0.1, "tie_ratio": 1.2}
    other = clone(est.set_params(tie_ratio=2.0))
    assert other.get_params()["tie_ratio"] == 2.0


def test_holder_estimator_validation():
    est = HolderExponentEstimator()
    with pytest.raises(NotFittedError):
        est.predict([[0.1]])
    with pytest.raises(ValueError):
        est.fit(np.ones((5, 2)), np.ones(5))
    with pytest.raises(ValueError):
        est.fit([[0.1], [0.2]], [1.0])


def test_dtn_transform_matches_model():
    link = Circle(4 * math.pi)
    est = DirichletToNeumann(link=link, radial_nodes=256, modes=5).fit()
    assert np.allclose(est.eigenvalues_, [0, 0.5, 0.5, 1, 1], atol=1e-3)
    traces = np.eye(5)
    out = est.transform(traces)
    assert np.allclose(out, est.matrix_.T)
    grid = ConeGrid(link, radial_nodes=256, modes=5)
    assert np.array_equal(est.matrix_, dtn_perturbed(grid))
    flux = normal_derivative(harmonic_extension_model(traces[1], grid))
    assert out[1] @ traces[1] == pytest.approx(flux[1], rel=1e-3)


def test_dtn_validation():
    with pytest.raises(ValueError):
        DirichletToNeumann().fit()
    est = DirichletToNeumann(link=Circle(2 * math.pi), radial_nodes=16, modes=3)
    with pytest.raises(NotFittedError):
        est.transform(np.ones((1, 3)))
    est.fit()
    with pytest.raises(ValueError):
        est.transform(np.ones((1, 4)))
    assert est.get_params()["modes"] == 3
