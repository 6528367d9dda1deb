import numpy as np
import pytest
from sklearn.base import clone
from sklearn.utils.estimator_checks import check_estimator

from loggpctl import LoGGPRegressor


def data(n=300, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, (n, 2))
    return X, np.sin(3 * X[:, 0]) + 0.5 * X[:, 1]


@pytest.mark.slow
def test_sklearn_compatibility():
    check_estimator(LoGGPRegressor(max_points=20, random_state=0))


def test_fit_predict_shapes_and_accuracy():
    X, y = data()
    est = LoGGPRegressor(max_points=50, random_state=0).fit(X, y)
    pred = est.predict(X[:20])
    assert pred.shape == (20,)
    assert est.n_features_in_ == 2 and est.n_outputs_ == 1
    assert np.sqrt(np.mean((est.predict(X) - y) ** 2)) < 0.1
    Y = np.column_stack([y, -y])
    assert LoGGPRegressor(random_state=0).fit(X, Y).predict(X[:5]).shape == (5, 2)


def test_partial_fit_equals_fit():
    X, y = data()
    a = LoGGPRegressor(max_points=40, lengthscales=0.5, random_state=1).fit(X, y)
    b = LoGGPRegressor(max_points=40, lengthscales=0.5, random_state=1).partial_fit(X[:100], y[:100])
    b.partial_fit(X[100:], y[100:])
    np.testing.assert_array_equal(a.predict(X[:30]), b.predict(X[:30]))
    with pytest.raises(ValueError):
        b.partial_fit(X[:, :1], y)


def test_params_and_clone():
    est = LoGGPRegressor(max_points=7, lengthscales=[0.3, 0.4])
    params = est.get_params()
    assert params["max_points"] == 7 and params["lengthscales"] == [0.3, 0.4]
    assert clone(est).get_params()["max_points"] == 7
    with pytest.raises(ValueError):
        LoGGPRegressor(lengthscales=[-1.0, 1.0]).fit(*data(10))
