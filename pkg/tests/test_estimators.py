import numpy as np
import pytest
from sklearn.base import clone

from tro.estimators import ProjectedSGDRegressor, TargetRiskRegressor
from tro.exceptions import InvalidConfigError, InvalidInputError


@pytest.fixture(scope="module")
def data():
    rng = np.random.default_rng(0)
    n, d = 60_000, 3
    X = rng.uniform(-1, 1, size=(n, d)) / np.sqrt(d)
    w = np.array([0.3, -0.2, 0.1])
    y = X @ w + 0.01 * rng.standard_normal(n)
    return X, y, w


def test_target_risk_fit_predict(data):
    X, y, w = data
    est = TargetRiskRegressor(eps_prior=1e-3).fit(X, y)
    assert np.linalg.norm(est.coef_ - w) < 0.05
    assert est.n_features_in_ == 3
    assert est.params_.m * est.params_.t1 <= X.shape[0]
    assert len(est.stage_radii_) == est.params_.m + 1
    assert np.all(np.diff(est.stage_radii_) < 0)
    np.testing.assert_allclose(est.predict(X[:5]), X[:5] @ est.coef_)
    assert est.score(X, y) > 0.9


@pytest.mark.parametrize("averaging", ["suffix-average", "uniform-average", "final"])
def test_projected_sgd_fit(data, averaging):
    X, y, w = data
    est = ProjectedSGDRegressor(averaging=averaging).fit(X, y)
    assert np.linalg.norm(est.coef_ - w) < 0.05


def test_clone_and_params():
    est = TargetRiskRegressor(eps_prior=0.01, t1=100)
    c = clone(est)
    assert c.get_params() == est.get_params()
    assert c.set_params(tau=0.25).tau == 0.25
    assert "averaging" in ProjectedSGDRegressor().get_params()


def test_unfitted_predict():
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        TargetRiskRegressor().predict(np.zeros((1, 2)))


def test_input_validation(data):
    X, y, _ = data
    with pytest.raises(InvalidInputError, match="unit ball"):
        TargetRiskRegressor().fit(2 * X, y)
    with pytest.raises(InvalidInputError, match="-1 or \\+1"):
        TargetRiskRegressor(loss="logistic-l2", l2=0.1).fit(X, y)
    with pytest.raises(InvalidInputError, match="needs"):
        TargetRiskRegressor(constants_mode="theorem").fit(X[:1000], y[:1000])
    with pytest.raises(InvalidInputError, match="features"):
        TargetRiskRegressor(t1=1000, m=2).fit(X, y).predict(np.zeros((1, 2)))
    with pytest.raises(InvalidConfigError):
        ProjectedSGDRegressor(averaging="median").fit(X, y)
    with pytest.raises(InvalidConfigError):
        TargetRiskRegressor(alpha=-1.0, beta=1.0).fit(X, y)


def test_logistic_fit():
    rng = np.random.default_rng(1)
    X = rng.uniform(-1, 1, size=(20_000, 2)) / np.sqrt(2)
    y = np.where(X @ np.array([1.0, -1.0]) + 0.1 * rng.standard_normal(20_000) > 0, 1.0, -1.0)
    est = TargetRiskRegressor(eps_prior=0.6, loss="logistic-l2", l2=0.1, radius_R=5.0).fit(X, y)
    assert np.all(np.isfinite(est.coef_))
    assert np.mean(np.sign(est.predict(X)) == y) > 0.8
