"""scikit-learn style wrappers that learn a linear predictor from a fixed sample.

Rows of ``X`` are consumed once, in order, as the example stream; the
optimizers never revisit a row. Both estimators fit ``coef_`` only (no
intercept; append a constant column if one is wanted, keeping rows in the
unit ball).
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import _kernels
from .baselines import AVERAGINGS, FINAL, SUFFIX, UNIFORM
from .exceptions import InvalidConfigError, InvalidInputError
from .losses import SQUARED, LossModel
from .targetrisk import (
    PRACTICAL,
    AlgoConfig,
    ArrayOracle,
    StageState,
    derive_params,
    run_stage,
    shrink_domain,
)
from .validation import check_positive, check_training_data


def _second_moment_bounds(X, model):
    eigs = np.linalg.eigvalsh(X.T @ X / X.shape[0])
    alpha = float(eigs[0]) + model.l2
    beta = model.beta_scalar * float(eigs[-1]) + model.l2
    if not alpha > 0:
        raise InvalidInputError("the sample second moment is singular; pass alpha explicitly")
    return alpha, beta


class TargetRiskRegressor(RegressorMixin, BaseEstimator):
    """Linear model fitted by multistage clipped SGD with a known target risk.

    Parameters
    ----------
    eps_prior : float
        Risk level known to be attainable.
    alpha, beta : float, optional
        Strong convexity and smoothness of the risk. When omitted they are
        taken from the eigenvalues of the sample second moment ``X^T X / n``.
    loss : {"squared", "logistic-l2"}
    l2 : float
        Weight of the l2 term for ``logistic-l2``.
    epsilon, tau, delta : float
        Contraction factor, floor weight and failure probability, all in (0, 1).
    radius_R : float
        Radius of the hypothesis ball.
    constants_mode : {"practical", "theorem"}
        In practical mode the stage length defaults to ``n_samples // m``.
    t1, m : int, optional
        Stage length and stage count (practical mode only).

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
    params_ : DerivedParams
    stage_radii_ : list of float
    n_features_in_ : int
    """

    def __init__(
        self, eps_prior=1e-3, alpha=None, beta=None, loss=SQUARED, l2=0.0, epsilon=0.5, tau=0.5,
        delta=0.05, radius_R=1.0, constants_mode=PRACTICAL, t1=None, m=None,
    ):
        self.eps_prior = eps_prior
        self.alpha = alpha
        self.beta = beta
        self.loss = loss
        self.l2 = l2
        self.epsilon = epsilon
        self.tau = tau
        self.delta = delta
        self.radius_R = radius_R
        self.constants_mode = constants_mode
        self.t1 = t1
        self.m = m

    def _config(self, t1=None):
        return AlgoConfig(
            eps_prior=self.eps_prior, epsilon=self.epsilon, tau=self.tau, delta=self.delta,
            radius_R=self.radius_R, constants_mode=self.constants_mode,
            t1_override=t1 if self.constants_mode == PRACTICAL else None,
            m_override=self.m if self.constants_mode == PRACTICAL else None,
        )

    def fit(self, X, y):
        model = LossModel(self.loss, self.l2)
        X, y = check_training_data(X, y, model.kind)
        n, d = X.shape
        if self.alpha is None or self.beta is None:
            alpha, beta = _second_moment_bounds(X, model)
        alpha = check_positive("alpha", self.alpha) if self.alpha is not None else alpha
        beta = check_positive("beta", self.beta) if self.beta is not None else beta
        beta = max(beta, alpha)

        params = derive_params(self._config(self.t1), alpha, beta, d)
        if self.constants_mode == PRACTICAL and self.t1 is None:
            t1 = n // params.m
            if t1 < 1:
                raise InvalidInputError(f"{n} samples cannot fill {params.m} stages")
            params = derive_params(self._config(t1), alpha, beta, d)
        if params.total_samples > n:
            raise InvalidInputError(
                f"{self.constants_mode} mode needs {params.total_samples} samples ({params.m} stages of "
                f"{params.t1}), got {n}"
            )
        config = self._config(params.t1)
        oracle = ArrayOracle(X, y)
        w_hat = np.zeros(d)
        delta = float(self.radius_R)
        radii = [delta]
        for k in range(1, params.m + 1):
            state = StageState.start(k, w_hat, delta, params)
            w_hat, _ = run_stage(state, params, model, oracle)
            delta = shrink_domain(delta, config)
            radii.append(delta)
        self.coef_ = w_hat
        self.params_ = params
        self.stage_radii_ = radii
        self.n_features_in_ = d
        return self

    def predict(self, X):
        """Linear scores ``X @ coef_``."""
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise InvalidInputError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X @ self.coef_


class ProjectedSGDRegressor(RegressorMixin, BaseEstimator):
    """Linear model fitted by one pass of projected SGD with step ``step_c / (alpha t)``.

    Parameters
    ----------
    alpha : float, optional
        Strong convexity of the risk; estimated from ``X`` when omitted.
    step_c : float
    averaging : {"suffix-average", "uniform-average", "final"}
    radius_R : float
    loss : {"squared", "logistic-l2"}
    l2 : float
    """

    def __init__(self, alpha=None, step_c=1.0, averaging=SUFFIX, radius_R=1.0, loss=SQUARED, l2=0.0):
        self.alpha = alpha
        self.step_c = step_c
        self.averaging = averaging
        self.radius_R = radius_R
        self.loss = loss
        self.l2 = l2

    def fit(self, X, y):
        if self.averaging not in AVERAGINGS:
            raise InvalidConfigError(f"averaging must be one of {AVERAGINGS}, got {self.averaging!r}")
        model = LossModel(self.loss, self.l2)
        X, y = check_training_data(X, y, model.kind)
        n, d = X.shape
        alpha = check_positive("alpha", self.alpha) if self.alpha is not None else _second_moment_bounds(X, model)[0]
        radius = check_positive("radius_R", self.radius_R)
        check_positive("step_c", self.step_c)
        marks = np.array(sorted({n // 2, n}), dtype=np.int64)
        prefix = np.zeros((marks.shape[0], d))
        finals = np.zeros((marks.shape[0], d))
        src, Xk, Yk, k0, k1, amp, w_gen, noise, kind = ArrayOracle(X, y).kernel_args(model)
        w, total = _kernels.sgd_kernel(d)(
            src, Xk, Yk, k0, k1, 0, amp, w_gen, noise, kind, model.l2,
            np.zeros(d), radius, n, _kernels.STEP_INVERSE_T, float(self.step_c), alpha,
            marks, prefix, finals, _kernels.empty_rows(d),
        )
        if self.averaging == FINAL:
            coef = w
        elif self.averaging == UNIFORM:
            coef = total / n
        else:
            coef = (prefix[-1] - prefix[0]) / (n - n // 2)
        self.coef_ = coef
        self.n_features_in_ = d
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise InvalidInputError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X @ self.coef_


__all__ = ["TargetRiskRegressor", "ProjectedSGDRegressor"]
