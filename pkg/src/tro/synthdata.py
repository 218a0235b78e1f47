"""Synthetic learning problems with a known minimizer, and their stochastic oracle.

Design: ``x_i = amp_i * (2 u_i - 1)`` with independent uniforms ``u_i`` and
``sum(amp**2) = 1``, so ``||x|| <= 1`` holds for every draw and the second
moment ``E[x x^T] = diag(amp**2) / 3`` is known exactly. The amplitudes are
log-spaced so that the eigenvalue ratio equals the requested condition number.

Squared loss labels are ``y = <w_star, x> + noise_sigma * N(0, 1)``.
Logistic labels are ``+1`` with probability ``sigmoid(<w_gen, x>)``.
"""

from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np
from numba import njit

from . import _rng
from .exceptions import InfeasibleTargetError, InvalidConfigError, InvalidInputError
from .losses import LOGISTIC_L2, SQUARED, LossModel
from .vectorspace import as_vector

DEFAULT_MC_DRAWS = 1_000_000
_LOGISTIC_FIT_DRAWS = 200_000


@dataclass(frozen=True)
class InstanceSpec:
    """Serializable recipe for :func:`make_instance`."""

    dim: int
    cond_number: float = 1.0
    noise_sigma: float = 0.0
    radius_R: float = 1.0
    seed: int = 0
    loss: str = SQUARED
    l2: float = 0.0

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """Ground truth of a synthetic problem. The learner only sees samples."""

    dim: int
    w_star: np.ndarray
    cov_eigs: np.ndarray
    noise_sigma: float
    alpha: float
    beta: float
    eps_opt: float
    radius_R: float
    seed: int
    loss: LossModel = field(default_factory=LossModel)
    scale: np.ndarray = None
    w_gen: np.ndarray = None
    spec: InstanceSpec = None

    @property
    def covariance(self):
        return np.diag(self.cov_eigs)

    @property
    def kappa(self):
        return self.beta / self.alpha


class Example(NamedTuple):
    x: np.ndarray
    y: float


@njit(cache=True, inline="always")
def _draw_into(k0, k1, pos, tag, amp, w_gen, noise, kind, ubuf, x):
    """Fill ``x`` with the example at stream position ``pos``; return its label."""
    d = x.shape[0]
    if kind == 0:
        n_unif = d + 2 if noise != 0.0 else d
    else:
        n_unif = d + 1
    _rng.fill_uniforms(k0, k1, pos, tag, ubuf, n_unif)
    z = 0.0
    for i in range(d):
        x[i] = amp[i] * (2.0 * ubuf[i] - 1.0)
        z += w_gen[i] * x[i]
    if kind == 0:
        if noise == 0.0:
            return z
        g, _ = _rng.box_muller(ubuf[d], ubuf[d + 1])
        return z + noise * g
    p = 1.0 / (1.0 + np.exp(-z))
    if ubuf[d] < p:
        return 1.0
    return -1.0


@njit(cache=True)
def _sample_batch(k0, k1, start, tag, scale, w_gen, noise, kind, X, Y):
    d = X.shape[1]
    ubuf = np.empty(d + 2)
    for t in range(X.shape[0]):
        Y[t] = _draw_into(k0, k1, start + t, tag, scale, w_gen, noise, kind, ubuf, X[t])


@njit(cache=True)
def _logistic_value(z, y):
    m = y * z
    if m > 0:
        return np.log1p(np.exp(-m))
    return -m + np.log1p(np.exp(m))


@njit(cache=True)
def _risk_mc(k0, k1, start, n, tag, scale, w_gen, noise, kind, w):
    d = w.shape[0]
    ubuf = np.empty(d + 2)
    x = np.empty(d)
    mean = 0.0
    m2 = 0.0
    for t in range(n):
        y = _draw_into(k0, k1, start + t, tag, scale, w_gen, noise, kind, ubuf, x)
        z = 0.0
        for i in range(d):
            z += w[i] * x[i]
        if kind == 0:
            v = 0.5 * (z - y) * (z - y)
        else:
            v = _logistic_value(z, y)
        # Welford update
        delta = v - mean
        mean += delta / (t + 1)
        m2 += delta * (v - mean)
    var = m2 / (n - 1) if n > 1 else 0.0
    return mean, np.sqrt(var / n)


def _amplitudes(dim, cond_number):
    if dim == 1:
        return np.ones(1)
    # squared amplitudes log-spaced over [1/kappa, 1], then normalized
    s = np.sqrt(cond_number ** np.linspace(-1.0, 0.0, dim))
    return s / np.sqrt(np.sum(s**2))


def _uniform_in_ball(rng, dim, radius):
    z = rng.standard_normal(dim)
    z /= np.linalg.norm(z)
    return radius * rng.random() ** (1.0 / dim) * z


def make_instance(dim, cond_number=1.0, noise_sigma=0.0, radius_R=1.0, seed=0, loss=SQUARED, l2=0.0):
    """Build a :class:`ProblemInstance`.

    Parameters
    ----------
    dim : int
        Ambient dimension ``d``.
    cond_number : float
        Ratio of the largest to the smallest second-moment eigenvalue.
    noise_sigma : float
        Label noise standard deviation (squared loss only).
    radius_R : float
        Radius of the hypothesis ball; ``w_star`` is drawn in radius ``R/2``.
    seed : int
        Seed for ``w_star`` and the key of every sample stream.
    loss : {"squared", "logistic-l2"}
    l2 : float
        Regularization weight for ``logistic-l2``.
    """
    spec = InstanceSpec(int(dim), float(cond_number), float(noise_sigma), float(radius_R), int(seed), loss, float(l2))
    if spec.dim < 1:
        raise InvalidConfigError(f"dim must be >= 1, got {dim}")
    if not spec.cond_number >= 1.0:
        raise InvalidConfigError(f"condition number must be >= 1, got {cond_number}")
    if spec.dim == 1 and spec.cond_number != 1.0:
        raise InvalidConfigError("a one-dimensional instance has condition number 1")
    if not spec.noise_sigma >= 0.0:
        raise InvalidConfigError(f"noise_sigma must be >= 0, got {noise_sigma}")
    if not spec.radius_R > 0.0:
        raise InvalidConfigError(f"radius_R must be > 0, got {radius_R}")
    _rng.stream_key(spec.seed, 0)
    model = LossModel(loss, l2)
    if model.kind == LOGISTIC_L2 and spec.noise_sigma != 0.0:
        raise InvalidConfigError("noise_sigma applies to the squared loss only")

    scale = _amplitudes(spec.dim, spec.cond_number)
    cov_eigs = scale**2 / 3.0
    rng = np.random.default_rng(spec.seed)
    w_gen = _uniform_in_ball(rng, spec.dim, spec.radius_R / 2)

    if model.kind == SQUARED:
        w_star = w_gen
        alpha = float(cov_eigs.min())
        beta = float(cov_eigs.max())
        eps_opt = 0.5 * spec.noise_sigma**2
    else:
        alpha = model.l2
        beta = model.beta_scalar * float(cov_eigs.max()) + model.l2
        w_star, eps_opt = _fit_logistic(spec, scale, w_gen, model.l2)

    return ProblemInstance(
        dim=spec.dim,
        w_star=w_star,
        cov_eigs=cov_eigs,
        noise_sigma=spec.noise_sigma,
        alpha=alpha,
        beta=beta,
        eps_opt=float(eps_opt),
        radius_R=spec.radius_R,
        seed=spec.seed,
        loss=model,
        scale=scale,
        w_gen=w_gen,
        spec=spec,
    )


def instance_from_spec(spec):
    return make_instance(**spec.to_dict())


def _fit_logistic(spec, scale, w_gen, l2):
    # Newton on a large fixed sample; the minimizer is approximate.
    k0, k1 = _rng.stream_key(spec.seed, 0)
    X = np.empty((_LOGISTIC_FIT_DRAWS, spec.dim))
    Y = np.empty(_LOGISTIC_FIT_DRAWS)
    _sample_batch(k0, k1, 0, _rng.TAG_CALIBRATE, scale, w_gen, 0.0, 1, X, Y)
    w = w_gen.copy()
    n = X.shape[0]
    for _ in range(50):
        m = Y * (X @ w)
        p = 1.0 / (1.0 + np.exp(m))
        grad = -(X.T @ (Y * p)) / n + l2 * w
        hess = (X.T * (p * (1 - p))) @ X / n + l2 * np.eye(spec.dim)
        step = np.linalg.solve(hess, grad)
        w = w - step
        if np.linalg.norm(step) < 1e-13:
            break
    value = np.mean(np.logaddexp(0.0, -Y * (X @ w))) + 0.5 * l2 * (w @ w)
    return w, value


def _key(instance, stream):
    return _rng.stream_key(instance.seed, stream)


def sample(instance, count, start=0, stream=0):
    """Draw examples at positions ``start .. start+count-1`` of a stream.

    Returns
    -------
    X : ndarray of shape (count, dim)
    y : ndarray of shape (count,)
    """
    if count < 1:
        raise InvalidInputError(f"count must be >= 1, got {count}")
    return _sample_tagged(instance, count, start, stream, _rng.TAG_TRAIN)


def _sample_tagged(instance, count, start, stream, tag):
    k0, k1 = _key(instance, stream)
    X = np.empty((int(count), instance.dim))
    Y = np.empty(int(count))
    _sample_batch(
        k0, k1, int(start), tag, instance.scale, instance.w_gen,
        instance.noise_sigma, instance.loss.code, X, Y,
    )
    return X, Y


def draw_example(instance, position, stream=0):
    X, Y = sample(instance, 1, start=position, stream=stream)
    return Example(X[0], float(Y[0]))


def risk_monte_carlo(instance, w, n_samples=DEFAULT_MC_DRAWS, stream=0, start=0):
    """Monte-Carlo risk estimate with its standard error.

    Draws come from a stream reserved for risk evaluation, disjoint from the
    training examples. The l2 term of ``logistic-l2`` is added exactly.
    """
    w = as_vector(w, dim=instance.dim, name="w")
    k0, k1 = _key(instance, stream)
    mean, se = _risk_mc(
        k0, k1, int(start), int(n_samples), _rng.TAG_RISK, instance.scale,
        instance.w_gen, instance.noise_sigma, instance.loss.code, w,
    )
    return mean + 0.5 * instance.loss.l2 * float(w @ w), se


def population_risk(instance, w):
    """Risk ``L(w)``: closed form for the squared loss, Monte-Carlo otherwise."""
    w = as_vector(w, dim=instance.dim, name="w")
    if instance.loss.kind == SQUARED:
        e = w - instance.w_star
        return float(0.5 * np.dot(instance.cov_eigs * e, e) + instance.eps_opt)
    return risk_monte_carlo(instance, w)[0]


def risk_gradient(instance, w):
    """Gradient of the risk; closed form ``Sigma (w - w_star)`` for the squared loss."""
    w = as_vector(w, dim=instance.dim, name="w")
    if instance.loss.kind == SQUARED:
        return instance.cov_eigs * (w - instance.w_star)
    X, Y = _sample_tagged(instance, DEFAULT_MC_DRAWS, 0, 0, _rng.TAG_RISK)
    m = Y * (X @ w)
    return -(X.T @ (Y / (1.0 + np.exp(m)))) / X.shape[0] + instance.loss.l2 * w


def check_feasible(instance, eps_prior):
    """Raise :class:`InfeasibleTargetError` unless ``eps_prior >= eps_opt``."""
    if eps_prior < instance.eps_opt:
        raise InfeasibleTargetError(
            f"infeasible target risk: eps_prior={eps_prior:.6g} is below the optimal "
            f"risk eps_opt={instance.eps_opt:.6g}"
        )
