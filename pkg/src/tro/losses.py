"""Scalar losses of a linear prediction and per-coordinate gradient clipping."""

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.special import expit

from .exceptions import InvalidConfigError, InvalidInputError
from .vectorspace import as_vector

SQUARED = "squared"
LOGISTIC_L2 = "logistic-l2"
LOSS_KINDS = (SQUARED, LOGISTIC_L2)

# integer codes understood by the jitted kernels
KIND_CODES = {SQUARED: 0, LOGISTIC_L2: 1}

UNIT_BALL_SLACK = 1e-9


@dataclass(frozen=True)
class LossModel:
    """Loss ``l(z, y)`` of the prediction ``z = <w, x>``.

    ``logistic-l2`` carries an l2 weight ``l2``; that term is added to the
    risk (and to the clipped gradient) but is not part of :func:`loss`.
    """

    kind: str = SQUARED
    l2: float = 0.0

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise InvalidConfigError(f"unknown loss kind {self.kind!r}; expected one of {LOSS_KINDS}")
        l2 = float(self.l2)
        if not np.isfinite(l2) or l2 < 0:
            raise InvalidConfigError(f"l2 must be finite and nonnegative, got {self.l2}")
        if self.kind == SQUARED and l2 != 0.0:
            raise InvalidConfigError("the squared loss takes no l2 term")
        if self.kind == LOGISTIC_L2 and l2 <= 0.0:
            raise InvalidConfigError("logistic-l2 needs a positive l2 weight for strong convexity")
        object.__setattr__(self, "l2", l2)

    @property
    def beta_scalar(self):
        """Smoothness of ``z -> l(z, y)``."""
        return 1.0 if self.kind == SQUARED else 0.25

    @property
    def code(self):
        return KIND_CODES[self.kind]


@dataclass(frozen=True)
class ClipLevel:
    gamma: float

    def __post_init__(self):
        g = float(self.gamma)
        if not g > 0:
            raise InvalidInputError(f"clip level must be positive, got {self.gamma}")
        object.__setattr__(self, "gamma", g)


def loss(model, z, y):
    """Scalar loss value; always nonnegative."""
    if model.kind == SQUARED:
        return 0.5 * (z - y) ** 2
    return float(np.logaddexp(0.0, -y * z))


def loss_derivative(model, z, y):
    """Derivative of :func:`loss` in ``z``."""
    if model.kind == SQUARED:
        return z - y
    return float(-y * expit(-y * z))


def loss_grad(model, w, x, y):
    """Per-example gradient ``l'(<w, x>, y) * x`` (without any l2 term).

    Raises
    ------
    InvalidInputError
        If ``||x|| > 1`` beyond a 1e-9 slack; instances live in the unit ball.
    """
    w = as_vector(w, name="w")
    x = as_vector(x, dim=w.shape[0], name="x")
    if np.sqrt(x @ x) > 1.0 + UNIT_BALL_SLACK:
        raise InvalidInputError(f"instance norm {np.sqrt(x @ x):.6g} exceeds 1")
    return loss_derivative(model, float(w @ x), float(y)) * x


def clip_vector(g, level):
    """Clip every coordinate to ``[-gamma, gamma]`` keeping its sign."""
    gamma = level.gamma if isinstance(level, ClipLevel) else ClipLevel(level).gamma
    g = np.asarray(g, dtype=np.float64)
    return np.sign(g) * np.minimum(gamma, np.abs(g))


@njit(cache=True, inline="always")
def _dloss(kind, z, y):
    if kind == 0:
        return z - y
    t = -y * z
    # -y * sigmoid(t), evaluated without overflow
    if t >= 0:
        return -y / (1.0 + np.exp(-t))
    e = np.exp(t)
    return -y * e / (1.0 + e)


@njit(cache=True, inline="always")
def _clip(value, gamma):
    if value > gamma:
        return gamma
    if value < -gamma:
        return -gamma
    return value
