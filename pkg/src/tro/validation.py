"""Input checks shared by the estimators and config objects."""

import math

import numpy as np
from sklearn.utils.validation import check_X_y

from .exceptions import InvalidConfigError, InvalidInputError
from .losses import LOGISTIC_L2, UNIT_BALL_SLACK


def check_positive(name, value):
    if isinstance(value, bool) or not isinstance(value, (int, float, np.floating, np.integer)):
        raise InvalidConfigError(f"{name} must be a number, got {value!r}")
    if not (math.isfinite(value) and value > 0):
        raise InvalidConfigError(f"{name} must be positive, got {value!r}")
    return float(value)


def check_open_unit(name, value):
    if isinstance(value, bool) or not isinstance(value, (int, float, np.floating)):
        raise InvalidConfigError(f"{name} must be a number, got {value!r}")
    if not 0.0 < value < 1.0:
        raise InvalidConfigError(f"{name} must lie in (0, 1), got {value!r}")
    return float(value)


def check_positive_int(name, value, allow_none=False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value <= 0:
        raise InvalidConfigError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_unit_ball(X, slack=UNIT_BALL_SLACK):
    """Raise unless every row of ``X`` has norm at most ``1 + slack``."""
    norms = np.sqrt(np.einsum("ij,ij->i", X, X))
    worst = float(norms.max()) if norms.size else 0.0
    if worst > 1.0 + slack:
        raise InvalidInputError(f"rows of X must lie in the unit ball; largest norm is {worst:.6g}")


def check_training_data(X, y, loss_kind):
    """Validate a training set; returns float64 ``X`` (C order) and ``y``."""
    X, y = check_X_y(X, y, dtype=np.float64, order="C", y_numeric=True)
    check_unit_ball(X)
    if loss_kind == LOGISTIC_L2 and not np.all(np.isin(y, (-1.0, 1.0))):
        raise InvalidInputError("logistic labels must be -1 or +1")
    return X, np.ascontiguousarray(y, dtype=np.float64)
