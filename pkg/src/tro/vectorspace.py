"""Euclidean vector helpers and the two projections the optimizers need.

Parameter vectors are plain 1-D ``float64`` numpy arrays. The jitted
``_project_*`` cores are shared with the SGD kernels so that the public
functions and the hot loops run the exact same arithmetic.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .exceptions import InfeasibleDomainError, InvalidInputError, NumericalFailureError

DYKSTRA_TOL = 1e-12
DYKSTRA_MAX_ITER = 10_000
# Dykstra stops once successive iterates move less than DYKSTRA_TOL; the
# gap check guarantees the returned point sits in both balls.
_GAP_TOL = 1e-11

# How the two-active-constraint case is solved.
EXACT = 0
DYKSTRA = 1
METHODS = {"exact": EXACT, "dykstra": DYKSTRA}

# Status codes returned by the jitted projection.
OK = 0
NOT_CONVERGED = 1


def as_vector(v, dim=None, name="v"):
    """Validate ``v`` as a finite 1-D float vector and return a float64 copy."""
    arr = np.array(v, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise InvalidInputError(f"{name} has dimension {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class Ball:
    """Closed Euclidean ball ``{w : ||w - center|| <= radius}``."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        center = as_vector(self.center, name="center")
        center.flags.writeable = False
        radius = float(self.radius)
        if not np.isfinite(radius) or radius < 0:
            raise InvalidInputError(f"radius must be finite and nonnegative, got {radius}")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", radius)

    @classmethod
    def origin(cls, dim, radius):
        return cls(np.zeros(dim), radius)

    @property
    def dim(self):
        return self.center.shape[0]

    def contains(self, v, slack=0.0):
        return norm2(np.asarray(v) - self.center) <= self.radius + slack


def norm2(v):
    """Euclidean norm. Raises on non-finite input."""
    arr = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("vector contains non-finite entries")
    # rescale so that tiny entries do not underflow when squared
    big = float(np.max(np.abs(arr))) if arr.size else 0.0
    if big == 0.0:
        return 0.0
    scaled = arr / big
    return big * float(np.sqrt(np.dot(scaled, scaled)))


@njit(cache=True, inline="always")
def _dist(a, b):
    s = 0.0
    for i in range(a.shape[0]):
        t = a[i] - b[i]
        s += t * t
    return np.sqrt(s)


@njit(cache=True, inline="always")
def _project_ball_into(v, center, radius, out):
    """Write the projection of ``v`` on the ball into ``out``.

    Points with ``||v - center|| <= radius`` (ties included) are copied
    unchanged.
    """
    n = _dist(v, center)
    if n <= radius:
        for i in range(v.shape[0]):
            out[i] = v[i]
    else:
        scale = radius / n
        for i in range(v.shape[0]):
            out[i] = center[i] + scale * (v[i] - center[i])


@njit(cache=True, inline="always")
def _project_ring_into(v, c_out, r_out, c_in, r_in, out):
    # Nearest point of the sphere intersection: the (d-2)-sphere of radius
    # rho centred at c0 = c_out + a e in the hyperplane normal to e.
    d = v.shape[0]
    D = _dist(c_in, c_out)
    a = (D * D + r_out * r_out - r_in * r_in) / (2.0 * D)
    rho = np.sqrt(max(r_out * r_out - a * a, 0.0))
    proj = 0.0
    for i in range(d):
        proj += (v[i] - c_out[i]) * (c_in[i] - c_out[i]) / D
    n2 = 0.0
    for i in range(d):
        e = (c_in[i] - c_out[i]) / D
        out[i] = v[i] - c_out[i] - proj * e
        n2 += out[i] * out[i]
    if n2 == 0.0:
        # v on the axis: every ring point is nearest, take one orthogonal to e
        j = 0
        for i in range(d):
            if abs(c_in[i] - c_out[i]) < abs(c_in[j] - c_out[j]):
                j = i
        ej = (c_in[j] - c_out[j]) / D
        for i in range(d):
            out[i] = -ej * (c_in[i] - c_out[i]) / D
        out[j] += 1.0
        n2 = 0.0
        for i in range(d):
            n2 += out[i] * out[i]
    scale = rho / np.sqrt(n2)
    for i in range(d):
        out[i] = c_out[i] + a * (c_in[i] - c_out[i]) / D + scale * out[i]


@njit(cache=True)
def _project_intersection_into(v, c_out, r_out, c_in, r_in, method, tol, max_iter, out):
    """Project ``v`` on ``ball(c_out, r_out) ∩ ball(c_in, r_in)``.

    Returns ``(status, iterations)``. Cheap exact cases are tried first.
    When neither single-ball projection is feasible both constraints are
    active and the answer is the nearest point where the two spheres meet:
    ``method == EXACT`` computes it in closed form, ``method == DYKSTRA``
    runs alternating projections (status 1 if they do not converge).
    """
    d = v.shape[0]
    in_out = _dist(v, c_out) <= r_out
    in_in = _dist(v, c_in) <= r_in
    if in_out and in_in:
        for i in range(d):
            out[i] = v[i]
        return 0, 0
    # inner ball inside outer ball: the intersection is the inner ball
    if _dist(c_in, c_out) + r_in <= r_out:
        _project_ball_into(v, c_in, r_in, out)
        return 0, 0
    # projecting on a superset and landing in the intersection is exact
    _project_ball_into(v, c_in, r_in, out)
    if _dist(out, c_out) <= r_out:
        return 0, 0
    _project_ball_into(v, c_out, r_out, out)
    if _dist(out, c_in) <= r_in:
        return 0, 0
    if method == 0:
        _project_ring_into(v, c_out, r_out, c_in, r_in, out)
        return 0, 0

    x = v.copy()
    y = np.empty(d)
    p = np.zeros(d)
    q = np.zeros(d)
    tmp = np.empty(d)
    xn = np.empty(d)
    for it in range(1, max_iter + 1):
        for i in range(d):
            tmp[i] = x[i] + p[i]
        _project_ball_into(tmp, c_out, r_out, y)
        for i in range(d):
            p[i] = tmp[i] - y[i]
            tmp[i] = y[i] + q[i]
        _project_ball_into(tmp, c_in, r_in, xn)
        for i in range(d):
            q[i] = tmp[i] - xn[i]
        step = _dist(xn, x)
        gap = _dist(xn, y)
        for i in range(d):
            x[i] = xn[i]
        if step <= tol and gap <= _GAP_TOL:
            for i in range(d):
                out[i] = x[i]
            return 0, it
    for i in range(d):
        out[i] = x[i]
    return 1, max_iter


def project_ball(v, ball):
    """Euclidean projection of ``v`` onto ``ball``.

    Examples
    --------
    >>> project_ball(np.array([3.0, 4.0]), Ball.origin(2, 1.0))
    array([0.6, 0.8])
    """
    v = as_vector(v, dim=ball.dim)
    out = np.empty_like(v)
    _project_ball_into(v, ball.center, ball.radius, out)
    return out


def project_intersection(v, outer, inner, method="exact", tol=DYKSTRA_TOL, max_iter=DYKSTRA_MAX_ITER):
    """Euclidean projection of ``v`` onto ``outer ∩ inner``.

    Parameters
    ----------
    v : array_like
        Point to project.
    outer, inner : Ball
        The two balls. Their intersection must be nonempty.
    method : {"exact", "dykstra"}
        Closed-form solution, or Dykstra's alternating projections. Dykstra
        can need very many iterations when the spheres meet at a shallow
        angle.
    tol : float
        Dykstra stops when successive iterates are closer than ``tol``.
    max_iter : int
        Dykstra iteration cap.

    Raises
    ------
    InfeasibleDomainError
        If the balls do not intersect.
    NumericalFailureError
        If Dykstra does not converge; ``last_iterate`` holds its final point.
    """
    if method not in METHODS:
        raise InvalidInputError(f"method must be one of {tuple(METHODS)}, got {method!r}")
    if outer.dim != inner.dim:
        raise InvalidInputError(f"ball dimensions differ: {outer.dim} vs {inner.dim}")
    v = as_vector(v, dim=outer.dim)
    gap = norm2(inner.center - outer.center)
    if gap > outer.radius + inner.radius:
        raise InfeasibleDomainError(
            f"balls do not intersect: centers {gap:.6g} apart, radii sum "
            f"{outer.radius + inner.radius:.6g}"
        )
    out = np.empty_like(v)
    status, _ = _project_intersection_into(
        v, outer.center, outer.radius, inner.center, inner.radius, METHODS[method], tol, max_iter, out
    )
    if status != OK:
        raise NumericalFailureError(
            f"Dykstra projection did not converge in {max_iter} iterations", last_iterate=out
        )
    return out
