import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tro.exceptions import InfeasibleDomainError, InvalidInputError, NumericalFailureError
from tro.vectorspace import Ball, _project_ring_into, as_vector, norm2, project_ball, project_intersection
from oracles import projection_oracle

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def vec(d):
    return arrays(np.float64, d, elements=finite)


@pytest.mark.parametrize("v, expected", [([3, 4], 5.0), ([0, 0, 0], 0.0), ([1, 1, 1, 1], 2.0)])
def test_norm2_examples(v, expected):
    assert norm2(v) == expected


@pytest.mark.parametrize("bad", [[1.0, np.nan], [np.inf, 0.0]])
def test_norm2_rejects_non_finite(bad):
    with pytest.raises(InvalidInputError):
        norm2(bad)


@given(vec(4))
def test_norm2_zero_iff_zero_vector(v):
    assert (norm2(v) == 0) == (not np.any(v))


def test_as_vector_checks():
    with pytest.raises(InvalidInputError):
        as_vector([[1.0, 2.0]])
    with pytest.raises(InvalidInputError):
        as_vector([1.0, 2.0], dim=3)
    with pytest.raises(InvalidInputError):
        Ball(np.zeros(2), -1.0)


@pytest.mark.parametrize(
    "v, center, r, expected",
    [
        ([0.5, 0], [0, 0], 1.0, [0.5, 0]),
        ([3, 4], [0, 0], 1.0, [0.6, 0.8]),
        ([2, 0], [1, 0], 0.5, [1.5, 0]),
    ],
)
def test_project_ball_examples(v, center, r, expected):
    np.testing.assert_allclose(project_ball(np.array(v, float), Ball(np.array(center, float), r)), expected, atol=1e-15)


def test_project_ball_boundary_point_unchanged():
    v = np.array([0.6, 0.8])
    assert np.array_equal(project_ball(v, Ball.origin(2, 1.0)), v)


@given(vec(3), vec(3), st.floats(0, 5))
def test_project_ball_feasible_and_idempotent(v, c, r):
    ball = Ball(c, r)
    p = project_ball(v, ball)
    assert norm2(p - c) <= r + 1e-12
    np.testing.assert_allclose(project_ball(p, ball), p, atol=1e-12)


def test_intersection_examples():
    outer = Ball.origin(2, 1.0)
    v = np.array([0.2, 0.1])
    assert np.array_equal(project_intersection(v, outer, Ball(np.array([0.1, 0.0]), 0.5)), v)
    np.testing.assert_allclose(project_intersection(np.array([2.0, 0]), outer, Ball.origin(2, 0.5)), [0.5, 0.0])


def test_intersection_matches_sampling_oracle():
    c_in = np.array([0.8, 0.0])
    v = np.array([2.0, 1.0])
    p = project_intersection(v, Ball.origin(2, 1.0), Ball(c_in, 0.5))
    o = projection_oracle(v, np.zeros(2), 1.0, c_in, 0.5)
    assert norm2(o - v) >= norm2(p - v) - 1e-6
    np.testing.assert_allclose(p, o, atol=1e-6)


def _random_config(rng, d):
    r_out = rng.uniform(0.5, 2.0)
    c_in = rng.standard_normal(d)
    c_in *= rng.uniform(0, r_out) / norm2(c_in)
    return Ball.origin(d, r_out), Ball(c_in, rng.uniform(0.05, 1.5) * r_out)


@pytest.mark.parametrize("d", [2, 3, 7])
def test_intersection_variational_inequality(rng, d):
    for _ in range(20):
        outer, inner = _random_config(rng, d)
        v = 3 * rng.standard_normal(d)
        p = project_intersection(v, outer, inner)
        assert outer.contains(p, 1e-10) and inner.contains(p, 1e-10)
        # feasible test points: samples of the inner ball kept inside the outer one
        ys = inner.center + inner.radius * rng.uniform(-1, 1, (400, d)) / np.sqrt(d)
        ys = ys[np.linalg.norm(ys, axis=1) <= outer.radius]
        assert np.all((ys - p) @ (v - p) <= 1e-8)


@pytest.mark.parametrize("d", [2, 5])
def test_intersection_nonexpansive(rng, d):
    for _ in range(3):
        outer, inner = _random_config(rng, d)
        U = 3 * rng.standard_normal((1000, d))
        V = 3 * rng.standard_normal((1000, d))
        for u, v in zip(U, V):
            pu = project_intersection(u, outer, inner)
            pv = project_intersection(v, outer, inner)
            assert norm2(pu - pv) <= norm2(u - v) + 1e-9


def test_intersection_idempotent(rng):
    for _ in range(50):
        outer, inner = _random_config(rng, 4)
        p = project_intersection(4 * rng.standard_normal(4), outer, inner)
        np.testing.assert_allclose(project_intersection(p, outer, inner), p, atol=1e-12)


def test_nested_inner_ball_equals_ball_projection(rng):
    outer = Ball.origin(3, 1.0)
    for _ in range(50):
        c = rng.uniform(-0.3, 0.3, 3)
        inner = Ball(c, 1.0 - norm2(c) - 0.01)
        v = 3 * rng.standard_normal(3)
        assert np.array_equal(project_intersection(v, outer, inner), project_ball(v, inner))


def test_disjoint_balls_raise():
    with pytest.raises(InfeasibleDomainError):
        project_intersection(np.zeros(2), Ball.origin(2, 1.0), Ball(np.array([3.0, 0.0]), 1.0))


def test_dimension_mismatch_raises():
    with pytest.raises(InvalidInputError):
        project_intersection(np.zeros(2), Ball.origin(2, 1.0), Ball.origin(3, 1.0))


def test_non_convergence_reports_last_iterate():
    # nearly tangent balls make Dykstra crawl
    outer = Ball.origin(2, 1.0)
    inner = Ball(np.array([1.999, 0.0]), 1.0)
    with pytest.raises(NumericalFailureError) as info:
        project_intersection(np.array([1.0, 3.0]), outer, inner, method="dykstra", max_iter=2)
    assert info.value.last_iterate is not None
    assert info.value.last_iterate.shape == (2,)


def test_exact_agrees_with_dykstra(rng):
    for _ in range(200):
        outer, inner = _random_config(rng, 3)
        v = 3 * rng.standard_normal(3)
        try:
            ref = project_intersection(v, outer, inner, method="dykstra", max_iter=100_000)
        except NumericalFailureError:
            continue
        np.testing.assert_allclose(project_intersection(v, outer, inner), ref, atol=1e-8)


def test_shallow_angle_case_is_exact():
    # Dykstra stalls here; the closed form does not
    outer = Ball.origin(5, 0.8006555652990561)
    inner = Ball(np.array([-0.06235928, 0.06986685, -0.04969088, 0.09951264, 0.0349531]), 0.9376227312368544)
    v = np.array([0.87713136, -1.97124237, 2.03308558, -2.61762245, 0.24112262])
    p = project_intersection(v, outer, inner)
    assert outer.contains(p, 1e-12) and inner.contains(p, 1e-12)
    o = projection_oracle(v, outer.center, outer.radius, inner.center, inner.radius)
    np.testing.assert_allclose(p, o, atol=1e-6)


def test_point_on_center_axis():
    # on the axis a single-ball projection is always feasible
    outer = Ball.origin(3, 1.0)
    inner = Ball(np.array([1.5, 0.0, 0.0]), 1.0)
    np.testing.assert_array_equal(project_intersection(np.array([5.0, 0.0, 0.0]), outer, inner), [1.0, 0.0, 0.0])
    np.testing.assert_array_equal(project_intersection(np.array([-5.0, 0.0, 0.0]), outer, inner), [0.5, 0.0, 0.0])


def test_ring_core_on_axis():
    # the spheres meet in the plane x = (1.5**2 + 1 - 1) / 3 = 0.75
    c_out, c_in = np.zeros(3), np.array([1.5, 0.0, 0.0])
    out = np.empty(3)
    _project_ring_into(np.array([0.3, 0.0, 0.0]), c_out, 1.0, c_in, 1.0, out)
    assert abs(out[0] - 0.75) < 1e-12
    assert abs(norm2(out) - 1.0) < 1e-12 and abs(norm2(out - c_in) - 1.0) < 1e-12


def test_unknown_method():
    with pytest.raises(InvalidInputError):
        project_intersection(np.zeros(2), Ball.origin(2, 1.0), Ball.origin(2, 1.0), method="newton")
