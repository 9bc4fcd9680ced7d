import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from longitude_lab import sphere
from longitude_lab.errors import (BranchJump, DegenerateCircle, NoMargin, NotTangent, OnAxis,
                                  OnBranchCut)
from longitude_lab.sphere import LongitudeChart, SpherePoint, TangentVector

S2 = math.sqrt(2) / 2
X_EX = np.array([S2, 0.0, S2])  # lies on the standard cut, so use a continued chart there
unit_vectors = st.lists(st.floats(-1, 1), min_size=3, max_size=6).filter(
    lambda v: np.linalg.norm(v) > 0.1).map(lambda v: np.asarray(v) / np.linalg.norm(v))


def chart_at(x):
    return LongitudeChart.continued(x)


# --- types ------------------------------------------------------------------------------


def test_sphere_point_rejects_non_unit_and_low_dimension():
    with pytest.raises(ValueError):
        SpherePoint(np.array([1.0, 1.0, 0.0]))
    with pytest.raises(ValueError):
        SpherePoint(np.array([1.0, 0.0]))
    assert SpherePoint.basis_vector(2, 3).coords.tolist() == [0, 0, 1, 0]


def test_tangent_vector_checks_tangency():
    x = SpherePoint(np.array([0.0, 0.0, 1.0]))
    TangentVector(x, np.array([1.0, 0.0, 0.0]))
    with pytest.raises(NotTangent):
        TangentVector(x, np.array([0.0, 0.1, 1.0]))


# --- projection and lift -------------------------------------------------------------------


@pytest.mark.parametrize("x, expected", [
    ((1, 0, 0), (1, 0)), ((0, 0, 1), (0, 0)), ((S2, 0, S2), (S2, 0))])
def test_project(x, expected):
    assert sphere.project(np.array(x, float)) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("x, r, theta", [
    ((0, 1, 0), 1.0, math.pi / 2),
    ((-1, 0, 0), 1.0, math.pi),
    ((0, -S2, S2), S2, 3 * math.pi / 2),
])
def test_standard_lift_examples(x, r, theta):
    got = sphere.lift(np.array(x, float))
    assert got == pytest.approx((r, theta), abs=1e-12)


def test_lift_errors():
    with pytest.raises(OnAxis):
        sphere.lift(np.array([0.0, 0.0, 1.0]))
    with pytest.raises(OnBranchCut):
        sphere.lift(np.array([1.0, 0.0, 0.0]))
    # a margin violation slightly above the cut
    eps = 1e-11
    with pytest.raises(OnBranchCut):
        sphere.lift(np.array([math.cos(eps), math.sin(eps), 0.0]))


@given(unit_vectors)
@settings(max_examples=200, deadline=None)
def test_lift_reconstructs_projection(x):
    if math.hypot(x[0], x[1]) < 1e-3 or abs(math.atan2(x[1], x[0])) < 1e-6:
        return
    r, th = sphere.lift(x)
    assert 0 < th < 2 * math.pi
    assert r * math.cos(th) == pytest.approx(x[0], abs=1e-12)
    assert r * math.sin(th) == pytest.approx(x[1], abs=1e-12)


def test_polar_many_reports_offending_vertex():
    pts = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    with pytest.raises(OnAxis) as exc:
        LongitudeChart().polar_many(pts)
    assert exc.value.vertex == 1


def test_continued_chart_reaches_past_the_standard_cut():
    chart = chart_at(X_EX)
    r, th = chart.polar(X_EX)
    assert (r, th) == pytest.approx((S2, 0.0), abs=1e-15)
    with pytest.raises(ValueError):
        LongitudeChart.continued(X_EX, reference_angle=1.0)


def test_continue_along_tracks_winding_and_rejects_jumps():
    t = np.linspace(0, 3 * math.pi, 61)
    path = np.column_stack([np.cos(t), np.sin(t), np.zeros_like(t)])
    ang = sphere.continue_along(path)
    assert ang == pytest.approx(t, abs=1e-12)
    with pytest.raises(BranchJump):
        sphere.continue_along(path[::20])


# --- geodesics -------------------------------------------------------------------------


def test_geodesic_examples():
    x = np.array([0.0, 0.0, 1.0])
    v = np.array([0.0, 1.0, 0.0])
    assert sphere.geodesic(x, v, 0).coords == pytest.approx(x)
    assert sphere.geodesic(x, v, math.pi / 2).coords == pytest.approx(v, abs=1e-15)
    assert sphere.geodesic(x, v, math.pi).coords == pytest.approx(-x, abs=1e-15)
    with pytest.raises(NotTangent):
        sphere.geodesic(x, np.array([0.0, 2.0, 0.0]), 1.0)


@given(unit_vectors, st.floats(-20, 20))
@settings(max_examples=100, deadline=None)
def test_geodesic_keeps_unit_norm_and_arc_length(x, t):
    b = sphere.tangent_basis(x)[0]
    y = sphere.geodesic(x, b, t).coords
    assert np.linalg.norm(y) == pytest.approx(1.0, abs=1e-12)
    dist = math.acos(max(-1.0, min(1.0, float(x @ y))))
    tm = abs(t) % (2 * math.pi)
    assert dist == pytest.approx(min(tm, 2 * math.pi - tm), abs=1e-6)


@given(unit_vectors)
@settings(max_examples=60, deadline=None)
def test_tangent_basis_is_orthonormal_and_tangent(x):
    b = sphere.tangent_basis(x)
    assert b.shape == (x.size - 1, x.size)
    assert np.abs(b @ x).max() < 1e-12
    assert np.abs(b @ b.T - np.eye(b.shape[0])).max() < 1e-12


# --- Hessians --------------------------------------------------------------------------


def test_hess_linear_examples():
    x = X_EX
    b = sphere.tangent_basis(x)
    assert sphere.hess_linear(x, x, b).entries == pytest.approx(-np.eye(2))
    assert sphere.hess_linear(x, b[0], b).entries == pytest.approx(np.zeros((2, 2)), abs=1e-15)
    e1 = np.array([1.0, 0.0, 0.0])
    closed = sphere.hess_linear(x, e1, b)
    assert closed.entries == pytest.approx(-S2 * np.eye(2))
    fd = sphere.fd_hessian(lambda y: float(y @ e1), x, b, 1e-3)
    assert np.abs(fd.entries - closed.entries).max() <= 1e-6


def test_hess_theta_and_r_worked_example():
    chart = chart_at(X_EX)
    v = np.array([-S2, 0.0, S2])
    w = np.array([0.0, 1.0, 0.0])
    assert sphere.hess_theta_value(X_EX, v, w, chart) == pytest.approx(math.sqrt(2), abs=1e-12)
    basis = np.array([v, w])
    H = sphere.hess_theta(X_EX, chart, basis)
    assert H(v, w) == pytest.approx(math.sqrt(2), abs=1e-12)
    assert sphere.hess_r(X_EX, chart, basis)(v, v) == pytest.approx(-S2, abs=1e-12)
    fd = sphere.fd_hessian(chart.theta, X_EX, basis, 1e-3)
    assert np.abs(fd.entries - H.entries).max() <= 1e-6


def test_fd_hessian_constant_and_step_range():
    x = np.array([0.0, 1.0, 0.0])
    assert sphere.fd_hessian(lambda y: 3.0, x).entries == pytest.approx(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        sphere.fd_hessian(lambda y: 3.0, x, h=0.1)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_hessian_oracles_on_random_frames(n):
    rng = np.random.default_rng(n)
    for _ in range(25):
        x = rng.standard_normal(n + 1)
        x /= np.linalg.norm(x)
        if math.hypot(x[0], x[1]) < 0.1:
            continue
        chart = chart_at(x)
        Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        basis = Q.T @ sphere.tangent_basis(x)
        a = rng.standard_normal(n + 1)
        for f, closed in (
            (lambda y: float(y @ a), sphere.hess_linear(x, a, basis)),
            (lambda y: math.hypot(y[0], y[1]), sphere.hess_r(x, chart, basis)),
            (chart.theta, sphere.hess_theta(x, chart, basis)),
        ):
            fd = sphere.fd_hessian(f, x, basis, 1e-3)
            assert np.abs(fd.entries - closed.entries).max() <= 1e-6


def test_level_tangents_give_exact_zero():
    rng = np.random.default_rng(1)
    for n in (2, 3, 4):
        for _ in range(50):
            x = rng.standard_normal(n + 1)
            x /= np.linalg.norm(x)
            chart = chart_at(x)
            v = sphere.level_tangent(x, rng, chart)
            assert abs(v @ x) < 1e-12
            assert sphere.dtheta(x, v, chart) == 0.0
            assert sphere.hess_theta_value(x, v, v, chart) == 0.0
            vn = v / np.linalg.norm(v)
            assert abs(sphere.second_derivative_along(chart.theta, x, vn, 1e-3)) <= 1e-6


def test_bilinear_form_requires_exact_symmetry():
    with pytest.raises(ValueError):
        sphere.BilinearForm(np.array([[1.0, 2.0], [2.0 + 1e-16 * 4, 1.0]]), np.eye(2, 3))


# --- convex function constructor ----------------------------------------------------------


def cap_samples(rng, center, radius, count):
    pts = []
    while len(pts) < count:
        y = rng.standard_normal(3)
        y /= np.linalg.norm(y)
        if math.acos(min(1.0, y @ center)) <= radius:
            pts.append(y)
    return pts


def test_convex_function_on_a_cap():
    pts = cap_samples(np.random.default_rng(0), np.array([0.0, 1.0, 0.0]), math.pi / 6, 200)
    res = sphere.build_convex_function(pts)
    assert res.min_hessian_eigenvalue > 0
    assert 0 < res.c < 1 and res.lam >= 1 and res.sample_count == 200
    again = sphere.convex_min_eigenvalue(pts, LongitudeChart(), res.c, res.lam)
    assert again == res.min_hessian_eigenvalue


def test_convex_function_single_sample_and_no_margin():
    res = sphere.build_convex_function([np.array([0.0, 1.0, 0.0])])
    assert res.min_hessian_eigenvalue > 0
    with pytest.raises(NoMargin):
        sphere.build_convex_function([np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0])])


# --- appendix constructions ----------------------------------------------------------------


def test_meridian_equator_and_empty_arcs():
    hit, wit = sphere.great_circle_hits_arcs(np.array([0.0, 0.0, 1.0]), np.array([0.0, 1.0, 0.0]))
    assert hit and wit == pytest.approx(3 * math.pi / 2)
    hit, _ = sphere.great_circle_hits_arcs(np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]))
    assert hit
    assert sphere.great_circle_hits_arcs(np.array([0.0, 0.0, 1.0]), np.array([0.0, 1.0, 0.0]),
                                         arcs=[]) == (False, None)
    with pytest.raises(DegenerateCircle):
        sphere.great_circle_hits_arcs(np.array([0.0, 0.0, 1.0]), np.array([0.0, 0.0, 2.0]))


def test_arc_set_is_hit_by_every_random_great_circle():
    p, t = sphere.random_great_circles(np.random.default_rng(5), 20_000)
    assert sphere.arc_hits_batch(p, t).all()


def test_batch_agrees_with_scalar_checker_for_a_small_arc():
    arcs = [(0.0, 0.5)]
    p, t = sphere.random_great_circles(np.random.default_rng(6), 300)
    batch = sphere.arc_hits_batch(p, t, arcs)
    scalar = [sphere.great_circle_hits_arcs(a, b, arcs)[0] for a, b in zip(p, t)]
    assert batch.tolist() == scalar
    assert 0 < batch.mean() < 1


@pytest.mark.parametrize("f", [
    lambda y: y[2],
    lambda y: y[0],
    lambda y: y[2] ** 2 + math.exp(y[2]),
    lambda y: y[0] ** 3 - 0.3 * y[1] + y[2],
])
def test_symmetrized_gradient_vanishes_at_poles(f):
    nN, nS = sphere.symmetrized_gradient_at_poles(f)
    assert nN <= 1e-8 and nS <= 1e-8


def test_symmetrized_gradient_detects_non_invariant_average():
    # order 1 is no averaging at all, so a tilted height keeps its gradient
    nN, nS = sphere.symmetrized_gradient_at_poles(lambda y: y[0], order=1)
    assert nN == pytest.approx(1.0, abs=1e-6) and nS == pytest.approx(1.0, abs=1e-6)
