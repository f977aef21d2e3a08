import numpy as np
import pytest

from swarmform.bspline import (BSplineTrajectory, basis_row, clamped_knots,
                               sample_to_bspline)
from swarmform.errors import OutOfRange, TooShort
from swarmform.polytraj import PiecewisePolynomial, fit_min_acc_polynomial


def naive_basis(knots, j, p, t, t_end):
    # independent Cox-de Boor recursion (with right-end closure)
    if p == 0:
        if knots[j] <= t < knots[j + 1]:
            return 1.0
        if t == t_end and knots[j] < knots[j + 1] == t_end:
            return 1.0
        return 0.0
    out = 0.0
    d1 = knots[j + p] - knots[j]
    if d1 > 0:
        out += (t - knots[j]) / d1 * naive_basis(knots, j, p - 1, t, t_end)
    d2 = knots[j + p + 1] - knots[j + 1]
    if d2 > 0:
        out += (knots[j + p + 1] - t) / d2 * naive_basis(knots, j + 1, p - 1, t, t_end)
    return out


def random_traj(rng, n=9, dt=0.5):
    return BSplineTrajectory(rng.normal(scale=3.0, size=(n, 3)), dt)


def test_constant_control_points_give_constant_curve():
    traj = BSplineTrajectory(np.tile([1.0, -2.0, 0.5], (7, 1)), 0.5)
    for t in np.linspace(0, traj.duration, 17):
        assert np.allclose(traj.eval(t), [1, -2, 0.5], atol=1e-12)
    vel = traj.derivative(1)
    acc = traj.derivative(2)
    assert np.allclose(vel.control_points, 0.0, atol=1e-12)
    assert np.allclose(acc.control_points, 0.0, atol=1e-12)


def test_interior_knot_basis_weights():
    # deep interior knot of a uniform cubic: weights 1/6, 4/6, 1/6
    n, dt = 12, 1.0
    cps = np.zeros((n, 3))
    j = 6
    cps[j, 0] = 6.0
    traj = BSplineTrajectory(cps, dt)
    t = traj.knots[j + 2]  # knot where q_j carries the 4/6 weight
    assert traj.eval(t)[0] == pytest.approx(4.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_matches_naive_cox_de_boor(seed):
    rng = np.random.default_rng(seed)
    traj = random_traj(rng)
    knots = traj.knots
    for t in rng.uniform(0, traj.duration, size=20):
        row = basis_row(knots, 3, t)
        naive = np.array([naive_basis(knots, j, 3, t, traj.duration)
                          for j in range(traj.n_ctrl)])
        assert np.allclose(row, naive, atol=1e-12)
        assert np.allclose(traj.eval(t), naive @ traj.control_points, atol=1e-12)


def test_convex_hull_property():
    rng = np.random.default_rng(42)
    for _ in range(50):
        traj = random_traj(rng, n=int(rng.integers(5, 12)))
        for t in rng.uniform(0, traj.duration, size=20):
            row = traj.basis(t)
            active = row > 1e-15
            assert row.sum() == pytest.approx(1.0, abs=1e-9)
            assert np.count_nonzero(active) <= 4
            p = traj.eval(t)
            lo = traj.control_points[active].min(axis=0) - 1e-9
            hi = traj.control_points[active].max(axis=0) + 1e-9
            assert np.all(p >= lo) and np.all(p <= hi)


def test_clamped_endpoints_exact():
    rng = np.random.default_rng(3)
    traj = random_traj(rng)
    assert np.array_equal(traj.eval(0.0), traj.control_points[0])
    assert np.array_equal(traj.eval(traj.duration), traj.control_points[-1])


def test_derivative_matches_finite_differences():
    rng = np.random.default_rng(5)
    traj = random_traj(rng)
    vel = traj.derivative(1)
    h = 1e-6
    for t in rng.uniform(h, traj.duration - h, size=15):
        fd = (traj.eval(t + h) - traj.eval(t - h)) / (2 * h)
        v = vel.eval(t)
        assert np.allclose(v, fd, rtol=1e-6, atol=1e-5)


def test_eval_out_of_range_raises():
    traj = random_traj(np.random.default_rng(0))
    with pytest.raises(OutOfRange):
        traj.eval(-0.5)
    with pytest.raises(OutOfRange):
        traj.eval(traj.duration + 0.5)


def constant_poly(pos, duration):
    c = np.zeros((1, 4, 3))
    c[0, 0] = pos
    return PiecewisePolynomial(c, [duration])


def test_fit_constant_polynomial():
    poly = constant_poly([2.0, 1.0, -1.0], 4.0)
    traj = sample_to_bspline(poly, 0.5, ([2, 1, -1], [0, 0, 0], [0, 0, 0]))
    assert np.allclose(traj.control_points, [2, 1, -1], atol=1e-9)


def test_fit_straight_line():
    c = np.zeros((1, 4, 3))
    c[0, 0] = [0, 0, 1]
    c[0, 1] = [1.0, 0.5, 0]  # constant velocity
    poly = PiecewisePolynomial(c, [4.0])
    traj = sample_to_bspline(poly, 0.5, ([0, 0, 1], [1.0, 0.5, 0], [0, 0, 0]))
    for t in np.linspace(0, 4.0, 33):
        assert np.allclose(traj.eval(t), poly.eval(t), atol=1e-9)
    # interior control points equally spaced along the line
    interior = traj.control_points[2:-2]
    steps = np.diff(interior, axis=0)
    assert np.allclose(steps, steps[0], atol=1e-9)


def test_fit_smooth_polynomial_accuracy():
    wps = np.array([[0, 0, 1], [2, 1, 1], [4, -1, 1], [6, 0.5, 1], [8, 0, 1]],
                   dtype=float)
    poly = fit_min_acc_polynomial(wps, [1.5, 1.5, 1.5, 1.5])
    start = (wps[0], poly.eval(0.0, order=1), poly.eval(0.0, order=2))
    traj = sample_to_bspline(poly, 0.5, start)
    errs = [np.linalg.norm(traj.eval(t) - poly.eval(t))
            for t in np.linspace(0, poly.duration, 200)]
    assert max(errs) < 0.05


def test_fit_too_short_raises():
    poly = constant_poly([0, 0, 0], 1.0)
    with pytest.raises(TooShort):
        sample_to_bspline(poly, 0.5, ([0, 0, 0], [0, 0, 0], [0, 0, 0]))


def test_start_state_pinning():
    wps = np.array([[0, 0, 1], [3, 1, 1], [6, 0, 1]], dtype=float)
    poly = fit_min_acc_polynomial(wps, [2.0, 2.0])
    p0, v0, a0 = np.array([0.1, -0.05, 1.0]), np.array([0.4, 0.2, 0]), np.array([0.5, 0, 0])
    traj = sample_to_bspline(poly, 0.5, (p0, v0, a0))
    h = 1e-5
    assert np.allclose(traj.eval(0.0), p0, atol=1e-12)
    v = traj.derivative(1).eval(0.0)
    a = traj.derivative(2).eval(0.0)
    assert np.allclose(v, v0, atol=1e-9)
    assert np.allclose(a, a0, atol=1e-8)
