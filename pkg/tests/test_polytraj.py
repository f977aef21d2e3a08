import numpy as np
import pytest

from swarmform.errors import SingularSystem
from swarmform.polytraj import (PiecewisePolynomial, allocate_durations,
                                fit_min_acc_polynomial)


def qp_oracle_objective(waypoints, durations):
    """Equality-constrained least-squares solve of the same problem:
    minimize integral of squared acceleration over piecewise cubics subject
    to waypoint interpolation, C1 continuity, and rest boundary velocities.
    Acceleration continuity is NOT imposed; it must emerge at the optimum.
    """
    w = np.asarray(waypoints, dtype=float)
    h = np.asarray(durations, dtype=float)
    s = len(h)
    nv = 4 * s  # per-axis coefficients
    big_h = np.zeros((nv, nv))
    for i in range(s):
        hi = h[i]
        b = 4 * i
        big_h[b + 2, b + 2] = 4 * hi
        big_h[b + 2, b + 3] = 6 * hi ** 2
        big_h[b + 3, b + 2] = 6 * hi ** 2
        big_h[b + 3, b + 3] = 12 * hi ** 3
    rows = []
    rhs_cols = []
    def coeff_row(seg, t, order):
        r = np.zeros(nv)
        b = 4 * seg
        if order == 0:
            r[b:b + 4] = [1, t, t ** 2, t ** 3]
        elif order == 1:
            r[b:b + 4] = [0, 1, 2 * t, 3 * t ** 2]
        return r
    for i in range(s):
        rows.append(coeff_row(i, 0.0, 0)); rhs_cols.append(w[i])
        rows.append(coeff_row(i, h[i], 0)); rhs_cols.append(w[i + 1])
    for i in range(s - 1):
        rows.append(coeff_row(i, h[i], 1) - coeff_row(i + 1, 0.0, 1))
        rhs_cols.append(np.zeros(3))
    rows.append(coeff_row(0, 0.0, 1)); rhs_cols.append(np.zeros(3))
    rows.append(coeff_row(s - 1, h[-1], 1)); rhs_cols.append(np.zeros(3))
    a = np.vstack(rows)
    b = np.vstack(rhs_cols)
    m = a.shape[0]
    kkt = np.block([[big_h, a.T], [a, np.zeros((m, m))]])
    total = 0.0
    for ax in range(3):
        sol = np.linalg.solve(kkt, np.concatenate([np.zeros(nv), b[:, ax]]))
        x = sol[:nv]
        total += x @ big_h @ x
    return total


def test_two_waypoint_rest_to_rest():
    wps = np.array([[0, 0, 0], [3, 0, 0]], dtype=float)
    poly = fit_min_acc_polynomial(wps, [2.0])
    assert np.allclose(poly.eval(0.0), wps[0])
    assert np.allclose(poly.eval(2.0), wps[1])
    assert np.allclose(poly.eval(0.0, order=1), 0.0)
    assert np.allclose(poly.eval(2.0, order=1), 0.0)
    # midpoint velocity of the rest-to-rest cubic is 1.5 * distance/duration
    assert poly.eval(1.0, order=1)[0] == pytest.approx(1.5 * 3.0 / 2.0)


def test_collinear_waypoints_stay_on_line():
    wps = np.array([[0, 0, 0], [1, 1, 1], [2, 2, 2], [3, 3, 3]], dtype=float)
    poly = fit_min_acc_polynomial(wps, [1.0, 1.0, 1.0])
    direction = np.array([1, 1, 1]) / np.sqrt(3)
    for t in np.linspace(0, 3, 31):
        p = poly.eval(t)
        off = p - (p @ direction) * direction
        assert np.linalg.norm(off) < 1e-9


def test_continuity_at_segment_boundaries():
    rng = np.random.default_rng(0)
    wps = rng.normal(scale=2.0, size=(6, 3))
    h = rng.uniform(0.5, 2.0, size=5)
    poly = fit_min_acc_polynomial(wps, h)
    edges = np.cumsum(h)[:-1]
    for t in edges:
        for order in (0, 1):
            before = poly.eval(t - 1e-9, order=order)
            after = poly.eval(t + 1e-9, order=order)
            assert np.allclose(before, after, atol=1e-6)


@pytest.mark.parametrize("seed", range(5))
def test_objective_matches_qp_oracle(seed):
    rng = np.random.default_rng(seed)
    wps = rng.normal(scale=3.0, size=(5, 3))
    h = rng.uniform(0.8, 2.0, size=4)
    poly = fit_min_acc_polynomial(wps, h)
    ours = poly.acceleration_objective()
    oracle = qp_oracle_objective(wps, h)
    assert ours == pytest.approx(oracle, rel=1e-6)


def test_nonpositive_duration_raises():
    wps = np.zeros((3, 3))
    with pytest.raises(SingularSystem):
        fit_min_acc_polynomial(wps, [1.0, 0.0])


def test_allocate_durations_positive_and_monotone_in_distance():
    wps = np.array([[0, 0, 0], [1, 0, 0], [6, 0, 0]], dtype=float)
    d = allocate_durations(wps, cruise_speed=1.8)
    assert np.all(d > 0)
    assert d[1] > d[0]
