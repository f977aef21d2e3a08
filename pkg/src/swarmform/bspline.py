"""Clamped uniform cubic B-spline trajectories.

Knots: the first and last knot are repeated degree+1 times, interior
knots are uniformly spaced at `knot_dt`, so the curve starts at the first
control point and ends at the last one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OutOfRange, TooShort


def clamped_knots(n_ctrl, degree, knot_dt):
    """Knot vector of length n_ctrl + degree + 1."""
    n_spans = n_ctrl - degree
    if n_spans < 1:
        raise ValueError("need at least degree+1 control points")
    inner = np.arange(n_spans + 1) * knot_dt
    return np.concatenate([np.zeros(degree), inner, np.full(degree, inner[-1])])


def basis_row(knots, degree, t):
    """All basis function values N_{j,degree}(t) as a dense row."""
    n_ctrl = len(knots) - degree - 1
    row = np.zeros(n_ctrl)
    span = find_span(knots, degree, n_ctrl, t)
    # Cox-de Boor on the degree+1 active functions
    left = np.empty(degree + 1)
    right = np.empty(degree + 1)
    vals = np.empty(degree + 1)
    vals[0] = 1.0
    for j in range(1, degree + 1):
        left[j] = t - knots[span + 1 - j]
        right[j] = knots[span + j] - t
        saved = 0.0
        for r in range(j):
            denom = right[r + 1] + left[j - r]
            tmp = vals[r] / denom if denom != 0.0 else 0.0
            vals[r] = saved + right[r + 1] * tmp
            saved = left[j - r] * tmp
        vals[j] = saved
    row[span - degree:span + 1] = vals
    return row


def find_span(knots, degree, n_ctrl, t):
    """Index of the knot span containing t (clamped at the curve end)."""
    if t >= knots[n_ctrl]:
        return n_ctrl - 1
    lo = degree
    hi = n_ctrl
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if t < knots[mid]:
            hi = mid
        else:
            lo = mid
    return lo


@dataclass
class BSplineTrajectory:
    control_points: np.ndarray  # (n,3)
    knot_dt: float
    degree: int = 3
    _knots: np.ndarray = None

    def __post_init__(self):
        self.control_points = np.asarray(self.control_points, dtype=np.float64).reshape(-1, 3)
        if self._knots is None:
            self._knots = clamped_knots(self.n_ctrl, self.degree, self.knot_dt)

    @property
    def n_ctrl(self):
        return self.control_points.shape[0]

    @property
    def knots(self):
        return self._knots

    @property
    def duration(self):
        return float(self._knots[-1])

    def basis(self, t):
        return basis_row(self._knots, self.degree, t)

    def eval(self, t):
        if t < -1e-12 or t > self.duration + 1e-12:
            raise OutOfRange(f"t={t} outside [0, {self.duration}]")
        t = min(max(t, 0.0), self.duration)
        return self.basis(t) @ self.control_points

    def eval_many(self, ts):
        return np.array([self.eval(t) for t in np.atleast_1d(ts)])

    def derivative(self, order=1):
        """Spline over the derivative control points (order 1 or 2)."""
        if order not in (1, 2):
            raise ValueError("order must be 1 or 2")
        traj = self
        for _ in range(order):
            traj = traj._derivative_once()
        return traj

    def _derivative_once(self):
        p = self.degree
        q = self.control_points
        knots = self._knots
        spans = knots[p + 1:p + q.shape[0]] - knots[1:q.shape[0]]
        v = p * (q[1:] - q[:-1]) / spans[:, None]
        return BSplineTrajectory(v, self.knot_dt, degree=p - 1, _knots=knots[1:-1])

    def derivative_control_points(self, order=1):
        return self.derivative(order).control_points

    def to_dict(self, samples=0):
        out = {
            "control_points": self.control_points.tolist(),
            "knot_dt": self.knot_dt,
            "degree": self.degree,
            "knots": self._knots.tolist(),
        }
        if samples:
            ts = np.linspace(0.0, self.duration, samples)
            out["samples"] = {"t": ts.tolist(),
                              "position": self.eval_many(ts).tolist()}
        return out


def sample_to_bspline(poly, knot_dt, start_state):
    """Least-squares fit of a clamped cubic spline to a polynomial trajectory.

    Samples at knot_dt/4 spacing; the first three control points are then
    overwritten so position/velocity/acceleration at t=0 match start_state
    exactly.
    """
    total = poly.duration
    if total < 3 * knot_dt:
        raise TooShort(f"duration {total} < 3 knot intervals")
    n_spans = int(np.ceil(total / knot_dt - 1e-9))
    n_ctrl = n_spans + 3
    knots = clamped_knots(n_ctrl, 3, knot_dt)
    t_end = knots[-1]
    ts = np.arange(0.0, t_end + knot_dt / 8.0, knot_dt / 4.0)
    ts = np.minimum(ts, t_end)
    a = np.vstack([basis_row(knots, 3, t) for t in ts])
    samples = np.vstack([poly.eval(min(t, total)) for t in ts])
    cps, *_ = np.linalg.lstsq(a, samples, rcond=None)
    traj = BSplineTrajectory(cps, knot_dt)
    return constrain_start(traj, *start_state)


def constrain_start(traj, position, velocity, acceleration):
    """Overwrite the first three control points to pin the start state."""
    dt = traj.knot_dt
    q = traj.control_points
    q[0] = np.asarray(position, dtype=np.float64)
    q[1] = q[0] + np.asarray(velocity, dtype=np.float64) * dt / 3.0
    v1 = np.asarray(velocity, dtype=np.float64) + np.asarray(acceleration, dtype=np.float64) * dt / 2.0
    q[2] = q[1] + v1 * 2.0 * dt / 3.0
    return traj
