"""Minimum-acceleration piecewise-cubic trajectories through waypoints.

The closed form is the clamped cubic spline: interpolate all waypoints,
zero boundary velocity, acceleration continuous at interior waypoints.
That spline is the unique minimizer of the integrated squared
acceleration among interpolants with those boundary conditions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularSystem


@dataclass
class PiecewisePolynomial:
    coeffs: np.ndarray     # (S, 4, 3): c0 + c1 t + c2 t^2 + c3 t^3 per axis
    durations: np.ndarray  # (S,)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.float64)
        self.durations = np.asarray(self.durations, dtype=np.float64).reshape(-1)

    @property
    def duration(self):
        return float(self.durations.sum())

    def _locate(self, t):
        t = min(max(t, 0.0), self.duration)
        edges = np.concatenate([[0.0], np.cumsum(self.durations)])
        s = int(np.searchsorted(edges, t, side="right")) - 1
        s = min(max(s, 0), len(self.durations) - 1)
        return s, t - edges[s]

    def eval(self, t, order=0):
        s, u = self._locate(t)
        c = self.coeffs[s]
        if order == 0:
            return c[0] + c[1] * u + c[2] * u * u + c[3] * u ** 3
        if order == 1:
            return c[1] + 2 * c[2] * u + 3 * c[3] * u * u
        if order == 2:
            return 2 * c[2] + 6 * c[3] * u
        raise ValueError("order must be 0, 1 or 2")

    def acceleration_objective(self):
        """Exact integral of squared acceleration over the trajectory."""
        total = 0.0
        for s in range(self.coeffs.shape[0]):
            h = self.durations[s]
            c2 = self.coeffs[s, 2]
            c3 = self.coeffs[s, 3]
            total += float(np.sum(4 * c2 ** 2 * h + 12 * c2 * c3 * h ** 2
                                  + 12 * c3 ** 2 * h ** 3))
        return total


def allocate_durations(waypoints, cruise_speed=1.8, accel=2.5, min_duration=0.1):
    """Trapezoidal-profile segment durations at the given cruise speed."""
    w = np.asarray(waypoints, dtype=np.float64)
    d = np.linalg.norm(np.diff(w, axis=0), axis=1)
    out = np.empty(len(d))
    ramp = cruise_speed ** 2 / accel
    for i, dist in enumerate(d):
        if dist < ramp:
            out[i] = 2.0 * np.sqrt(max(dist, 0.0) / accel)
        else:
            out[i] = dist / cruise_speed + cruise_speed / accel
    return np.maximum(out, min_duration)


def fit_min_acc_polynomial(waypoints, durations):
    """Clamped cubic spline through the waypoints (rest-to-rest)."""
    w = np.asarray(waypoints, dtype=np.float64).reshape(-1, 3)
    h = np.asarray(durations, dtype=np.float64).reshape(-1)
    if w.shape[0] < 2:
        raise ValueError("need at least two waypoints")
    if h.shape[0] != w.shape[0] - 1:
        raise ValueError("need one duration per segment")
    if np.any(h <= 0):
        raise SingularSystem("segment durations must be positive")
    s = h.shape[0]
    delta = np.diff(w, axis=0)

    # solve for interior waypoint velocities; v_0 = v_S = 0
    v = np.zeros((s + 1, 3))
    m = s - 1
    if m > 0:
        a = np.zeros((m, m))
        b = np.zeros((m, 3))
        for i in range(1, s):
            r = i - 1
            a[r, r] = 2.0 * (1.0 / h[i - 1] + 1.0 / h[i])
            if r > 0:
                a[r, r - 1] = 1.0 / h[i - 1]
            if r < m - 1:
                a[r, r + 1] = 1.0 / h[i]
            b[r] = 3.0 * (delta[i - 1] / h[i - 1] ** 2 + delta[i] / h[i] ** 2)
        v[1:s] = np.linalg.solve(a, b)

    coeffs = np.empty((s, 4, 3))
    for i in range(s):
        hi = h[i]
        coeffs[i, 0] = w[i]
        coeffs[i, 1] = v[i]
        coeffs[i, 2] = 3.0 * delta[i] / hi ** 2 - (2.0 * v[i] + v[i + 1]) / hi
        coeffs[i, 3] = -2.0 * delta[i] / hi ** 3 + (v[i] + v[i + 1]) / hi ** 2
    return PiecewisePolynomial(coeffs, h)
