"""Joint yaw-angle cost at one trajectory sample time.

J = lam1 * overlap + lam2 * velocity-alignment - lam3 * perception value
  + lam4 * smoothness, all angle differences wrapped.  Overlap counts
each unordered FOV pair once and doubles it, matching a sum over ordered
pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import OutOfRange
from .fov import perception_cells


@dataclass
class YawProblem:
    positions: np.ndarray    # (N,3) agent positions at the sample time
    theta_v: np.ndarray      # (N,) velocity headings
    theta_prev: np.ndarray   # (N,) previous planned yaws
    grid: object = None      # occupancy map for the perception term
    lam1: float = 1.0
    lam2: float = 1.0
    lam3: float = 0.05
    lam4: float = 0.5
    fov_angle: float = np.pi / 3.0
    sense_range: float = 5.0

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        self.theta_v = kernels.wrap_angle(np.asarray(self.theta_v, dtype=np.float64))
        self.theta_prev = kernels.wrap_angle(np.asarray(self.theta_prev, dtype=np.float64))
        n = self.positions.shape[0]
        if self.theta_v.shape != (n,) or self.theta_prev.shape != (n,):
            raise ValueError("angle vectors must have one entry per agent")
        cells = []
        if self.grid is not None:
            for i in range(n):
                cells.append(perception_cells(self.grid, self.positions[i],
                                              self.sense_range))
        else:
            cells = [(np.empty(0),) * 3 for _ in range(n)]
        cmax = max(max(len(c[0]) for c in cells), 1)
        self.cell_ent = np.zeros((n, cmax))
        self.cell_phi = np.zeros((n, cmax))
        self.cell_r = np.zeros((n, cmax))
        self.cell_count = np.zeros(n, dtype=np.int64)
        for i, (ent, phi, r) in enumerate(cells):
            k = len(ent)
            self.cell_count[i] = k
            self.cell_ent[i, :k] = ent
            self.cell_phi[i, :k] = phi
            self.cell_r[i, :k] = r

    @property
    def n_agents(self):
        return self.positions.shape[0]


def yaw_cost_many(thetas, problem):
    """Costs for a (P, N) batch of candidate joint yaw vectors."""
    thetas = kernels.wrap_angle(np.asarray(thetas, dtype=np.float64))
    return kernels.yaw_cost_batch(
        np.ascontiguousarray(thetas.reshape(-1, problem.n_agents)),
        np.ascontiguousarray(problem.positions[:, :2]),
        problem.fov_angle / 2.0, problem.sense_range,
        problem.cell_ent, problem.cell_phi, problem.cell_r,
        problem.cell_count, problem.theta_v, problem.theta_prev,
        problem.lam1, problem.lam2, problem.lam3, problem.lam4)


def yaw_cost(thetas, problem):
    return float(yaw_cost_many(np.asarray(thetas)[None, :], problem)[0])


def interpolate_yaw(plan, t):
    """Shortest-arc linear interpolation of a timed yaw plan.

    plan: sequence of (time, angles) with strictly increasing times.
    """
    times = np.array([entry[0] for entry in plan], dtype=np.float64)
    if len(times) == 0 or t < times[0] - 1e-9 or t > times[-1] + 1e-9:
        raise OutOfRange(f"t={t} outside plan range")
    t = min(max(t, times[0]), times[-1])
    k = int(np.searchsorted(times, t, side="right")) - 1
    k = min(max(k, 0), len(times) - 2) if len(times) > 1 else 0
    a = np.asarray(plan[k][1], dtype=np.float64)
    if len(times) == 1:
        return kernels.wrap_angle(a)
    b = np.asarray(plan[k + 1][1], dtype=np.float64)
    frac = (t - times[k]) / (times[k + 1] - times[k])
    return kernels.wrap_angle(a + kernels.wrap_angle(b - a) * frac)
