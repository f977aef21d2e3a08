"""Quasi-Newton refinement of the joint control-point tensor plus
minimum-cost candidate selection across the swarm."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import fmin_l_bfgs_b

from .cost import N_FIXED, cost_and_gradient
from .errors import DimensionMismatch

GRAD_TOL = 1e-4
DEFAULT_MAX_ITERS = 200


@dataclass
class StgoCandidate:
    agent_id: int
    control_points: np.ndarray  # (N, n, 3), every agent's trajectory
    knot_dt: float
    cost: float

    def __post_init__(self):
        self.control_points = np.asarray(self.control_points, dtype=np.float64)
        if not np.isfinite(self.cost):
            raise ValueError("candidate cost must be finite")


def optimize(problem, max_iters=DEFAULT_MAX_ITERS, fix_z=False):
    """Minimize the composite cost over the free control points.

    Limited-memory BFGS with memory 8; stops when the gradient max-norm
    drops below GRAD_TOL or after max_iters iterations.  Deterministic.
    With fix_z the vertical coordinate of every control point is held at
    its initial value and only the horizontal plane is optimized, which
    suits constant-altitude flight.
    """
    cp0 = problem.control_points
    n_agents, n_ctrl, _ = cp0.shape
    fixed = cp0[:, :N_FIXED, :]
    n_axes = 2 if fix_z else 3
    z0 = cp0[:, N_FIXED:, 2].copy()

    def assemble(x):
        cp = np.empty_like(cp0)
        cp[:, :N_FIXED, :] = fixed
        cp[:, N_FIXED:, :n_axes] = x.reshape(n_agents, n_ctrl - N_FIXED,
                                             n_axes)
        if fix_z:
            cp[:, N_FIXED:, 2] = z0
        return cp

    def objective(x):
        j, grad = cost_and_gradient(problem, assemble(x))
        return j, grad[:, N_FIXED:, :n_axes].ravel()

    x0 = cp0[:, N_FIXED:, :n_axes].ravel()
    # a failed line search still yields the best iterate seen, which is a
    # perfectly usable candidate, so warnflag is not treated as an error
    x_best, j_best, _info = fmin_l_bfgs_b(
        objective, x0, m=8, pgtol=GRAD_TOL, factr=10.0, maxiter=max_iters)
    return StgoCandidate(agent_id=-1, control_points=assemble(x_best),
                         knot_dt=problem.knot_dt, cost=float(j_best))


def stgo_select(local, received):
    """Adopt the minimum-cost candidate; ties go to the lowest agent id.

    A pure function of the candidate multiset: agents holding identical
    inboxes select identical candidates regardless of arrival order.
    """
    shape = local.control_points.shape
    for cand in received:
        if cand.control_points.shape != shape:
            raise DimensionMismatch(
                f"candidate tensor {cand.control_points.shape} != {shape}")
    return min([local, *received], key=lambda c: (c.cost, c.agent_id))
