"""Distributed particle swarm search over joint yaw vectors.

Each agent evolves its own particle group; once per iteration every group
broadcasts its best particle and adopts any received one that is strictly
cheaper.  Costs are rounded to f32 before comparison so that agents that
exchange bests end up comparing bit-identical numbers, which is what makes
the selection consensus exact across the swarm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .yawplan import yaw_cost_many

INERTIA_START = 0.72
INERTIA_DECAY = 0.88   # per-iteration geometric decay
INERTIA_FLOOR = 0.25
COGNITIVE = 1.49
SOCIAL = 1.49
V_CLAMP = np.pi


@dataclass
class SwarmBest:
    position: np.ndarray
    cost: float
    source: int
    iteration: int

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64)
        if not np.isfinite(self.cost):
            raise ValueError("gbest cost must be finite")


def _f32(x):
    return float(np.float32(x))


class DpsoGroup:
    """One agent's particle group over an n_dims joint angle vector."""

    def __init__(self, cost_fn, n_dims, n_particles, seed, owner=0,
                 init_guesses=()):
        self.cost_fn = cost_fn
        self.owner = owner
        self.rng = np.random.default_rng(seed)
        self.pos = self.rng.uniform(-np.pi, np.pi, size=(n_particles, n_dims))
        for k, guess in enumerate(init_guesses):
            if k >= n_particles:
                break
            self.pos[k] = kernels.wrap_angle(np.asarray(guess, dtype=np.float64))
        self.vel = self.rng.uniform(-0.5, 0.5, size=(n_particles, n_dims))
        self.iteration = 0
        costs = self._evaluate(self.pos)
        self.pbest_pos = self.pos.copy()
        self.pbest_cost = costs
        k = int(np.argmin(costs))
        self.gbest = SwarmBest(self.pos[k].copy(), costs[k], owner, 0)

    def _evaluate(self, positions):
        costs = np.asarray(self.cost_fn(positions), dtype=np.float64)
        return np.float32(costs).astype(np.float64)  # f32-comparable

    def receive(self, best):
        """Adopt a remote group best if strictly cheaper."""
        if best.cost < self.gbest.cost:
            self.gbest = SwarmBest(best.position.copy(), best.cost,
                                   best.source, self.iteration)

    def step(self):
        """One velocity/position update plus best bookkeeping."""
        self.iteration += 1
        n, d = self.pos.shape
        r1 = self.rng.random((n, d))
        r2 = self.rng.random((n, d))
        to_pbest = kernels.wrap_angle(self.pbest_pos - self.pos)
        to_gbest = kernels.wrap_angle(self.gbest.position[None, :] - self.pos)
        w = max(INERTIA_START * INERTIA_DECAY ** (self.iteration - 1),
                INERTIA_FLOOR)
        self.vel = (w * self.vel + COGNITIVE * r1 * to_pbest
                    + SOCIAL * r2 * to_gbest)
        np.clip(self.vel, -V_CLAMP, V_CLAMP, out=self.vel)
        self.pos = kernels.wrap_angle(self.pos + self.vel)
        costs = self._evaluate(self.pos)
        better = costs < self.pbest_cost
        self.pbest_pos[better] = self.pos[better]
        self.pbest_cost[better] = costs[better]
        k = int(np.argmin(self.pbest_cost))
        if self.pbest_cost[k] < self.gbest.cost:
            self.gbest = SwarmBest(self.pbest_pos[k].copy(),
                                   self.pbest_cost[k], self.owner,
                                   self.iteration)
        return self.gbest


def dpso_run(problem, particles_per_agent=40, max_iters=20, seed=0,
             exchange=True, n_groups=None, cost_fn=None, n_dims=None,
             init_guesses=None, return_group_bests=False):
    """Run the full multi-group search in lock step.

    `problem` may be a YawProblem (default cost) or None with an explicit
    `cost_fn(positions) -> costs` and `n_dims`.  `cost_fn` may also be a
    list with one callable per group, modelling agents that evaluate the
    shared objective against their own maps.  With `exchange` enabled
    every group's best is delivered to every other group each iteration.
    """
    if cost_fn is None:
        cost_fn = lambda pos: yaw_cost_many(pos, problem)
        n_dims = problem.n_agents
    if n_groups is None:
        n_groups = len(cost_fn) if isinstance(cost_fn, list) else n_dims
    fns = cost_fn if isinstance(cost_fn, list) else [cost_fn] * n_groups
    guesses = list(init_guesses or [])
    groups = [DpsoGroup(fns[g], n_dims, particles_per_agent,
                        seed=seed * 7919 + g, owner=g, init_guesses=guesses)
              for g in range(n_groups)]
    if exchange:
        for g in groups:
            for other in groups:
                if other is not g:
                    g.receive(other.gbest)
    for _ in range(max_iters):
        bests = [g.step() for g in groups]
        if exchange:
            for g in groups:
                for b in bests:
                    if b.source != g.owner:
                        g.receive(b)
    finals = [g.gbest for g in groups]
    if return_group_bests:
        return finals
    best = min(finals, key=lambda b: (b.cost, b.source))
    return kernels.wrap_angle(best.position)
