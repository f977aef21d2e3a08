"""World generation and ground-truth obstacle geometry.

Two built-in worlds: a random forest of vertical cylinders between a start
and goal region, and an L-shaped corridor whose inner corner hides an
obstacle from any agent looking along its velocity until after the turn.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleScenario


@dataclass
class Cylinder:
    center: np.ndarray  # (2,) xy
    radius: float
    height: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64).reshape(2)

    def distance(self, p):
        """Euclidean distance from a point to the cylinder surface (0 inside)."""
        p = np.asarray(p, dtype=np.float64)
        dr = max(np.hypot(p[0] - self.center[0], p[1] - self.center[1])
                 - self.radius, 0.0)
        dz = max(-p[2], p[2] - self.height, 0.0)
        return float(np.hypot(dr, dz))

    def to_dict(self):
        return {"type": "cylinder", "center": self.center.tolist(),
                "radius": self.radius, "height": self.height}


@dataclass
class Box:
    lo: np.ndarray  # (3,)
    hi: np.ndarray  # (3,)

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=np.float64).reshape(3)
        self.hi = np.asarray(self.hi, dtype=np.float64).reshape(3)

    def distance(self, p):
        p = np.asarray(p, dtype=np.float64)
        d = np.maximum(np.maximum(self.lo - p, p - self.hi), 0.0)
        return float(np.linalg.norm(d))

    def to_dict(self):
        return {"type": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}


@dataclass
class Scenario:
    bounds: np.ndarray            # (2,3) world [lo, hi]
    obstacles: list
    start_center: np.ndarray      # (3,)
    start_heading: float
    goal: np.ndarray              # (3,)
    goal_heading: float = 0.0     # formation heading at the goal slots
    kind: str = "custom"
    seed: int = 0
    name: str = ""

    def __post_init__(self):
        self.bounds = np.asarray(self.bounds, dtype=np.float64).reshape(2, 3)
        self.start_center = np.asarray(self.start_center, dtype=np.float64)
        self.goal = np.asarray(self.goal, dtype=np.float64)

    def clearance(self, p):
        """Ground-truth distance to the nearest obstacle (capped at 1e6)."""
        if not self.obstacles:
            return 1e6
        return min(ob.distance(p) for ob in self.obstacles)

    def to_dict(self):
        return {
            "kind": self.kind, "seed": self.seed, "name": self.name,
            "bounds": self.bounds.tolist(),
            "start_center": self.start_center.tolist(),
            "start_heading": self.start_heading,
            "goal": self.goal.tolist(),
            "goal_heading": self.goal_heading,
            "obstacles": [ob.to_dict() for ob in self.obstacles],
        }

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)

    @classmethod
    def from_dict(cls, d):
        obs = []
        for o in d["obstacles"]:
            if o["type"] == "cylinder":
                obs.append(Cylinder(o["center"], o["radius"], o["height"]))
            else:
                obs.append(Box(o["lo"], o["hi"]))
        return cls(d["bounds"], obs, d["start_center"], d["start_heading"],
                   d["goal"], d.get("goal_heading", 0.0),
                   d.get("kind", "custom"), d.get("seed", 0),
                   d.get("name", ""))

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))


def collision_check(scenario, position, radius=0.2):
    """True iff the agent sphere intersects any ground-truth obstacle."""
    return scenario.clearance(position) <= radius


FOREST_CLEAR = 1.6      # keep-out radius around start slots and goal slots
POISSON_SEP = 2.4       # minimum spacing between trunk centers


def _protected_points(scenario, spec):
    pts = [scenario.start_center[:2], scenario.goal[:2]]
    if spec is not None:
        for ref in spec.reference_positions:
            pts.append(scenario.start_center[:2] + ref)
            pts.append(scenario.goal[:2] + ref)
    return np.asarray(pts)


def generate_scenario(kind, seed=0, density=0.045, spec=None):
    """Build a world. `density` is trunks per square meter (forest only)."""
    if density < 0:
        raise ValueError("density must be nonnegative")
    if kind == "forest":
        return _forest(seed, density, spec)
    if kind == "sharp_turn":
        return _sharp_turn(seed)
    raise ValueError(f"unknown scenario kind {kind!r}")


def _forest(seed, density, spec):
    rng = np.random.default_rng(seed)
    bounds = np.array([[0.0, 0.0, 0.0], [36.0, 16.0, 3.0]])
    start = np.array([3.0, 8.0, 1.5])
    goal = np.array([33.0, 8.0, 1.5])
    scn = Scenario(bounds, [], start, 0.0, goal, goal_heading=0.0,
                   kind="forest", seed=seed)
    region_lo = np.array([8.0, 1.5])
    region_hi = np.array([28.0, 14.5])
    area = np.prod(region_hi - region_lo)
    target = int(round(density * area))
    protected = _protected_points(scn, spec)
    centers = []
    attempts = 0
    while len(centers) < target and attempts < target * 200 + 200:
        attempts += 1
        c = rng.uniform(region_lo, region_hi)
        r = rng.uniform(0.3, 0.6)
        if np.any(np.linalg.norm(protected - c, axis=1) < FOREST_CLEAR + r):
            continue
        if any(np.linalg.norm(c - prev) < POISSON_SEP for prev, _ in centers):
            continue
        centers.append((c, r))
    if target > 0 and len(centers) < max(1, target // 2):
        raise InfeasibleScenario(
            f"placed only {len(centers)} of {target} trunks")
    scn.obstacles = [Cylinder(c, r, bounds[1][2]) for c, r in centers]
    scn.obstacles.append(_ground(bounds))
    return scn


def _ground(bounds):
    lo, hi = bounds
    return Box([lo[0] - 5.0, lo[1] - 5.0, -0.5], [hi[0] + 5.0, hi[1] + 5.0, 0.0])


def _sharp_turn(seed):
    """L-corridor turning left, with an obstacle hidden behind the inner
    corner so it only becomes visible once an agent looks into the turn."""
    bounds = np.array([[0.0, 0.0, 0.0], [16.0, 20.0, 3.0]])
    z = bounds[1][2]
    wall = 0.5
    # horizontal leg: y in [6,10] for x in [0,12]; vertical leg: x in [8,12]
    walls = [
        Box([0.0, 6.0 - wall, 0.0], [12.0 + wall, 6.0, z]),      # south
        Box([0.0, 10.0, 0.0], [8.0, 10.0 + wall, z]),            # north/inner
        Box([12.0, 6.0, 0.0], [12.0 + wall, 20.0, z]),           # east
        Box([8.0 - wall, 10.0, 0.0], [8.0, 20.0, z]),            # west
    ]
    # two staggered blocks right after the corner, both shadowed from a
    # forward-pointing camera on the approach leg: mapped early they admit
    # a smooth S-curve, discovered one at a time the dodge off the first
    # block leads straight into the second
    hidden = [Box([8.0, 10.5, 0.0], [9.4, 11.7, z]),
              Box([10.6, 12.5, 0.0], [12.0, 13.7, z])]
    start = np.array([2.0, 8.0, 1.5])
    goal = np.array([10.0, 18.0, 1.5])
    return Scenario(bounds, walls + hidden + [_ground(bounds)], start, 0.0,
                    goal, goal_heading=np.pi / 2, kind="sharp_turn", seed=seed)
