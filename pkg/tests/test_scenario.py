"""World generation: forest sampling, the L-corridor, serialization."""

import json

import numpy as np
import pytest

from swarmform.astar import plan_center_path
from swarmform.errors import InfeasibleScenario, NoPath
from swarmform.esdf import EsdfGrid
from swarmform.formation import FormationSpec
from swarmform.scenario import (FOREST_CLEAR, POISSON_SEP, Box, Cylinder,
                                Scenario, collision_check, generate_scenario)


def trunks(scn):
    return [ob for ob in scn.obstacles if isinstance(ob, Cylinder)]


def test_same_seed_same_world():
    a = generate_scenario("forest", seed=7)
    b = generate_scenario("forest", seed=7)
    assert a.to_dict() == b.to_dict()


def test_different_seeds_differ():
    a = generate_scenario("forest", seed=1)
    b = generate_scenario("forest", seed=2)
    assert a.to_dict() != b.to_dict()


def test_zero_density_has_no_trunks():
    scn = generate_scenario("forest", seed=0, density=0.0)
    assert trunks(scn) == []
    # the ground slab is still there
    assert any(isinstance(ob, Box) for ob in scn.obstacles)


def test_trunk_geometry_constraints():
    spec = FormationSpec.named("diamond")
    for seed in range(5):
        scn = generate_scenario("forest", seed=seed, spec=spec)
        cyls = trunks(scn)
        assert len(cyls) > 0
        centers = np.array([c.center for c in cyls])
        radii = np.array([c.radius for c in cyls])
        assert np.all(radii >= 0.3) and np.all(radii <= 0.6)
        assert np.all(centers[:, 0] >= 8.0) and np.all(centers[:, 0] <= 28.0)
        assert np.all(centers[:, 1] >= 1.5) and np.all(centers[:, 1] <= 14.5)
        # pairwise separation
        for i in range(len(cyls)):
            for j in range(i + 1, len(cyls)):
                assert np.linalg.norm(centers[i] - centers[j]) >= POISSON_SEP
        # keep-out around start and goal slots
        protected = [scn.start_center[:2], scn.goal[:2]]
        for ref in spec.reference_positions:
            protected.append(scn.start_center[:2] + ref)
            protected.append(scn.goal[:2] + ref)
        for c, r in zip(centers, radii):
            for p in protected:
                assert np.linalg.norm(p - c) >= FOREST_CLEAR + r - 1e-12


def test_infeasible_density_raises():
    with pytest.raises(InfeasibleScenario):
        generate_scenario("forest", seed=0, density=5.0)


def test_unknown_kind_rejected():
    with pytest.raises(ValueError):
        generate_scenario("city", seed=0)
    with pytest.raises(ValueError):
        generate_scenario("forest", density=-1.0)


def _clearance_oracle(scn, p):
    """Recomputed point-to-obstacle distance, independent formulas."""
    best = np.inf
    for ob in scn.obstacles:
        if isinstance(ob, Cylinder):
            dr = max(np.hypot(p[0] - ob.center[0], p[1] - ob.center[1])
                     - ob.radius, 0.0)
            dz = max(-p[2], p[2] - ob.height, 0.0)
            d = np.sqrt(dr * dr + dz * dz)
        else:
            gap = np.maximum(np.maximum(ob.lo - p, p - ob.hi), 0.0)
            d = np.sqrt(np.sum(gap * gap))
        best = min(best, d)
    return best


def test_collision_check_matches_distance_formula():
    scn = generate_scenario("forest", seed=4)
    rng = np.random.default_rng(99)
    pts = rng.uniform([0, 0, 0], [36, 16, 3], size=(10_000, 3))
    for p in pts:
        d = _clearance_oracle(scn, p)
        assert collision_check(scn, p, radius=0.2) == (d <= 0.2)
        assert scn.clearance(p) == pytest.approx(d, abs=1e-12)


def test_json_round_trip(tmp_path):
    for kind in ("forest", "sharp_turn"):
        scn = generate_scenario(kind, seed=5)
        path = tmp_path / f"{kind}.json"
        scn.save(path)
        back = Scenario.load(path)
        assert back.to_dict() == scn.to_dict()
        # file really is plain json
        json.loads(path.read_text())


def _ground_truth_esdf(scn, resolution=0.25):
    """Single-layer distance field at flight altitude from exact geometry."""
    lo, hi = scn.bounds
    nx = int((hi[0] - lo[0]) / resolution)
    ny = int((hi[1] - lo[1]) / resolution)
    z_cell = int(np.floor(1.5 / resolution))  # layer containing z = 1.5
    dist = np.empty((nx, ny, 1))
    for i in range(nx):
        for j in range(ny):
            p = np.array([(i + 0.5) * resolution, (j + 0.5) * resolution,
                          (z_cell + 0.5) * resolution])
            dist[i, j, 0] = scn.clearance(p)
    return EsdfGrid(resolution, np.array([nx, ny, 1]),
                    np.array([0, 0, z_cell]), dist)


def test_start_to_goal_path_exists_in_most_forests():
    ok = 0
    for seed in range(20):
        scn = generate_scenario("forest", seed=seed)
        esdf = _ground_truth_esdf(scn)
        try:
            path = plan_center_path(esdf, scn.start_center, scn.goal,
                                    clearance=0.8)
            assert not path.terminated_at_boundary
            ok += 1
        except NoPath:
            pass
    assert ok >= 18


def test_sharp_turn_geometry():
    scn = generate_scenario("sharp_turn", seed=0)
    assert scn.kind == "sharp_turn"
    assert scn.goal_heading == pytest.approx(np.pi / 2)
    # start sits in the open corridor, goal in the vertical leg
    assert scn.clearance(scn.start_center) > 0.5
    assert scn.clearance(scn.goal) > 0.5


def test_sharp_turn_obstacle_hidden_from_approach():
    from swarmform.sensor import simulate_point_cloud
    scn = generate_scenario("sharp_turn", seed=0)
    hidden = Box([8.6, 12.2, 0.0], [10.2, 13.4, 3.0])

    def on_hidden(cloud):
        pts = cloud.points
        if len(pts) == 0:
            return 0
        inside = np.all((pts >= hidden.lo - 1e-6)
                        & (pts <= hidden.hi + 1e-6), axis=1)
        return int(inside.sum())

    # looking along the corridor from the start: the inner wall shadows it
    ahead = simulate_point_cloud(scn, scn.start_center, yaw=0.0,
                                 sense_range=14.0)
    assert on_hidden(ahead) == 0
    # looking into the turn from below the corner: now it is exposed
    looking_up = simulate_point_cloud(scn, np.array([9.4, 8.5, 1.5]),
                                      yaw=np.pi / 2, sense_range=14.0)
    assert on_hidden(looking_up) > 0
