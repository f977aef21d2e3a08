import numpy as np
import pytest

from swarmform.astar import GridPath
from swarmform.formation import (FormationSpec, SimilarityTransform,
                                 desired_position, expand_formation_paths,
                                 formation_distortion, formation_slots)


def square_spec():
    return FormationSpec([(0, 0), (1, 0), (1, 1), (0, 1)], name="square")


def test_desired_position_identity():
    spec = square_spec()
    for i in (2, 3):
        got = desired_position(spec.reference_positions[0],
                               spec.reference_positions[1], spec, i)
        assert np.allclose(got, spec.reference_positions[i], atol=1e-12)


def test_desired_position_similarity_equivariance():
    spec = square_spec()
    t = SimilarityTransform.from_angle(2.0, np.pi / 2, [0.3, -0.7, 0.0])
    moved = t.apply(spec.reference_positions)[:, :2]
    for i in (2, 3):
        got = desired_position(moved[0], moved[1], spec, i)
        assert np.allclose(got, moved[i], atol=1e-9)


@pytest.mark.parametrize("seed", range(10))
def test_desired_position_matches_linear_system_oracle(seed):
    # oracle: solve the 2-point similarity alignment [a,-b;b,a]x+t as a
    # 4x4 linear system, then transform the reference slot
    rng = np.random.default_rng(seed)
    spec = square_spec()
    q0, q1 = rng.normal(scale=2.0, size=(2, 2))
    p0, p1 = spec.reference_positions[:2]
    a = np.array([
        [p0[0], -p0[1], 1, 0],
        [p0[1], p0[0], 0, 1],
        [p1[0], -p1[1], 1, 0],
        [p1[1], p1[0], 0, 1],
    ])
    sol = np.linalg.solve(a, np.concatenate([q0, q1]))
    ca, cb, tx, ty = sol
    for i in (2, 3):
        ref = spec.reference_positions[i]
        oracle = np.array([ca * ref[0] - cb * ref[1] + tx,
                           ca * ref[1] + cb * ref[0] + ty])
        got = desired_position(q0, q1, spec, i)
        assert np.allclose(got, oracle, atol=1e-9)


def test_distortion_zero_for_reference_and_any_similarity():
    spec = square_spec()
    assert formation_distortion(spec.reference_positions, spec) < 1e-12
    rng = np.random.default_rng(1)
    for _ in range(10):
        t = SimilarityTransform.from_angle(rng.uniform(0.2, 3.0),
                                           rng.uniform(-np.pi, np.pi),
                                           rng.normal(size=3))
        cur = t.apply(spec.reference_positions)[:, :2]
        assert formation_distortion(cur, spec) < 1e-9


def test_distortion_invariant_under_common_similarity():
    spec = square_spec()
    rng = np.random.default_rng(2)
    cur = spec.reference_positions + rng.normal(scale=0.2, size=(4, 2))
    base = formation_distortion(cur, spec)
    t = SimilarityTransform.from_angle(1.7, 0.9, [3.0, -2.0, 0.0])
    moved = t.apply(cur)[:, :2]
    assert formation_distortion(moved, spec) == pytest.approx(base, abs=1e-9)


def test_distortion_matches_grid_search_oracle():
    spec = FormationSpec([(0, 0), (1, 0), (1, 1), (0, 1)])
    cur = spec.reference_positions.copy()
    cur[2] += [0.1, 0.0]
    ours = formation_distortion(cur, spec)
    # dense search over scale and angle with centroid-optimal translation
    ref = spec.reference_positions - spec.reference_positions.mean(axis=0)
    ctr = cur - cur.mean(axis=0)
    best = np.inf
    for s in np.linspace(0.5, 1.5, 401):
        for th in np.linspace(-np.pi, np.pi, 721, endpoint=False):
            r = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
            res = ref - s * (r @ ctr.T).T
            best = min(best, float(np.sum(res ** 2)))
    assert ours <= best + 1e-12
    assert ours == pytest.approx(best, abs=5e-4)


def test_expand_single_agent_slot_at_origin_follows_center():
    spec = FormationSpec([(0, 0), (1, 0)])
    center = GridPath(np.array([[0, 0, 1], [3, 0, 1], [3, 3, 1]], float), False)
    paths = expand_formation_paths(center, spec, shrink=0.5)
    assert np.allclose(paths[0].waypoints, center.waypoints, atol=1e-12)


def test_expand_straight_path_gives_parallel_offsets():
    spec = FormationSpec.named("diamond")
    center = GridPath(np.array([[0, 0, 1], [10, 0, 1]], float), False)
    paths = expand_formation_paths(center, spec, shrink=0.5)
    for i, p in enumerate(paths):
        offs = p.waypoints - center.waypoints
        assert np.allclose(offs[0], offs[1], atol=1e-12)
        ref = spec.reference_positions[i] * 0.5
        assert np.allclose(offs[0][:2], ref, atol=1e-12)  # heading = +x
        assert np.allclose(offs[0][2], 0.0)


def test_expand_l_shape_matches_slot_oracle():
    spec = FormationSpec.named("triangle")
    wps = np.array([[0, 0, 1], [5, 0, 1], [5, 5, 1]], float)
    center = GridPath(wps, False)
    shrink = 0.5
    paths = expand_formation_paths(center, spec, shrink=shrink)
    headings = [0.0, np.pi / 4, np.pi / 2]  # out, corner bisector, in
    for k, (c, h) in enumerate(zip(wps, headings)):
        oracle = SimilarityTransform.from_angle(shrink, h, c).apply(
            spec.reference_positions)
        for i in range(spec.n_agents):
            assert np.allclose(paths[i].waypoints[k], oracle[i], atol=1e-9)


def test_expand_same_side_property():
    # all slots stay on a consistent signed side of the center path heading
    spec = FormationSpec.named("line")
    wps = np.array([[0, 0, 1], [4, 1, 1], [8, -1, 1], [12, 0, 1]], float)
    center = GridPath(wps, False)
    paths = expand_formation_paths(center, spec, shrink=0.5)
    from swarmform.formation import path_headings
    headings = path_headings(wps)
    for i in range(spec.n_agents):
        signs = []
        for k in range(len(wps)):
            d = paths[i].waypoints[k] - wps[k]
            h = headings[k]
            lateral = -np.sin(h) * d[0] + np.cos(h) * d[1]
            signs.append(np.sign(round(lateral, 9)))
        assert len({s for s in signs if s != 0}) <= 1


def test_named_formations_valid():
    for name in ("diamond", "line", "rectangle", "triangle"):
        spec = FormationSpec.named(name)
        assert spec.d_ref > 0
        assert spec.n_agents >= 2
