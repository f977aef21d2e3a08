import numpy as np
import pytest

from swarmform.errors import OutOfBounds
from swarmform.esdf import compute_esdf, esdf_query, esdf_query_batch
from swarmform.mapping import OccupancyGrid


def grid_with_occupied(cells, size=(8, 8, 8), res=1.0, center=(4, 4, 4)):
    g = OccupancyGrid.create(center, size, res)
    for c in cells:
        s = np.mod(np.asarray(c, dtype=np.int64), g.dims)
        g.log_odds[tuple(s)] = 4.0  # p ~ 0.982 >= 0.7
    return g


def brute_force_esdf(occ, res):
    src = np.argwhere(occ)
    out = np.empty(occ.shape)
    for idx in np.ndindex(occ.shape):
        d2 = np.sum((src - np.asarray(idx)) ** 2, axis=1)
        out[idx] = np.sqrt(d2.min()) * res
    return out


def test_single_occupied_cell_distances():
    g = grid_with_occupied([(3, 3, 3)])
    e = compute_esdf(g)
    lo = g.lower_cell

    def dist_at(c):
        i = np.asarray(c) - lo
        return e.distance[tuple(i)]

    assert dist_at((3, 3, 3)) == 0.0
    assert dist_at((4, 3, 3)) == pytest.approx(1.0)
    assert dist_at((4, 4, 3)) == pytest.approx(np.sqrt(2))


def test_all_free_grid_reports_max_distance():
    g = grid_with_occupied([])
    e = compute_esdf(g, max_distance=7.5)
    assert np.all(e.distance == 7.5)


@pytest.mark.parametrize("seed", range(6))
def test_matches_brute_force_on_random_grids(seed):
    rng = np.random.default_rng(seed)
    g = OccupancyGrid.create((2, 2, 2), (4, 4, 4), 0.25)  # 16^3 cells, lower at 0
    occ = rng.random((16, 16, 16)) < 0.05
    if not occ.any():
        occ[0, 0, 0] = True
    g.log_odds[:] = np.where(occ, 4.0, 0.0)
    e = compute_esdf(g)
    oracle = brute_force_esdf(g.probabilities() >= 0.7, 0.25)
    assert np.allclose(e.distance, oracle, atol=1e-12)


def test_query_at_cell_center_returns_stored_value():
    g = grid_with_occupied([(2, 2, 2)])
    e = compute_esdf(g)
    # world center of global cell (5,3,3) is (5.5, 3.5, 3.5)
    d, grad = esdf_query(e, (5.5, 3.5, 3.5))
    lo = g.lower_cell
    assert d == pytest.approx(e.distance[5 - lo[0], 3 - lo[1], 3 - lo[2]])


def test_uniform_field_has_zero_gradient():
    g = grid_with_occupied([])
    e = compute_esdf(g, max_distance=5.0)
    d, grad = esdf_query(e, (4.2, 3.9, 4.6))
    assert d == 5.0
    assert np.allclose(grad, 0.0)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(11)
    g = grid_with_occupied([])
    e = compute_esdf(g)
    e.distance[:] = rng.normal(size=e.distance.shape)
    h = 1e-6
    for _ in range(20):
        p = rng.uniform(1.5, 6.5, size=3)
        d, grad = esdf_query(e, p)
        fd = np.empty(3)
        for ax in range(3):
            dp = np.zeros(3)
            dp[ax] = h
            dplus, _ = esdf_query(e, p + dp)
            dminus, _ = esdf_query(e, p - dp)
            fd[ax] = (dplus - dminus) / (2 * h)
        scale = max(1.0, np.abs(grad).max())
        assert np.allclose(grad, fd, atol=1e-6 * scale + 1e-5)


def test_exterior_query_raises():
    g = grid_with_occupied([])
    e = compute_esdf(g)
    with pytest.raises(OutOfBounds):
        esdf_query(e, (0.2, 4.0, 4.0))  # inside map but within half-cell margin
    with pytest.raises(OutOfBounds):
        esdf_query(e, (-5.0, 4.0, 4.0))


def test_batch_query_clamps_and_flags():
    g = grid_with_occupied([])
    e = compute_esdf(g, max_distance=5.0)
    vals, grads, inside = esdf_query_batch(e, [[4, 4, 4], [-10, 4, 4]])
    assert inside.tolist() == [True, False]
    assert np.allclose(grads[1], 0.0)
    assert vals[0] == 5.0
