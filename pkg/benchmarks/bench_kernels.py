"""Benchmark the numba kernels against the pure-numpy fallback.

Run with:  python3 benchmarks/bench_kernels.py [--repeats N]

Both backends are imported directly (ignoring SWARMFORM_DISABLE_NUMBA) and
timed on identical inputs; outputs are cross-checked before timing so the
table never reports a speedup for a kernel that diverged.
"""

import argparse
import time

import numpy as np

from swarmform.kernels import _numba, _numpy


def timeit(fn, repeats):
    fn()  # warmup (numba compiles here)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_raycast(rng):
    dims = (80, 80, 8)
    origin = np.array([40.0, 40.0, 4.0])
    theta = rng.uniform(0, 2 * np.pi, 2000)
    phi = rng.uniform(-0.3, 0.3, 2000)
    r = rng.uniform(5.0, 30.0, 2000)
    endpoints = origin + np.stack([r * np.cos(theta) * np.cos(phi),
                                   r * np.sin(theta) * np.cos(phi),
                                   r * np.sin(phi)], axis=1)

    def run(backend):
        delta = np.zeros(dims)
        backend.raycast_accumulate(delta, origin, endpoints, -0.4, 0.85)
        return delta

    return "raycast_accumulate (2000 rays)", run


def bench_edt(rng):
    occ = rng.random((80, 80, 8)) < 0.03
    occ[0, 0, 0] = True

    def run(backend):
        return backend.edt_cells(occ)

    return "edt_cells (80x80x8)", run


def bench_trilinear(rng):
    field = rng.random((80, 80, 8))
    coords = rng.uniform([0, 0, 0], [79, 79, 7], size=(5000, 3))

    def run(backend):
        return backend.trilinear_batch(field, coords)

    return "trilinear_batch (5000 pts)", run


def bench_yaw_cost(rng):
    n_agents = 4
    cmax = 600
    thetas = rng.uniform(-np.pi, np.pi, (64, n_agents))
    apex = rng.uniform(0, 10, (n_agents, 2))
    cell_ent = rng.random((n_agents, cmax))
    cell_phi = rng.uniform(-np.pi, np.pi, (n_agents, cmax))
    cell_r = rng.uniform(0, 6, (n_agents, cmax))
    counts = np.full(n_agents, cmax, dtype=np.int64)
    theta_v = rng.uniform(-np.pi, np.pi, n_agents)

    def run(backend):
        return backend.yaw_cost_batch(thetas, apex, np.pi / 6, 5.0,
                                      cell_ent, cell_phi, cell_r, counts,
                                      theta_v, theta_v, 1.0, 1.0, 0.05, 0.5)

    return "yaw_cost_batch (64 particles)", run


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    cases = [bench_raycast(rng), bench_edt(rng), bench_trilinear(rng),
             bench_yaw_cost(rng)]
    print(f"{'kernel':<34} {'numpy':>10} {'numba':>10} {'speedup':>9}")
    for name, run in cases:
        a = run(_numpy)
        b = run(_numba)
        va = a[0] if isinstance(a, tuple) else a
        vb = b[0] if isinstance(b, tuple) else b
        assert np.allclose(np.asarray(va, dtype=np.float64),
                           np.asarray(vb, dtype=np.float64),
                           atol=1e-9), f"{name}: backends disagree"
        t_np = timeit(lambda: run(_numpy), args.repeats)
        t_nb = timeit(lambda: run(_numba), args.repeats)
        print(f"{name:<34} {t_np * 1e3:>8.2f}ms {t_nb * 1e3:>8.2f}ms "
              f"{t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
