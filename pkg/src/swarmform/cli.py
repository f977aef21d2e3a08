"""Command-line front end: run episode batches, export plot data, verify.

Exit codes: 0 on success, 1 when a batch misses its success threshold or a
verify suite fails, 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig
from .episode import run_episode
from .errors import ConfigError, SwarmformError
from .formation import FormationSpec
from .scenario import Scenario, generate_scenario

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


# ---------------------------------------------------------------- run

def cmd_run(cfg, quiet=False):
    sim = cfg.build_sim_config()
    spec = FormationSpec.named(cfg.formation)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / "config.json")
    fixed_world = None
    if cfg.scenario not in ("forest", "sharp_turn"):
        fixed_world = Scenario.load(cfg.scenario)
    reports = []
    for i in range(cfg.episodes):
        seed = cfg.seed + i
        if fixed_world is not None:
            scn = fixed_world
        else:
            scn = generate_scenario(cfg.scenario, seed=seed,
                                    density=cfg.density, spec=spec)
        rep = run_episode(scn, spec, sim, seed=seed)
        rep.save_json(out / f"episode_{i:03d}.json")
        reports.append(rep)
        if not quiet:
            print(f"episode {i:03d} seed {seed}: success={rep.success} "
                  f"collided={rep.collided} e_dist={rep.e_dist_mean:.4f}",
                  flush=True)
    summary = summarize(reports, cfg)
    with open(out / "summary.json", "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
    if not quiet:
        print(json.dumps({k: v for k, v in summary.items()
                          if not isinstance(v, list)}, indent=2))
    ok = summary["success_rate"] >= cfg.min_success_rate
    return EXIT_OK if ok else EXIT_FAILED


def summarize(reports, cfg):
    n = len(reports)
    return {
        "episodes": n,
        "formation": cfg.formation,
        "scenario": cfg.scenario,
        "seed": cfg.seed,
        "yaw_mode": cfg.yaw_mode,
        "gmm_enabled": cfg.gmm_enabled,
        "stgo_enabled": cfg.stgo_enabled,
        "success_rate": sum(r.success for r in reports) / n,
        "collision_rate": sum(r.collided for r in reports) / n,
        "timeout_rate": sum(r.timed_out for r in reports) / n,
        "mean_e_dist": float(np.mean([r.e_dist_mean for r in reports])),
        "mean_overlap_rate": float(np.mean([r.overlap_mean for r in reports])),
        "mean_gmm_kbps": float(np.mean([r.gmm_kbps for r in reports])),
        "mean_raw_kbps": float(np.mean([r.raw_kbps for r in reports])),
        "mean_compression_ratio": float(np.mean([r.compression_ratio
                                                 for r in reports])),
        "consensus_ok": all(r.consensus_ok for r in reports),
        "digests": [r.digest() for r in reports],
    }


# ---------------------------------------------------------------- export

def cmd_export(report_path, what, out_dir):
    with open(report_path) as f:
        d = json.load(f)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    series = d.get("series", {})
    if what == "trajectories":
        pos = series.get("positions", [])
        yaws = series.get("yaws", [])
        ts = series.get("t", [])
        if not pos:
            print("report carries no trajectory series", file=sys.stderr)
            return EXIT_FAILED
        n = len(pos[0])
        for i in range(n):
            path = out / f"trajectory_agent{i}.csv"
            with open(path, "w", newline="") as f:
                w = csv.writer(f)
                w.writerow(["t", "x", "y", "z", "yaw"])
                for k, t in enumerate(ts):
                    w.writerow([t, *pos[k][i], yaws[k][i]])
        print(f"wrote {n} trajectory files to {out}")
    elif what == "maps":
        sl = d.get("map_slice")
        if not sl:
            print("report carries no map slice", file=sys.stderr)
            return EXIT_FAILED
        with open(out / "esdf_slice.csv", "w", newline="") as f:
            w = csv.writer(f)
            for row in sl["distance"]:
                w.writerow(row)
        meta = {k: v for k, v in sl.items() if k != "distance"}
        with open(out / "esdf_slice_meta.json", "w") as f:
            json.dump(meta, f, indent=2)
        print(f"wrote esdf_slice.csv ({len(sl['distance'])} rows) to {out}")
    elif what == "overlap":
        with open(out / "overlap.csv", "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["t", "overlap_rate"])
            for t, o in zip(series.get("t", []), series.get("overlap_rate", [])):
                w.writerow([t, o])
        print(f"wrote overlap.csv to {out}")
    else:
        raise ConfigError(f"export target {what!r} unknown")
    return EXIT_OK


# ---------------------------------------------------------------- verify

def _verify_gradients(rows):
    from .cost import N_FIXED, CostWeights, TrajectoryProblem, evaluate_terms
    from .esdf import EsdfGrid

    keys = ("f", "b", "s", "d", "o", "r", "e")
    worst = {k: 0.0 for k in keys}
    for seed in range(20):
        rng = np.random.default_rng(seed)
        spec = FormationSpec([(0.0, 0.0), (1.2, 0.0), (0.5, 1.0)])
        cp = rng.normal(size=(3, 7, 3))
        endpoints = rng.normal(size=(3, 3))
        n = 16
        dist = 0.2 + 1.2 * rng.random((n, n, n))
        esdf = EsdfGrid(0.5, np.full(3, n), np.full(3, -8), dist)
        problem = TrajectoryProblem(cp, 0.6, endpoints, esdf, spec,
                                    CostWeights())
        _, grads = evaluate_terms(problem)
        h = 1e-6
        fd = {k: np.zeros_like(cp) for k in keys}
        for idx in np.ndindex(cp.shape):
            if idx[1] < N_FIXED:
                continue
            stepped = cp.copy()
            stepped[idx] += h
            hi, _ = evaluate_terms(problem, cp=stepped)
            stepped[idx] -= 2 * h
            lo, _ = evaluate_terms(problem, cp=stepped)
            for k in keys:
                fd[k][idx] = (hi[k] - lo[k]) / (2 * h)
        for k in keys:
            scale = max(float(np.abs(fd[k]).max()), 1.0)
            err = float(np.abs(grads[k] - fd[k]).max()) / scale
            worst[k] = max(worst[k], err)
    for k in keys:
        rows.append((f"gradient term {k} max rel err", worst[k], 1e-4,
                     worst[k] < 1e-4))


def _verify_theorem1(rows):
    from .formation import formation_distortion, formation_slots

    worst = 0.0
    spec = FormationSpec.named("diamond")
    rng = np.random.default_rng(0)
    for _ in range(100):
        scale = rng.uniform(0.3, 3.0)
        heading = rng.uniform(-np.pi, np.pi)
        center = np.append(rng.uniform(-50, 50, 2), 1.5)
        slots = formation_slots(center, heading, spec, scale)
        worst = max(worst, float(formation_distortion(slots[:, :2], spec)))
    rows.append(("similarity-invariant distortion max", worst, 1e-9,
                 worst < 1e-9))


def _verify_esdf(rows):
    from .esdf import compute_esdf
    from .mapping import OccupancyGrid

    exact = True
    for seed in range(20):
        rng = np.random.default_rng(seed)
        dims = rng.integers(16, 33, size=3)
        # center the window so the lower corner is cell 0: storage order
        # then equals global order and the mask below maps 1:1
        grid = OccupancyGrid.create(dims * 0.25, dims * 0.5, 0.5)
        assert np.all(grid.lower_cell == 0)
        occ = rng.random(tuple(dims)) < 0.04
        occ.flat[rng.integers(occ.size)] = True  # at least one
        grid.log_odds[:] = np.where(occ, grid.params.clamp_max,
                                    grid.params.clamp_min)
        esdf = compute_esdf(grid, 0.7)
        got_sq = np.round((esdf.distance / esdf.resolution) ** 2).astype(np.int64)
        pts = np.argwhere(occ)
        idx = np.indices(tuple(dims)).reshape(3, -1).T
        # chunked exact squared cell distances
        want = np.empty(idx.shape[0], dtype=np.int64)
        for s in range(0, idx.shape[0], 4096):
            blk = idx[s:s + 4096]
            d2 = ((blk[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
            want[s:s + 4096] = d2.min(axis=1)
        exact &= bool(np.array_equal(got_sq.ravel(), want))
    rows.append(("distance field exact match (20 grids)", float(exact), 1.0,
                 exact))


def _verify_dpso(rows):
    from .dpso import DpsoGroup, dpso_run

    target = np.array([0.4, -1.1, 2.0, 0.7])

    def cost(pos):
        d = (pos - target[None, :] + np.pi) % (2 * np.pi) - np.pi
        return (d ** 2).sum(axis=1)

    groups = [DpsoGroup(cost, 4, 30, seed=100 + g, owner=g)
              for g in range(4)]
    monotone = True
    for _ in range(25):
        prev = [g.gbest.cost for g in groups]
        bests = [g.step() for g in groups]
        for g, p in zip(groups, prev):
            for b in bests:
                if b.source != g.owner:
                    g.receive(b)
            monotone &= g.gbest.cost <= p
    costs = {g.gbest.cost for g in groups}
    rows.append(("group bests monotone", float(monotone), 1.0, monotone))
    rows.append(("final gbest costs identical", float(len(costs)), 1.0,
                 len(costs) == 1))
    finals = dpso_run(None, particles_per_agent=30, max_iters=25, seed=5,
                      cost_fn=cost, n_dims=4, return_group_bests=True)
    spread = max(b.cost for b in finals) - min(b.cost for b in finals)
    rows.append(("dpso_run cross-group cost spread", spread, 1e-12,
                 spread <= 0.0))


def _verify_codec(rows):
    from . import codec
    from .gmm import GmmModel

    ok = True
    lengths_ok = True
    rng = np.random.default_rng(7)
    for _ in range(20):
        k = int(rng.integers(1, 12))
        a = rng.normal(size=(k, 3, 3))
        covs = a @ a.transpose(0, 2, 1) + 0.01 * np.eye(3)
        w = rng.random(k)
        model = GmmModel(w / w.sum(), rng.normal(size=(k, 3)), covs,
                         rng.normal(size=3))
        buf = codec.encode_gmm_message(model, agent_id=3)
        lengths_ok &= len(buf) == codec.gmm_frame_length(k)
        back, sender = codec.decode_gmm_frame(buf)
        ok &= sender == 3
        ok &= np.array_equal(back.weights, np.float32(model.weights))
        ok &= np.array_equal(back.means, np.float32(model.means))
        ok &= np.array_equal(back.source_pose, np.float32(model.source_pose))
        # second pass is the identity: f32 values survive exactly
        again, _ = codec.decode_gmm_frame(codec.encode_gmm_message(back, 3))
        ok &= np.array_equal(again.covariances, back.covariances)
        cp = rng.normal(size=(4, 9, 3))
        aid, cp2, dt2, c2 = codec.decode_candidate(
            codec.encode_candidate(2, cp, 0.4, 1.25))
        ok &= aid == 2 and dt2 == np.float32(0.4) and c2 == np.float32(1.25)
        ok &= np.array_equal(cp2, np.float32(cp))
    rows.append(("byte-length formula", float(lengths_ok), 1.0, lengths_ok))
    rows.append(("roundtrip identity", float(ok), 1.0, ok))


SUITES = {
    "gradients": _verify_gradients,
    "theorem1": _verify_theorem1,
    "esdf": _verify_esdf,
    "dpso": _verify_dpso,
    "codec": _verify_codec,
}


def cmd_verify(suite):
    names = list(SUITES) if suite == "all" else [suite]
    rows = []
    for name in names:
        SUITES[name](rows)
    width = max(len(r[0]) for r in rows) + 2
    all_ok = True
    for name, value, threshold, ok in rows:
        status = "PASS" if ok else "FAIL"
        print(f"{name:<{width}} {value:<12.3e} (limit {threshold:g})  {status}")
        all_ok &= ok
    return EXIT_OK if all_ok else EXIT_FAILED


# ---------------------------------------------------------------- plumbing

def _kv_pairs(items, label):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"{label}: expected KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k] = json.loads(v) if _jsonish(v) else v
    return out


def _jsonish(v):
    try:
        json.loads(v)
        return True
    except json.JSONDecodeError:
        return False


def build_parser():
    p = argparse.ArgumentParser(prog="swarmform")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an episode batch")
    r.add_argument("--config", help="json config file; flags override it")
    r.add_argument("--scenario")
    r.add_argument("--density", type=float)
    r.add_argument("--formation")
    r.add_argument("--episodes", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--out-dir")
    r.add_argument("--yaw-mode", choices=["dpso", "velocity"])
    r.add_argument("--min-success-rate", type=float)
    r.add_argument("--ablate", action="append", default=[],
                   choices=["no-gmm", "no-stgo"])
    r.add_argument("--sim", action="append", metavar="KEY=VALUE",
                   help="SimConfig field override, repeatable")
    r.add_argument("--weight", action="append", metavar="KEY=VALUE",
                   help="CostWeights field override, repeatable")
    r.add_argument("--quiet", action="store_true")

    e = sub.add_parser("export", help="write plot-ready csv artifacts")
    e.add_argument("what", choices=["trajectories", "maps", "overlap"])
    e.add_argument("report", help="an episode_*.json file from a run")
    e.add_argument("--out-dir", default="export")

    v = sub.add_parser("verify", help="run the oracle suites")
    v.add_argument("suite", choices=[*SUITES, "all"])
    return p


def config_from_args(args):
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    for key in ("scenario", "density", "formation", "episodes", "seed",
                "yaw_mode", "min_success_rate"):
        val = getattr(args, key)
        if val is not None:
            setattr(cfg, key, val)
    if args.out_dir is not None:
        cfg.out_dir = args.out_dir
    if "no-gmm" in args.ablate:
        cfg.gmm_enabled = False
    if "no-stgo" in args.ablate:
        cfg.stgo_enabled = False
    cfg.sim.update(_kv_pairs(args.sim, "--sim"))
    cfg.weights.update(_kv_pairs(args.weight, "--weight"))
    return cfg.validate()


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(config_from_args(args), quiet=args.quiet)
        if args.command == "export":
            return cmd_export(args.report, args.what, args.out_dir)
        return cmd_verify(args.suite)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SwarmformError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
