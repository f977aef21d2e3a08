"""Deterministic lock-step episode loop with metric collection.

All agents share one simulated clock.  Each control period: deliver due
messages, ingest them, sense on the scan timer, replan on the planning
timer (candidate exchange, minimum-cost selection, joint yaw search), then
advance every agent along its adopted trajectory.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from . import codec, kernels
from .agent import (POINT_BYTES, adopt_candidate, advance, ingest, make_agent,
                    plan_candidate, sense_and_share, share_pose)
from .bspline import BSplineTrajectory
from .bus import MessageBus, SwarmMessage
from .dpso import dpso_run
from .esdf import compute_esdf
from .formation import SimilarityTransform, formation_distortion
from .fov import fov_polygon, overlap_area
from .optimizer import StgoCandidate, stgo_select
from .yawplan import YawProblem, yaw_cost_many

TRI_AREA_FACTOR = 0.5  # area of an isoceles FOV triangle = 0.5 R^2 sin(fov)


@dataclass
class EpisodeReport:
    success: bool = False
    collided: bool = False
    timed_out: bool = False
    reached_time: float = -1.0
    sim_duration: float = 0.0
    n_agents: int = 0
    e_dist_mean: float = 0.0
    overlap_mean: float = 0.0
    min_interagent: float = float("inf")
    min_clearance: float = float("inf")
    times: list = field(default_factory=list)
    e_dist_series: list = field(default_factory=list)
    overlap_series: list = field(default_factory=list)
    clearance_series: list = field(default_factory=list)
    interagent_series: list = field(default_factory=list)
    agent_positions: list = field(default_factory=list)  # per step: (N,3)
    agent_yaws: list = field(default_factory=list)       # per step: (N,)
    map_slice: dict = field(default_factory=dict)
    bytes_sent: dict = field(default_factory=dict)
    raw_point_bytes: int = 0
    gmm_kbps: float = 0.0
    raw_kbps: float = 0.0
    compression_ratio: float = 0.0
    planning_failures: int = 0
    consensus_ok: bool = True
    timings: dict = field(default_factory=dict)
    seed: int = 0
    scenario_kind: str = ""
    formation: str = ""

    def to_dict(self, include_timings=True, include_series=True):
        d = {
            "success": self.success, "collided": self.collided,
            "timed_out": self.timed_out, "reached_time": self.reached_time,
            "sim_duration": self.sim_duration, "n_agents": self.n_agents,
            "e_dist_mean": self.e_dist_mean, "overlap_mean": self.overlap_mean,
            "min_interagent": self.min_interagent,
            "min_clearance": self.min_clearance,
            "bytes_sent": dict(self.bytes_sent),
            "raw_point_bytes": self.raw_point_bytes,
            "gmm_kbps": self.gmm_kbps, "raw_kbps": self.raw_kbps,
            "compression_ratio": self.compression_ratio,
            "planning_failures": self.planning_failures,
            "consensus_ok": self.consensus_ok,
            "seed": self.seed, "scenario_kind": self.scenario_kind,
            "formation": self.formation,
        }
        if include_series:
            d["series"] = {
                "t": self.times, "e_dist": self.e_dist_series,
                "overlap_rate": self.overlap_series,
                "min_clearance": self.clearance_series,
                "min_interagent": self.interagent_series,
                "positions": self.agent_positions,
                "yaws": self.agent_yaws,
            }
            d["map_slice"] = self.map_slice
        if include_timings:
            d["timings"] = dict(self.timings)
        return d

    def digest(self):
        """Content hash; wall-clock timings excluded by design."""
        blob = json.dumps(self.to_dict(include_timings=False), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()

    def save_json(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)

    def save_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["t", "e_dist", "overlap_rate", "min_clearance",
                        "min_interagent"])
            for row in zip(self.times, self.e_dist_series,
                           self.overlap_series, self.clearance_series,
                           self.interagent_series):
                w.writerow(row)


def formation_slots(spec, center, heading, shrink=1.0):
    t = SimilarityTransform.from_angle(shrink, heading, center)
    return t.apply(spec.reference_positions)


def _decode_candidate_msg(payload):
    agent_id, cp, knot_dt, cost = codec.decode_candidate(payload)
    return StgoCandidate(agent_id, cp, knot_dt, cost)


def _plan_yaw_joint(agents, selected, clock, step, bus, config, ep_seed, timings):
    """Chained per-sample DPSO over the selected joint trajectory.

    One particle group per agent, each evaluating against its own map,
    exchanging group bests every iteration.  Returns the consensus plan.
    """
    n = len(agents)
    trajs = [BSplineTrajectory(np.asarray(selected.control_points[i],
                                          dtype=np.float64),
                               float(selected.knot_dt)) for i in range(n)]
    dur = trajs[0].duration
    theta_prev = np.array([a.yaw for a in agents])
    plan = [(clock, theta_prev.copy())]
    sample_ts = []
    for k in range(1, config.yaw_horizon + 1):
        t = min(k * config.yaw_dt, dur)
        if not sample_ts or t > sample_ts[-1] + 1e-9:
            sample_ts.append(t)
    gbest_len = len(codec.encode_gbest(0, 0, theta_prev, 0.0))
    t0 = time.perf_counter()
    for k, t_rel in enumerate(sample_ts):
        pos = np.array([tr.eval(t_rel) for tr in trajs])
        vel = np.array([tr.derivative(1).eval(t_rel) for tr in trajs])
        theta_v = theta_prev.copy()
        moving = np.linalg.norm(vel[:, :2], axis=1) > 0.1
        theta_v[moving] = np.arctan2(vel[moving, 1], vel[moving, 0])
        l1, l2, l3, l4 = config.yaw_lams
        problems = [YawProblem(pos, theta_v, theta_prev, grid=agents[i].grid,
                               lam1=l1, lam2=l2, lam3=l3, lam4=l4,
                               fov_angle=config.fov_angle,
                               sense_range=config.sense_range)
                    for i in range(n)]
        fns = [(lambda P, pr=p: yaw_cost_many(P, pr)) for p in problems]
        theta = dpso_run(None, particles_per_agent=config.dpso_particles,
                         max_iters=config.dpso_iters,
                         seed=_yaw_seed(ep_seed, step, k),
                         exchange=True, cost_fn=fns, n_dims=n,
                         init_guesses=[theta_v, theta_prev])
        bus.account_virtual("dpso_best", n * config.dpso_iters * gbest_len,
                            count=n * config.dpso_iters)
        plan.append((clock + t_rel, theta))
        theta_prev = theta
    timings["dpso"] += time.perf_counter() - t0
    return plan


def _yaw_seed(seed, step, k):
    return (seed * 1000003 + step * 101 + k) & 0x7FFFFFFF


def run_episode(scenario, spec, config, seed=0):
    n = spec.n_agents
    report = EpisodeReport(n_agents=n, seed=seed, scenario_kind=scenario.kind,
                           formation=spec.name)
    timings = defaultdict(float)
    drop_kinds = []
    if not config.gmm_enabled:
        drop_kinds.append("gmm_scan")
    if not config.stgo_enabled:
        drop_kinds.append("stgo_candidate")
    bus = MessageBus(n, latency=config.control_dt, drop_prob=0.0,
                     seed=seed, drop_kinds=drop_kinds)
    start_slots = formation_slots(spec, scenario.start_center,
                                  scenario.start_heading)
    goal_slots = formation_slots(spec, scenario.goal, scenario.goal_heading)
    agents = [make_agent(i, start_slots[i], scenario.start_heading, config)
              for i in range(n)]
    for a in agents:  # mission briefing: everyone knows the initial lineup
        for i in range(n):
            if i != a.id:
                a.peers[i] = (start_slots[i].copy(), np.zeros(3),
                              scenario.start_heading)
    # takeoff look-around: sweep the camera through a full turn before the
    # first plan so the immediate surroundings enter the map instead of
    # reading as optimistically free unknown space
    for a in agents:
        yaw0 = a.yaw
        for k in range(1, config.startup_sweep + 1):
            a.yaw = yaw0 + 2.0 * np.pi * k / (config.startup_sweep + 1)
            sense_and_share(a, 0.0, bus, scenario, config, timings)
        a.yaw = yaw0
    scan_every = max(int(round(config.scan_period / config.control_dt)), 1)
    plan_every = max(int(round(config.plan_period / config.control_dt)), 1)
    n_steps = int(round(config.timeout / config.control_dt))
    tri_area = TRI_AREA_FACTOR * config.sense_range ** 2 * np.sin(config.fov_angle)
    clock = 0.0
    for step in range(n_steps):
        clock = step * config.control_dt
        bus.deliver(clock)
        for a in agents:
            ingest(a, bus.collect(a.id), config, timings)
        if step % scan_every == 0:
            for a in agents:
                sense_and_share(a, clock, bus, scenario, config, timings)
        for a in agents:
            share_pose(a, clock, bus)
        if step % plan_every == 0:
            _planning_cycle(agents, clock, step, bus, scenario, spec, config,
                            report, timings)
        for a in agents:
            advance(a, clock, config)
        clock += config.control_dt
        _record_metrics(agents, clock, scenario, spec, config, report,
                        tri_area)
        if report.collided:
            break
        if all(np.linalg.norm(agents[i].position - goal_slots[i])
               <= config.goal_tolerance for i in range(n)):
            report.success = True
            report.reached_time = clock
            break
    else:
        report.timed_out = True
    report.sim_duration = clock
    report.planning_failures = sum(a.planning_failures for a in agents)
    report.map_slice = _map_slice(agents[0], config)
    _finalize(report, bus, agents)
    report.timings = dict(timings)
    return report


def _planning_cycle(agents, clock, step, bus, scenario, spec, config,
                    report, timings):
    yaw_every = max(int(round(config.yaw_period / config.control_dt)), 1)
    yaw_due = step % yaw_every == 0
    n = len(agents)
    payloads = {}
    for a in agents:
        cand = plan_candidate(a, clock, scenario, spec, config, timings)
        if cand is not None:
            payload = codec.encode_candidate(a.id, cand.control_points,
                                             cand.knot_dt, cand.cost)
            payloads[a.id] = payload
            bus.broadcast(SwarmMessage("stgo_candidate", a.id, clock,
                                       payload), immediate=True)
    bus.deliver(clock)
    selections = []
    for a in agents:
        received = [_decode_candidate_msg(m.payload)
                    for m in bus.collect(a.id) if m.kind == "stgo_candidate"]
        local = (_decode_candidate_msg(payloads[a.id])
                 if a.id in payloads else None)
        pool = received + ([local] if local is not None else [])
        if not pool:
            selections.append(None)
            continue
        # candidates may differ in control-point count when agents hold
        # slightly different pose estimates; the minimum-cost rule stays a
        # pure function of the candidate multiset either way
        dims = {c.control_points.shape for c in pool}
        if local is not None and len(dims) == 1:
            sel = stgo_select(local, received)
        else:
            sel = min(pool, key=lambda c: (c.cost, c.agent_id))
        selections.append(sel)
        adopt_candidate(a, sel, clock)
    if config.stgo_enabled and all(s is not None for s in selections):
        blobs = {codec.encode_candidate(s.agent_id, s.control_points,
                                        s.knot_dt, s.cost)
                 for s in selections}
        if len(blobs) > 1:
            report.consensus_ok = False
    if config.yaw_mode != "dpso":
        for a in agents:
            a.yaw_plan = None  # velocity-aligned yaw in advance()
        return
    if not yaw_due:
        return
    if config.stgo_enabled and all(s is not None for s in selections):
        plan = _plan_yaw_joint(agents, selections[0], clock, step, bus,
                               config, report.seed, timings)
        for a in agents:
            a.yaw_plan = plan
    else:
        for a, sel in zip(agents, selections):
            if sel is None:
                continue
            a.yaw_plan = _plan_yaw_joint(agents, sel, clock, step, bus,
                                         config, report.seed, timings)


def _map_slice(agent, config):
    """Horizontal cut of one agent's final distance field, for plotting."""
    esdf = agent.esdf
    if esdf is None:
        esdf = compute_esdf(agent.grid, config.occupancy_threshold)
    kz = int(np.floor(config.flight_altitude / esdf.resolution)) \
        - int(esdf.lower_cell[2])
    kz = min(max(kz, 0), int(esdf.dims[2]) - 1)
    return {
        "agent": agent.id,
        "resolution": float(esdf.resolution),
        "origin_xy": [float(esdf.lower_cell[0] * esdf.resolution),
                      float(esdf.lower_cell[1] * esdf.resolution)],
        "z": float((esdf.lower_cell[2] + kz + 0.5) * esdf.resolution),
        "distance": np.round(esdf.distance[:, :, kz], 6).tolist(),
    }


def _record_metrics(agents, clock, scenario, spec, config, report, tri_area):
    n = len(agents)
    pts = np.array([a.position for a in agents])
    report.times.append(round(clock, 6))
    e_dist = formation_distortion(pts[:, :2], spec) if n >= 2 else 0.0
    report.e_dist_series.append(float(e_dist))
    clear = min(scenario.clearance(p) for p in pts)
    report.clearance_series.append(float(clear))
    report.min_clearance = min(report.min_clearance, clear)
    if n >= 2:
        dmin = min(np.linalg.norm(pts[i] - pts[j])
                   for i in range(n) for j in range(i + 1, n))
    else:
        dmin = float("inf")
    report.interagent_series.append(float(dmin) if np.isfinite(dmin) else -1.0)
    report.min_interagent = min(report.min_interagent, dmin)
    report.agent_positions.append([[round(float(c), 9) for c in p] for p in pts])
    report.agent_yaws.append([round(float(a.yaw), 9) for a in agents])
    tris = [fov_polygon(a.position, a.yaw, config.fov_angle,
                        config.sense_range) for a in agents]
    overlap = sum(overlap_area(tris[i], tris[j])
                  for i in range(n) for j in range(i + 1, n))
    report.overlap_series.append(float(overlap / (n * tri_area)))
    if clear <= config.agent_radius or dmin < 2 * config.agent_radius:
        report.collided = True


def _finalize(report, bus, agents):
    report.e_dist_mean = float(np.mean(report.e_dist_series)) \
        if report.e_dist_series else 0.0
    report.overlap_mean = float(np.mean(report.overlap_series)) \
        if report.overlap_series else 0.0
    if not np.isfinite(report.min_interagent):
        report.min_interagent = -1.0
    report.bytes_sent = bus.byte_summary()
    report.raw_point_bytes = sum(a.raw_point_bytes for a in agents)
    dur = max(report.sim_duration, 1e-9)
    report.gmm_kbps = report.bytes_sent.get("gmm_scan", 0) * 8.0 / 1000.0 / dur
    report.raw_kbps = report.raw_point_bytes * 8.0 / 1000.0 / dur
    report.compression_ratio = (
        report.bytes_sent.get("gmm_scan", 0) / report.raw_point_bytes
        if report.raw_point_bytes else 0.0)
