"""Per-agent plan-sense-communicate pipeline driven by the episode loop."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import codec, kernels
from .astar import GridPath, plan_center_path
from .bspline import BSplineTrajectory, sample_to_bspline
from .bus import SwarmMessage
from .cost import CostWeights, TrajectoryProblem
from .errors import NoPath, SingularSystem, TooShort
from .esdf import compute_esdf, esdf_query_batch
from .formation import expand_formation_paths, formation_slots
from .gmm import choose_component_count, fit_gmm, resample
from .mapping import OccupancyGrid, integrate_scan, recenter_buffer
from .optimizer import StgoCandidate, optimize
from .polytraj import allocate_durations, fit_min_acc_polynomial
from .sensor import simulate_point_cloud
from .yawplan import interpolate_yaw

POINT_BYTES = 12  # raw f32 xyz, the uncompressed sharing baseline


@dataclass
class SimConfig:
    control_dt: float = 0.1
    scan_period: float = 0.5
    plan_period: float = 1.0
    fov_angle: float = np.pi / 3
    sense_range: float = 5.0
    angular_resolution: float = np.deg2rad(1.8)
    map_size: tuple = (20.0, 20.0, 2.0)
    map_resolution: float = 0.25
    flight_altitude: float = 1.5
    occupancy_threshold: float = 0.7
    hit_thickening: int = 2    # cells marked occupied past each sensed hit
    startup_sweep: int = 7     # extra look-around scan directions at takeoff
    cruise_speed: float = 1.8
    knot_dt: float = 0.4
    horizon: float = 9.0
    astar_clearance: float = 0.8
    shrink: float = 1.0
    opt_max_iters: int = 60
    weights: CostWeights = field(default_factory=CostWeights)
    yaw_mode: str = "dpso"            # dpso | velocity
    yaw_lams: tuple = (1.0, 1.0, 0.05, 0.5)
    yaw_horizon: int = 4
    yaw_dt: float = 1.0
    yaw_period: float = 2.0
    dpso_particles: int = 40
    dpso_iters: int = 20
    agent_radius: float = 0.2
    goal_tolerance: float = 0.5
    timeout: float = 45.0
    gmm_enabled: bool = True
    stgo_enabled: bool = True
    resample_per_component: int = 100
    em_max_iters: int = 30     # scan fits need surface shape, not ML optima
    em_tol: float = 1e-3
    seed: int = 0


@dataclass
class AgentState:
    id: int
    position: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray
    yaw: float
    grid: OccupancyGrid
    esdf: object = None
    inbox: list = field(default_factory=list)
    peers: dict = field(default_factory=dict)   # id -> (pos, vel, yaw)
    trajectory: BSplineTrajectory = None
    plan_start: float = 0.0
    yaw_plan: list = None
    candidate: StgoCandidate = None
    planning_failures: int = 0
    raw_point_bytes: int = 0
    scan_index: int = 0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64).copy()
        self.velocity = np.asarray(self.velocity, dtype=np.float64).copy()
        self.acceleration = np.asarray(self.acceleration, dtype=np.float64).copy()


def make_agent(agent_id, position, yaw, config):
    grid = OccupancyGrid.create(position, config.map_size,
                                config.map_resolution)
    return AgentState(agent_id, position, np.zeros(3), np.zeros(3),
                      kernels.wrap_angle(float(yaw)), grid)


def _mix_seed(*parts):
    h = 1469598103934665603
    for p in parts:
        h = ((h ^ (int(p) & 0xFFFFFFFF)) * 1099511628211) & 0xFFFFFFFFFFFFFFFF
    return h & 0x7FFFFFFF


def sense_and_share(agent, clock, bus, scenario, config, timings=None):
    """Scan, map the raw cloud locally, broadcast the compressed scan."""
    t0 = time.perf_counter()
    cloud = simulate_point_cloud(scenario, agent.position, agent.yaw,
                                 config.fov_angle, config.sense_range,
                                 config.angular_resolution)
    agent.raw_point_bytes += POINT_BYTES * len(cloud)
    # keep the thin z window anchored at the flight layer, sliding it only
    # as far as needed to keep the sensor origin inside the buffer
    half_z = 0.5 * config.map_size[2] - 2.0 * config.map_resolution
    z_center = np.clip(config.flight_altitude,
                       agent.position[2] - half_z, agent.position[2] + half_z)
    recenter_buffer(agent.grid, [agent.position[0], agent.position[1],
                                 z_center])
    if len(cloud) > 0:
        integrate_scan(agent.grid, cloud, thicken=config.hit_thickening)
        agent.esdf = None
    if timings is not None:
        timings["mapping"] += time.perf_counter() - t0
    if len(cloud) > 0 and config.gmm_enabled:
        t0 = time.perf_counter()
        k = choose_component_count(len(cloud))
        model = fit_gmm(cloud, k, rng_seed=_mix_seed(agent.id, agent.scan_index),
                        max_iters=config.em_max_iters, tol=config.em_tol)
        payload = codec.encode_gmm_message(model, agent_id=agent.id)
        bus.broadcast(SwarmMessage("gmm_scan", agent.id, clock, payload))
        if timings is not None:
            timings["em"] += time.perf_counter() - t0
    agent.scan_index += 1


def share_pose(agent, clock, bus):
    pose = codec.encode_pose(agent.id, agent.position, agent.velocity,
                             agent.yaw)
    bus.broadcast(SwarmMessage("pose", agent.id, clock, pose))


def ingest(agent, messages, config, timings=None):
    """Apply delivered poses and compressed scans to local state."""
    t0 = time.perf_counter()
    for msg in messages:
        if msg.kind == "pose":
            pid, pos, vel, yaw = codec.decode_pose(msg.payload)
            agent.peers[pid] = (np.asarray(pos), np.asarray(vel), yaw)
        elif msg.kind == "gmm_scan":
            model, sender = codec.decode_gmm_frame(msg.payload)
            count = config.resample_per_component * model.n_components
            seed = _mix_seed(sender, round(msg.timestamp * 1000))
            cloud = resample(model, count, rng_seed=seed)
            if len(cloud) > 0 and agent.grid.contains(cloud.sensor_origin):
                integrate_scan(agent.grid, cloud, carve_free=False,
                               thicken=config.hit_thickening)
                agent.esdf = None
    if timings is not None:
        timings["mapping"] += time.perf_counter() - t0


def swarm_states(agent, n_agents):
    """Best-known (position, velocity) per agent, own state exact."""
    states = []
    for i in range(n_agents):
        if i == agent.id:
            states.append((agent.position, agent.velocity))
        elif i in agent.peers:
            pos, vel, _ = agent.peers[i]
            states.append((pos, vel))
        else:
            states.append(None)
    return states


def _truncate_path(path, horizon):
    wps = path.waypoints
    lens = np.linalg.norm(np.diff(wps, axis=0), axis=1)
    total = 0.0
    for k, seg in enumerate(lens):
        if total + seg >= horizon:
            frac = (horizon - total) / seg
            cut = wps[k] + frac * (wps[k + 1] - wps[k])
            return GridPath(np.vstack([wps[: k + 1], cut]),
                            terminated_at_boundary=True,
                            grid_cost=path.grid_cost)
        total += seg
    return path


def _retract_blocked_slots(agent_paths, center_path, esdf, clearance):
    """Pull formation slots that land inside obstacles back toward the
    (clearance-checked) center path.

    A slot-offset waypoint inside a mapped surface shell leaves the back
    end in a local minimum it cannot descend out of, so the initial guess
    must already be clear.  For each blocked slot we take the point
    nearest the slot on the segment slot -> center waypoint whose distance
    field value reaches the requested clearance.
    """
    center = center_path.waypoints
    steps = np.linspace(0.0, 1.0, 21)[:, None]
    for path in agent_paths:
        wps = path.waypoints
        d0, _, inside = esdf_query_batch(esdf, wps)
        for k in range(wps.shape[0]):
            if inside[k] and d0[k] >= clearance:
                continue
            line = wps[k] + steps * (center[k] - wps[k])
            d, _, ins = esdf_query_batch(esdf, line)
            ok = np.flatnonzero(ins & (d >= clearance))
            wps[k] = line[ok[0]] if len(ok) else center[k]


def plan_candidate(agent, clock, scenario, spec, config, timings=None):
    """Front-end path + joint trajectory optimization; None on failure."""
    n_agents = spec.n_agents
    states = swarm_states(agent, n_agents)
    if any(s is None for s in states):
        agent.planning_failures += 1
        return None
    try:
        t0 = time.perf_counter()
        if agent.esdf is None:
            agent.esdf = compute_esdf(agent.grid, config.occupancy_threshold)
        if timings is not None:
            timings["esdf"] += time.perf_counter() - t0
        t0 = time.perf_counter()
        center = np.mean([s[0] for s in states], axis=0)
        center[2] = scenario.start_center[2]
        path = None
        for clearance in (config.astar_clearance,
                          config.astar_clearance / 2.0,
                          config.agent_radius):
            try:
                path = plan_center_path(agent.esdf, center, scenario.goal,
                                        clearance)
                break
            except NoPath:
                continue
        if path is None:
            raise NoPath("no center path at any clearance")
        path = _truncate_path(path, config.horizon)
        # constant-altitude flight: the grid search may wander vertically
        # through poorly observed layers, so flatten the path to the layer
        path.waypoints[:, 2] = config.flight_altitude
        if timings is not None:
            timings["astar"] += time.perf_counter() - t0
        t0 = time.perf_counter()
        at_goal = (len(path.waypoints) < 2 or np.sum(np.linalg.norm(
            np.diff(path.waypoints, axis=0), axis=1)) < 0.3)
        if at_goal:
            # the centroid has arrived; fly each agent straight onto its
            # arrival slot so the formation settles at the goal heading
            slots = formation_slots(scenario.goal, scenario.goal_heading,
                                    spec, config.shrink)
            agent_paths = [GridPath(np.vstack([states[i][0], slots[i]]),
                                    terminated_at_boundary=False)
                           for i in range(n_agents)]
            reach = max(np.linalg.norm(slots[i] - states[i][0])
                        for i in range(n_agents))
            if reach < 0.05:
                return None
            durations = np.array([max(reach / config.cruise_speed, 0.6)])
        else:
            final_heading = (None if path.terminated_at_boundary
                             else scenario.goal_heading)
            agent_paths = expand_formation_paths(path, spec,
                                                 shrink=config.shrink,
                                                 final_heading=final_heading)
            _retract_blocked_slots(agent_paths, path, agent.esdf,
                                   config.weights.clearance + 0.1)
            durations = allocate_durations(path.waypoints, config.cruise_speed)
        total = float(np.sum(durations))
        knot_dt = min(config.knot_dt, max(total / 3.2, 0.15))
        rows = []
        for i in range(n_agents):
            wps = agent_paths[i].waypoints.copy()
            wps[0] = states[i][0]
            poly = fit_min_acc_polynomial(wps, durations)
            start = (states[i][0], states[i][1], np.zeros(3))
            traj = sample_to_bspline(poly, knot_dt, start)
            rows.append(traj.control_points)
        n_ctrl = min(r.shape[0] for r in rows)
        cp = np.stack([r[:n_ctrl] for r in rows])
        endpoints = np.array([p.waypoints[-1] for p in agent_paths])
        problem = TrajectoryProblem(cp, knot_dt, endpoints, agent.esdf,
                                    spec, config.weights)
        cand = optimize(problem, max_iters=config.opt_max_iters, fix_z=True)
        cand.agent_id = agent.id
        agent.candidate = cand
        if timings is not None:
            timings["optimize"] += time.perf_counter() - t0
        return cand
    except (NoPath, SingularSystem, TooShort):
        agent.planning_failures += 1
        agent.candidate = None
        return None


def adopt_candidate(agent, selected, clock):
    """Track this agent's row of the swarm-selected control-point tensor."""
    agent.trajectory = BSplineTrajectory(
        np.asarray(selected.control_points[agent.id], dtype=np.float64),
        float(selected.knot_dt))
    agent.plan_start = clock


def advance(agent, clock, config):
    """Perfect-tracking kinematics along the adopted trajectory and yaw."""
    t_next = clock + config.control_dt
    if agent.trajectory is not None:
        t_rel = min(max(t_next - agent.plan_start, 0.0),
                    agent.trajectory.duration)
        agent.position = agent.trajectory.eval(t_rel)
        if t_next - agent.plan_start <= agent.trajectory.duration:
            agent.velocity = agent.trajectory.derivative(1).eval(t_rel)
            agent.acceleration = agent.trajectory.derivative(2).eval(t_rel)
        else:
            agent.velocity = np.zeros(3)
            agent.acceleration = np.zeros(3)
    if agent.yaw_plan:
        lo = agent.yaw_plan[0][0]
        hi = agent.yaw_plan[-1][0]
        angles = interpolate_yaw(agent.yaw_plan, min(max(t_next, lo), hi))
        agent.yaw = float(angles[agent.id])
    elif np.linalg.norm(agent.velocity[:2]) > 0.05:
        agent.yaw = float(np.arctan2(agent.velocity[1], agent.velocity[0]))
    agent.yaw = float(kernels.wrap_angle(agent.yaw))
