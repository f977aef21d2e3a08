"""Grid path search for the formation center.

26-connected A* over ESDF-free cells with Euclidean edge costs.  When the
goal lies outside the local map, the first expanded boundary-shell cell
becomes the path endpoint.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .errors import NoPath

_NEIGHBORS = [(dx, dy, dz) for dx in (-1, 0, 1) for dy in (-1, 0, 1)
              for dz in (-1, 0, 1) if (dx, dy, dz) != (0, 0, 0)]
_NEIGHBOR_COSTS = [float(np.sqrt(dx * dx + dy * dy + dz * dz))
                   for dx, dy, dz in _NEIGHBORS]

COLLINEAR_TOL = 1e-6


@dataclass
class GridPath:
    waypoints: np.ndarray          # (M,3) world meters, simplified turning points
    terminated_at_boundary: bool
    grid_cost: float = 0.0         # raw A* cost in meters (pre-simplification)
    cells: list = field(default_factory=list)

    def __post_init__(self):
        self.waypoints = np.asarray(self.waypoints, dtype=np.float64).reshape(-1, 3)


def plan_center_path(esdf, start, goal, clearance, shortcut=True):
    """A* from start toward goal over cells with ESDF >= clearance."""
    free = esdf.distance >= clearance
    dims = tuple(int(d) for d in esdf.dims)
    res = esdf.resolution
    lo = esdf.lower_cell

    def to_cell(p):
        c = np.floor(np.asarray(p, dtype=np.float64) / res).astype(np.int64) - lo
        return tuple(int(v) for v in np.clip(c, 0, np.asarray(dims) - 1))

    def center(c):
        return (np.asarray(c, dtype=np.float64) + lo + 0.5) * res

    start = np.asarray(start, dtype=np.float64)
    goal = np.asarray(goal, dtype=np.float64)
    s_cell = to_cell(start)
    goal_cell_raw = np.floor(goal / res).astype(np.int64) - lo
    goal_inside = bool(np.all(goal_cell_raw >= 0) and np.all(goal_cell_raw < dims))
    g_cell = tuple(int(v) for v in np.clip(goal_cell_raw, 0, np.asarray(dims) - 1))
    if not free[s_cell]:
        raise NoPath("start cell violates clearance")

    def heuristic(c):
        return float(np.linalg.norm(center(c) - goal))

    # exiting the window only makes sense through faces on the goal side;
    # otherwise a thin map would let the search stop a few cells away in
    # a direction orthogonal to the route
    exit_lo = goal_cell_raw < 0
    exit_hi = goal_cell_raw >= np.asarray(dims)

    def on_boundary(c):
        return any((exit_lo[a] and c[a] == 0)
                   or (exit_hi[a] and c[a] == dims[a] - 1)
                   for a in range(3))

    g_score = {s_cell: 0.0}
    came = {}
    open_heap = [(heuristic(s_cell), s_cell)]
    closed = set()
    end = None
    boundary_end = False
    while open_heap:
        f, cur = heapq.heappop(open_heap)
        if cur in closed:
            continue
        closed.add(cur)
        if goal_inside and cur == g_cell:
            end = cur
            break
        if not goal_inside and on_boundary(cur):
            end = cur
            boundary_end = True
            break
        gc = g_score[cur]
        for (d, ec) in zip(_NEIGHBORS, _NEIGHBOR_COSTS):
            nxt = (cur[0] + d[0], cur[1] + d[1], cur[2] + d[2])
            if not (0 <= nxt[0] < dims[0] and 0 <= nxt[1] < dims[1]
                    and 0 <= nxt[2] < dims[2]):
                continue
            if not free[nxt] or nxt in closed:
                continue
            cand = gc + ec * res
            if cand < g_score.get(nxt, np.inf):
                g_score[nxt] = cand
                came[nxt] = cur
                heapq.heappush(open_heap, (cand + heuristic(nxt), nxt))
    if end is None:
        raise NoPath("goal unreachable within the local map")

    cells = [end]
    while cells[-1] in came:
        cells.append(came[cells[-1]])
    cells.reverse()
    pts = [center(c) for c in cells]
    pts[0] = start.copy()
    if goal_inside and not boundary_end:
        pts[-1] = goal.copy()
    if shortcut and len(pts) > 2:
        pts = _shortcut(pts, esdf, clearance)
    pts = _remove_collinear(pts)
    return GridPath(np.asarray(pts), boundary_end, g_score[end], cells)


def _segment_clear(a, b, esdf, clearance):
    n = max(int(np.ceil(np.linalg.norm(b - a) / (0.5 * esdf.resolution))), 1)
    ts = np.linspace(0.0, 1.0, n + 1)
    hi = (esdf.dims - 1).astype(np.float64)
    for t in ts:
        p = a + t * (b - a)
        c = esdf.cell_center_coords(p)
        c = np.clip(c, 0.0, hi)
        i = tuple(np.round(c).astype(np.int64))
        if esdf.distance[i] < clearance:
            return False
    return True


def _shortcut(pts, esdf, clearance):
    """Greedy line-of-sight pruning of intermediate waypoints."""
    out = [pts[0]]
    i = 0
    while i < len(pts) - 1:
        j = len(pts) - 1
        while j > i + 1 and not _segment_clear(pts[i], pts[j], esdf, clearance):
            j -= 1
        out.append(pts[j])
        i = j
    return out


def _remove_collinear(pts):
    if len(pts) <= 2:
        return pts
    out = [pts[0]]
    for k in range(1, len(pts) - 1):
        a = np.asarray(pts[k]) - np.asarray(out[-1])
        b = np.asarray(pts[k + 1]) - np.asarray(pts[k])
        if np.linalg.norm(np.cross(a, b)) > COLLINEAR_TOL:
            out.append(pts[k])
    out.append(pts[-1])
    return out
