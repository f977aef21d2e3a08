"""Planar formation geometry: reference shapes, the two-anchor similarity
parameterization, distortion scoring, and front-end path expansion."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .astar import GridPath


@dataclass
class SimilarityTransform:
    scale: float
    rotation: np.ndarray   # 2x2
    translation: np.ndarray  # (3,) world offset (z carries altitude)

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(2, 2)
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)

    @classmethod
    def from_angle(cls, scale, angle, translation):
        c, s = np.cos(angle), np.sin(angle)
        return cls(scale, np.array([[c, -s], [s, c]]), translation)

    def apply(self, points2d):
        p = np.asarray(points2d, dtype=np.float64).reshape(-1, 2)
        xy = (self.scale * (self.rotation @ p.T)).T + self.translation[:2]
        out = np.empty((p.shape[0], 3))
        out[:, :2] = xy
        out[:, 2] = self.translation[2]
        return out


@dataclass
class FormationSpec:
    reference_positions: np.ndarray  # (N,2) formation-plane coordinates
    name: str = "custom"
    anchor_indices: tuple = (0, 1)

    def __post_init__(self):
        self.reference_positions = np.asarray(self.reference_positions,
                                              dtype=np.float64).reshape(-1, 2)
        if self.n_agents < 2:
            raise ValueError("formations need at least two agents")
        if self.anchor_indices[0] == self.anchor_indices[1]:
            raise ValueError("anchor indices must be distinct")
        if self.d_ref <= 0:
            raise ValueError("anchor separation must be positive")

    @property
    def n_agents(self):
        return self.reference_positions.shape[0]

    @property
    def d_ref(self):
        a, b = self.anchor_indices
        return float(np.linalg.norm(self.reference_positions[b]
                                    - self.reference_positions[a]))

    @classmethod
    def named(cls, name, spacing=1.0):
        shapes = {
            "diamond": [(1, 0), (-1, 0), (0, 1), (0, -1)],
            "line": [(0, 1.2), (0, 0.4), (0, -0.4), (0, -1.2)],
            "rectangle": [(1.2, 0.9), (1.2, -0.9), (-1.2, 0.9), (-1.2, -0.9)],
            "triangle": [(1.0, 0), (-0.75, 1.0), (-0.75, -1.0)],
        }
        if name not in shapes:
            raise ValueError(f"unknown formation {name!r}")
        return cls(np.asarray(shapes[name], dtype=np.float64) * spacing, name=name)


def _as_complex(p):
    p = np.asarray(p, dtype=np.float64)
    return p[..., 0] + 1j * p[..., 1]


def anchor_coefficients(spec, i):
    """Complex weight w with desired_i = q0 + w * (q1 - q0)."""
    a, b = spec.anchor_indices
    ref = _as_complex(spec.reference_positions)
    return (ref[i] - ref[a]) / (ref[b] - ref[a])


def desired_position(q0, q1, spec, i):
    """Formation slot for agent i implied by the two anchor positions."""
    if i in spec.anchor_indices:
        raise ValueError("desired_position is defined for non-anchor agents")
    w = anchor_coefficients(spec, i)
    z = _as_complex(q0) + w * (_as_complex(q1) - _as_complex(q0))
    return np.array([z.real, z.imag])


def formation_distortion(current, spec):
    """Minimal sum of squared residuals between the reference formation and
    the best similarity-aligned current formation (closed form)."""
    cur = _as_complex(np.asarray(current, dtype=np.float64).reshape(-1, 2))
    ref = _as_complex(spec.reference_positions)
    if cur.shape[0] != ref.shape[0]:
        raise ValueError("agent count mismatch")
    cur = cur - cur.mean()
    ref = ref - ref.mean()
    denom = float(np.sum(np.abs(cur) ** 2))
    ref_sq = float(np.sum(np.abs(ref) ** 2))
    if denom == 0.0:
        return ref_sq
    cross = np.sum(np.conj(cur) * ref)
    return max(ref_sq - float(np.abs(cross)) ** 2 / denom, 0.0)


def path_headings(waypoints):
    """Forward xy heading at each waypoint (bisector at corners)."""
    w = np.asarray(waypoints, dtype=np.float64)
    m = w.shape[0]
    if m == 1:
        return np.zeros(1)
    dirs = np.diff(w[:, :2], axis=0)
    norms = np.linalg.norm(dirs, axis=1)
    unit = np.zeros_like(dirs)
    ok = norms > 1e-12
    unit[ok] = dirs[ok] / norms[ok, None]
    # carry forward heading through zero-length segments
    for k in range(1, len(unit)):
        if not ok[k]:
            unit[k] = unit[k - 1]
    headings = np.empty(m)
    headings[0] = np.arctan2(unit[0, 1], unit[0, 0])
    headings[-1] = np.arctan2(unit[-1, 1], unit[-1, 0])
    for k in range(1, m - 1):
        mean = unit[k - 1] + unit[k]
        if np.linalg.norm(mean) < 1e-12:
            mean = unit[k]
        headings[k] = np.arctan2(mean[1], mean[0])
    return headings


def formation_slots(center, heading, spec, scale=1.0):
    """World slot positions of a formation centered at `center` facing `heading`."""
    t = SimilarityTransform.from_angle(scale, heading, center)
    return t.apply(spec.reference_positions)


def expand_formation_paths(center_path, spec, shrink=0.5, final_heading=None):
    """Per-agent front-end paths from shrunken formations placed at every
    turning point of the center path, oriented along the local heading.

    When the path ends at the route goal the caller can pass the required
    arrival heading so the last formation placement matches the goal slots
    instead of the incoming path tangent."""
    if not 0.0 < shrink <= 1.0:
        raise ValueError("shrink must lie in (0, 1]")
    w = center_path.waypoints
    headings = path_headings(w)
    if final_heading is not None:
        headings[-1] = float(final_heading)
    slots = np.stack([formation_slots(w[k], headings[k], spec, shrink)
                      for k in range(w.shape[0])])  # (M, N, 3)
    paths = []
    for i in range(spec.n_agents):
        paths.append(GridPath(slots[:, i, :], center_path.terminated_at_boundary,
                              center_path.grid_cost))
    return paths
