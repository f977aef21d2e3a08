"""Planar field-of-view geometry and map-entropy perception value.

The camera FOV is projected onto the agent's height plane as a triangle:
apex at the agent, two rays of length `sense_range` at yaw +/- half the
opening angle, closed by the chord.
"""

from __future__ import annotations

import numpy as np

from . import kernels


def fov_polygon(position, yaw, fov_angle, sense_range):
    """Triangle vertices (3,2) of the projected FOV."""
    if not 0.0 < fov_angle < np.pi:
        raise ValueError("fov_angle must be in (0, pi)")
    apex = np.asarray(position, dtype=np.float64)[:2]
    return kernels.fov_triangle(apex, float(yaw), fov_angle / 2.0,
                                float(sense_range))


def overlap_area(tri_a, tri_b):
    """Intersection area of two FOV triangles (convex clipping)."""
    return kernels.convex_clip_area(np.asarray(tri_a, dtype=np.float64),
                                    np.asarray(tri_b, dtype=np.float64))


def perception_cells(grid, position, sense_range):
    """Per-cell (entropy, bearing, planar range) arrays for every cell of
    the agent's altitude layer within sense_range, entropy -p ln p.

    Cells with zero entropy are dropped; they cannot contribute to any
    FOV sum.  Returns three 1-d arrays (possibly empty).
    """
    position = np.asarray(position, dtype=np.float64)
    empty = (np.empty(0), np.empty(0), np.empty(0))
    gz = int(np.floor(position[2] / grid.resolution))
    lo = grid.lower_cell
    if not lo[2] <= gz < lo[2] + grid.dims[2]:
        return empty
    layer = grid.probabilities()[:, :, gz - lo[2]]
    cx = (lo[0] + np.arange(grid.dims[0]) + 0.5) * grid.resolution
    cy = (lo[1] + np.arange(grid.dims[1]) + 0.5) * grid.resolution
    dx = cx[:, None] - position[0]
    dy = cy[None, :] - position[1]
    r = np.hypot(dx, dy)
    p = layer
    ent = np.where(p > 0.0, -p * np.log(np.where(p > 0.0, p, 1.0)), 0.0)
    keep = (r <= sense_range) & (ent > 0.0)
    if not keep.any():
        return empty
    phi = np.arctan2(np.broadcast_to(dy, r.shape)[keep],
                     np.broadcast_to(dx, r.shape)[keep])
    return ent[keep], phi, r[keep]


def perception_value(grid, position, yaw, fov_angle, sense_range):
    """Entropy mass -sum p_l ln p_l over cells inside the FOV triangle."""
    if not 0.0 < fov_angle < np.pi:
        raise ValueError("fov_angle must be in (0, pi)")
    ent, phi, r = perception_cells(grid, position, sense_range)
    if len(ent) == 0:
        return 0.0
    return kernels.fov_entropy_sum(ent, phi, r, float(yaw),
                                   fov_angle / 2.0, float(sense_range))
