"""Depth-sensor emulation: analytic first-hit ray casting over a square
FOV cone against the ground-truth cylinders and boxes."""

from __future__ import annotations

import numpy as np

from .gmm import PointCloud
from .scenario import Box, Cylinder


def ray_directions(yaw, fov_angle, angular_resolution):
    """Unit direction grid covering fov_angle in azimuth and elevation."""
    half = fov_angle / 2.0
    n = max(int(np.floor(fov_angle / angular_resolution)) + 1, 2)
    az = yaw + np.linspace(-half, half, n)
    el = np.linspace(-half, half, n)
    azg, elg = np.meshgrid(az, el, indexing="ij")
    ce = np.cos(elg.ravel())
    return np.column_stack([ce * np.cos(azg.ravel()),
                            ce * np.sin(azg.ravel()),
                            np.sin(elg.ravel())])


def _hit_cylinder(origin, dirs, cyl, t_max):
    """Per-ray hit parameter against the cylinder side surface (inf if none)."""
    ox = origin[0] - cyl.center[0]
    oy = origin[1] - cyl.center[1]
    dx, dy = dirs[:, 0], dirs[:, 1]
    a = dx * dx + dy * dy
    b = 2.0 * (ox * dx + oy * dy)
    c = ox * ox + oy * oy - cyl.radius ** 2
    disc = b * b - 4.0 * a * c
    t = np.full(len(dirs), np.inf)
    ok = (disc >= 0.0) & (a > 1e-12)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    t_near = (-b - sq) / np.where(ok, 2.0 * a, 1.0)
    z = origin[2] + t_near * dirs[:, 2]
    good = ok & (t_near > 1e-9) & (t_near <= t_max) & (z >= 0.0) & (z <= cyl.height)
    t[good] = t_near[good]
    return t


def _hit_box(origin, dirs, box, t_max):
    """Per-ray entry parameter against an axis-aligned box (slab method)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
        t1 = (box.lo - origin) * inv
        t2 = (box.hi - origin) * inv
    t_lo = np.nanmax(np.minimum(t1, t2), axis=1)
    t_hi = np.nanmin(np.maximum(t1, t2), axis=1)
    t = np.full(len(dirs), np.inf)
    good = (t_hi >= t_lo) & (t_lo > 1e-9) & (t_lo <= t_max)
    t[good] = t_lo[good]
    return t


def simulate_point_cloud(scenario, position, yaw, fov_angle=np.pi / 3,
                         sense_range=5.0, angular_resolution=np.deg2rad(1.0)):
    """First obstacle-surface intersection of every FOV ray within range."""
    origin = np.asarray(position, dtype=np.float64)
    dirs = ray_directions(yaw, fov_angle, angular_resolution)
    t = np.full(len(dirs), np.inf)
    for ob in scenario.obstacles:
        if isinstance(ob, Cylinder):
            t = np.minimum(t, _hit_cylinder(origin, dirs, ob, sense_range))
        elif isinstance(ob, Box):
            t = np.minimum(t, _hit_box(origin, dirs, ob, sense_range))
    hit = np.isfinite(t)
    points = origin[None, :] + t[hit, None] * dirs[hit]
    return PointCloud(points, sensor_origin=origin)
