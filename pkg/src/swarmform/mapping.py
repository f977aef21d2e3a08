"""Log-odds occupancy grid stored in a circular (rolling) buffer.

Cells are addressed by global cell index ``g = floor(world / resolution)``
and live at storage slot ``g mod dims``; recentering the map therefore
keeps overlapping cells in place and only resets newly exposed slots.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from . import kernels
from .gmm import PointCloud


@dataclass
class SensorModel:
    l_occ: float = 0.85
    l_free: float = -0.4
    l_prior: float = 0.0
    clamp_min: float = -4.0
    clamp_max: float = 4.0


@dataclass
class OccupancyGrid:
    resolution: float
    dims: np.ndarray          # (3,) cell counts
    center_cell: np.ndarray   # (3,) global cell index of the buffer center
    log_odds: np.ndarray      # (nx,ny,nz) storage, slot = global index mod dims
    params: SensorModel = field(default_factory=SensorModel)

    def __post_init__(self):
        self.dims = np.asarray(self.dims, dtype=np.int64).reshape(3)
        self.center_cell = np.asarray(self.center_cell, dtype=np.int64).reshape(3)

    @classmethod
    def create(cls, center_world, size_world, resolution, params=None):
        dims = np.maximum(np.ceil(np.asarray(size_world, dtype=np.float64) / resolution), 1)
        dims = dims.astype(np.int64)
        center_cell = np.floor(np.asarray(center_world, dtype=np.float64) / resolution).astype(np.int64)
        params = params or SensorModel()
        log_odds = np.full(tuple(dims), params.l_prior, dtype=np.float64)
        return cls(resolution, dims, center_cell, log_odds, params)

    @property
    def lower_cell(self):
        return self.center_cell - self.dims // 2

    @property
    def origin_world(self):
        """World coordinate of the lower map corner."""
        return self.lower_cell * self.resolution

    def world_to_cell(self, p):
        return np.floor(np.asarray(p, dtype=np.float64) / self.resolution).astype(np.int64)

    def contains_cell(self, g):
        lo = self.lower_cell
        g = np.asarray(g)
        return bool(np.all(g >= lo) and np.all(g < lo + self.dims))

    def contains(self, p):
        return self.contains_cell(self.world_to_cell(p))

    def cell_log_odds(self, g):
        """Log-odds of a global cell index (pure circular lookup)."""
        s = np.mod(np.asarray(g, dtype=np.int64), self.dims)
        return self.log_odds[tuple(s.T) if s.ndim > 1 else tuple(s)]

    def probability_at(self, p):
        return expit(self.cell_log_odds(self.world_to_cell(p)))

    def unwrapped(self):
        """Contiguous (nx,ny,nz) view in global-cell order starting at lower_cell."""
        lo = self.lower_cell
        out = self.log_odds
        for ax in range(3):
            out = np.roll(out, -int(lo[ax]) % int(self.dims[ax]), axis=ax)
        return out

    def probabilities(self):
        return expit(self.unwrapped())

    def metadata(self):
        return {
            "resolution": self.resolution,
            "dims": self.dims.tolist(),
            "center_cell": self.center_cell.tolist(),
            "origin_world": self.origin_world.tolist(),
            "l_occ": self.params.l_occ,
            "l_free": self.params.l_free,
            "l_prior": self.params.l_prior,
            "clamp": [self.params.clamp_min, self.params.clamp_max],
        }


def integrate_scan(grid, cloud, carve_free=True, thicken=0):
    """Raycast every cloud point from its sensor origin into the grid.

    Per-ray log-odds deltas are accumulated first and clamped once, so the
    result does not depend on ray order within the scan.  Points outside
    the map truncate at the boundary without an endpoint hit.  Clouds
    rebuilt from a compressed mixture scatter around the true surface, so
    their rays may cross solid space; pass carve_free=False to apply only
    the endpoint hits and skip the free-space update for such clouds.

    thicken > 0 additionally marks that many cells past each hit, along
    the ray, as occupied.  Depth sensing only ever observes the surface
    shell of an obstacle; a paper-thin shell leaves the interior looking
    traversable to the distance field, which creates spurious local minima
    right behind the surface.  Padding the hit in the ray direction fills
    the interior of anything up to ``2*thicken`` cells thick.
    """
    if len(cloud) == 0:
        return grid
    if not grid.contains(cloud.sensor_origin):
        raise ValueError("sensor origin outside grid bounds")
    lo = grid.lower_cell.astype(np.float64)
    origin = cloud.sensor_origin / grid.resolution - lo
    endpoints = cloud.points / grid.resolution - lo[None, :]
    delta = np.zeros(tuple(grid.dims))
    l_free = grid.params.l_free if carve_free else 0.0
    kernels.raycast_accumulate(delta, origin, endpoints,
                               l_free, grid.params.l_occ)
    if thicken > 0:
        d = endpoints - origin[None, :]
        norm = np.linalg.norm(d, axis=1)
        ok = norm > 1e-12
        unit = d[ok] / norm[ok, None]
        # never pad a cell this scan saw through: shallow-angle rays would
        # otherwise smear the silhouette sideways into known-free space
        seen_free = delta < 0.0
        for j in range(1, thicken + 1):
            cells = np.floor(endpoints[ok] + j * unit).astype(np.int64)
            inb = np.all((cells >= 0) & (cells < grid.dims[None, :]), axis=1)
            cells = cells[inb]
            keep = ~seen_free[cells[:, 0], cells[:, 1], cells[:, 2]]
            np.add.at(delta, tuple(cells[keep].T), grid.params.l_occ)
    for ax in range(3):
        delta = np.roll(delta, int(grid.lower_cell[ax]) % int(grid.dims[ax]), axis=ax)
    grid.log_odds += delta
    np.clip(grid.log_odds, grid.params.clamp_min, grid.params.clamp_max,
            out=grid.log_odds)
    return grid


def recenter_buffer(grid, new_center_world):
    """Move the map window; overlapping cells keep their values in place."""
    new_center = np.floor(np.asarray(new_center_world, dtype=np.float64)
                          / grid.resolution).astype(np.int64)
    old_lo = grid.lower_cell
    new_lo = new_center - grid.dims // 2
    masks = []
    for ax in range(3):
        n = int(grid.dims[ax])
        s = np.arange(n)
        g_new = new_lo[ax] + np.mod(s - new_lo[ax], n)
        masks.append((g_new < old_lo[ax]) | (g_new >= old_lo[ax] + n))
    reset = (masks[0][:, None, None] | masks[1][None, :, None]
             | masks[2][None, None, :])
    grid.log_odds[reset] = grid.params.l_prior
    grid.center_cell = new_center
    return grid
