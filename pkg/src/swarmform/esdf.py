"""Euclidean signed distance field over the occupancy map."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import OutOfBounds

DEFAULT_MAX_DISTANCE = 10.0
DEFAULT_OCC_THRESHOLD = 0.7


@dataclass
class EsdfGrid:
    resolution: float
    dims: np.ndarray         # (3,)
    lower_cell: np.ndarray   # (3,) global index of the lower corner
    distance: np.ndarray     # (nx,ny,nz) meters, contiguous global order
    max_distance: float = DEFAULT_MAX_DISTANCE

    def __post_init__(self):
        self.dims = np.asarray(self.dims, dtype=np.int64).reshape(3)
        self.lower_cell = np.asarray(self.lower_cell, dtype=np.int64).reshape(3)

    @property
    def origin_world(self):
        return self.lower_cell * self.resolution

    def cell_center_coords(self, p):
        """Continuous cell-index coordinates (integers hit cell centers)."""
        return np.asarray(p, dtype=np.float64) / self.resolution - self.lower_cell - 0.5


def compute_esdf(grid, occupancy_threshold=DEFAULT_OCC_THRESHOLD,
                 max_distance=DEFAULT_MAX_DISTANCE):
    """Exact Euclidean distance transform of the thresholded occupancy grid."""
    if not 0.0 < occupancy_threshold < 1.0:
        raise ValueError("occupancy_threshold must lie in (0,1)")
    prob = grid.probabilities()
    occ = prob >= occupancy_threshold
    if not occ.any():
        dist = np.full(tuple(grid.dims), float(max_distance))
    else:
        dist = kernels.edt_cells(occ) * grid.resolution
    return EsdfGrid(grid.resolution, grid.dims.copy(), grid.lower_cell.copy(),
                    dist, max_distance)


def esdf_query(esdf, position):
    """Trilinear distance and analytic gradient at a world position."""
    c = esdf.cell_center_coords(position).reshape(1, 3)
    if np.any(c < 0.0) or np.any(c > esdf.dims - 1):
        raise OutOfBounds(f"query {position} outside grid interior")
    vals, grads = kernels.trilinear_batch(esdf.distance, c)
    return float(vals[0]), grads[0] / esdf.resolution


def esdf_query_batch(esdf, positions):
    """Vector query with boundary clamping.

    Returns (distances, gradients, inside_mask).  Exterior points are
    clamped to the interior and get zero gradient; the caller decides how
    to penalize them.
    """
    pos = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    c = esdf.cell_center_coords(pos)
    hi = (esdf.dims - 1).astype(np.float64)
    inside = np.all((c >= 0.0) & (c <= hi), axis=1)
    cc = np.clip(c, 0.0, hi)
    vals, grads = kernels.trilinear_batch(esdf.distance, cc)
    grads = grads / esdf.resolution
    grads[~inside] = 0.0
    return vals, grads, inside
