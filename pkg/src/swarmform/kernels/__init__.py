"""Hot numeric kernels with a numba backend and a pure-numpy fallback.

Set ``SWARMFORM_DISABLE_NUMBA=1`` to force the numpy backend (also used
automatically when numba is unavailable).  ``benchmarks/bench_kernels.py``
compares the two.
"""

import os

_disabled = os.environ.get("SWARMFORM_DISABLE_NUMBA", "").lower() in ("1", "true", "yes")

if not _disabled:
    try:
        from . import _numba as _backend
        BACKEND = "numba"
    except ImportError:
        from . import _numpy as _backend
        BACKEND = "numpy"
else:
    from . import _numpy as _backend
    BACKEND = "numpy"

from ._numpy import wrap_angle, polygon_area, fov_triangle

raycast_accumulate = _backend.raycast_accumulate
edt_cells = _backend.edt_cells
trilinear_batch = _backend.trilinear_batch
convex_clip_area = _backend.convex_clip_area
fov_entropy_sum = _backend.fov_entropy_sum
yaw_cost_batch = _backend.yaw_cost_batch

__all__ = [
    "BACKEND",
    "wrap_angle",
    "polygon_area",
    "fov_triangle",
    "raycast_accumulate",
    "edt_cells",
    "trilinear_batch",
    "convex_clip_area",
    "fov_entropy_sum",
    "yaw_cost_batch",
]
