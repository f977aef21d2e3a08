"""Pure-numpy reference implementations of the hot kernels.

These are the fallback backend (``SWARMFORM_DISABLE_NUMBA=1``) and the
semantic reference the numba backend is benchmarked against.  Everything
here operates on plain arrays in *cell* coordinates; callers convert from
world coordinates.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage


def wrap_angle(a):
    """Map angles (array or scalar) to [-pi, pi)."""
    return (np.asarray(a) + np.pi) % (2.0 * np.pi) - np.pi


def raycast_accumulate(delta, origin, endpoints, l_free, l_occ):
    """Accumulate log-odds updates for rays origin -> each endpoint.

    delta: (nx,ny,nz) float64, modified in place.
    origin: (3,) float cell coordinates, must lie inside the grid.
    endpoints: (M,3) float cell coordinates; may lie outside the grid,
    in which case the ray is truncated at the boundary and no endpoint
    hit is recorded.
    Traversed cells (excluding the endpoint cell) get += l_free, the
    endpoint cell gets += l_occ.
    """
    nx, ny, nz = delta.shape
    dims = (nx, ny, nz)
    for m in range(endpoints.shape[0]):
        end = endpoints[m]
        cur = np.floor(origin).astype(np.int64)
        tgt = np.floor(end).astype(np.int64)
        d = end - origin
        step = np.where(d > 0, 1, np.where(d < 0, -1, 0)).astype(np.int64)
        t_max = np.empty(3)
        t_delta = np.empty(3)
        for ax in range(3):
            if d[ax] != 0.0:
                if step[ax] > 0:
                    bound = np.floor(origin[ax]) + 1.0
                else:
                    bound = np.floor(origin[ax])
                t_max[ax] = (bound - origin[ax]) / d[ax]
                t_delta[ax] = abs(1.0 / d[ax])
            else:
                t_max[ax] = np.inf
                t_delta[ax] = np.inf
        # guard against fp drift: a ray visits at most the manhattan cell span
        max_steps = int(np.sum(np.abs(tgt - cur))) + 3
        for _ in range(max_steps):
            inside = all(0 <= cur[ax] < dims[ax] for ax in range(3))
            if not inside:
                break
            if cur[0] == tgt[0] and cur[1] == tgt[1] and cur[2] == tgt[2]:
                delta[cur[0], cur[1], cur[2]] += l_occ
                break
            delta[cur[0], cur[1], cur[2]] += l_free
            ax = int(np.argmin(t_max))
            t_max[ax] += t_delta[ax]
            cur[ax] += step[ax]


def edt_cells(occupied):
    """Exact Euclidean distance (in cell units) to the nearest occupied cell.

    occupied: boolean array.  Must contain at least one True.
    """
    return ndimage.distance_transform_edt(~occupied)


def trilinear_batch(field, coords):
    """Trilinearly interpolate `field` and its gradient at continuous coords.

    coords: (M,3) in cell-index space (integer values hit cell centers).
    Caller guarantees 0 <= c <= dim-1 on each axis.
    Returns (values (M,), gradients (M,3)); gradients are per cell unit.
    """
    coords = np.asarray(coords, dtype=np.float64)
    dims = np.array(field.shape)
    i0 = np.floor(coords).astype(np.int64)
    i0 = np.minimum(i0, dims - 2)
    i0 = np.maximum(i0, 0)
    f = coords - i0
    ix, iy, iz = i0[:, 0], i0[:, 1], i0[:, 2]
    c = np.empty(coords.shape[:1] + (2, 2, 2))
    for a in (0, 1):
        for b in (0, 1):
            for d in (0, 1):
                c[:, a, b, d] = field[ix + a, iy + b, iz + d]
    fx, fy, fz = f[:, 0], f[:, 1], f[:, 2]
    # interpolate along z, then y, then x
    cz = c[..., 0] * (1 - fz)[:, None, None] + c[..., 1] * fz[:, None, None]
    cy = cz[:, :, 0] * (1 - fy)[:, None] + cz[:, :, 1] * fy[:, None]
    val = cy[:, 0] * (1 - fx) + cy[:, 1] * fx
    # gradient components: differentiate the interpolant
    dz = c[..., 1] - c[..., 0]
    dz_y = dz[:, :, 0] * (1 - fy)[:, None] + dz[:, :, 1] * fy[:, None]
    gz = dz_y[:, 0] * (1 - fx) + dz_y[:, 1] * fx
    dy = cz[:, :, 1] - cz[:, :, 0]
    gy = dy[:, 0] * (1 - fx) + dy[:, 1] * fx
    gx = cy[:, 1] - cy[:, 0]
    grad = np.stack([gx, gy, gz], axis=1)
    return val, grad


def polygon_area(poly):
    """Shoelace area of a planar polygon given as (V,2)."""
    if len(poly) < 3:
        return 0.0
    x = poly[:, 0]
    y = poly[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def convex_clip_area(subject, clip):
    """Area of the intersection of two convex polygons (Sutherland-Hodgman).

    `clip` must be convex and counter-clockwise oriented; `subject` convex.
    """
    clip = _ccw(np.asarray(clip, dtype=np.float64))
    out = [tuple(p) for p in np.asarray(subject, dtype=np.float64)]
    n = len(clip)
    for e in range(n):
        a = clip[e]
        b = clip[(e + 1) % n]
        inp = out
        out = []
        if not inp:
            break
        for i in range(len(inp)):
            p = np.asarray(inp[i])
            q = np.asarray(inp[(i + 1) % len(inp)])
            ps = _side(a, b, p)
            qs = _side(a, b, q)
            if ps >= 0.0:
                out.append(tuple(p))
                if qs < 0.0:
                    out.append(tuple(_intersect(a, b, p, q)))
            elif qs >= 0.0:
                out.append(tuple(_intersect(a, b, p, q)))
    if len(out) < 3:
        return 0.0
    return polygon_area(np.asarray(out))


def _ccw(poly):
    x = poly[:, 0]
    y = poly[:, 1]
    signed = 0.5 * (np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
    return poly if signed >= 0 else poly[::-1]


def _side(a, b, p):
    return (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])


def _intersect(a, b, p, q):
    d1 = _side(a, b, p)
    d2 = _side(a, b, q)
    t = d1 / (d1 - d2)
    return p + t * (q - p)


def fov_triangle(apex, yaw, half_angle, sense_range):
    """Planar FOV triangle: apex plus two rays at yaw +/- half_angle."""
    vs = np.empty((3, 2))
    vs[0] = apex
    vs[1] = apex + sense_range * np.array([np.cos(yaw - half_angle), np.sin(yaw - half_angle)])
    vs[2] = apex + sense_range * np.array([np.cos(yaw + half_angle), np.sin(yaw + half_angle)])
    return vs


def fov_entropy_sum(ent, phi, r, yaw, half_angle, sense_range):
    """Sum entropies of cells inside the FOV triangle.

    ent/phi/r: per-cell entropy, bearing from the apex, planar range.
    A cell is inside iff its bearing is within +/- half_angle of yaw and
    it lies apex-side of the chord: r*cos(dphi) <= range*cos(half_angle).
    """
    dphi = np.abs(wrap_angle(phi - yaw))
    mask = (dphi <= half_angle) & (r * np.cos(dphi) <= sense_range * np.cos(half_angle))
    return float(np.sum(ent[mask]))


def yaw_cost_batch(thetas, apex, half_angle, sense_range,
                   cell_ent, cell_phi, cell_r, cell_count,
                   theta_v, theta_prev, lam1, lam2, lam3, lam4):
    """Evaluate the yaw-planning cost for a batch of candidate angle vectors.

    thetas: (P,N); apex: (N,2) planar agent positions; cell_* are padded
    (N,Cmax) per-agent arrays describing map cells near each agent,
    cell_count giving the valid prefix length.
    Returns (P,) costs.
    """
    P, N = thetas.shape
    costs = np.empty(P)
    for p in range(P):
        th = thetas[p]
        f_ol = 0.0
        for i in range(N):
            for j in range(i + 1, N):
                ta = fov_triangle(apex[i], th[i], half_angle, sense_range)
                tb = fov_triangle(apex[j], th[j], half_angle, sense_range)
                f_ol += convex_clip_area(ta, tb)
        f_ol *= 2.0
        f_v = float(np.sum(wrap_angle(th - theta_v) ** 2))
        f_s = float(np.sum(wrap_angle(th - theta_prev) ** 2))
        f_pv = 0.0
        for i in range(N):
            c = cell_count[i]
            f_pv += fov_entropy_sum(cell_ent[i, :c], cell_phi[i, :c],
                                    cell_r[i, :c], th[i], half_angle, sense_range)
        costs[p] = lam1 * f_ol + lam2 * f_v - lam3 * f_pv + lam4 * f_s
    return costs
