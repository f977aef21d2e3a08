"""Numba-accelerated kernels. Semantics match kernels._numpy exactly."""

from __future__ import annotations

import numpy as np
from numba import njit

from ._numpy import wrap_angle, polygon_area, fov_triangle  # re-exported, cheap

INF = 1e30


@njit(cache=True)
def _raycast_accumulate(delta, origin, endpoints, l_free, l_occ):
    nx, ny, nz = delta.shape
    for m in range(endpoints.shape[0]):
        cx = int(np.floor(origin[0]))
        cy = int(np.floor(origin[1]))
        cz = int(np.floor(origin[2]))
        tx = int(np.floor(endpoints[m, 0]))
        ty = int(np.floor(endpoints[m, 1]))
        tz = int(np.floor(endpoints[m, 2]))
        dx = endpoints[m, 0] - origin[0]
        dy = endpoints[m, 1] - origin[1]
        dz = endpoints[m, 2] - origin[2]
        sx = 1 if dx > 0 else (-1 if dx < 0 else 0)
        sy = 1 if dy > 0 else (-1 if dy < 0 else 0)
        sz = 1 if dz > 0 else (-1 if dz < 0 else 0)
        if dx != 0.0:
            bx = np.floor(origin[0]) + 1.0 if sx > 0 else np.floor(origin[0])
            tmx = (bx - origin[0]) / dx
            tdx = abs(1.0 / dx)
        else:
            tmx = INF
            tdx = INF
        if dy != 0.0:
            by = np.floor(origin[1]) + 1.0 if sy > 0 else np.floor(origin[1])
            tmy = (by - origin[1]) / dy
            tdy = abs(1.0 / dy)
        else:
            tmy = INF
            tdy = INF
        if dz != 0.0:
            bz = np.floor(origin[2]) + 1.0 if sz > 0 else np.floor(origin[2])
            tmz = (bz - origin[2]) / dz
            tdz = abs(1.0 / dz)
        else:
            tmz = INF
            tdz = INF
        max_steps = abs(tx - cx) + abs(ty - cy) + abs(tz - cz) + 3
        for _ in range(max_steps):
            if cx < 0 or cx >= nx or cy < 0 or cy >= ny or cz < 0 or cz >= nz:
                break
            if cx == tx and cy == ty and cz == tz:
                delta[cx, cy, cz] += l_occ
                break
            delta[cx, cy, cz] += l_free
            if tmx <= tmy and tmx <= tmz:
                tmx += tdx
                cx += sx
            elif tmy <= tmz:
                tmy += tdy
                cy += sy
            else:
                tmz += tdz
                cz += sz


def raycast_accumulate(delta, origin, endpoints, l_free, l_occ):
    _raycast_accumulate(delta, np.ascontiguousarray(origin, dtype=np.float64),
                        np.ascontiguousarray(endpoints, dtype=np.float64),
                        float(l_free), float(l_occ))


@njit(cache=True)
def _edt_1d(f, d, v, z):
    # Felzenszwalb-Huttenlocher lower envelope of parabolas over one row
    n = f.shape[0]
    k = 0
    v[0] = 0
    z[0] = -INF
    z[1] = INF
    for q in range(1, n):
        s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
        while s <= z[k]:
            k -= 1
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = INF
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        d[q] = (q - v[k]) * (q - v[k]) + f[v[k]]


@njit(cache=True)
def _edt_squared_3d(occ):
    nx, ny, nz = occ.shape
    g = np.empty((nx, ny, nz))
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                g[i, j, k] = 0.0 if occ[i, j, k] else INF
    nmax = max(nx, max(ny, nz))
    d = np.empty(nmax)
    v = np.empty(nmax, dtype=np.int64)
    z = np.empty(nmax + 1)
    # transform along z
    for i in range(nx):
        for j in range(ny):
            _edt_1d(g[i, j, :].copy(), d, v, z)
            for k in range(nz):
                g[i, j, k] = d[k]
    # along y
    for i in range(nx):
        for k in range(nz):
            _edt_1d(g[i, :, k].copy(), d, v, z)
            for j in range(ny):
                g[i, j, k] = d[j]
    # along x
    for j in range(ny):
        for k in range(nz):
            _edt_1d(g[:, j, k].copy(), d, v, z)
            for i in range(nx):
                g[i, j, k] = d[i]
    return g


def edt_cells(occupied):
    sq = _edt_squared_3d(np.ascontiguousarray(occupied, dtype=np.bool_))
    return np.sqrt(sq)


@njit(cache=True)
def _trilinear_batch(field, coords, vals, grads):
    nx, ny, nz = field.shape
    for m in range(coords.shape[0]):
        ix = int(np.floor(coords[m, 0]))
        iy = int(np.floor(coords[m, 1]))
        iz = int(np.floor(coords[m, 2]))
        ix = min(max(ix, 0), nx - 2)
        iy = min(max(iy, 0), ny - 2)
        iz = min(max(iz, 0), nz - 2)
        fx = coords[m, 0] - ix
        fy = coords[m, 1] - iy
        fz = coords[m, 2] - iz
        c000 = field[ix, iy, iz]
        c100 = field[ix + 1, iy, iz]
        c010 = field[ix, iy + 1, iz]
        c110 = field[ix + 1, iy + 1, iz]
        c001 = field[ix, iy, iz + 1]
        c101 = field[ix + 1, iy, iz + 1]
        c011 = field[ix, iy + 1, iz + 1]
        c111 = field[ix + 1, iy + 1, iz + 1]
        c00 = c000 * (1 - fz) + c001 * fz
        c10 = c100 * (1 - fz) + c101 * fz
        c01 = c010 * (1 - fz) + c011 * fz
        c11 = c110 * (1 - fz) + c111 * fz
        c0 = c00 * (1 - fy) + c01 * fy
        c1 = c10 * (1 - fy) + c11 * fy
        vals[m] = c0 * (1 - fx) + c1 * fx
        grads[m, 0] = c1 - c0
        gy0 = c01 - c00
        gy1 = c11 - c10
        grads[m, 1] = gy0 * (1 - fx) + gy1 * fx
        gz00 = c001 - c000
        gz10 = c101 - c100
        gz01 = c011 - c010
        gz11 = c111 - c110
        gz0 = gz00 * (1 - fy) + gz01 * fy
        gz1 = gz10 * (1 - fy) + gz11 * fy
        grads[m, 2] = gz0 * (1 - fx) + gz1 * fx


def trilinear_batch(field, coords):
    coords = np.ascontiguousarray(coords, dtype=np.float64)
    vals = np.empty(coords.shape[0])
    grads = np.empty((coords.shape[0], 3))
    _trilinear_batch(np.ascontiguousarray(field, dtype=np.float64), coords, vals, grads)
    return vals, grads


@njit(cache=True)
def _clip_area(subject, clip):
    # Sutherland-Hodgman with fixed capacity; both polygons convex.
    # orient clip CCW
    sgn = 0.0
    n = clip.shape[0]
    for i in range(n):
        j = (i + 1) % n
        sgn += clip[i, 0] * clip[j, 1] - clip[j, 0] * clip[i, 1]
    cw = sgn < 0.0
    buf_a = np.empty((16, 2))
    buf_b = np.empty((16, 2))
    na = subject.shape[0]
    for i in range(na):
        buf_a[i, 0] = subject[i, 0]
        buf_a[i, 1] = subject[i, 1]
    for e in range(n):
        if cw:
            ea = n - 1 - e
            eb = (ea - 1) % n
        else:
            ea = e
            eb = (e + 1) % n
        ax = clip[ea, 0]
        ay = clip[ea, 1]
        bx = clip[eb, 0]
        by = clip[eb, 1]
        nb = 0
        if na == 0:
            break
        for i in range(na):
            j = (i + 1) % na
            px = buf_a[i, 0]
            py = buf_a[i, 1]
            qx = buf_a[j, 0]
            qy = buf_a[j, 1]
            ps = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
            qs = (bx - ax) * (qy - ay) - (by - ay) * (qx - ax)
            if ps >= 0.0:
                buf_b[nb, 0] = px
                buf_b[nb, 1] = py
                nb += 1
                if qs < 0.0:
                    t = ps / (ps - qs)
                    buf_b[nb, 0] = px + t * (qx - px)
                    buf_b[nb, 1] = py + t * (qy - py)
                    nb += 1
            elif qs >= 0.0:
                t = ps / (ps - qs)
                buf_b[nb, 0] = px + t * (qx - px)
                buf_b[nb, 1] = py + t * (qy - py)
                nb += 1
        na = nb
        for i in range(na):
            buf_a[i, 0] = buf_b[i, 0]
            buf_a[i, 1] = buf_b[i, 1]
    if na < 3:
        return 0.0
    area = 0.0
    for i in range(na):
        j = (i + 1) % na
        area += buf_a[i, 0] * buf_a[j, 1] - buf_a[j, 0] * buf_a[i, 1]
    return abs(area) * 0.5


def convex_clip_area(subject, clip):
    return _clip_area(np.ascontiguousarray(subject, dtype=np.float64),
                      np.ascontiguousarray(clip, dtype=np.float64))


@njit(cache=True)
def _wrap(a):
    return (a + np.pi) % (2.0 * np.pi) - np.pi


@njit(cache=True)
def _entropy_sum(ent, phi, r, yaw, half_angle, sense_range):
    total = 0.0
    chord = sense_range * np.cos(half_angle)
    for i in range(ent.shape[0]):
        dphi = abs(_wrap(phi[i] - yaw))
        if dphi <= half_angle and r[i] * np.cos(dphi) <= chord:
            total += ent[i]
    return total


def fov_entropy_sum(ent, phi, r, yaw, half_angle, sense_range):
    return _entropy_sum(np.ascontiguousarray(ent, dtype=np.float64),
                        np.ascontiguousarray(phi, dtype=np.float64),
                        np.ascontiguousarray(r, dtype=np.float64),
                        float(yaw), float(half_angle), float(sense_range))


@njit(cache=True)
def _fov_tri(apex_x, apex_y, yaw, half_angle, sense_range, out):
    out[0, 0] = apex_x
    out[0, 1] = apex_y
    out[1, 0] = apex_x + sense_range * np.cos(yaw - half_angle)
    out[1, 1] = apex_y + sense_range * np.sin(yaw - half_angle)
    out[2, 0] = apex_x + sense_range * np.cos(yaw + half_angle)
    out[2, 1] = apex_y + sense_range * np.sin(yaw + half_angle)


@njit(cache=True)
def _yaw_cost_batch(thetas, apex, half_angle, sense_range,
                    cell_ent, cell_phi, cell_r, cell_count,
                    theta_v, theta_prev, lam1, lam2, lam3, lam4, costs):
    P, N = thetas.shape
    ta = np.empty((3, 2))
    tb = np.empty((3, 2))
    for p in range(P):
        f_ol = 0.0
        for i in range(N):
            for j in range(i + 1, N):
                _fov_tri(apex[i, 0], apex[i, 1], thetas[p, i], half_angle, sense_range, ta)
                _fov_tri(apex[j, 0], apex[j, 1], thetas[p, j], half_angle, sense_range, tb)
                f_ol += _clip_area(ta, tb)
        f_ol *= 2.0
        f_v = 0.0
        f_s = 0.0
        f_pv = 0.0
        for i in range(N):
            dv = _wrap(thetas[p, i] - theta_v[i])
            ds = _wrap(thetas[p, i] - theta_prev[i])
            f_v += dv * dv
            f_s += ds * ds
            c = cell_count[i]
            f_pv += _entropy_sum(cell_ent[i, :c], cell_phi[i, :c], cell_r[i, :c],
                                 thetas[p, i], half_angle, sense_range)
        costs[p] = lam1 * f_ol + lam2 * f_v - lam3 * f_pv + lam4 * f_s


def yaw_cost_batch(thetas, apex, half_angle, sense_range,
                   cell_ent, cell_phi, cell_r, cell_count,
                   theta_v, theta_prev, lam1, lam2, lam3, lam4):
    thetas = np.ascontiguousarray(thetas, dtype=np.float64)
    costs = np.empty(thetas.shape[0])
    _yaw_cost_batch(thetas, np.ascontiguousarray(apex, dtype=np.float64),
                    float(half_angle), float(sense_range),
                    np.ascontiguousarray(cell_ent, dtype=np.float64),
                    np.ascontiguousarray(cell_phi, dtype=np.float64),
                    np.ascontiguousarray(cell_r, dtype=np.float64),
                    np.ascontiguousarray(cell_count, dtype=np.int64),
                    np.ascontiguousarray(theta_v, dtype=np.float64),
                    np.ascontiguousarray(theta_prev, dtype=np.float64),
                    float(lam1), float(lam2), float(lam3), float(lam4), costs)
    return costs
