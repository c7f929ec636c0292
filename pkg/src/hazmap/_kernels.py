"""Numba kernels for the hot paths: ray casting, gravity, and the pad sweep.

All kernels are pure per-item transforms (no cross-item reductions), so
results are bitwise identical for any thread count. No fastmath anywhere.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, prange

# slack on barycentric bounds so rays through shared edges/vertices hit at
# least one adjacent triangle instead of falling through the seam
BARY_EPS = 1e-12


@njit(cache=True)
def _ray_tri(ox, oy, oz, dx, dy, dz, ax, ay, az, bx, by, bz, cx, cy, cz):
    """Moller-Trumbore ray/triangle test. Returns t, or inf on miss."""
    e1x = bx - ax
    e1y = by - ay
    e1z = bz - az
    e2x = cx - ax
    e2y = cy - ay
    e2z = cz - az
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    if abs(det) < 1e-300:
        return np.inf
    inv = 1.0 / det
    tx = ox - ax
    ty = oy - ay
    tz = oz - az
    u = (tx * px + ty * py + tz * pz) * inv
    if u < -BARY_EPS or u > 1.0 + BARY_EPS:
        return np.inf
    qx = ty * e1z - tz * e1y
    qy = tz * e1x - tx * e1z
    qz = tx * e1y - ty * e1x
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < -BARY_EPS or u + v > 1.0 + BARY_EPS:
        return np.inf
    return (e2x * qx + e2y * qy + e2z * qz) * inv


@njit(cache=True)
def _slab_hit(lox, loy, loz, hix, hiy, hiz, ox, oy, oz, dx, dy, dz, t_lo, t_hi):
    """Conservative ray/AABB overlap test on the interval [t_lo, t_hi]."""
    t0 = t_lo
    t1 = t_hi
    if dx == 0.0:
        if ox < lox or ox > hix:
            return False
    else:
        inv = 1.0 / dx
        ta = (lox - ox) * inv
        tb = (hix - ox) * inv
        if ta > tb:
            ta, tb = tb, ta
        if ta > t0:
            t0 = ta
        if tb < t1:
            t1 = tb
    if dy == 0.0:
        if oy < loy or oy > hiy:
            return False
    else:
        inv = 1.0 / dy
        ta = (loy - oy) * inv
        tb = (hiy - oy) * inv
        if ta > tb:
            ta, tb = tb, ta
        if ta > t0:
            t0 = ta
        if tb < t1:
            t1 = tb
    if dz == 0.0:
        if oz < loz or oz > hiz:
            return False
    else:
        inv = 1.0 / dz
        ta = (loz - oz) * inv
        tb = (hiz - oz) * inv
        if ta > tb:
            ta, tb = tb, ta
        if ta > t0:
            t0 = ta
        if tb < t1:
            t1 = tb
    return t0 <= t1


@njit(cache=True)
def _bvh_nearest(
    node_lo,
    node_hi,
    node_left,
    node_right,
    node_start,
    node_count,
    tri_order,
    v0,
    v1,
    v2,
    ox,
    oy,
    oz,
    dx,
    dy,
    dz,
    t_min,
    skip_tri,
):
    best_t = np.inf
    best_i = -1
    stack = np.empty(128, dtype=np.int64)
    sp = 1
    stack[0] = 0
    while sp > 0:
        sp -= 1
        ni = stack[sp]
        # inclusive cap at best_t keeps equal-t candidates for the index tie-break
        if not _slab_hit(
            node_lo[ni, 0],
            node_lo[ni, 1],
            node_lo[ni, 2],
            node_hi[ni, 0],
            node_hi[ni, 1],
            node_hi[ni, 2],
            ox,
            oy,
            oz,
            dx,
            dy,
            dz,
            t_min,
            best_t,
        ):
            continue
        cnt = node_count[ni]
        if cnt > 0:
            for k in range(node_start[ni], node_start[ni] + cnt):
                i = tri_order[k]
                if i == skip_tri:
                    continue
                t = _ray_tri(
                    ox, oy, oz, dx, dy, dz,
                    v0[i, 0], v0[i, 1], v0[i, 2],
                    v1[i, 0], v1[i, 1], v1[i, 2],
                    v2[i, 0], v2[i, 1], v2[i, 2],
                )
                if np.isfinite(t) and t >= t_min and (
                    t < best_t or (t == best_t and i < best_i)
                ):
                    best_t = t
                    best_i = i
        else:
            stack[sp] = node_left[ni]
            sp += 1
            stack[sp] = node_right[ni]
            sp += 1
    return best_t, best_i


@njit(cache=True)
def _bvh_any(
    node_lo,
    node_hi,
    node_left,
    node_right,
    node_start,
    node_count,
    tri_order,
    v0,
    v1,
    v2,
    ox,
    oy,
    oz,
    dx,
    dy,
    dz,
    t_min,
    skip_tri,
):
    stack = np.empty(128, dtype=np.int64)
    sp = 1
    stack[0] = 0
    while sp > 0:
        sp -= 1
        ni = stack[sp]
        if not _slab_hit(
            node_lo[ni, 0],
            node_lo[ni, 1],
            node_lo[ni, 2],
            node_hi[ni, 0],
            node_hi[ni, 1],
            node_hi[ni, 2],
            ox,
            oy,
            oz,
            dx,
            dy,
            dz,
            t_min,
            np.inf,
        ):
            continue
        cnt = node_count[ni]
        if cnt > 0:
            for k in range(node_start[ni], node_start[ni] + cnt):
                i = tri_order[k]
                if i == skip_tri:
                    continue
                t = _ray_tri(
                    ox, oy, oz, dx, dy, dz,
                    v0[i, 0], v0[i, 1], v0[i, 2],
                    v1[i, 0], v1[i, 1], v1[i, 2],
                    v2[i, 0], v2[i, 1], v2[i, 2],
                )
                if np.isfinite(t) and t >= t_min:
                    return True
        else:
            stack[sp] = node_left[ni]
            sp += 1
            stack[sp] = node_right[ni]
            sp += 1
    return False


@njit(cache=True, parallel=True)
def bvh_intersect_batch(
    node_lo,
    node_hi,
    node_left,
    node_right,
    node_start,
    node_count,
    tri_order,
    v0,
    v1,
    v2,
    origins,
    dirs,
    t_min,
    skip,
):
    n = origins.shape[0]
    out_t = np.empty(n, dtype=np.float64)
    out_i = np.empty(n, dtype=np.int64)
    for r in prange(n):
        t, i = _bvh_nearest(
            node_lo, node_hi, node_left, node_right, node_start, node_count,
            tri_order, v0, v1, v2,
            origins[r, 0], origins[r, 1], origins[r, 2],
            dirs[r, 0], dirs[r, 1], dirs[r, 2],
            t_min, skip[r],
        )
        out_t[r] = t
        out_i[r] = i
    return out_t, out_i


@njit(cache=True, parallel=True)
def bvh_occluded_batch(
    node_lo,
    node_hi,
    node_left,
    node_right,
    node_start,
    node_count,
    tri_order,
    v0,
    v1,
    v2,
    origins,
    dirs,
    t_min,
    skip,
):
    n = origins.shape[0]
    out = np.empty(n, dtype=np.uint8)
    for r in prange(n):
        out[r] = 1 if _bvh_any(
            node_lo, node_hi, node_left, node_right, node_start, node_count,
            tri_order, v0, v1, v2,
            origins[r, 0], origins[r, 1], origins[r, 2],
            dirs[r, 0], dirs[r, 1], dirs[r, 2],
            t_min, skip[r],
        ) else 0
    return out


@njit(cache=True, parallel=True)
def brute_intersect_batch(v0, v1, v2, origins, dirs, t_min, skip):
    n = origins.shape[0]
    m = v0.shape[0]
    out_t = np.empty(n, dtype=np.float64)
    out_i = np.empty(n, dtype=np.int64)
    for r in prange(n):
        ox, oy, oz = origins[r, 0], origins[r, 1], origins[r, 2]
        dx, dy, dz = dirs[r, 0], dirs[r, 1], dirs[r, 2]
        best_t = np.inf
        best_i = -1
        for i in range(m):
            if i == skip[r]:
                continue
            t = _ray_tri(
                ox, oy, oz, dx, dy, dz,
                v0[i, 0], v0[i, 1], v0[i, 2],
                v1[i, 0], v1[i, 1], v1[i, 2],
                v2[i, 0], v2[i, 1], v2[i, 2],
            )
            if np.isfinite(t) and t >= t_min and (
                t < best_t or (t == best_t and i < best_i)
            ):
                best_t = t
                best_i = i
        out_t[r] = best_t
        out_i[r] = best_i
    return out_t, out_i


@njit(cache=True, parallel=True)
def brute_occluded_batch(v0, v1, v2, origins, dirs, t_min, skip):
    n = origins.shape[0]
    m = v0.shape[0]
    out = np.zeros(n, dtype=np.uint8)
    for r in prange(n):
        ox, oy, oz = origins[r, 0], origins[r, 1], origins[r, 2]
        dx, dy, dz = dirs[r, 0], dirs[r, 1], dirs[r, 2]
        for i in range(m):
            if i == skip[r]:
                continue
            t = _ray_tri(
                ox, oy, oz, dx, dy, dz,
                v0[i, 0], v0[i, 1], v0[i, 2],
                v1[i, 0], v1[i, 1], v1[i, 2],
                v2[i, 0], v2[i, 1], v2[i, 2],
            )
            if np.isfinite(t) and t >= t_min:
                out[r] = 1
                break
    return out


@njit(cache=True)
def closest_point_kernel(v0, v1, v2, p):
    """Closest point on any triangle to p (Ericson's region test per triangle)."""
    best_d2 = np.inf
    best = np.zeros(3, dtype=np.float64)
    best_face = -1
    px, py, pz = p[0], p[1], p[2]
    for i in range(v0.shape[0]):
        ax, ay, az = v0[i, 0], v0[i, 1], v0[i, 2]
        bx, by, bz = v1[i, 0], v1[i, 1], v1[i, 2]
        cx, cy, cz = v2[i, 0], v2[i, 1], v2[i, 2]
        abx = bx - ax
        aby = by - ay
        abz = bz - az
        acx = cx - ax
        acy = cy - ay
        acz = cz - az
        apx = px - ax
        apy = py - ay
        apz = pz - az
        d1 = abx * apx + aby * apy + abz * apz
        d2 = acx * apx + acy * apy + acz * apz
        if d1 <= 0.0 and d2 <= 0.0:
            qx, qy, qz = ax, ay, az
        else:
            bpx = px - bx
            bpy = py - by
            bpz = pz - bz
            d3 = abx * bpx + aby * bpy + abz * bpz
            d4 = acx * bpx + acy * bpy + acz * bpz
            if d3 >= 0.0 and d4 <= d3:
                qx, qy, qz = bx, by, bz
            else:
                vc = d1 * d4 - d3 * d2
                if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
                    w = d1 / (d1 - d3)
                    qx = ax + w * abx
                    qy = ay + w * aby
                    qz = az + w * abz
                else:
                    cpx = px - cx
                    cpy = py - cy
                    cpz = pz - cz
                    d5 = abx * cpx + aby * cpy + abz * cpz
                    d6 = acx * cpx + acy * cpy + acz * cpz
                    if d6 >= 0.0 and d5 <= d6:
                        qx, qy, qz = cx, cy, cz
                    else:
                        vb = d5 * d2 - d1 * d6
                        if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
                            w = d2 / (d2 - d6)
                            qx = ax + w * acx
                            qy = ay + w * acy
                            qz = az + w * acz
                        else:
                            va = d3 * d6 - d5 * d4
                            if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
                                w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
                                qx = bx + w * (cx - bx)
                                qy = by + w * (cy - by)
                                qz = bz + w * (cz - bz)
                            else:
                                denom = 1.0 / (va + vb + vc)
                                vv = vb * denom
                                ww = vc * denom
                                qx = ax + abx * vv + acx * ww
                                qy = ay + aby * vv + acy * ww
                                qz = az + abz * vv + acz * ww
        ddx = px - qx
        ddy = py - qy
        ddz = pz - qz
        dist2 = ddx * ddx + ddy * ddy + ddz * ddz
        if dist2 < best_d2:
            best_d2 = dist2
            best[0] = qx
            best[1] = qy
            best[2] = qz
            best_face = i
    return best, best_face


@njit(cache=True, parallel=True)
def gravity_kernel(fv0, fv1, fv2, fnorm, e0, e1, emat, points, g_rho):
    """Constant-density polyhedron attraction via per-face and per-edge terms.

    Returns accelerations (n, 3) and the summed signed solid angle per point
    (~0 exterior, ~4*pi interior).
    """
    n_pts = points.shape[0]
    n_f = fv0.shape[0]
    n_e = e0.shape[0]
    acc = np.empty((n_pts, 3), dtype=np.float64)
    omega = np.empty(n_pts, dtype=np.float64)
    for p in prange(n_pts):
        px, py, pz = points[p, 0], points[p, 1], points[p, 2]
        gx = 0.0
        gy = 0.0
        gz = 0.0
        om = 0.0
        for f in range(n_f):
            r1x = fv0[f, 0] - px
            r1y = fv0[f, 1] - py
            r1z = fv0[f, 2] - pz
            r2x = fv1[f, 0] - px
            r2y = fv1[f, 1] - py
            r2z = fv1[f, 2] - pz
            r3x = fv2[f, 0] - px
            r3y = fv2[f, 1] - py
            r3z = fv2[f, 2] - pz
            a = math.sqrt(r1x * r1x + r1y * r1y + r1z * r1z)
            b = math.sqrt(r2x * r2x + r2y * r2y + r2z * r2z)
            c = math.sqrt(r3x * r3x + r3y * r3y + r3z * r3z)
            num = (
                r1x * (r2y * r3z - r2z * r3y)
                + r1y * (r2z * r3x - r2x * r3z)
                + r1z * (r2x * r3y - r2y * r3x)
            )
            den = (
                a * b * c
                + (r1x * r2x + r1y * r2y + r1z * r2z) * c
                + (r2x * r3x + r2y * r3y + r2z * r3z) * a
                + (r3x * r1x + r3y * r1y + r3z * r1z) * b
            )
            w = 2.0 * math.atan2(num, den)
            s = fnorm[f, 0] * r1x + fnorm[f, 1] * r1y + fnorm[f, 2] * r1z
            ws = w * s
            gx += ws * fnorm[f, 0]
            gy += ws * fnorm[f, 1]
            gz += ws * fnorm[f, 2]
            om += w
        for e in range(n_e):
            rax = e0[e, 0] - px
            ray = e0[e, 1] - py
            raz = e0[e, 2] - pz
            rbx = e1[e, 0] - px
            rby = e1[e, 1] - py
            rbz = e1[e, 2] - pz
            la = math.sqrt(rax * rax + ray * ray + raz * raz)
            lb = math.sqrt(rbx * rbx + rby * rby + rbz * rbz)
            ex = e1[e, 0] - e0[e, 0]
            ey = e1[e, 1] - e0[e, 1]
            ez = e1[e, 2] - e0[e, 2]
            el = math.sqrt(ex * ex + ey * ey + ez * ez)
            denom = la + lb - el
            if denom < 1e-300:
                # field point collinear with the edge; clamp the log argument
                denom = 1e-300
            big_l = math.log((la + lb + el) / denom)
            vx = emat[e, 0, 0] * rax + emat[e, 0, 1] * ray + emat[e, 0, 2] * raz
            vy = emat[e, 1, 0] * rax + emat[e, 1, 1] * ray + emat[e, 1, 2] * raz
            vz = emat[e, 2, 0] * rax + emat[e, 2, 1] * ray + emat[e, 2, 2] * raz
            gx -= big_l * vx
            gy -= big_l * vy
            gz -= big_l * vz
        acc[p, 0] = g_rho * gx
        acc[p, 1] = g_rho * gy
        acc[p, 2] = g_rho * gz
        omega[p] = om
    return acc, omega


@njit(cache=True, parallel=True)
def alhat_kernel(
    elev,
    valid,
    cell,
    margin,
    pad_bi,
    pad_bj,
    pad_tx,
    pad_ty,
    pad_ox,
    pad_oy,
    disc_di,
    disc_dj,
    disc_dx,
    disc_dy,
    stable_tol,
):
    """Worst-case landing-plane slope/roughness over all cells and orientations.

    Per cell and orientation: bilinear-sample the four pad elevations, pick
    the resting plane (max-tilt stable pad triple), then take the largest
    perpendicular height of footprint terrain above that plane. Outputs are
    maxima over orientations; state is 1 only if every sample was valid.
    """
    h, w = elev.shape
    n_or = pad_bi.shape[0]
    n_disc = disc_di.shape[0]
    out_slope = np.full((h, w), np.nan)
    out_rough = np.full((h, w), np.nan)
    out_state = np.zeros((h, w), dtype=np.uint8)
    for flat in prange(h * w):
        i = flat // w
        j = flat % w
        if i < margin or j < margin or i >= h - margin or j >= w - margin:
            continue
        ok = True
        # footprint terrain is orientation-independent: gather once
        fz = np.empty(n_disc, dtype=np.float64)
        fok = np.empty(n_disc, dtype=np.uint8)
        for d in range(n_disc):
            ii = i + disc_di[d]
            jj = j + disc_dj[d]
            if ii < 0 or jj < 0 or ii >= h or jj >= w or not valid[ii, jj]:
                fok[d] = 0
                ok = False
            else:
                fok[d] = 1
                fz[d] = elev[ii, jj]
        slope_max = -1.0
        rough_max = -1.0
        any_orientation = False
        pz = np.empty(4, dtype=np.float64)
        for m in range(n_or):
            pads_ok = True
            for k in range(4):
                i0 = i + pad_bi[m, k]
                j0 = j + pad_bj[m, k]
                tx = pad_tx[m, k]
                ty = pad_ty[m, k]
                z = 0.0
                good = True
                for di in range(2):
                    wy = ty if di == 1 else 1.0 - ty
                    if wy == 0.0:
                        continue
                    for dj in range(2):
                        wx = tx if dj == 1 else 1.0 - tx
                        if wx == 0.0:
                            continue
                        ii = i0 + di
                        jj = j0 + dj
                        if ii < 0 or jj < 0 or ii >= h or jj >= w or not valid[ii, jj]:
                            good = False
                        else:
                            z += wy * wx * elev[ii, jj]
                    if not good:
                        break
                if not good:
                    pads_ok = False
                    break
                pz[k] = z
            if not pads_ok:
                ok = False
                continue
            any_orientation = True
            # pads 0 and 2 / 1 and 3 are diagonal pairs; the high diagonal
            # carries the lander, making the two triples containing it stable
            dd = (pz[0] + pz[2]) - (pz[1] + pz[3])
            best_tilt = -1.0
            best_a = 0.0
            best_b = 0.0
            best_c = 0.0
            for omit in range(4):
                if omit == 0 or omit == 2:
                    stable = dd <= stable_tol
                else:
                    stable = -dd <= stable_tol
                if not stable:
                    continue
                i1 = (omit + 1) % 4
                i2 = (omit + 2) % 4
                i3 = (omit + 3) % 4
                ux = pad_ox[m, i2] - pad_ox[m, i1]
                uy = pad_oy[m, i2] - pad_oy[m, i1]
                uz = pz[i2] - pz[i1]
                vx = pad_ox[m, i3] - pad_ox[m, i1]
                vy = pad_oy[m, i3] - pad_oy[m, i1]
                vz = pz[i3] - pz[i1]
                nx = uy * vz - uz * vy
                ny = uz * vx - ux * vz
                nz = ux * vy - uy * vx
                if nz < 0.0:
                    nx = -nx
                    ny = -ny
                    nz = -nz
                if nz == 0.0:
                    continue  # degenerate vertical plane; skip triple
                tilt = math.atan2(math.sqrt(nx * nx + ny * ny), nz)
                if tilt > best_tilt:
                    best_tilt = tilt
                    best_a = -nx / nz
                    best_b = -ny / nz
                    best_c = pz[i1] - best_a * pad_ox[m, i1] - best_b * pad_oy[m, i1]
            if best_tilt < 0.0:
                continue
            if best_tilt > slope_max:
                slope_max = best_tilt
            factor = 1.0 / math.sqrt(1.0 + best_a * best_a + best_b * best_b)
            hi_dz = 0.0
            for d in range(n_disc):
                if fok[d] == 0:
                    continue
                dz = fz[d] - (best_a * disc_dx[d] + best_b * disc_dy[d] + best_c)
                if dz > hi_dz:
                    hi_dz = dz
            r = hi_dz * factor
            if r > rough_max:
                rough_max = r
        if any_orientation:
            out_slope[i, j] = math.degrees(slope_max)
            out_rough[i, j] = rough_max
        if ok:
            out_state[i, j] = 1
    return out_slope, out_rough, out_state
