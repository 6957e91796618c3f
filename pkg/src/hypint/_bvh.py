"""Bounding-volume hierarchy over triangles and exact semicircle queries (numba)."""
from __future__ import annotations

import numba as nb
import numpy as np

LEAF = 4
# hits closer than this (relative) to a triangle edge are reported as degenerate
EDGE_EPS = 1e-10


@nb.njit(cache=True)
def build_bvh(V, T):
    """Median-split BVH.  Returns (lo, hi, left, right, start, count, order)."""
    nt = T.shape[0]
    cen = np.empty((nt, 3))
    tlo = np.empty((nt, 3))
    thi = np.empty((nt, 3))
    for i in range(nt):
        for k in range(3):
            a, b, c = V[T[i, 0], k], V[T[i, 1], k], V[T[i, 2], k]
            tlo[i, k] = min(a, b, c)
            thi[i, k] = max(a, b, c)
            cen[i, k] = (a + b + c) / 3.0
    cap = 2 * nt + 1
    lo = np.empty((cap, 3))
    hi = np.empty((cap, 3))
    left = -np.ones(cap, dtype=np.int64)
    right = -np.ones(cap, dtype=np.int64)
    start = np.zeros(cap, dtype=np.int64)
    count = np.zeros(cap, dtype=np.int64)
    order = np.arange(nt)
    stack = np.empty(128, dtype=np.int64)
    n_nodes = 1
    start[0] = 0
    count[0] = nt
    sp = 0
    stack[sp] = 0
    sp += 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        s, n = start[node], count[node]
        for k in range(3):
            lo[node, k] = np.inf
            hi[node, k] = -np.inf
        for j in range(s, s + n):
            i = order[j]
            for k in range(3):
                lo[node, k] = min(lo[node, k], tlo[i, k])
                hi[node, k] = max(hi[node, k], thi[i, k])
        if n <= LEAF:
            continue
        ax = 0
        ext = hi[node, 0] - lo[node, 0]
        for k in range(1, 3):
            if hi[node, k] - lo[node, k] > ext:
                ext = hi[node, k] - lo[node, k]
                ax = k
        keys = np.empty(n)
        for j in range(n):
            keys[j] = cen[order[s + j], ax]
        perm = np.argsort(keys, kind="mergesort")
        sub = order[s:s + n].copy()
        for j in range(n):
            order[s + j] = sub[perm[j]]
        half = n // 2
        l, r = n_nodes, n_nodes + 1
        n_nodes += 2
        start[l], count[l] = s, half
        start[r], count[r] = s + half, n - half
        left[node], right[node] = l, r
        stack[sp] = l
        stack[sp + 1] = r
        sp += 2
    return lo[:n_nodes].copy(), hi[:n_nodes].copy(), left[:n_nodes].copy(), right[:n_nodes].copy(), \
        start[:n_nodes].copy(), count[:n_nodes].copy(), order


@nb.njit(cache=True)
def _box_may_hit(lo, hi, mx, my, ex, ey, rho):
    # vertical plane through the chord: n = (-ey, ex)
    nx, ny = -ey, ex
    pos = False
    neg = False
    for a in range(2):
        x = lo[0] if a == 0 else hi[0]
        for b in range(2):
            y = lo[1] if b == 0 else hi[1]
            d = (x - mx) * nx + (y - my) * ny
            if d >= 0:
                pos = True
            if d <= 0:
                neg = True
    if not (pos and neg):
        return False
    # sphere shell of radius rho centred at (mx, my, 0)
    dmin = 0.0
    dmax = 0.0
    c = (mx, my, 0.0)
    for k in range(3):
        a = lo[k] - c[k]
        b = hi[k] - c[k]
        if a > 0:
            dmin += a * a
        elif b < 0:
            dmin += b * b
        m = max(abs(a), abs(b))
        dmax += m * m
    return dmin <= rho * rho * (1 + 1e-12) and dmax >= rho * rho * (1 - 1e-12)


@nb.njit(cache=True)
def _tri_hits(V, T, i, mx, my, ex, ey, rho, out_s, out_x3, out_sign):
    """Exact intersections of the semicircle with triangle ``i``.

    Returns the number of hits written (0..2), or -1 if a hit is degenerate
    (close to an edge, tangential, or a vertex lies on the chord plane).
    """
    nx, ny = -ey, ex
    d = np.empty(3)
    P = np.empty((3, 2))
    for k in range(3):
        v = T[i, k]
        dx, dy = V[v, 0] - mx, V[v, 1] - my
        d[k] = dx * nx + dy * ny
        P[k, 0] = dx * ex + dy * ey
        P[k, 1] = V[v, 2]
    scale = 0.0
    for k in range(3):
        scale = max(scale, abs(d[k]))
    if scale == 0.0:
        return -1
    if (d[0] > 0 and d[1] > 0 and d[2] > 0) or (d[0] < 0 and d[1] < 0 and d[2] < 0):
        return 0
    for k in range(3):
        if abs(d[k]) <= 1e-13 * scale:
            return -1
    # the two edges that change sign give the chord-plane section of the triangle
    seg = np.empty((2, 2))
    ns = 0
    for k in range(3):
        k2 = (k + 1) % 3
        if (d[k] > 0) != (d[k2] > 0):
            tau = d[k] / (d[k] - d[k2])
            seg[ns, 0] = P[k, 0] + tau * (P[k2, 0] - P[k, 0])
            seg[ns, 1] = P[k, 1] + tau * (P[k2, 1] - P[k, 1])
            ns += 1
    if ns != 2:
        return -1
    Dx, Dy = seg[1, 0] - seg[0, 0], seg[1, 1] - seg[0, 1]
    a = Dx * Dx + Dy * Dy
    if a == 0.0:
        return -1
    b = 2.0 * (seg[0, 0] * Dx + seg[0, 1] * Dy)
    c = seg[0, 0] ** 2 + seg[0, 1] ** 2 - rho * rho
    disc = b * b - 4 * a * c
    if disc < 0:
        if disc > -1e-12 * b * b:
            return -1
        return 0
    sq = np.sqrt(disc)
    # triangle normal (unnormalised) for the crossing sign
    ax, ay, az = V[T[i, 1], 0] - V[T[i, 0], 0], V[T[i, 1], 1] - V[T[i, 0], 1], V[T[i, 1], 2] - V[T[i, 0], 2]
    bx, by, bz = V[T[i, 2], 0] - V[T[i, 0], 0], V[T[i, 2], 1] - V[T[i, 0], 1], V[T[i, 2], 2] - V[T[i, 0], 2]
    Nx, Ny, Nz = ay * bz - az * by, az * bx - ax * bz, ax * by - ay * bx
    nh = 0
    q = -0.5 * (b + (sq if b >= 0 else -sq))
    roots = (q / a, c / q if q != 0 else q / a)
    if sq <= 1e-9 * abs(b) and sq > 0:
        return -1
    for r in range(2):
        if r == 1 and sq == 0:
            break
        t = roots[r]
        if t < -EDGE_EPS or t > 1 + EDGE_EPS:
            continue
        if t < EDGE_EPS or t > 1 - EDGE_EPS:
            return -1
        s = seg[0, 0] + t * Dx
        x3 = seg[0, 1] + t * Dy
        if x3 <= 0:
            continue
        # semicircle tangent (z -> w): (x3 e, -s) / rho
        dot = x3 * (ex * Nx + ey * Ny) - s * Nz
        out_s[nh] = s
        out_x3[nh] = x3
        out_sign[nh] = 1 if dot > 0 else -1
        nh += 1
    return nh


@nb.njit(cache=True)
def semicircle_counts(V, T, lo, hi, left, right, start, count, order, mx, my, ex, ey, rho):
    """Hit count, signed count and degeneracy flag for each semicircle geodesic."""
    ng = mx.shape[0]
    cnt = np.zeros(ng, dtype=np.int64)
    sgn = np.zeros(ng, dtype=np.int64)
    deg = np.zeros(ng, dtype=np.bool_)
    stack = np.empty(256, dtype=np.int64)
    hs = np.empty(2)
    hx = np.empty(2)
    hsg = np.empty(2, dtype=np.int64)
    for g in range(ng):
        sp = 0
        stack[0] = 0
        sp = 1
        while sp > 0:
            sp -= 1
            node = stack[sp]
            if not _box_may_hit(lo[node], hi[node], mx[g], my[g], ex[g], ey[g], rho[g]):
                continue
            if left[node] < 0:
                for j in range(start[node], start[node] + count[node]):
                    nh = _tri_hits(V, T, order[j], mx[g], my[g], ex[g], ey[g], rho[g], hs, hx, hsg)
                    if nh < 0:
                        deg[g] = True
                    else:
                        for r in range(nh):
                            cnt[g] += 1
                            sgn[g] += hsg[r]
            else:
                stack[sp] = left[node]
                stack[sp + 1] = right[node]
                sp += 2
    return cnt, sgn, deg


@nb.njit(cache=True)
def semicircle_hits(V, T, lo, hi, left, right, start, count, order, mx, my, ex, ey, rho):
    """Detailed hits for one geodesic: (triangle ids, s, x3, signs, degenerate)."""
    tri = []
    ss = []
    xs = []
    sg = []
    deg = False
    stack = np.empty(256, dtype=np.int64)
    hs = np.empty(2)
    hx = np.empty(2)
    hsg = np.empty(2, dtype=np.int64)
    sp = 1
    stack[0] = 0
    while sp > 0:
        sp -= 1
        node = stack[sp]
        if not _box_may_hit(lo[node], hi[node], mx, my, ex, ey, rho):
            continue
        if left[node] < 0:
            for j in range(start[node], start[node] + count[node]):
                nh = _tri_hits(V, T, order[j], mx, my, ex, ey, rho, hs, hx, hsg)
                if nh < 0:
                    deg = True
                for r in range(max(nh, 0)):
                    tri.append(order[j])
                    ss.append(hs[r])
                    xs.append(hx[r])
                    sg.append(hsg[r])
        else:
            stack[sp] = left[node]
            stack[sp + 1] = right[node]
            sp += 2
    n = len(tri)
    a = np.empty(n, dtype=np.int64)
    b = np.empty(n)
    c = np.empty(n)
    d = np.empty(n, dtype=np.int64)
    for i in range(n):
        a[i], b[i], c[i], d[i] = tri[i], ss[i], xs[i], sg[i]
    return a, b, c, d, deg


@nb.njit(cache=True)
def segment_triangle_count(V, T, P0, P1):
    """Polyline oracle: crossings of segments ``P0[k] -> P1[k]`` with all triangles
    (Moller-Trumbore, brute force); returns (count, signed, degenerate)."""
    cnt = 0
    sgn = 0
    deg = False
    for k in range(P0.shape[0]):
        ox, oy, oz = P0[k, 0], P0[k, 1], P0[k, 2]
        dx, dy, dz = P1[k, 0] - ox, P1[k, 1] - oy, P1[k, 2] - oz
        for i in range(T.shape[0]):
            a, b, c = T[i, 0], T[i, 1], T[i, 2]
            e1x, e1y, e1z = V[b, 0] - V[a, 0], V[b, 1] - V[a, 1], V[b, 2] - V[a, 2]
            e2x, e2y, e2z = V[c, 0] - V[a, 0], V[c, 1] - V[a, 1], V[c, 2] - V[a, 2]
            px, py, pz = dy * e2z - dz * e2y, dz * e2x - dx * e2z, dx * e2y - dy * e2x
            det = e1x * px + e1y * py + e1z * pz
            if det == 0.0:
                continue
            inv = 1.0 / det
            tx, ty, tz = ox - V[a, 0], oy - V[a, 1], oz - V[a, 2]
            u = (tx * px + ty * py + tz * pz) * inv
            if u < 0 or u > 1:
                continue
            qx, qy, qz = ty * e1z - tz * e1y, tz * e1x - tx * e1z, tx * e1y - ty * e1x
            v = (dx * qx + dy * qy + dz * qz) * inv
            if v < 0 or u + v > 1:
                continue
            t = (e2x * qx + e2y * qy + e2z * qz) * inv
            if t < 0 or t >= 1:
                continue
            if min(u, v, 1 - u - v) < 1e-9 or t < 1e-12:
                deg = True
            cnt += 1
            nx, ny, nz = e1y * e2z - e1z * e2y, e1z * e2x - e1x * e2z, e1x * e2y - e1y * e2x
            sgn += 1 if dx * nx + dy * ny + dz * nz > 0 else -1
    return cnt, sgn, deg
