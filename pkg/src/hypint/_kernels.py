"""Compiled inner loops (numba) used by the vectorised front-ends."""
import numpy as np
from numba import njit


@njit(cache=True)
def winding_numbers_polygon(px, py, vx, vy, slab_edges, slab_start, slab_y0, slab_h):
    """Signed winding number of closed polygon ``(vx, vy)`` around each point.

    ``slab_edges``/``slab_start`` index the polygon edges whose y-range meets
    each horizontal slab, so each point only visits nearby edges.
    """
    n = px.shape[0]
    nv = vx.shape[0]
    nslab = slab_start.shape[0] - 1
    out = np.zeros(n, dtype=np.int64)
    for i in range(n):
        x = px[i]
        y = py[i]
        k = int((y - slab_y0) / slab_h)
        if k < 0 or k >= nslab:
            continue
        wn = 0
        for jj in range(slab_start[k], slab_start[k + 1]):
            j = slab_edges[jj]
            x0 = vx[j]
            y0 = vy[j]
            j1 = j + 1
            if j1 == nv:
                j1 = 0
            x1 = vx[j1]
            y1 = vy[j1]
            if y0 <= y:
                if y1 > y:
                    if (x1 - x0) * (y - y0) - (x - x0) * (y1 - y0) > 0:
                        wn += 1
            elif y1 <= y:
                if (x1 - x0) * (y - y0) - (x - x0) * (y1 - y0) < 0:
                    wn -= 1
        out[i] = wn
    return out


def build_slab_index(vx, vy, nslab):
    """Bucket polygon edges into horizontal slabs for :func:`winding_numbers_polygon`."""
    nv = len(vx)
    y0 = float(vy.min())
    y1 = float(vy.max())
    h = (y1 - y0) / nslab * (1 + 1e-12) or 1.0
    ya = vy
    yb = np.roll(vy, -1)
    lo = np.floor((np.minimum(ya, yb) - y0) / h).astype(np.int64).clip(0, nslab - 1)
    hi = np.floor((np.maximum(ya, yb) - y0) / h).astype(np.int64).clip(0, nslab - 1)
    counts = hi - lo + 1
    edge_ids = np.repeat(np.arange(nv), counts)
    offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    slabs = np.repeat(lo, counts) + offs
    order = np.argsort(slabs, kind="stable")
    slab_edges = edge_ids[order]
    slab_start = np.zeros(nslab + 1, dtype=np.int64)
    np.add.at(slab_start, slabs + 1, 1)
    slab_start = np.cumsum(slab_start)
    return slab_edges.astype(np.int64), slab_start, y0, h
