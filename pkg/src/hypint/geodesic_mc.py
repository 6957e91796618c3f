"""Integration over the space of geodesics.

Geodesics are semicircles over chords ``[z, w]`` of the boundary plane.  In
coordinates (chord midpoint ``m``, half-length ``rho``, direction angle
``psi`` in ``[0, 2 pi)``) the oriented invariant measure
``4 dz dw / |z - w|^4`` is ``rho^-3 dm drho dpsi``; unoriented integrals are
half of it.

Intersection counts against a surface use a hybrid target: an exact
analytic *collar* (vertical cylinder or orthogonal sphere) below a seam
height, a triangle mesh above it, and the thin horizontal *sliver* between
the mesh's bottom polygon and the exact seam curve, so the three pieces
close up into one embedded surface and the parity of the count always
matches the linking number.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _bvh
from .curves import IdealCurve, circle
from .errors import DomainError, GeometryInconsistencyError
from .estimate import Estimate, chunk_rngs
from .geom_core import Geodesic
from .surfaces import MeshedSurface, ParamSurface, Truncation, mesh, truncate

TWO_PI = 2.0 * np.pi
JITTER = 1e-9
MAX_RETRIES = 4


# ---------------------------------------------------------------------- batches
@dataclass
class GeodesicBatch:
    """Semicircle geodesics with oriented-measure importance weights."""

    z: np.ndarray
    w: np.ndarray
    weight: np.ndarray
    proposal: np.ndarray | None = None

    @property
    def m(self):
        return 0.5 * (self.z + self.w)

    @property
    def rho(self):
        return 0.5 * np.abs(self.w - self.z)

    @property
    def e(self):
        d = self.w - self.z
        return d / np.abs(d)

    def __len__(self):
        return self.z.size

    def subset(self, idx) -> "GeodesicBatch":
        return GeodesicBatch(self.z[idx], self.w[idx], self.weight[idx],
                             None if self.proposal is None else self.proposal[idx])

    def geodesic(self, i: int) -> Geodesic:
        from .geom_core import BoundaryPoint

        return Geodesic(BoundaryPoint.from_complex(complex(self.z[i])), BoundaryPoint.from_complex(complex(self.w[i])))


def chord_crossings(c: IdealCurve, z, w):
    """Crossings of the chords ``[z, w]`` with ``c``.

    Returns ``(t, srel, inseg)``: curve parameters, signed position along the
    chord measured from the midpoint, and whether the crossing lies strictly
    inside the chord (``|srel| < rho``).  Arrays are padded with NaN.
    """
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    e = (w - z) / np.abs(w - z)
    nvec = -1j * e  # line normal with e = i n, as curves.crossings expects
    phi = np.angle(nvec)
    m = 0.5 * (z + w)
    p = (np.conj(nvec) * m).real
    t, s = c.crossings(p, phi)
    srel = s - (np.conj(e) * m).real[:, None]
    rho = 0.5 * np.abs(w - z)
    inseg = np.isfinite(srel) & (np.abs(srel) < rho[:, None])
    return t, srel, inseg


def linking_sq_ideal(g, c: IdealCurve) -> int:
    """0/1: whether ``c`` separates the ideal endpoints of ``g``."""
    from .curves import separation

    if g.vertical:
        # the point at infinity lies outside every bounded curve
        finite = g.end if g.start.at_infinity else g.start
        return int(c.winding_number((finite.x, finite.y)) % 2 != 0)
    return int(separation(c, g.start.to_complex(), g.end.to_complex()))


# ---------------------------------------------------------------------- sampler
@dataclass
class GeodesicSampler:
    """Importance sampler for geodesics meeting a cylindrical region.

    Region: disk ``|x - center| <= radius`` of the boundary plane times heights
    ``(0, height]``.  Proposal A draws ``psi`` uniform, ``rho`` log-uniform on
    ``[rho_lo, rho_max]``, the chord's offset from the center uniform in
    ``[-radius, radius]`` and its midpoint uniform over the positions where
    the semicircle dips below ``height`` over the disk.  Proposal B (if a
    curve is given) draws a chord through a uniform curve point ``C(t)``.
    Samples are combined by the balance heuristic, so the weights
    ``rho^-3 / q_mix`` are unbiased for the oriented measure on the union of
    the supports.
    """

    center: complex
    radius: float
    height: float
    rho_lo: float
    rho_max: float
    curve: IdealCurve | None = None
    alpha: float = 0.5
    seed: int = 0

    def __post_init__(self):
        self.center = complex(self.center)
        if not (self.radius > 0 and self.height > 0 and 0 < self.rho_lo < self.rho_max):
            raise DomainError("invalid sampler region")
        if self.curve is None:
            self.alpha = 1.0
        if not 0 < self.alpha <= 1:
            raise DomainError("alpha must be in (0, 1]")
        self.log_range = math.log(self.rho_max / self.rho_lo)

    # -- proposal A
    def _feasible_len(self, p, rho):
        a = np.sqrt(np.maximum(self.radius ** 2 - p * p, 0.0))
        kappa = np.sqrt(np.maximum(rho * rho - self.height ** 2, 0.0))
        return np.where(kappa < a, 2 * (a + rho), 2 * (2 * a + rho - kappa)), a, kappa

    def density_a(self, m, rho, e):
        """Density of proposal A in ``m`` (per unit area) given ``rho`` and ``e``."""
        rel = m - self.center
        p = (np.conj(-1j * e) * rel).real
        q = (np.conj(e) * rel).real
        L, a, kappa = self._feasible_len(p, rho)
        ok = np.abs(p) < self.radius
        inner = kappa < a
        feas = np.where(inner, np.abs(q) < a + rho,
                        ((q > -a - rho) & (q < a - kappa)) | ((q > -a + kappa) & (q < a + rho)))
        return np.where(ok & feas, 1.0 / (2 * self.radius * np.where(L > 0, L, 1.0)), 0.0)

    def _draw_a(self, rng, n, rho, e):
        p = rng.uniform(-self.radius, self.radius, n)
        L, a, kappa = self._feasible_len(p, rho)
        u = rng.random(n)
        inner = kappa < a
        q_in = -a - rho + u * 2 * (a + rho)
        half = 2 * a + rho - kappa
        side = u < 0.5
        uu = np.where(side, 2 * u, 2 * u - 1) * half
        q_out = np.where(side, -a - rho + uu, -a + kappa + uu)
        q = np.where(inner, q_in, q_out)
        return self.center + p * (-1j * e) + q * e

    # -- proposal B
    def density_b(self, t, srel, inseg, rho, e):
        if self.curve is None:
            return np.zeros(rho.shape)
        tt = np.where(inseg, t, 0.0)
        d1 = self.curve.eval_complex(tt, 1)
        cross = np.abs((np.conj(e)[:, None] * d1).imag)
        with np.errstate(divide="ignore"):
            terms = np.where(inseg, 1.0 / (2 * rho[:, None] * cross), 0.0)
        return np.sum(terms, axis=1)

    def _draw_b(self, rng, n, rho, e):
        t = rng.random(n)
        qq = rng.uniform(-1.0, 1.0, n) * rho
        return self.curve.eval_complex(t) - qq * e

    def draw(self, rng, n):
        """Draw ``n`` geodesics; returns the batch and the chord crossings with the curve."""
        psi = rng.uniform(0.0, TWO_PI, n)
        e = np.exp(1j * psi)
        rho = self.rho_lo * np.exp(rng.random(n) * self.log_range)
        use_a = rng.random(n) < self.alpha
        m = np.empty(n, dtype=complex)
        ia = np.nonzero(use_a)[0]
        ib = np.nonzero(~use_a)[0]
        m[ia] = self._draw_a(rng, ia.size, rho[ia], e[ia])
        if ib.size:
            m[ib] = self._draw_b(rng, ib.size, rho[ib], e[ib])
        z, w = m - rho * e, m + rho * e
        return self.weigh(z, w, use_a.astype(np.int8))

    def weigh(self, z, w, proposal=None):
        """Importance weights ``rho^-3 / q_mix`` for given endpoint pairs."""
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        m = 0.5 * (z + w)
        rho = 0.5 * np.abs(w - z)
        e = (w - z) / (2 * rho)
        g = 1.0 / (TWO_PI * rho * self.log_range)
        qa = self.density_a(m, rho, e)
        if self.curve is not None:
            t, srel, inseg = chord_crossings(self.curve, z, w)
            qb = self.density_b(t, srel, inseg, rho, e)
        else:
            t = srel = inseg = None
            qb = 0.0
        q = g * (self.alpha * qa + (1 - self.alpha) * qb)
        inrange = (rho >= self.rho_lo) & (rho <= self.rho_max)
        with np.errstate(divide="ignore"):
            wt = np.where((q > 0) & inrange, rho ** -3.0 / np.where(q > 0, q, 1.0), 0.0)
        batch = GeodesicBatch(z, w, wt, proposal)
        return batch, (t, srel, inseg)

    def sample(self, n: int, seed: int | None = None):
        """Yield ``(GeodesicBatch, crossings)`` chunks totalling ``n`` samples."""
        seed = self.seed if seed is None else seed
        for _, size, rng in chunk_rngs(seed, n):
            yield self.draw(rng, size)


# ---------------------------------------------------------------------- collars
@dataclass
class CylinderCollar:
    """Exact vertical cylinder over ``curve`` for heights in ``[lo, hi)``."""

    curve: IdealCurve

    def hits(self, batch: GeodesicBatch, crossings, lo: float, hi: float):
        t, srel, inseg = crossings
        rho = batch.rho
        x3 = np.sqrt(np.maximum(rho[:, None] ** 2 - np.where(inseg, srel, 0.0) ** 2, 0.0))
        ok = inseg & (x3 >= lo) & (x3 < hi)
        tt = np.where(ok, t, 0.0)
        d1 = self.curve.eval_complex(tt, 1)
        # outward normal of the wall is (y', -x') times the orientation sign
        nout = -1j * d1 * self.curve.orientation_sign
        sg = np.sign((np.conj(batch.e)[:, None] * nout).real)
        return np.sum(ok, axis=1), np.sum(np.where(ok, sg, 0), axis=1).astype(np.int64)


@dataclass
class SphereCollar:
    """Exact hemisphere ``|X - (center, 0)| = radius`` for heights in ``[lo, hi)``."""

    center: complex
    radius: float

    def hits(self, batch: GeodesicBatch, crossings, lo: float, hi: float):
        m, rho, e = batch.m, batch.rho, batch.e
        rel = self.center - m
        s0 = (np.conj(e) * rel).real
        d = (np.conj(-1j * e) * rel).real
        r2 = self.radius ** 2 - d * d
        with np.errstate(divide="ignore", invalid="ignore"):
            s = (rho * rho - r2 + s0 * s0) / (2 * s0)
            x32 = rho * rho - s * s
        ok = (r2 > 0) & (s0 != 0) & (x32 > 0)
        x3 = np.sqrt(np.where(ok, x32, 0.0))
        ok &= (x3 >= lo) & (x3 < hi)
        return ok.astype(np.int64), np.where(ok, -np.sign(s0), 0).astype(np.int64)


# ---------------------------------------------------------------------- targets
@dataclass
class SurfaceTarget:
    """Surface assembled from a mesh above ``seam``, a collar in ``[h_min, seam)``
    and the seam sliver.

    ``end_curve`` is the ideal boundary for surfaces with a cone-like end, or
    ``None`` for compact targets (then ``h_min`` is the truncation height).
    ``curve`` is the surface's ideal curve even for truncations; chord
    crossings with it drive proposal B, the cylinder collar and the ideal
    linking number.
    """

    mesh: MeshedSurface | None
    seam: float
    h_min: float = 0.0
    collar: object = None
    seam_curve: IdealCurve | None = None
    end_curve: IdealCurve | None = None
    curve: IdealCurve | None = None
    center: complex = 0j
    radius: float = 1.0
    height: float = 1.0
    scale: float = 1.0
    bvh: tuple = field(default=None, repr=False)

    def __post_init__(self):
        if self.mesh is not None:
            m = self.mesh
            self.bvh = _bvh.build_bvh(m.vertices, m.triangles)
            self._seam_loop = None
            if self.collar is not None:
                loops = [np.asarray(l) for l in m.boundary_loops]
                low = [l for l in loops if np.allclose(m.vertices[l, 2], self.seam, rtol=1e-9, atol=1e-12)]
                if len(low) != 1:
                    raise GeometryInconsistencyError("mesh has no unique boundary loop at the seam height")
                P = m.vertices[low[0]]
                self._seam_poly = P[:, 0] + 1j * P[:, 1]
                from ._kernels import build_slab_index

                vx = np.ascontiguousarray(P[:, 0])
                vy = np.ascontiguousarray(P[:, 1])
                self._poly_xy = (vx, vy)
                self._poly_index = build_slab_index(vx, vy, max(8, int(np.sqrt(len(vx))) * 4))

    @property
    def compact(self) -> bool:
        return self.end_curve is None

    def _in_poly(self, q):
        from ._kernels import winding_numbers_polygon

        vx, vy = self._poly_xy
        return winding_numbers_polygon(np.ascontiguousarray(q.real), np.ascontiguousarray(q.imag), vx, vy,
                                       *self._poly_index) != 0

    def _sliver(self, batch: GeodesicBatch):
        rho, m, e = batch.rho, batch.m, batch.e
        hs = self.seam
        cnt = np.zeros(len(batch), dtype=np.int64)
        sgn = np.zeros(len(batch), dtype=np.int64)
        idx = np.nonzero(rho > hs)[0]
        if idx.size == 0:
            return cnt, sgn
        a = np.sqrt(rho[idx] ** 2 - hs * hs)
        for side, direction in ((-1.0, 1), (1.0, -1)):
            q = m[idx] + side * a * e[idx]
            in_c = self.seam_curve.winding_numbers(np.stack([q.real, q.imag], -1)) != 0
            near = self.seam_curve.distance(np.stack([q.real, q.imag], -1)) < 1e-6 * self.scale
            for j in np.nonzero(near)[0]:
                in_c[j] = self.seam_curve.winding_number((q[j].real, q[j].imag)) != 0
            in_p = self._in_poly(q)
            diff = in_c != in_p
            cnt[idx] += diff
            sgn[idx] += np.where(diff, np.where(in_c, 1, -1) * direction, 0)
        return cnt, sgn

    def counts(self, batch: GeodesicBatch, crossings=None):
        """``(count, signed_count, degenerate)`` for each geodesic in the batch."""
        n = len(batch)
        cnt = np.zeros(n, dtype=np.int64)
        sgn = np.zeros(n, dtype=np.int64)
        deg = np.zeros(n, dtype=bool)
        if self.mesh is not None:
            m, rho, e = batch.m, batch.rho, batch.e
            c, s, d = _bvh.semicircle_counts(self.mesh.vertices, self.mesh.triangles, *self.bvh,
                                             np.ascontiguousarray(m.real), np.ascontiguousarray(m.imag),
                                             np.ascontiguousarray(e.real), np.ascontiguousarray(e.imag),
                                             np.ascontiguousarray(rho))
            cnt += c
            sgn += s
            deg |= d
        if self.collar is not None:
            if isinstance(self.collar, CylinderCollar) and (crossings is None or crossings[0] is None):
                crossings = chord_crossings(self.collar.curve, batch.z, batch.w)
            c, s = self.collar.hits(batch, crossings, self.h_min, self.seam)
            cnt += c
            sgn += s
            if self.mesh is not None:
                c, s = self._sliver(batch)
                cnt += c
                sgn += s
        return cnt, sgn, deg

    def linking_sq(self, batch: GeodesicBatch, crossings=None, signed=None):
        """``lambda^2``: ideal separation for cone-like ends, squared signed count otherwise."""
        if self.compact:
            return signed.astype(np.int64) ** 2
        if crossings is None or crossings[0] is None:
            crossings = self.crossings(batch.z, batch.w)
        return (np.sum(crossings[2], axis=1) % 2).astype(np.int64)

    def crossings(self, z, w):
        if self.curve is None:
            return None, None, None
        return chord_crossings(self.curve, z, w)

    def evaluate(self, batch: GeodesicBatch, crossings=None):
        """``(count, signed, lambda^2, degenerate)`` for a batch (crossings are with ``self.curve``)."""
        if crossings is None or crossings[0] is None:
            crossings = self.crossings(batch.z, batch.w)
        cnt, sgn, deg = self.counts(batch, crossings)
        return cnt, sgn, self.linking_sq(batch, crossings, sgn), deg

    def evaluate_robust(self, batch: GeodesicBatch, crossings, key):
        """:meth:`evaluate`, with degenerate geodesics recomputed after a deterministic jitter."""
        cnt, sgn, lam2, deg = self.evaluate(batch, crossings)
        n_jit = 0
        for attempt in range(MAX_RETRIES):
            bad = np.nonzero(deg & (batch.weight > 0))[0]
            if bad.size == 0:
                break
            n_jit += bad.size
            zj = batch.z[bad].copy()
            wj = batch.w[bad].copy()
            for j, i in enumerate(bad):
                zj[j], wj[j] = _jitter(batch.z[i], batch.w[i], (*key, int(i), attempt), self.scale)
            sub = GeodesicBatch(zj, wj, batch.weight[bad])
            c2, s2, l2, d2 = self.evaluate(sub)
            cnt[bad], sgn[bad], lam2[bad], deg[bad] = c2, s2, l2, d2
        return cnt, sgn, lam2, n_jit

    def sampler(self, rho_lo=None, rho_factor: float = 100.0, alpha: float = 0.5, seed: int = 0) -> GeodesicSampler:
        """Sampler whose region covers every geodesic with a nonzero count or linking number."""
        diam = max(2 * self.radius, self.height)
        if rho_lo is None:
            rho_lo = self.h_min * (1 - 1e-12) if self.compact else 1e-4 * self.scale
        return GeodesicSampler(self.center, self.radius * (1 + 1e-9), self.height * (1 + 1e-9), rho_lo,
                               rho_factor * diam, curve=self.curve, alpha=alpha if self.curve is not None else 1.0,
                               seed=seed)


def surface_target(s, resolution: int = 256, seam: float | None = None) -> SurfaceTarget:
    """Build a hybrid target for a surface with a cone-like end or one of its truncations."""
    if isinstance(s, Truncation):
        surf, h = s.parent, s.h
    else:
        surf, h = s, 0.0
    if isinstance(surf, ParamSurface) and surf.kind == "capped-cylinder":
        c = surf.end_curve
        seam = surf.params["wall_top"] if seam is None else seam
        collar = CylinderCollar(c)
        seam_curve = c
        cen, rad = c.bounding_disk
        height = surf.params["cap_height"]
        scale = rad
    elif isinstance(surf, ParamSurface) and surf.kind == "hemisphere":
        R = surf.params["radius"]
        cx, cy = surf.params["center"]
        seam = 0.5 * R if seam is None else seam
        collar = SphereCollar(complex(cx, cy), R)
        seam_curve = circle((cx, cy), math.sqrt(R * R - seam * seam))
        cen, rad, height, scale = complex(cx, cy), R, R, R
    else:
        raise DomainError(f"no hybrid target for surface kind {getattr(surf, 'kind', type(s))}")
    cen = complex(*cen) if not isinstance(cen, complex) else cen
    if h >= seam:
        m = mesh(truncate(surf, h), resolution)
        return SurfaceTarget(m, seam=h, h_min=h, center=cen, radius=rad, height=height, scale=scale)
    pole = surf.v_hi if surf.interior > 0 else surf.v_lo
    v_seam = surf.v_at_height(seam)
    m = mesh(surf, resolution, v_range=tuple(sorted((v_seam, pole))))
    # pin the seam loop to the exact seam height (bisection leaves ~1 ulp)
    low = np.abs(m.vertices[:, 2] - seam) < 1e-9 * max(1.0, seam)
    m.vertices[low, 2] = seam
    return SurfaceTarget(m, seam=seam, h_min=h, collar=collar, seam_curve=seam_curve,
                         end_curve=None if h > 0 else surf.end_curve, curve=surf.end_curve,
                         center=cen, radius=rad, height=height, scale=scale)


def mesh_target(m: MeshedSurface) -> SurfaceTarget:
    """Compact target made of a mesh alone (boundary = the mesh's boundary loops)."""
    V = m.vertices
    cen = complex(*(0.5 * (V[:, :2].min(0) + V[:, :2].max(0))))
    rad = float(np.max(np.abs(V[:, 0] + 1j * V[:, 1] - cen)))
    return SurfaceTarget(m, seam=float(V[:, 2].min()), h_min=float(V[:, 2].min()), center=cen,
                         radius=rad, height=float(V[:, 2].max()), scale=rad)


# ---------------------------------------------------------------------- single geodesics
@dataclass
class IntersectionRecord:
    geodesic: Geodesic
    hits: list
    count: int
    linking_sq: int | None = None
    jittered: bool = False

    def __post_init__(self):
        if self.count != len(self.hits):
            raise ValueError("count must equal the number of hits")


def _jitter(z, w, key, scale):
    rng = np.random.default_rng([int(k) for k in key])
    dz = rng.normal(size=2) @ np.array([1, 1j])
    dw = rng.normal(size=2) @ np.array([1, 1j])
    return z + JITTER * scale * dz, w + JITTER * scale * dw


def count_intersections(g: Geodesic, m: MeshedSurface, curve: IdealCurve | None = None, _bvh_cache={}) -> IntersectionRecord:
    """Exact hits of a geodesic with a triangle mesh (semicircle-triangle tests).

    Vertical geodesics are handled as vertical rays.  A hit within a relative
    ``1e-10`` of a triangle edge triggers a deterministic ``1e-9`` jitter of
    the endpoints; the record is then flagged.
    """
    key = id(m)
    if key not in _bvh_cache or _bvh_cache[key][0] is not m:
        _bvh_cache.clear()
        _bvh_cache[key] = (m, _bvh.build_bvh(m.vertices, m.triangles))
    tree = _bvh_cache[key][1]
    scale = float(np.ptp(m.vertices, axis=0).max()) or 1.0
    if g.vertical:
        return _count_vertical(g, m, curve)
    z, w = g.start.to_complex(), g.end.to_complex()
    jittered = False
    for attempt in range(MAX_RETRIES + 1):
        mid = 0.5 * (z + w)
        rho = 0.5 * abs(w - z)
        e = (w - z) / (2 * rho)
        tri, s, x3, sg, deg = _bvh.semicircle_hits(m.vertices, m.triangles, *tree, mid.real, mid.imag, e.real, e.imag, rho)
        if not deg:
            break
        jittered = True
        z, w = _jitter(g.start.to_complex(), g.end.to_complex(), (attempt, 7919), scale)
    hits = []
    for i in range(len(tri)):
        pt = mid + s[i] * e
        hits.append((int(tri[i]), (pt.real, pt.imag, float(x3[i])), int(sg[i])))
    lam = None if curve is None else linking_sq_ideal(g, curve)
    return IntersectionRecord(g, hits, len(hits), lam, jittered)


def _count_vertical(g: Geodesic, m: MeshedSurface, curve):
    """Vertical ray from the finite endpoint (orientation: upward if it starts finite).

    A ray through an edge or vertex is moved by a deterministic ``1e-9`` jitter.
    """
    finite = g.end if g.start.at_infinity else g.start
    up = not g.start.at_infinity
    V, T = m.vertices, m.triangles
    scale = float(np.ptp(V, axis=0).max()) or 1.0
    A, B, C = V[T[:, 0]], V[T[:, 1]], V[T[:, 2]]
    x, y = finite.x, finite.y
    jittered = False
    for attempt in range(MAX_RETRIES + 1):
        # signed areas of the shadow triangles seen from (x, y)
        e0 = (B[:, 0] - A[:, 0]) * (y - A[:, 1]) - (B[:, 1] - A[:, 1]) * (x - A[:, 0])
        e1 = (C[:, 0] - B[:, 0]) * (y - B[:, 1]) - (C[:, 1] - B[:, 1]) * (x - B[:, 0])
        e2 = (A[:, 0] - C[:, 0]) * (y - C[:, 1]) - (A[:, 1] - C[:, 1]) * (x - C[:, 0])
        inside = ((e0 > 0) & (e1 > 0) & (e2 > 0)) | ((e0 < 0) & (e1 < 0) & (e2 < 0))
        tol = 1e-10 * scale * scale
        near = (np.minimum(np.minimum(np.abs(e0), np.abs(e1)), np.abs(e2)) < tol) & ~inside
        near |= inside & (np.minimum(np.minimum(np.abs(e0), np.abs(e1)), np.abs(e2)) < tol)
        if not near.any():
            break
        jittered = True
        d = _jitter(complex(finite.x, finite.y), 0j, (attempt, 104729), scale)[0]
        x, y = d.real, d.imag
    n = np.cross(B - A, C - A)
    hits = []
    for i in np.nonzero(inside & (n[:, 2] != 0))[0]:
        zz = A[i, 2] - (n[i, 0] * (x - A[i, 0]) + n[i, 1] * (y - A[i, 1])) / n[i, 2]
        s = 1 if n[i, 2] > 0 else -1
        hits.append((int(i), (x, y, float(zz)), s if up else -s))
    lam = None if curve is None else linking_sq_ideal(g, curve)
    return IntersectionRecord(g, hits, len(hits), lam, jittered)


def count_intersections_polyline(g: Geodesic, m: MeshedSurface, rel_sagitta: float = 1e-4, min_segments: int = 64):
    """Reference count: the semicircle as a polyline, brute-force segment-triangle tests.

    The number of segments is chosen so the sagitta is below ``rel_sagitta``
    times the median triangle edge; used as an oracle for the exact counter.
    """
    z, w = g.start.to_complex(), g.end.to_complex()
    mid, rho = 0.5 * (z + w), 0.5 * abs(w - z)
    e = (w - z) / (2 * rho)
    V, T = m.vertices, m.triangles
    edge = float(np.median(np.linalg.norm(V[T[:, 1]] - V[T[:, 0]], axis=1)))
    sag = rel_sagitta * edge
    # sagitta of a chord subtending dtheta on radius rho is rho (1 - cos(dtheta/2))
    dth = 2 * math.acos(max(-1.0, 1 - sag / rho)) if sag < rho else math.pi / 2
    n = max(min_segments, int(math.ceil(math.pi / dth)))
    th = np.linspace(0, math.pi, n + 1)
    s = -rho * np.cos(th)
    x3 = rho * np.sin(th)
    P = np.stack([(mid + s * e).real, (mid + s * e).imag, x3], -1)
    P[0, 2] = P[-1, 2] = 0.0
    c, sg, deg = _bvh.segment_triangle_count(V, T, P[:-1].copy(), P[1:].copy())
    return int(c), int(sg), bool(deg)


def linking_compact(g: Geodesic, m: MeshedSurface) -> int:
    """Signed intersection number of ``g`` with the spanning mesh ``m``."""
    rec = count_intersections(g, m)
    return int(sum(h[2] for h in rec.hits))


# ---------------------------------------------------------------------- estimators
def _evaluate(target: SurfaceTarget, sampler: GeodesicSampler, n: int, seed: int, integrand: str):
    """Run the sampler and reduce ``weight * f`` chunk by chunk (fixed order)."""
    sums, sq = [], []
    n_jit = n_nonzero = max_count = 0
    for k, size, rng in chunk_rngs(seed, n):
        batch, cr = sampler.draw(rng, size)
        cnt, sgn, lam2, jit = target.evaluate_robust(batch, cr, (seed, k))
        n_jit += jit
        if integrand == "count":
            f = cnt
        elif integrand == "linking":
            f = lam2
        else:
            f = cnt - lam2
            neg = np.nonzero((f < 0) & (batch.weight > 0))[0]
            if neg.size:
                i = int(neg[0])
                raise GeometryInconsistencyError(
                    f"negative integrand #-lambda^2 = {f[i]} for geodesic z={batch.z[i]}, w={batch.w[i]}")
        max_count = max(max_count, int(cnt.max(initial=0)))
        v = batch.weight * f
        n_nonzero += int(np.count_nonzero(v))
        sums.append(float(np.sum(v)))
        sq.append(float(np.sum(v * v)))
    val, se = _reduce(math.fsum(sums), math.fsum(sq), n)
    return val, se, {"jittered": n_jit, "nonzero": n_nonzero, "max_count": max_count}


def _reduce(S, Q, n):
    """Mean and standard error of ``weight * f``, converted to ``(1/pi) x unoriented``."""
    mean = S / n
    var = max(Q / n - mean * mean, 0.0) * n / max(n - 1, 1)
    return 0.5 * mean / math.pi, 0.5 * math.sqrt(var / n) / math.pi


def _tail_bound(target: SurfaceTarget, sampler: GeodesicSampler, max_count: int) -> float:
    """Bound on the contribution of geodesics with ``rho > rho_max``.

    Such a geodesic meets the region only within ``R1 = radius + height^2 / rho_max``
    of one endpoint; the unoriented measure of those is at most
    ``pi^2 R1^2 / rho_max^2``, each contributing at most ``max_count``.
    """
    R1 = sampler.radius + sampler.height ** 2 / sampler.rho_max
    return max(max_count, 1) * math.pi * R1 * R1 / sampler.rho_max ** 2


def crofton(target, n: int = 10 ** 6, seed: int = 0, rho_factor: float = 100.0) -> Estimate:
    """``F(S) = (1/pi) int #(l cap S) dl`` for a compact target (truncation or mesh)."""
    target = _as_target(target)
    if not target.compact:
        raise DomainError("Crofton area needs a compact target (truncate first)")
    smp = target.sampler(rho_factor=rho_factor, seed=seed)
    val, se, info = _evaluate(target, smp, n, seed, "count")
    info["tail_bound"] = _tail_bound(target, smp, info["max_count"])
    return Estimate(val, se, n, "monte-carlo", info)


def banchoff_pohl_area(target, n: int = 10 ** 6, seed: int = 0, rho_factor: float = 100.0) -> Estimate:
    """``A(C) = (1/pi) int lambda^2 dl`` for the boundary of a compact spanning surface."""
    target = _as_target(target)
    if target.compact and target.mesh is not None and target.collar is None and not target.mesh.boundary_loops:
        raise DomainError("surface has no boundary")
    smp = target.sampler(rho_factor=rho_factor, seed=seed)
    val, se, info = _evaluate(target, smp, n, seed, "linking")
    info["tail_bound"] = _tail_bound(target, smp, 1)
    return Estimate(val, se, n, "monte-carlo", info)


def geodesic_term(target, c: IdealCurve | None = None, n: int = 10 ** 6, seed: int = 0,
                  rho_lo: float | None = None, rho_factor: float = 100.0, alpha: float = 0.5) -> Estimate:
    """``(1/pi) int (#(l cap S) - lambda^2(l, C)) dl``.

    ``target`` is a :class:`SurfaceTarget` (or a surface / truncation, which
    is wrapped).  Every sample is checked for ``# >= lambda^2``; a violation
    means the mesh and the curve disagree and raises
    :class:`GeometryInconsistencyError`.  ``info`` carries bounds for the
    ``rho < rho_lo`` and ``rho > rho_max`` tails.
    """
    target = _as_target(target)
    if c is not None and not target.compact and c is not target.end_curve:
        raise DomainError("curve does not match the target's end curve")
    smp = target.sampler(rho_lo=rho_lo, rho_factor=rho_factor, alpha=alpha, seed=seed)
    val, se, info = _evaluate(target, smp, n, seed, "defect")
    info["tail_bound"] = _tail_bound(target, smp, info["max_count"])
    info["rho_lo"] = smp.rho_lo
    info["rho_max"] = smp.rho_max
    if not target.compact:
        # below rho_lo only chords crossing the curve twice near a tangency
        # contribute; their measure per unit rho is at most 2 * length * kappa_max
        c = target.end_curve
        info["small_rho_bound"] = 2.0 * smp.rho_lo * c.length * c.max_curvature / math.pi
    return Estimate(val, se, n, "monte-carlo", info)


def truncation_sweep(surface: ParamSurface, heights, n: int = 10 ** 6, seed: int = 0, resolution: int = 256,
                     rho_factor: float = 100.0):
    """``geodesic_term(S_h)`` for several ``h`` with common random numbers.

    All truncations are evaluated on the same geodesic sample (drawn for the
    lowest ``h``), so the increments between heights are estimated with far
    less noise than the values themselves.  Returns ``(values, increments)``
    with heights in decreasing order.
    """
    heights = sorted(heights, reverse=True)
    targets = [surface_target(truncate(surface, h), resolution) for h in heights]
    smp = targets[-1].sampler(rho_factor=rho_factor, seed=seed, rho_lo=min(heights) * (1 - 1e-12))
    acc = np.zeros((len(heights), 2))
    diffs = np.zeros((len(heights) - 1, 2))
    for k, size, rng in chunk_rngs(seed, n):
        batch, cr = smp.draw(rng, size)
        vals = []
        for tg in targets:
            cnt, sgn, lam2, _ = tg.evaluate_robust(batch, cr, (seed, k))
            f = cnt - lam2
            if np.any((f < 0) & (batch.weight > 0)):
                raise GeometryInconsistencyError(f"negative integrand in truncation sweep at h={tg.h_min}")
            vals.append(batch.weight * f)
        for j, v in enumerate(vals):
            acc[j] += (np.sum(v), np.sum(v * v))
        for j in range(len(vals) - 1):
            d = vals[j + 1] - vals[j]
            diffs[j] += (np.sum(d), np.sum(d * d))
    values = [Estimate(*_reduce(*acc[j], n), n, "monte-carlo", {"h": h}) for j, h in enumerate(heights)]
    increments = [Estimate(*_reduce(*diffs[j], n), n, "monte-carlo", {"from": heights[j], "to": heights[j + 1]})
                  for j in range(len(heights) - 1)]
    return values, increments


def _as_target(t) -> SurfaceTarget:
    if isinstance(t, SurfaceTarget):
        return t
    if isinstance(t, MeshedSurface):
        return mesh_target(t)
    if isinstance(t, (ParamSurface, Truncation)):
        return surface_target(t)
    raise DomainError(f"cannot integrate over {type(t).__name__}")
