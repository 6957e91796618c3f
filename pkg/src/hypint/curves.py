"""Closed smooth curves in the ideal boundary plane.

An :class:`IdealCurve` is a finite Fourier series ``t -> C(t)``, 1-periodic in
``t``.  Stored internally as complex coefficients ``c_k``, ``k = -K..K``, of
``x(t) + i y(t)``; the file format uses real (cos, sin) pairs per harmonic.

Besides evaluation and winding predicates this module provides the continuous
angle field ``theta(x, y)``: the oriented angle at ``x`` from the curve to the
circle through ``x`` that is positively tangent to the curve at ``y``.
"""
from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from . import _kernels
from .errors import ConfigError, DegenerateInputError, DomainError, OnCurveError, ThetaResolutionError
from .geom_core import MobiusMap

TWO_PI = 2.0 * np.pi

# below this parameter gap theta is returned as 0 (it is O(gap) there)
NEAR_DIAGONAL = 1e-5


def _wrap(a):
    """Wrap angles to (-pi, pi]."""
    return np.pi - np.mod(np.pi - a, TWO_PI)


@dataclass(frozen=True)
class OrientedCircleOrLine:
    """Either an oriented circle or an oriented line in the boundary plane.

    Circle: ``center``, ``radius`` and ``orientation`` (+1 counterclockwise).
    Line: ``point`` on it and unit ``direction``; ``radius`` is ``inf``.
    """

    center: np.ndarray | None = None
    radius: float = math.inf
    orientation: int = 1
    point: np.ndarray | None = None
    direction: np.ndarray | None = None

    def __post_init__(self):
        if self.is_line:
            if self.point is None or self.direction is None:
                raise DomainError("a line needs a point and a direction")
        elif not (math.isfinite(self.radius) and self.radius > 0):
            raise DomainError(f"circle radius must be finite and positive, got {self.radius}")

    @property
    def is_line(self) -> bool:
        return not math.isfinite(self.radius)

    def tangent_at(self, x) -> np.ndarray:
        """Unit tangent (respecting orientation) at a point of the circle or line."""
        if self.is_line:
            return np.asarray(self.direction, dtype=float)
        r = np.asarray(x, dtype=float) - self.center
        t = self.orientation * np.array([-r[1], r[0]])
        return t / np.linalg.norm(t)

    def distance(self, x) -> float:
        """Euclidean distance from ``x`` to the circle/line."""
        x = np.asarray(x, dtype=float)
        if self.is_line:
            d = x - self.point
            return abs(d[0] * self.direction[1] - d[1] * self.direction[0])
        return abs(np.linalg.norm(x - self.center) - self.radius)


class IdealCurve:
    """Closed Fourier curve ``C(t) = sum_k c_k exp(2 pi i k t)`` in the plane.

    Parameters
    ----------
    coeffs : complex array of length ``2K + 1``, ordered ``k = -K..K``.
    check : run the immersion and simplicity checks on construction.
    """

    eps_imm = 1e-8
    eps_self = 1e-9
    eps_on = 1e-10

    def __init__(self, coeffs, check: bool = True):
        c = np.asarray(coeffs, dtype=complex).ravel()
        if c.size % 2 != 1:
            raise DomainError("coefficient array must have odd length 2K+1")
        if not np.all(np.isfinite(c)):
            raise DomainError("non-finite Fourier coefficients")
        self.coeffs = c
        self.K = (c.size - 1) // 2
        self.k = np.arange(-self.K, self.K + 1)
        self._lock = threading.Lock()
        self._theta_grid = None
        if check:
            self.validate()

    # ------------------------------------------------------------------ construction
    @classmethod
    def from_harmonics(cls, harmonics_x, harmonics_y, orientation: str | None = None, check: bool = True):
        """Build from real (cos, sin) coefficient pairs for harmonics 0, 1, 2, ..."""
        hx = np.asarray(harmonics_x, dtype=float).reshape(-1, 2)
        hy = np.asarray(harmonics_y, dtype=float).reshape(-1, 2)
        K = max(len(hx), len(hy)) - 1
        hx = np.vstack([hx, np.zeros((K + 1 - len(hx), 2))])
        hy = np.vstack([hy, np.zeros((K + 1 - len(hy), 2))])
        c = np.zeros(2 * K + 1, dtype=complex)
        c[K] = hx[0, 0] + 1j * hy[0, 0]
        for k in range(1, K + 1):
            xk = 0.5 * (hx[k, 0] - 1j * hx[k, 1])
            xmk = 0.5 * (hx[k, 0] + 1j * hx[k, 1])
            yk = 0.5 * (hy[k, 0] - 1j * hy[k, 1])
            ymk = 0.5 * (hy[k, 0] + 1j * hy[k, 1])
            c[K + k] = xk + 1j * yk
            c[K - k] = xmk + 1j * ymk
        curve = cls(c, check=False)
        if orientation is not None:
            if orientation not in ("ccw", "cw"):
                raise ConfigError(f"orientation must be 'ccw' or 'cw', got {orientation!r}")
            if curve.orientation_tag != orientation:
                curve = curve.reversed_curve()
        if check:
            curve.validate()
        return curve

    @classmethod
    def from_dict(cls, d: dict, check: bool = True) -> "IdealCurve":
        try:
            return cls.from_harmonics(d["harmonics_x"], d["harmonics_y"], d.get("orientation"), check=check)
        except KeyError as exc:
            raise ConfigError(f"curve object missing field {exc}") from None

    @classmethod
    def load(cls, path) -> "IdealCurve":
        return cls.from_dict(json.loads(Path(path).read_text()))

    @classmethod
    def from_samples(cls, z, tol: float = 1e-14, max_harmonics: int | None = None, check: bool = True):
        """Fit a curve to ``N`` equispaced complex samples by FFT, dropping tiny harmonics."""
        z = np.asarray(z, dtype=complex)
        N = z.size
        F = np.fft.fft(z) / N
        kmax = N // 2 - 1 if max_harmonics is None else min(max_harmonics, N // 2 - 1)
        mag = np.abs(F)
        thresh = tol * mag.max()
        keep = 1
        for k in range(1, kmax + 1):
            if mag[k] > thresh or mag[-k] > thresh:
                keep = k
        c = np.concatenate([F[N - keep:], F[: keep + 1]])
        return cls(c, check=check)

    def to_harmonics(self):
        K, c = self.K, self.coeffs
        hx = [[float(c[K].real), 0.0]]
        hy = [[float(c[K].imag), 0.0]]
        for k in range(1, K + 1):
            ck, cmk = c[K + k], c[K - k]
            hx.append([float(ck.real + cmk.real), float(-ck.imag + cmk.imag)])
            hy.append([float(ck.imag + cmk.imag), float(ck.real - cmk.real)])
        return hx, hy

    def to_dict(self) -> dict:
        hx, hy = self.to_harmonics()
        return {"harmonics_x": hx, "harmonics_y": hy, "orientation": self.orientation_tag}

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    def reversed_curve(self) -> "IdealCurve":
        """Same trace, opposite orientation: ``t -> C(-t)``."""
        return IdealCurve(self.coeffs[::-1].copy(), check=False)

    def shifted(self, dt: float) -> "IdealCurve":
        """Reparametrise by ``t -> t + dt``."""
        return IdealCurve(self.coeffs * np.exp(2j * np.pi * self.k * dt), check=False)

    def transformed(self, m: MobiusMap, n_samples: int = 4096, tol: float = 1e-14) -> "IdealCurve":
        """Image under a Mobius map, refit as a Fourier curve at the same parameters."""
        t = np.arange(n_samples) / n_samples
        z = m(self.eval_complex(t))
        if not np.all(np.isfinite(z)):
            raise DomainError("Mobius image of the curve passes through infinity")
        out = IdealCurve.from_samples(z, tol=tol)
        # the refit must reproduce the image to near machine precision
        tm = (np.arange(n_samples) + 0.5) / n_samples
        err = np.max(np.abs(out.eval_complex(tm) - m(self.eval_complex(tm))))
        if err > 1e-9 * max(1.0, np.max(np.abs(z))):
            raise DomainError(f"Mobius image not resolved by {n_samples} samples (error {err:.2e})")
        return out

    def similar(self, scale: float = 1.0, rotation: float = 0.0, shift=(0.0, 0.0)) -> "IdealCurve":
        c = self.coeffs * scale * np.exp(1j * rotation)
        c = c.copy()
        c[self.K] += complex(shift[0], shift[1])
        return IdealCurve(c, check=False)

    # ------------------------------------------------------------------ evaluation
    def eval_complex(self, t, order: int = 0) -> np.ndarray:
        """``d^order C / dt^order`` at ``t`` as complex numbers."""
        t = np.asarray(t, dtype=float)
        shape = t.shape
        tf = t.ravel()
        w = self.coeffs * (2j * np.pi * self.k) ** order if order else self.coeffs
        out = np.empty(tf.size, dtype=complex)
        chunk = max(1, 2_000_000 // (2 * self.K + 1))
        for s in range(0, tf.size, chunk):
            tt = tf[s:s + chunk]
            base = np.exp(2j * np.pi * tt)
            E = np.empty((tt.size, 2 * self.K + 1), dtype=complex)
            E[:, self.K] = 1.0
            for k in range(1, self.K + 1):
                E[:, self.K + k] = E[:, self.K + k - 1] * base
            E[:, : self.K] = np.conj(E[:, self.K + 1:][:, ::-1])
            out[s:s + chunk] = E @ w
        return out.reshape(shape)

    def eval(self, t) -> np.ndarray:
        """Points ``C(t)`` as an array of shape ``t.shape + (2,)``."""
        z = self.eval_complex(t)
        return np.stack([z.real, z.imag], axis=-1)

    def derivative(self, t, order: int = 1) -> np.ndarray:
        z = self.eval_complex(t, order)
        return np.stack([z.real, z.imag], axis=-1)

    def tangent(self, t) -> np.ndarray:
        """Unit tangent vectors."""
        d = self.derivative(t)
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def speed(self, t) -> np.ndarray:
        return np.abs(self.eval_complex(t, 1))

    def curvature(self, t) -> np.ndarray:
        """Signed curvature; positive where the curve turns left."""
        d1 = self.eval_complex(t, 1)
        d2 = self.eval_complex(t, 2)
        return (np.conj(d1) * d2).imag / np.abs(d1) ** 3

    def tangent_angle(self, t) -> np.ndarray:
        """Principal argument of ``C'(t)``."""
        return np.angle(self.eval_complex(t, 1))

    # ------------------------------------------------------------------ global quantities
    @cached_property
    def _dense(self):
        n = max(2048, 64 * self.K)
        t = np.arange(n) / n
        return t, self.eval_complex(t)

    def dense_polygon(self) -> np.ndarray:
        return np.stack([self._dense[1].real, self._dense[1].imag], axis=-1)

    @cached_property
    def length(self) -> float:
        n = max(1024, 32 * self.K)
        t = np.arange(n) / n
        return float(np.mean(self.speed(t)))

    @cached_property
    def signed_area(self) -> float:
        """Enclosed area, positive for counterclockwise curves (exact for Fourier curves)."""
        return float(np.pi * np.sum(self.k * np.abs(self.coeffs) ** 2))

    @property
    def area(self) -> float:
        return abs(self.signed_area)

    @property
    def orientation_tag(self) -> str:
        return "ccw" if self.signed_area > 0 else "cw"

    @property
    def orientation_sign(self) -> int:
        return 1 if self.signed_area > 0 else -1

    @cached_property
    def bounding_disk(self):
        """``(center, radius)`` of a disk containing the curve."""
        z = self._dense[1]
        c = 0.5 * (z.real.min() + z.real.max()) + 0.5j * (z.imag.min() + z.imag.max())
        r = np.abs(z - c).max()
        # polygon vertices may miss the extremes by at most the sagitta
        n = z.size
        sag = np.max(np.abs(self.eval_complex(self._dense[0], 2))) / (8.0 * n * n)
        return np.array([c.real, c.imag]), float(r + 2 * sag + 1e-12 * r)

    @cached_property
    def bounding_box(self):
        z = self._dense[1]
        n = z.size
        sag = np.max(np.abs(self.eval_complex(self._dense[0], 2))) / (8.0 * n * n)
        return (float(z.real.min() - sag), float(z.real.max() + sag),
                float(z.imag.min() - sag), float(z.imag.max() + sag))

    @cached_property
    def max_curvature(self) -> float:
        t = np.arange(4096) / 4096
        return float(np.max(np.abs(self.curvature(t))))

    def is_convex(self) -> bool:
        n = max(4096, 64 * self.K)
        k = self.curvature(np.arange(n) / n)
        return bool(np.all(k > 0) or np.all(k < 0))

    # ------------------------------------------------------------------ validity
    def validate(self):
        n = max(4096, 64 * self.K)
        t = np.arange(n) / n
        if np.min(self.speed(t)) < self.eps_imm:
            raise DomainError("curve is not an immersion (vanishing derivative)")
        if not self.is_simple():
            raise DomainError("curve is not simple (self-intersection found)")

    def is_simple(self) -> bool:
        """Bounding-box subdivision test for self-intersections.

        The curve is split into arcs whose Euclidean boxes are inflated by the
        sagitta bound ``max|C''| dt^2 / 8``.  Overlapping non-adjacent arc
        pairs are bisected until they separate or shrink below ``eps_self``.
        """
        d1max = np.max(np.abs(self.eval_complex(np.arange(4096) / 4096, 1)))
        d2max = np.max(np.abs(self.eval_complex(np.arange(4096) / 4096, 2))) * 1.05
        d1min = np.min(np.abs(self.eval_complex(np.arange(4096) / 4096, 1))) * 0.95
        # arcs short enough to turn by well under 90 degrees
        n = int(max(64, 4 * d2max / max(d1min, 1e-300)))
        n = min(n, 1 << 15)
        t = np.arange(n + 1) / n
        z = self.eval_complex(t)
        pad = d2max / (8.0 * n * n)
        x0 = np.minimum(z[:-1].real, z[1:].real) - pad
        x1 = np.maximum(z[:-1].real, z[1:].real) + pad
        y0 = np.minimum(z[:-1].imag, z[1:].imag) - pad
        y1 = np.maximum(z[:-1].imag, z[1:].imag) + pad
        order = np.argsort(x0)
        cand = []
        # sweep over x to collect overlapping boxes
        active = []
        for i in order:
            active = [j for j in active if x1[j] >= x0[i]]
            for j in active:
                if y0[i] <= y1[j] and y0[j] <= y1[i]:
                    gap = abs(i - j)
                    if min(gap, n - gap) > 1:
                        cand.append((min(i, j), max(i, j)))
            active.append(i)
        for i, j in cand:
            if self._arcs_meet(i / n, (i + 1) / n, j / n, (j + 1) / n, d2max, d1max):
                return False
        return True

    def _arcs_meet(self, a0, a1, b0, b1, d2max, d1max, depth=0) -> bool:
        if (a1 - a0) * d1max < self.eps_self and (b1 - b0) * d1max < self.eps_self:
            return True
        if depth > 60:
            return True
        ta = np.array([a0, a1])
        tb = np.array([b0, b1])
        za = self.eval_complex(ta)
        zb = self.eval_complex(tb)
        pa = d2max * (a1 - a0) ** 2 / 8.0
        pb = d2max * (b1 - b0) ** 2 / 8.0
        if (za.real.min() - pa > zb.real.max() + pb or zb.real.min() - pb > za.real.max() + pa
                or za.imag.min() - pa > zb.imag.max() + pb or zb.imag.min() - pb > za.imag.max() + pa):
            return False
        am, bm = 0.5 * (a0 + a1), 0.5 * (b0 + b1)
        return any(self._arcs_meet(p0, p1, q0, q1, d2max, d1max, depth + 1)
                   for p0, p1 in ((a0, am), (am, a1)) for q0, q1 in ((b0, bm), (bm, b1)))

    # ------------------------------------------------------------------ nearest points, winding
    @cached_property
    def _kdtree(self):
        z = self._dense[1]
        return cKDTree(np.stack([z.real, z.imag], axis=-1))

    def closest_parameter(self, points):
        """Parameter of the nearest curve point for each point (Newton from the dense polygon)."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        pz = p[:, 0] + 1j * p[:, 1]
        tgrid, zgrid = self._dense
        dv, iv = self._kdtree.query(p)
        t0 = tgrid[iv]
        t = t0.copy()
        for _ in range(8):
            z = self.eval_complex(t)
            d1 = self.eval_complex(t, 1)
            d2 = self.eval_complex(t, 2)
            r = z - pz
            g = (np.conj(r) * d1).real
            h = np.abs(d1) ** 2 + (np.conj(r) * d2).real
            step = np.where(h > 0, g / np.where(h > 0, h, 1.0), 0.0)
            step = np.clip(step, -1.0 / zgrid.size, 1.0 / zgrid.size)
            t = t - step
        worse = np.abs(self.eval_complex(t) - pz) > dv
        t = np.where(worse, t0, t)
        return np.mod(t, 1.0)

    def distance(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        t = self.closest_parameter(p)
        return np.abs(self.eval_complex(t) - (p[:, 0] + 1j * p[:, 1]))

    @cached_property
    def _slab_index(self):
        n = max(8192, 64 * self.K)
        t = np.arange(n) / n
        z = self.eval_complex(t)
        vx, vy = np.ascontiguousarray(z.real), np.ascontiguousarray(z.imag)
        edges, start, y0, h = _kernels.build_slab_index(vx, vy, 512)
        sag = np.max(np.abs(self.eval_complex(t, 2))) / (8.0 * n * n)
        return vx, vy, edges, start, y0, h, sag

    def winding_numbers(self, points) -> np.ndarray:
        """Winding numbers of the curve around many points (fast polygon route).

        The polygon has at least 8192 vertices; only points closer to the
        curve than its sagitta (around 1e-7 of the curve size) can be
        misclassified.  Use :meth:`winding_number` for a certified answer.
        """
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        vx, vy, edges, start, y0, h, _ = self._slab_index
        return _kernels.winding_numbers_polygon(np.ascontiguousarray(p[:, 0]), np.ascontiguousarray(p[:, 1]),
                                                vx, vy, edges, start, y0, h)

    def winding_number(self, p) -> int:
        """Winding number around ``p`` (pair or complex); raises :class:`OnCurveError` on the curve."""
        if np.iscomplexobj(p):
            p = (complex(p).real, complex(p).imag)
        p = np.asarray(p, dtype=float).reshape(2)
        if not np.all(np.isfinite(p)):
            raise DomainError("non-finite point")
        dist = float(self.distance(p[None])[0])
        scale = max(1.0, self.bounding_disk[1])
        if dist < self.eps_on * scale:
            raise OnCurveError(f"point {p} lies on the curve (distance {dist:.2e})")
        d2max = np.max(np.abs(self.eval_complex(np.arange(1024) / 1024, 2)))
        # polygon fine enough that its sagitta stays below a quarter of the distance
        n = int(np.ceil(np.sqrt(d2max / (2.0 * dist)))) + 64
        if n > 1 << 22:
            raise OnCurveError(f"point {p} too close to the curve to certify its winding number")
        t = np.arange(n) / n
        z = self.eval_complex(t) - complex(p[0], p[1])
        dtheta = np.angle(np.roll(z, -1) / z)
        return int(np.rint(dtheta.sum() / TWO_PI))

    def inside(self, points) -> np.ndarray:
        """Boolean mask: points enclosed by the curve (odd winding number)."""
        return (self.winding_numbers(points) % 2) != 0

    # ------------------------------------------------------------------ lines
    def _grid_size(self) -> int:
        return max(64, 32 * self.K)

    def critical_points(self, phi):
        """Parameters where the height ``C(t).n(phi)`` is stationary, per direction.

        Returns ``(tc, hc)``, arrays of shape ``(len(phi), R)`` padded with NaN,
        sorted by parameter; ``n(phi) = (cos phi, sin phi)``.
        """
        phi = np.atleast_1d(np.asarray(phi, dtype=float))
        M = self._grid_size()
        tg = np.arange(M) / M
        d1 = self.eval_complex(tg, 1)
        nvec = np.exp(1j * phi)
        hp = (np.conj(nvec)[:, None] * d1[None, :]).real  # (B, M) derivative of height
        s0 = hp
        s1 = np.roll(hp, -1, axis=1)
        brk = (s0 == 0) | (np.sign(s0) != np.sign(s1))
        brk &= ~((s1 == 0) & (s0 != 0))
        rows, cols = np.nonzero(brk)
        lo = tg[cols]
        hi = lo + 1.0 / M
        nv = nvec[rows]

        def f(t, idx):
            a = (np.conj(nv[idx]) * self.eval_complex(t, 1)).real
            b = (np.conj(nv[idx]) * self.eval_complex(t, 2)).real
            return a, b

        tc = _bracket_solve(f, lo, hi)
        counts = np.bincount(rows, minlength=phi.size)
        R = int(counts.max()) if counts.size else 0
        out_t = np.full((phi.size, R), np.nan)
        offs = np.arange(rows.size) - np.repeat(np.cumsum(counts) - counts, counts)
        out_t[rows, offs] = np.mod(tc, 1.0)
        out_t = np.sort(out_t, axis=1)
        valid = np.isfinite(out_t)
        hz = self.eval_complex(np.where(valid, out_t, 0.0))
        out_h = np.where(valid, (np.conj(nvec)[:, None] * hz).real, np.nan)
        return out_t, out_h

    def crossings(self, p, phi, crit=None):
        """All parameters where the line ``{x : x.n(phi) = p}`` meets the curve.

        Roots are located on monotone branches of the height function between
        consecutive critical points, so no crossing is lost to grid
        resolution.  Returns ``(t, s)`` of shape ``(B, R)`` padded with NaN and
        sorted by ``s``, the coordinate along the line direction
        ``(-sin phi, cos phi)``.
        """
        p = np.atleast_1d(np.asarray(p, dtype=float))
        phi = np.broadcast_to(np.atleast_1d(np.asarray(phi, dtype=float)), p.shape)
        tc, hc = self.critical_points(phi) if crit is None else crit
        B, R = tc.shape
        if R == 0:
            return np.full((B, 0), np.nan), np.full((B, 0), np.nan)
        ncrit = np.sum(np.isfinite(tc), axis=1)
        # branch j runs from critical point j to j+1 (cyclically)
        j = np.arange(R)[None, :]
        nxt = np.where(j + 1 < ncrit[:, None], j + 1, 0)
        valid = j < ncrit[:, None]
        ta = np.where(valid, tc, 0.0)
        ha = np.where(valid, hc, 0.0)
        tb = np.take_along_axis(ta, nxt, axis=1)
        hb = np.take_along_axis(ha, nxt, axis=1)
        tb = np.where(tb <= ta, tb + 1.0, tb)
        pp = p[:, None]
        lo_h = np.minimum(ha, hb)
        hi_h = np.maximum(ha, hb)
        has = valid & (pp > lo_h) & (pp < hi_h)
        rows, cols = np.nonzero(has)
        nv = np.exp(1j * phi[rows])
        target = p[rows]

        def f(t, idx):
            z = self.eval_complex(t)
            d = self.eval_complex(t, 1)
            return (np.conj(nv[idx]) * z).real - target[idx], (np.conj(nv[idx]) * d).real

        roots = _bracket_solve(f, ta[rows, cols], tb[rows, cols])
        roots = np.mod(roots, 1.0)
        counts = np.bincount(rows, minlength=B)
        Rmax = int(counts.max()) if counts.size else 0
        t_out = np.full((B, Rmax), np.nan)
        offs = np.arange(rows.size) - np.repeat(np.cumsum(counts) - counts, counts)
        t_out[rows, offs] = roots
        z = self.eval_complex(np.where(np.isfinite(t_out), t_out, 0.0))
        e = 1j * np.exp(1j * phi)
        s_out = np.where(np.isfinite(t_out), (np.conj(e)[:, None] * z).real, np.nan)
        order = np.argsort(np.where(np.isfinite(s_out), s_out, np.inf), axis=1)
        return np.take_along_axis(t_out, order, axis=1), np.take_along_axis(s_out, order, axis=1)

    # ------------------------------------------------------------------ theta
    def theta_principal(self, tx, ty) -> np.ndarray:
        """Principal value in (-pi, pi] of the angle field, from closed-form geometry.

        On a circle through ``x`` and ``y`` the tangents at the two points make
        equal angles with the chord, so the tangent at ``x`` of the circle
        positively tangent to ``C`` at ``y`` has argument
        ``2 arg(x - y) - arg C'(t_y)``.
        """
        tx = np.asarray(tx, dtype=float)
        ty = np.asarray(ty, dtype=float)
        zx = self.eval_complex(tx)
        zy = self.eval_complex(ty)
        ax = np.angle(self.eval_complex(tx, 1))
        ay = np.angle(self.eval_complex(ty, 1))
        return _wrap(2.0 * np.angle(zx - zy) - ax - ay)

    def theta_rows(self, tx, s) -> np.ndarray:
        """Continuous angle on the grid ``tx`` x ``s`` (``s`` sorted in (0, 1)).

        Each row is unwrapped outward from the diagonal, where the angle is 0.
        Raises :class:`ThetaResolutionError` if adjacent nodes jump by pi/2 or
        more.
        """
        tx = np.asarray(tx, dtype=float)
        s = np.asarray(s, dtype=float)
        T = tx[:, None]
        P = self.theta_principal(np.broadcast_to(T, (tx.size, s.size)), T + s[None, :])
        P = np.where(np.minimum(s, 1.0 - s)[None, :] < NEAR_DIAGONAL, 0.0, P)
        full = np.concatenate([np.zeros((tx.size, 1)), P], axis=1)
        jumps = np.abs(_wrap(np.diff(full, axis=1)))
        if jumps.size and jumps.max() >= np.pi / 2:
            raise ThetaResolutionError(
                f"angle field jumps by {jumps.max():.3f} rad between adjacent nodes; refine the grid")
        return np.unwrap(full, axis=1)[:, 1:]

    def _build_theta_grid(self):
        n = 64
        while True:
            try:
                tx = np.arange(n) / n
                s = np.arange(1, n) / n
                G = self.theta_rows(tx, s)
                Gfull = np.concatenate([np.zeros((n, 1)), G, np.zeros((n, 1))], axis=1)
                # the far end of each row must return to the diagonal value
                end_jump = np.abs(G[:, -1] - 0.0)
                row_jump = np.abs(np.diff(np.vstack([Gfull, Gfull[:1]]), axis=0))
                if end_jump.max() < np.pi / 2 and row_jump.max() < np.pi / 2:
                    return n, Gfull
            except ThetaResolutionError:
                pass
            n *= 2
            if n > 4096:
                raise ThetaResolutionError("angle field could not be unwrapped on a 4096^2 grid")

    @property
    def theta_grid(self):
        """Cached ``(n, grid)`` of the unwrapped angle on ``tx = i/n``, ``s = j/n``."""
        if self._theta_grid is None:
            with self._lock:
                if self._theta_grid is None:
                    self._theta_grid = self._build_theta_grid()
        return self._theta_grid

    def theta(self, tx, ty):
        """Continuous angle field ``theta(C(tx), C(ty))``, zero on the diagonal."""
        tx = np.asarray(tx, dtype=float)
        ty = np.asarray(ty, dtype=float)
        tx, ty = np.broadcast_arrays(tx, ty)
        s = np.mod(ty - tx, 1.0)
        P = self.theta_principal(tx, ty)
        n, G = self.theta_grid
        u = np.mod(tx, 1.0) * n
        v = s * n
        i0 = np.floor(u).astype(int) % n
        j0 = np.minimum(np.floor(v).astype(int), n - 1)
        fu = u - np.floor(u)
        fv = v - j0
        i1 = (i0 + 1) % n
        ref = ((1 - fu) * (1 - fv) * G[i0, j0] + fu * (1 - fv) * G[i1, j0]
               + (1 - fu) * fv * G[i0, j0 + 1] + fu * fv * G[i1, j0 + 1])
        out = P + TWO_PI * np.rint((ref - P) / TWO_PI)
        out = np.where(np.minimum(s, 1.0 - s) < NEAR_DIAGONAL, 0.0, out)
        return out if out.ndim else float(out)

    # ------------------------------------------------------------------ misc
    def __repr__(self):
        return f"IdealCurve(K={self.K}, length={self.length:.6g}, {self.orientation_tag})"


def _bracket_solve(f, lo, hi, iters: int = 60):
    """Vectorised safeguarded Newton for a sign change of ``f`` on ``[lo, hi]``.

    ``f(t, idx)`` returns ``(value, derivative)`` for the brackets ``idx``.
    Each bracket must contain a sign change (or a zero at an end).  Converged
    entries drop out of the working set.
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    if lo.size == 0:
        return lo
    every = np.arange(lo.size)
    flo, _ = f(lo, every)
    fhi, _ = f(hi, every)
    # orient so that f(lo) <= 0 <= f(hi)
    swap = flo > fhi
    lo, hi = np.where(swap, hi, lo), np.where(swap, lo, hi)
    x = 0.5 * (lo + hi)
    act = every
    for _ in range(iters):
        xa, la, ha = x[act], lo[act], hi[act]
        fx, dfx = f(xa, act)
        neg = fx < 0
        la = np.where(neg, xa, la)
        ha = np.where(neg, ha, xa)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = xa - fx / dfx
        inside = np.isfinite(xn) & ((xn - la) * (xn - ha) < 0)
        xnew = np.where(inside, xn, 0.5 * (la + ha))
        done = (np.abs(xnew - xa) <= 4e-16 * np.maximum(1.0, np.abs(xa))) | (fx == 0) \
            | (np.abs(ha - la) <= 4e-16 * np.maximum(1.0, np.abs(xa)))
        x[act], lo[act], hi[act] = np.where(fx == 0, xa, xnew), la, ha
        act = act[~done]
        if act.size == 0:
            break
    return x


# ---------------------------------------------------------------------- factories
def circle(center=(0.0, 0.0), radius: float = 1.0, ccw: bool = True) -> IdealCurve:
    if not radius > 0:
        raise DomainError("circle radius must be positive")
    c = np.zeros(3, dtype=complex)
    c[1] = complex(center[0], center[1])
    c[2 if ccw else 0] = radius
    return IdealCurve(c)


def ellipse(a: float, b: float, center=(0.0, 0.0), angle: float = 0.0) -> IdealCurve:
    """Counterclockwise ellipse ``(a cos 2 pi t, b sin 2 pi t)``, rotated by ``angle``."""
    if not (a > 0 and b > 0):
        raise DomainError("ellipse semi-axes must be positive")
    rot = np.exp(1j * angle)
    c = np.array([0.5 * (a - b) * rot, complex(center[0], center[1]), 0.5 * (a + b) * rot])
    return IdealCurve(c)


def perturbed_circle(modes, radius: float = 1.0, center=(0.0, 0.0)) -> IdealCurve:
    """Radial perturbation ``r(t) = radius (1 + sum eps cos(2 pi k t + phase))``.

    ``modes`` is a list of ``(k, eps, phase)``; the result is a finite Fourier
    curve with harmonics up to ``max k + 1``.
    """
    K = max(k for k, _, _ in modes) + 1
    c = np.zeros(2 * K + 1, dtype=complex)
    c[K] = complex(center[0], center[1])
    c[K + 1] += radius
    for k, eps, ph in modes:
        # radius * eps * cos(k tau + ph) * e^{i tau}
        c[K + k + 1] += 0.5 * radius * eps * np.exp(1j * ph)
        c[K - k + 1] += 0.5 * radius * eps * np.exp(-1j * ph)
    return IdealCurve(c)


# ---------------------------------------------------------------------- predicates
def winding_number(c: IdealCurve, p) -> int:
    return c.winding_number(p)


def separation(c: IdealCurve, z, w) -> int:
    """``lambda^2`` of the geodesic with ideal endpoints ``z``, ``w``: 1 iff ``C`` separates them."""
    return int((c.winding_number(z) - c.winding_number(w)) % 2 != 0)


def tangent_circle(c: IdealCurve, t_y: float, x) -> OrientedCircleOrLine:
    """Oriented circle through ``x`` positively tangent to ``c`` at ``C(t_y)``.

    Degenerates to the tangent line at ``C(t_y)`` when ``x`` lies on it.
    """
    x = np.asarray(x, dtype=float).reshape(2)
    y = c.eval(t_y)
    u = c.tangent(t_y)
    d = x - y
    dd = float(d @ d)
    scale = max(1.0, float(np.abs(y).max()))
    if dd <= (1e-14 * scale) ** 2:
        raise DegenerateInputError("tangent_circle needs x different from the tangency point")
    nrm = np.array([-u[1], u[0]])  # left normal
    proj = float(nrm @ d)
    if abs(proj) <= 1e-12 * math.sqrt(dd):
        return OrientedCircleOrLine(point=y, direction=u)
    r_signed = dd / (2.0 * proj)
    center = y + r_signed * nrm
    return OrientedCircleOrLine(center=center, radius=abs(r_signed), orientation=1 if r_signed > 0 else -1)
