"""Analytic surfaces in the half-space model.

Every surface is a chart ``(u, v) -> X(u, v)`` with exact first and second
derivatives, ``u`` periodic on ``[0, 1)`` (except the plane patch) and ``v``
in ``[v_lo, v_hi]``.  From these we get the hyperbolic extrinsic curvature,
hyperbolic area, truncations ``S_h = {x3 >= h}``, the geodesic curvature of
their boundaries, and triangle meshes.

The extrinsic curvature uses the conformal relation between Euclidean and
hyperbolic second fundamental forms:
``K = (x3 k1 + n3)(x3 k2 + n3) = det(x3 II + n3 I) / det(I)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .curves import IdealCurve
from .errors import BudgetError, DomainError, GenerationError
from .estimate import Estimate
from .geom_core import HPoint

TWO_PI = 2.0 * np.pi

# finite-difference step (in u) for boundary geodesic curvature
KG_STEP = 1.0 / 4096


def _gauss_panels(edges, order: int = 16):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.asarray(edges, dtype=float)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    return (mid[:, None] + half[:, None] * x).ravel(), (half[:, None] * w).ravel()


def _smoothstep(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1, with its derivative."""
    x = np.asarray(x, dtype=float)
    xc = np.clip(x, 1e-300, 1 - 1e-16)
    a = np.where(x > 0, np.exp(-1.0 / xc), 0.0)
    b = np.where(x < 1, np.exp(-1.0 / np.clip(1 - x, 1e-300, None)), 0.0)
    s = np.where(x <= 0, 0.0, np.where(x >= 1, 1.0, a / np.where(a + b > 0, a + b, 1.0)))
    # derivative: (a' b - a b') / (a + b)^2 with a' = a / x^2, b' = -b / (1-x)^2
    inside = (x > 0) & (x < 1)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        da = np.where(inside, a / xc ** 2, 0.0)
        db = np.where(inside, -b / np.clip(1 - xc, 1e-300, None) ** 2, 0.0)
        den = np.where(inside, (a + b) ** 2, 1.0)
        ds = np.where(inside & (den > 0), (da * b - a * db) / np.where(den > 0, den, 1.0), 0.0)
    return s, ds


@dataclass
class ParamSurface:
    """An analytic chart with exact derivatives.

    ``derivs(u, v)`` returns ``X, Xu, Xv, Xuu, Xuv, Xvv`` with shape
    ``(..., 3)``.  ``interior`` is +1 if the compact side of a truncation lies
    towards larger ``v`` (``-1`` otherwise); ``pole_lo``/``pole_hi`` flag chart
    ends that collapse to a point.
    """

    kind: str
    derivs_fn: object = field(repr=False)
    v_lo: float = 0.0
    v_hi: float = 1.0
    periodic_u: bool = True
    u_lo: float = 0.0
    u_hi: float = 1.0
    pole_lo: bool = False
    pole_hi: bool = False
    interior: int = 1
    end_curve: IdealCurve | None = None
    params: dict = field(default_factory=dict)
    v_breaks: tuple = ()
    height_fn: object = field(default=None, repr=False)
    outward: object = field(default=None, repr=False)

    def derivs(self, u, v):
        u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
        return self.derivs_fn(u, v)

    def point(self, u, v) -> np.ndarray:
        return self.derivs(u, v)[0]

    @property
    def compact(self) -> bool:
        return self.end_curve is None

    def fundamental_forms(self, u, v):
        X, Xu, Xv, Xuu, Xuv, Xvv = self.derivs(u, v)
        nrm = np.cross(Xu, Xv)
        ln = np.linalg.norm(nrm, axis=-1)
        if np.any(ln <= 1e-300):
            raise DomainError("degenerate first fundamental form")
        n = nrm / ln[..., None]
        E = np.sum(Xu * Xu, -1)
        F = np.sum(Xu * Xv, -1)
        G = np.sum(Xv * Xv, -1)
        L = np.sum(Xuu * n, -1)
        M = np.sum(Xuv * n, -1)
        N = np.sum(Xvv * n, -1)
        return X, n, (E, F, G), (L, M, N), ln

    def extrinsic_curvature(self, u, v):
        """Hyperbolic extrinsic (Gauss-Kronecker) curvature ``det(x3 II + n3 I) / det I``."""
        X, n, (E, F, G), (L, M, N), _ = self.fundamental_forms(u, v)
        x3, n3 = X[..., 2], n[..., 2]
        a = x3 * L + n3 * E
        b = x3 * M + n3 * F
        d = x3 * N + n3 * G
        return (a * d - b * b) / (E * G - F * F)

    def principal_hyperbolic(self, u, v):
        """Hyperbolic principal curvatures ``x3 k_i + n3`` (for second-form decay checks)."""
        X, n, (E, F, G), (L, M, N), _ = self.fundamental_forms(u, v)
        det = E * G - F * F
        H = (E * N - 2 * F * M + G * L) / (2 * det)
        Ke = (L * N - M * M) / det
        disc = np.sqrt(np.maximum(H * H - Ke, 0.0))
        x3, n3 = X[..., 2], n[..., 2]
        return x3 * (H + disc) + n3, x3 * (H - disc) + n3

    def area_density(self, u, v):
        """Hyperbolic area density ``|Xu x Xv| / x3^2`` with respect to ``du dv``."""
        X, Xu, Xv = self.derivs(u, v)[:3]
        return np.linalg.norm(np.cross(Xu, Xv), axis=-1) / X[..., 2] ** 2

    def height(self, v):
        """``x3`` along the chart as a function of ``v`` (surfaces used for truncation only)."""
        if self.height_fn is None:
            raise DomainError(f"{self.kind} has no height function")
        return self.height_fn(np.asarray(v, dtype=float))

    def v_at_height(self, h: float) -> float:
        """Chart value ``v`` where ``x3 = h`` (x3 is monotone in ``v`` for truncatable kinds)."""
        if self.height_fn is None:
            raise DomainError(f"{self.kind} cannot be truncated")
        lo, hi = self.v_lo, self.v_hi
        flo, fhi = float(self.height(lo)) - h, float(self.height(hi)) - h
        if flo * fhi > 0:
            raise DomainError(f"height {h} outside the surface's range")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            fm = float(self.height(mid)) - h
            if fm == 0 or hi - lo < 1e-15 * max(1.0, abs(mid)):
                break
            if (fm > 0) == (fhi > 0):
                hi, fhi = mid, fm
            else:
                lo, flo = mid, fm
        return 0.5 * (lo + hi)


# ---------------------------------------------------------------------- generators
def make_hemisphere(center=(0.0, 0.0), radius: float = 1.0) -> ParamSurface:
    """Hemisphere orthogonal to the boundary plane (a totally geodesic plane).

    ``u`` is the azimuth / 2 pi, ``v`` the polar angle from the top, in
    ``[0, pi/2)``; the end curve is the circle ``|x - center| = radius``.
    """
    if not radius > 0:
        raise DomainError("radius must be positive")
    cx, cy = float(center[0]), float(center[1])
    R = float(radius)

    def derivs(u, v):
        az = TWO_PI * u
        ca, sa = np.cos(az), np.sin(az)
        cv, sv = np.cos(v), np.sin(v)
        z = np.zeros_like(u)
        X = np.stack([cx + R * sv * ca, cy + R * sv * sa, R * cv], -1)
        Xu = np.stack([-TWO_PI * R * sv * sa, TWO_PI * R * sv * ca, z], -1)
        Xv = np.stack([R * cv * ca, R * cv * sa, -R * sv], -1)
        Xuu = np.stack([-TWO_PI ** 2 * R * sv * ca, -TWO_PI ** 2 * R * sv * sa, z], -1)
        Xuv = np.stack([-TWO_PI * R * cv * sa, TWO_PI * R * cv * ca, z], -1)
        Xvv = np.stack([-R * sv * ca, -R * sv * sa, -R * cv], -1)
        return X, Xu, Xv, Xuu, Xuv, Xvv

    from .curves import circle

    return ParamSurface("hemisphere", derivs, 0.0, 0.5 * np.pi, pole_lo=True, interior=-1,
                        end_curve=circle((cx, cy), R), params={"center": (cx, cy), "radius": R},
                        height_fn=lambda v: R * np.cos(v),
                        outward=lambda X: X - np.array([cx, cy, 0.0]))


def make_geodesic_sphere(center: HPoint, rho: float) -> ParamSurface:
    """Geodesic sphere of hyperbolic radius ``rho``: a Euclidean sphere of center
    height ``c3 cosh rho`` and radius ``c3 sinh rho``."""
    if not rho > 0:
        raise DomainError("rho must be positive")
    c = np.array([center.x1, center.x2, center.x3 * math.cosh(rho)])
    r = center.x3 * math.sinh(rho)

    def derivs(u, v):
        az = TWO_PI * u
        ca, sa = np.cos(az), np.sin(az)
        cv, sv = np.cos(v), np.sin(v)
        z = np.zeros_like(u)
        X = np.stack([c[0] + r * sv * ca, c[1] + r * sv * sa, c[2] + r * cv], -1)
        Xu = np.stack([-TWO_PI * r * sv * sa, TWO_PI * r * sv * ca, z], -1)
        Xv = np.stack([r * cv * ca, r * cv * sa, -r * sv], -1)
        Xuu = np.stack([-TWO_PI ** 2 * r * sv * ca, -TWO_PI ** 2 * r * sv * sa, z], -1)
        Xuv = np.stack([-TWO_PI * r * cv * sa, TWO_PI * r * cv * ca, z], -1)
        Xvv = np.stack([-r * sv * ca, -r * sv * sa, -r * cv], -1)
        return X, Xu, Xv, Xuu, Xuv, Xvv

    return ParamSurface("geodesic-sphere", derivs, 0.0, np.pi, pole_lo=True, pole_hi=True,
                        params={"center": (center.x1, center.x2, center.x3), "rho": rho},
                        outward=lambda X: X - c)


def make_vertical_plane_patch(point=(0.0, 0.0), direction=(1.0, 0.0), half_width: float = 1.0,
                              heights=(0.25, 4.0)) -> ParamSurface:
    """Rectangle in a vertical plane: ``X = (p + u d, v)``, ``u`` in ``[-w, w]``."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    p = np.asarray(point, dtype=float)

    def derivs(u, v):
        z = np.zeros_like(u)
        X = np.stack([p[0] + u * d[0], p[1] + u * d[1], v], -1)
        Xu = np.stack([d[0] + z, d[1] + z, z], -1)
        Xv = np.stack([z, z, 1.0 + z], -1)
        zero = np.zeros(u.shape + (3,))
        return X, Xu, Xv, zero, zero, zero

    return ParamSurface("vertical-plane-patch", derivs, heights[0], heights[1], periodic_u=False,
                        u_lo=-half_width, u_hi=half_width, params={"point": tuple(p), "direction": tuple(d)},
                        height_fn=lambda v: v)


def make_spherical_cap(beta: float, radius: float = 1.0, center=(0.0, 0.0)) -> ParamSurface:
    """Spherical cap meeting the boundary plane at angle ``beta`` (radians).

    Euclidean sphere of radius ``R`` centered at height ``-R cos(beta)``; the
    cap is the part above the plane, polar angle ``v`` in ``[0, beta)``.  It
    is an equidistant surface of a geodesic plane, not orthogonal to the
    boundary unless ``beta = pi/2``.
    """
    if not 0 < beta < np.pi:
        raise DomainError("beta must lie in (0, pi)")
    R = float(radius)
    c = np.array([center[0], center[1], -R * math.cos(beta)])

    def derivs(u, v):
        az = TWO_PI * u
        ca, sa = np.cos(az), np.sin(az)
        cv, sv = np.cos(v), np.sin(v)
        z = np.zeros_like(u)
        X = np.stack([c[0] + R * sv * ca, c[1] + R * sv * sa, c[2] + R * cv], -1)
        Xu = np.stack([-TWO_PI * R * sv * sa, TWO_PI * R * sv * ca, z], -1)
        Xv = np.stack([R * cv * ca, R * cv * sa, -R * sv], -1)
        Xuu = np.stack([-TWO_PI ** 2 * R * sv * ca, -TWO_PI ** 2 * R * sv * sa, z], -1)
        Xuv = np.stack([-TWO_PI * R * cv * sa, TWO_PI * R * cv * ca, z], -1)
        Xvv = np.stack([-R * sv * ca, -R * sv * sa, -R * cv], -1)
        return X, Xu, Xv, Xuu, Xuv, Xvv

    from .curves import circle

    return ParamSurface("spherical-cap", derivs, 0.0, beta, pole_lo=True, interior=-1,
                        end_curve=circle((center[0], center[1]), R * math.sin(beta)),
                        params={"beta": beta, "radius": R},
                        height_fn=lambda v: c[2] + R * np.cos(v),
                        outward=lambda X: X - c)


class _CapProfile:
    """Profile ``(rho(v), z(v))`` of the capped cylinder.

    Wall: ``rho = 1``, ``z = v`` for ``v <= z0``.  Blend over ``[z0, z0 + w]``:
    ``z' = 1 - S``, ``rho' = -S / w`` with ``S`` a C-infinity step.  Top:
    ``z = H`` constant and ``rho`` linear down to 0 at ``v_end = z0 + 3w/2``,
    where ``H = z0 + w/2``.
    """

    def __init__(self, cap_height: float, blend: float):
        if not (cap_height > 0 and 0 < blend < 1):
            raise DomainError("need cap_height > 0 and blend in (0, 1)")
        self.H = float(cap_height)
        self.w = 2.0 * blend * self.H
        self.z0 = self.H - 0.5 * self.w
        self.v_end = self.z0 + 1.5 * self.w
        self._gx, self._gw = np.polynomial.legendre.leggauss(48)

    def _int_S(self, v):
        """``int_{z0}^{v} S`` for ``v`` in the blend, by Gauss-Legendre on sub-intervals."""
        v = np.asarray(v, dtype=float)
        a = self.z0
        b = np.clip(v, self.z0, self.z0 + self.w)
        half = 0.5 * (b - a)
        mid = 0.5 * (b + a)
        nodes = mid[..., None] + half[..., None] * self._gx
        S, _ = _smoothstep((nodes - self.z0) / self.w)
        return half * np.sum(S * self._gw, axis=-1)

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        x = (v - self.z0) / self.w
        S, dS = _smoothstep(x)
        dS = dS / self.w
        IS = self._int_S(v) + np.maximum(v - (self.z0 + self.w), 0.0)
        z = np.minimum(v, self.z0) + (np.clip(v, self.z0, None) - self.z0) - IS
        rho = 1.0 - IS / self.w
        return rho, -S / self.w, -dS / self.w, z, 1.0 - S, -dS


def make_capped_cylinder(c: IdealCurve, cap_height: float = 10.0, blend: float = 0.5) -> ParamSurface:
    """Vertical cylinder over ``c`` closed by a smoothly blended flat top.

    ``X(t, v) = c0 + rho(v) (C(t) - c0)`` horizontally and ``x3 = z(v)``,
    with ``c0`` the curve's mean point (the curve must be star-shaped about
    it).  The wall is exactly vertical up to ``cap_height (1 - blend)``; the
    top is the horizontal region at height ``cap_height`` bounded by a scaled
    copy of ``c``.
    """
    prof = _CapProfile(cap_height, blend)
    c0 = c.coeffs[c.K]
    t = np.arange(4096) / 4096
    rel = c.eval_complex(t) - c0
    star = (np.conj(rel) * c.eval_complex(t, 1)).imag
    if not (np.all(star > 0) or np.all(star < 0)):
        raise GenerationError("curve is not star-shaped about its mean point; capped cylinder would self-intersect")

    def derivs(u, v):
        Cz = c.eval_complex(u) - c0
        C1 = c.eval_complex(u, 1)
        C2 = c.eval_complex(u, 2)
        # the profile is costly; tensor grids repeat v across u
        vu, inv = np.unique(v, return_inverse=True)
        rho, drho, d2rho, z, dz, d2z = (q[inv].reshape(v.shape) for q in prof(vu))
        hx = c0 + rho * Cz
        X = np.stack([hx.real, hx.imag, z], -1)
        Xu = np.stack([(rho * C1).real, (rho * C1).imag, np.zeros_like(z)], -1)
        Xv = np.stack([(drho * Cz).real, (drho * Cz).imag, dz], -1)
        Xuu = np.stack([(rho * C2).real, (rho * C2).imag, np.zeros_like(z)], -1)
        Xuv = np.stack([(drho * C1).real, (drho * C1).imag, np.zeros_like(z)], -1)
        Xvv = np.stack([(d2rho * Cz).real, (d2rho * Cz).imag, d2z], -1)
        return X, Xu, Xv, Xuu, Xuv, Xvv

    def outward(X):
        out = np.zeros_like(X)
        out[..., 0] = X[..., 0] - c0.real
        out[..., 1] = X[..., 1] - c0.imag
        out[..., 2] = np.where(X[..., 2] >= prof.z0, X[..., 2] - prof.z0, 0.0)
        return out

    surf = ParamSurface("capped-cylinder", derivs, 0.0, prof.v_end, pole_hi=True, interior=1,
                        end_curve=c, params={"cap_height": prof.H, "blend": blend, "wall_top": prof.z0},
                        v_breaks=(prof.z0, prof.z0 + prof.w),
                        height_fn=lambda v: prof(v)[3], outward=outward)
    surf.profile = prof
    surf.center = c0
    return surf


# ---------------------------------------------------------------------- quadrature
def _v_edges(s: ParamSurface, a: float, b: float, panels: int):
    brk = sorted({a, b, *[x for x in s.v_breaks if a < x < b]})
    edges = []
    for lo, hi in zip(brk[:-1], brk[1:]):
        k = max(1, int(round(panels * (hi - lo) / (b - a))))
        edges.append(np.linspace(lo, hi, k + 1)[:-1])
    edges.append([brk[-1]])
    return np.concatenate(edges)


def _integrate_chart(s: ParamSurface, fn, a: float, b: float, tol: float, grade: float | None,
                     max_nodes: int = 1 << 24):
    """``int fn(u, v) du dv`` over ``u`` in one period and ``v`` in ``[a, b]``.

    Periodic trapezoid in ``u``, composite Gauss-Legendre in ``v``.  With
    ``grade`` the ``v`` panels shrink geometrically (down to that fraction of
    the interval) toward the boundary end of the chart.  The two directions
    are refined independently until each doubling changes the value by less
    than ``tol`` (relative to max(1, |I|)).
    """

    def rule(n_u, panels):
        if s.periodic_u:
            u = s.u_lo + (s.u_hi - s.u_lo) * np.arange(n_u) / n_u
            wu = np.full(n_u, (s.u_hi - s.u_lo) / n_u)
        else:
            u, wu = _gauss_panels(np.linspace(s.u_lo, s.u_hi, max(1, n_u // 16) + 1))
        if grade:
            end = a if s.interior > 0 else b
            other = b if s.interior > 0 else a
            frac = np.concatenate([[0.0], np.geomspace(grade, 1.0, panels)])
            pts = end + (other - end) * frac
            edges = np.unique(np.concatenate([pts, _v_edges(s, a, b, panels)]))
        else:
            edges = _v_edges(s, a, b, panels)
        v, wv = _gauss_panels(edges)
        total = 0.0
        step = max(1, (1 << 18) // len(v))
        for i in range(0, len(u), step):
            U, V = np.meshgrid(u[i:i + step], v, indexing="ij")
            total += float(wu[i:i + step] @ fn(U, V) @ wv)
        return total, len(u) * len(v)

    n_u, panels = 32, 8
    cur, nodes = rule(n_u, panels)
    while True:
        scale = tol * max(1.0, abs(cur))
        iu, _ = rule(2 * n_u, panels)
        iv, nodes = rule(n_u, 2 * panels)
        du, dv = abs(iu - cur), abs(iv - cur)
        if du <= scale and dv <= scale:
            best = iv if dv >= du else iu
            return best, du + dv, nodes
        if du > scale:
            n_u *= 2
        if dv > scale:
            panels *= 2
        if n_u * panels * 32 > max_nodes:
            raise BudgetError(f"chart quadrature did not converge to {tol:g}")
        cur, nodes = rule(n_u, panels)


def total_curvature(s, tol: float = 1e-8) -> Estimate:
    """``int K dS`` by tensor quadrature over the chart (``s`` a surface or a truncation)."""
    surf, a, b, graded = _domain(s)
    val, err, nodes = _integrate_chart(surf, lambda u, v: surf.extrinsic_curvature(u, v) * surf.area_density(u, v),
                                       a, b, tol, graded)
    return Estimate(val, err, nodes, "quadrature")


def total_abs_curvature(s, tol: float = 1e-8) -> Estimate:
    surf, a, b, graded = _domain(s)
    val, err, nodes = _integrate_chart(surf, lambda u, v: np.abs(surf.extrinsic_curvature(u, v)) * surf.area_density(u, v),
                                       a, b, tol, graded)
    return Estimate(val, err, nodes, "quadrature")


@dataclass
class Truncation:
    """The compact part ``S_h = {x in S : x3 >= h}`` of a surface with a cone-like end."""

    parent: ParamSurface
    h: float

    def __post_init__(self):
        if not self.h > 0:
            raise DomainError("truncation height must be positive")
        if self.parent.height_fn is None:
            raise DomainError(f"{self.parent.kind} cannot be truncated")
        self.v_h = self.parent.v_at_height(self.h)

    @property
    def v_range(self):
        p = self.parent
        return (self.v_h, p.v_hi) if p.interior > 0 else (p.v_lo, self.v_h)

    def boundary_curve(self) -> IdealCurve | None:
        """Horizontal boundary curve ``C_h`` as a planar curve (for capped cylinders: the end curve)."""
        p = self.parent
        if p.kind == "capped-cylinder" and self.h <= p.params["wall_top"]:
            return p.end_curve
        if p.kind in ("hemisphere", "spherical-cap"):
            from .curves import circle

            X = p.point(0.0, self.v_h)
            cx, cy = p.params.get("center", (0.0, 0.0))
            return circle((cx, cy), float(math.hypot(X[0] - cx, X[1] - cy)))
        return None


def truncate(s: ParamSurface, h: float) -> Truncation:
    return Truncation(s, h)


def _domain(s):
    """Chart, ``v`` interval and panel grading for a surface or truncation."""
    if isinstance(s, Truncation):
        a, b = s.v_range
        return s.parent, a, b, 1e-4
    if s.end_curve is not None:
        return s, s.v_lo, s.v_hi, 1e-12
    return s, s.v_lo, s.v_hi, None


def area(s, tol: float = 1e-10) -> float:
    """Hyperbolic area of a truncation or compact surface."""
    return area_estimate(s, tol).value


def area_estimate(s, tol: float = 1e-10) -> Estimate:
    if isinstance(s, ParamSurface) and s.end_curve is not None:
        raise DomainError("surfaces with a cone-like end have infinite area; truncate first")
    surf, a, b, graded = _domain(s)
    val, err, nodes = _integrate_chart(surf, surf.area_density, a, b, tol, graded)
    return Estimate(val, err, nodes, "quadrature")


def boundary_kg_density(t: Truncation, u):
    """``k_g ds / du`` along the boundary of a truncation, by finite differences.

    Uses the covariant acceleration of the half-space metric,
    ``(D_t g')^k = g''^k - (2/x3) g'^k g'^3 + (1/x3)|g'|^2 delta_k3``, projected
    on the Euclidean unit conormal ``nu`` pointing into ``S_h``:
    ``k_g ds = (D_t g' . nu) / |g'| du`` (conformal factors cancel).
    """
    s = t.parent
    u = np.asarray(u, dtype=float)
    d = KG_STEP
    v = np.full_like(u, t.v_h)
    P0 = s.point(u, v)
    Pp, Pm = s.point(u + d, v), s.point(u - d, v)
    Pp2, Pm2 = s.point(u + 2 * d, v), s.point(u - 2 * d, v)
    # fourth-order central differences
    g1 = (Pm2 - 8 * Pm + 8 * Pp - Pp2) / (12 * d)
    g2 = (-Pm2 + 16 * Pm - 30 * P0 + 16 * Pp - Pp2) / (12 * d * d)
    x3 = P0[..., 2]
    sq = np.sum(g1 * g1, -1)
    acc = g2 - (2.0 / x3)[..., None] * g1 * g1[..., 2:3]
    acc[..., 2] += sq / x3
    _, Xu, Xv = s.derivs(u, v)[:3]
    n = np.cross(Xu, Xv)
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    tan = g1 / np.sqrt(sq)[..., None]
    nu = np.cross(n, tan)
    # orient nu into the compact side (direction of increasing interior v)
    sgn = np.sign(np.sum(nu * Xv, -1)) * s.interior
    nu *= sgn[..., None]
    return np.sum(acc * nu, -1) / np.sqrt(sq)


def geodesic_curvature_integral(t: Truncation, tol: float = 1e-10) -> float:
    return geodesic_curvature_estimate(t, tol).value


def geodesic_curvature_estimate(t: Truncation, tol: float = 1e-10) -> Estimate:
    """``int_{C_h} k_g ds`` by the periodic trapezoid rule, doubled until converged."""
    n = 64
    prev = float(np.mean(boundary_kg_density(t, np.arange(n) / n)))
    while True:
        n *= 2
        cur = float(np.mean(boundary_kg_density(t, np.arange(n) / n)))
        # the finite-difference error is O(step^4) relative; report it alongside
        if abs(cur - prev) <= tol or n > 1 << 16:
            fd = abs(cur) * (2 * np.pi * KG_STEP) ** 4 + abs(cur) * 1e-16 / KG_STEP ** 2
            return Estimate(cur, abs(cur - prev) + fd, n, "quadrature")
        prev = cur


def max_second_form(t: Truncation, n: int = 256) -> float:
    """``max |II|`` (largest |hyperbolic principal curvature - umbilic part|) on the boundary ``C_h``.

    For a cone-like end the traceless part of the hyperbolic second
    fundamental form decays like ``O(x3)``; we report the largest principal
    curvature magnitude of ``II`` measured in the hyperbolic metric.
    """
    u = np.arange(n) / n
    k1, k2 = t.parent.principal_hyperbolic(u, np.full(n, t.v_h))
    return float(np.max(np.maximum(np.abs(k1), np.abs(k2))))


# ---------------------------------------------------------------------- meshes
@dataclass
class MeshedSurface:
    """Indexed triangle mesh with consistently oriented faces."""

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_loops: list = field(default_factory=list)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64)
        if np.any(self.vertices[:, 2] <= 0):
            raise GenerationError("mesh vertices must lie in the upper half-space")

    @property
    def euler_char(self) -> int:
        return euler_characteristic(self)

    def edges(self):
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        return e

    def validate(self):
        """Check manifold-with-boundary structure and consistent orientation."""
        e = self.edges()
        key = np.sort(e, axis=1)
        uniq, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        if np.any(counts > 2):
            raise GenerationError("edge shared by more than two triangles")
        # a consistently oriented interior edge appears once in each direction
        directed, dcounts = np.unique(e, axis=0, return_counts=True)
        if np.any(dcounts > 1):
            raise GenerationError("inconsistent triangle orientation")
        bnd = uniq[counts == 1]
        deg = np.bincount(bnd.ravel(), minlength=len(self.vertices))
        if np.any((deg != 0) & (deg != 2)):
            raise GenerationError("boundary edges do not form closed loops")
        return True

    def triangle_normals(self):
        v = self.vertices
        t = self.triangles
        return np.cross(v[t[:, 1]] - v[t[:, 0]], v[t[:, 2]] - v[t[:, 0]])

    def euclidean_area(self) -> float:
        return float(0.5 * np.sum(np.linalg.norm(self.triangle_normals(), axis=1)))

    def hyperbolic_area(self, order: int = 6) -> float:
        """``int dA / x3^2`` over the flat triangles (Dunavant-free: symmetric Gauss points)."""
        v = self.vertices
        t = self.triangles
        A = 0.5 * np.linalg.norm(self.triangle_normals(), axis=1)
        # 6-point degree-4 rule on the reference triangle
        a1, a2 = 0.445948490915965, 0.091576213509771
        w1, w2 = 0.223381589678011, 0.109951743655322
        bary = np.array([[a1, a1, 1 - 2 * a1], [a1, 1 - 2 * a1, a1], [1 - 2 * a1, a1, a1],
                         [a2, a2, 1 - 2 * a2], [a2, 1 - 2 * a2, a2], [1 - 2 * a2, a2, a2]])
        w = np.array([w1, w1, w1, w2, w2, w2])
        z = v[t][:, :, 2]
        zq = z @ bary.T
        return float(np.sum(A * ((1.0 / zq ** 2) @ w)))

    def export(self, path):
        """Plain-text indexed triangle list: ``v x y z`` then ``f i j k`` (0-based), one per line."""
        lines = [f"v {x:.17g} {y:.17g} {z:.17g}" for x, y, z in self.vertices]
        lines += [f"f {i} {j} {k}" for i, j, k in self.triangles]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "MeshedSurface":
        vs, fs = [], []
        for line in Path(path).read_text().splitlines():
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                vs.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                fs.append([int(x) for x in parts[1:4]])
        m = cls(np.array(vs), np.array(fs, dtype=np.int64))
        m.boundary_loops = _boundary_loops(m)
        return m


def euler_characteristic(m: MeshedSurface) -> int:
    key = np.unique(np.sort(m.edges(), axis=1), axis=0)
    return int(len(m.vertices) - len(key) + len(m.triangles))


def _boundary_loops(m: MeshedSurface):
    e = m.edges()
    key = np.sort(e, axis=1)
    uniq, counts = np.unique(key, axis=0, return_counts=True)
    bset = {tuple(k) for k in uniq[counts == 1]}
    nxt = {}
    for a, b in e:
        if (min(a, b), max(a, b)) in bset:
            nxt[int(a)] = int(b)
    loops, seen = [], set()
    for start in nxt:
        if start in seen:
            continue
        loop = [start]
        seen.add(start)
        cur = nxt[start]
        while cur != start:
            loop.append(cur)
            seen.add(cur)
            cur = nxt[cur]
        loops.append(loop)
    return loops


def _v_nodes(s: ParamSurface, a: float, b: float, n: int) -> np.ndarray:
    """``n + 1`` nodes in ``[a, b]`` equidistributing a blend of Euclidean and hyperbolic length."""
    v = np.linspace(a, b, 4097)
    vm = 0.5 * (v[1:] + v[:-1])
    X, _, Xv = s.derivs(np.zeros_like(vm), vm)[:3]
    lv = np.linalg.norm(Xv, axis=-1)
    scale = max(1e-12, float(np.ptp(s.point(np.array([0.0, 0.25, 0.5, 0.75]), np.full(4, 0.5 * (a + b))), axis=0).max()))
    dens = lv * (1.0 / X[..., 2] + 1.0 / scale)
    cum = np.concatenate([[0.0], np.cumsum(dens * np.diff(v))])
    return np.interp(np.linspace(0, cum[-1], n + 1), cum, v)


def mesh(s, resolution: int = 64, n_v: int | None = None, v_range=None) -> MeshedSurface:
    """Triangulate a compact surface or a truncation.

    ``resolution`` vertices around ``u``; ``n_v`` (default ``resolution // 2``)
    rows in ``v``, placed to equidistribute a mix of Euclidean and hyperbolic
    length.  Chart ends that collapse to a point become a single vertex.
    Faces are oriented so their normals agree with the surface's outward
    direction.
    """
    if isinstance(s, Truncation):
        surf = s.parent
        a, b = s.v_range
    elif v_range is not None:
        surf = s
        a, b = v_range
    else:
        if s.end_curve is not None:
            raise GenerationError("cannot mesh a cone-like end down to the boundary; truncate first")
        surf, a, b = s, s.v_lo, s.v_hi
    if resolution < 8:
        raise GenerationError("resolution too coarse (need at least 8)")
    n_u = resolution
    n_v = n_v or max(4, resolution // 2)
    pole_a = (a == surf.v_lo and surf.pole_lo) or (a == surf.v_hi and surf.pole_hi)
    pole_b = (b == surf.v_hi and surf.pole_hi) or (b == surf.v_lo and surf.pole_lo)
    vs = _v_nodes(surf, a, b, n_v)
    u = np.arange(n_u) / n_u if surf.periodic_u else np.linspace(surf.u_lo, surf.u_hi, n_u)
    rows = []
    verts = []
    idx = 0
    for j, vj in enumerate(vs):
        if (j == 0 and pole_a) or (j == len(vs) - 1 and pole_b):
            verts.append(surf.point(np.array([0.0]), np.array([vj])))
            rows.append(np.array([idx]))
            idx += 1
        else:
            verts.append(surf.point(u, np.full(n_u, vj)))
            rows.append(np.arange(idx, idx + n_u))
            idx += n_u
    V = np.concatenate(verts)
    tris = []
    per = surf.periodic_u
    for j in range(len(rows) - 1):
        r0, r1 = rows[j], rows[j + 1]
        m = n_u if per else n_u - 1
        for i in range(m):
            i1 = (i + 1) % n_u
            if r0.size == 1:
                tris.append([r0[0], r1[i1], r1[i]])
            elif r1.size == 1:
                tris.append([r0[i], r0[i1], r1[0]])
            else:
                tris.append([r0[i], r0[i1], r1[i1]])
                tris.append([r0[i], r1[i1], r1[i]])
    T = np.array(tris, dtype=np.int64)
    msh = MeshedSurface(V, T)
    # orientation: compare with the chart normal / outward direction on a mid-row face
    nrm = msh.triangle_normals()
    cen = V[T].mean(axis=1)
    if surf.outward is not None:
        ref = surf.outward(cen)
    else:
        uu = np.zeros(len(cen))
        _, Xu, Xv = surf.derivs(uu, np.full(len(cen), 0.5 * (a + b)))[:3]
        ref = np.cross(Xu, Xv)
    score = np.sum(np.sum(nrm * ref, axis=1))
    if score < 0:
        msh.triangles = msh.triangles[:, ::-1].copy()
    if np.min(np.linalg.norm(msh.triangle_normals(), axis=1)) <= 0:
        raise GenerationError("degenerate triangle; resolution too coarse for this surface")
    msh.boundary_loops = _boundary_loops(msh)
    return msh
