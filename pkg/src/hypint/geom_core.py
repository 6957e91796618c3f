"""Primitives of the upper half-space model of hyperbolic 3-space.

Points of the model are ``HPoint(x1, x2, x3)`` with ``x3 > 0``.  The ideal
boundary is the plane ``x3 = 0`` together with a point at infinity; its points
are ``BoundaryPoint`` values.  A complete geodesic is stored by its ordered
ideal endpoints, so a vertical line is a geodesic with one endpoint at
infinity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, DomainError

# relative threshold below which two shadows are treated as coincident
_VERTICAL_TOL = 1e-14


@dataclass(frozen=True)
class BoundaryPoint:
    """A point of the ideal boundary: ``(x, y)`` in the plane, or infinity."""

    x: float = 0.0
    y: float = 0.0
    at_infinity: bool = False

    def __post_init__(self):
        if not self.at_infinity and not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise DomainError(f"boundary point coordinates must be finite, got ({self.x}, {self.y})")

    @classmethod
    def infinity(cls) -> "BoundaryPoint":
        return cls(0.0, 0.0, True)

    @classmethod
    def from_complex(cls, z: complex) -> "BoundaryPoint":
        if not np.isfinite(z):
            return cls.infinity()
        return cls(float(z.real), float(z.imag))

    def to_complex(self) -> complex:
        return complex(math.inf, math.inf) if self.at_infinity else complex(self.x, self.y)

    def as_array(self) -> np.ndarray:
        if self.at_infinity:
            raise DomainError("the point at infinity has no planar coordinates")
        return np.array([self.x, self.y])

    def __eq__(self, other):
        if not isinstance(other, BoundaryPoint):
            return NotImplemented
        if self.at_infinity or other.at_infinity:
            return self.at_infinity and other.at_infinity
        return self.x == other.x and self.y == other.y

    def __hash__(self):
        return hash(("inf",)) if self.at_infinity else hash((self.x, self.y))


INFINITY = BoundaryPoint.infinity()


@dataclass(frozen=True)
class HPoint:
    x1: float
    x2: float
    x3: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.x1, self.x2, self.x3)):
            raise DomainError(f"non-finite point coordinates {(self.x1, self.x2, self.x3)}")
        if not self.x3 > 0:
            raise DomainError(f"half-space points need x3 > 0, got {self.x3}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.x2, self.x3])

    @property
    def shadow(self) -> BoundaryPoint:
        """Vertical projection to the boundary plane."""
        return BoundaryPoint(self.x1, self.x2)


def hyp_distance(p: HPoint, q: HPoint) -> float:
    """Hyperbolic distance between two points of the half-space model.

    Uses ``r = 2 asinh(|p - q| / (2 sqrt(p3 q3)))``, which equals the usual
    ``arcosh(1 + |p - q|^2 / (2 p3 q3))`` but has no cancellation for nearby
    points.
    """
    pa, qa = _as_point_array(p), _as_point_array(q)
    d = math.dist(pa, qa)
    return 2.0 * math.asinh(d / (2.0 * math.sqrt(pa[2] * qa[2])))


def hyp_distance_array(p, q):
    """Vectorised :func:`hyp_distance` for ``(..., 3)`` arrays."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
        raise DomainError("non-finite coordinates")
    if np.any(p[..., 2] <= 0) or np.any(q[..., 2] <= 0):
        raise DomainError("half-space points need x3 > 0")
    d = np.linalg.norm(p - q, axis=-1)
    return 2.0 * np.arcsinh(d / (2.0 * np.sqrt(p[..., 2] * q[..., 2])))


def _as_point_array(p) -> np.ndarray:
    if isinstance(p, HPoint):
        return p.as_array()
    a = np.asarray(p, dtype=float)
    if a.shape != (3,) or not np.all(np.isfinite(a)):
        raise DomainError(f"expected a finite 3-vector, got {p!r}")
    if a[2] <= 0:
        raise DomainError(f"half-space points need x3 > 0, got {a[2]}")
    return a


@dataclass(frozen=True)
class Geodesic:
    """Oriented complete geodesic, given by its ideal endpoints.

    Finite endpoints describe a Euclidean semicircle orthogonal to the
    boundary plane with ``center`` the midpoint and ``radius`` half the
    endpoint distance.  If one endpoint is ``INFINITY`` the geodesic is the
    vertical half-line over the other endpoint.
    """

    start: BoundaryPoint
    end: BoundaryPoint
    center: np.ndarray = field(init=False, repr=False, compare=False)
    radius: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.start == self.end:
            raise DegenerateInputError("geodesic endpoints must differ")
        if self.vertical:
            base = self.end if self.start.at_infinity else self.start
            object.__setattr__(self, "center", base.as_array())
            object.__setattr__(self, "radius", math.inf)
        else:
            a, b = self.start.as_array(), self.end.as_array()
            object.__setattr__(self, "center", 0.5 * (a + b))
            object.__setattr__(self, "radius", 0.5 * float(np.linalg.norm(b - a)))

    @property
    def vertical(self) -> bool:
        return self.start.at_infinity or self.end.at_infinity

    @property
    def direction(self) -> np.ndarray:
        """Unit horizontal direction from start to end (finite case only)."""
        if self.vertical:
            raise DomainError("vertical geodesics have no horizontal direction")
        d = self.end.as_array() - self.start.as_array()
        return d / np.linalg.norm(d)

    def reversed(self) -> "Geodesic":
        return Geodesic(self.end, self.start)


def geodesic_through(p: HPoint, q: HPoint) -> Geodesic:
    """The oriented geodesic visiting ``p`` first and then ``q``."""
    pa, qa = _as_point_array(p), _as_point_array(q)
    if np.array_equal(pa, qa):
        raise DegenerateInputError("geodesic_through needs two distinct points")
    delta = qa[:2] - pa[:2]
    d = float(np.hypot(*delta))
    scale = max(1.0, float(np.abs(pa).max()), float(np.abs(qa).max()))
    if d <= _VERTICAL_TOL * scale:
        base = BoundaryPoint(float(pa[0]), float(pa[1]))
        return Geodesic(base, INFINITY) if qa[2] > pa[2] else Geodesic(INFINITY, base)
    e = delta / d
    # center offset along e, measured from the shadow of p
    sc = (d * d + qa[2] ** 2 - pa[2] ** 2) / (2.0 * d)
    R = math.hypot(sc, pa[2])
    start = pa[:2] + (sc - R) * e
    end = pa[:2] + (sc + R) * e
    return Geodesic(BoundaryPoint(*map(float, start)), BoundaryPoint(*map(float, end)))


def geodesic_point(g: Geodesic, s: float) -> HPoint:
    """Point at signed hyperbolic arc length ``s`` along ``g``.

    The origin ``s = 0`` is the apex of a semicircle, or height 1 on a
    vertical line; ``s`` increases towards ``g.end``.
    """
    if g.vertical:
        x, y = g.center
        h = math.exp(s) if g.end.at_infinity else math.exp(-s)
        return HPoint(float(x), float(y), h)
    R = g.radius
    xy = g.center + R * math.tanh(s) * g.direction
    return HPoint(float(xy[0]), float(xy[1]), R / math.cosh(s))


def translate(p: HPoint, v) -> HPoint:
    """Horizontal translation (an isometry of the model)."""
    return HPoint(p.x1 + float(v[0]), p.x2 + float(v[1]), p.x3)


def dilate(p: HPoint, factor: float, about=(0.0, 0.0)) -> HPoint:
    """Dilation by ``factor`` about a boundary point (an isometry)."""
    ax, ay = float(about[0]), float(about[1])
    return HPoint(ax + factor * (p.x1 - ax), ay + factor * (p.x2 - ay), factor * p.x3)


class MobiusMap:
    """Fractional-linear map ``z -> (a z + b) / (c z + d)`` of the boundary.

    Coefficients are rescaled to unit determinant on construction.
    """

    det_eps = 1e-12

    def __init__(self, a, b, c, d):
        a, b, c, d = (complex(v) for v in (a, b, c, d))
        det = a * d - b * c
        if not all(np.isfinite(v) for v in (a, b, c, d)):
            raise DomainError("Mobius coefficients must be finite")
        if abs(det) < self.det_eps:
            raise DegenerateInputError(f"Mobius determinant {abs(det):.3g} below {self.det_eps}")
        s = np.sqrt(det)
        self.a, self.b, self.c, self.d = a / s, b / s, c / s, d / s

    @classmethod
    def identity(cls) -> "MobiusMap":
        return cls(1, 0, 0, 1)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])

    def __matmul__(self, other: "MobiusMap") -> "MobiusMap":
        """Composition ``self @ other`` applies ``other`` first."""
        m = self.matrix @ other.matrix
        return MobiusMap(m[0, 0], m[0, 1], m[1, 0], m[1, 1])

    def inverse(self) -> "MobiusMap":
        return MobiusMap(self.d, -self.b, -self.c, self.a)

    def pole(self) -> complex:
        """Boundary point sent to infinity (``inf`` for affine maps)."""
        return complex(math.inf, math.inf) if self.c == 0 else -self.d / self.c

    def __call__(self, z):
        """Apply to a complex scalar or array; non-finite input means infinity."""
        z = np.asarray(z, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            finite = np.isfinite(z)
            zz = np.where(finite, z, 0.0)
            num = self.a * zz + self.b
            den = self.c * zz + self.d
            out = np.where(den != 0, num / np.where(den != 0, den, 1.0), complex(math.inf, math.inf))
            at_inf = self.a / self.c if self.c != 0 else complex(math.inf, math.inf)
            out = np.where(finite, out, at_inf)
        return out if out.ndim else complex(out)

    def derivative(self, z):
        """Complex derivative ``1 / (c z + d)^2`` (unit determinant)."""
        z = np.asarray(z, dtype=complex)
        return 1.0 / (self.c * z + self.d) ** 2

    def __repr__(self):
        return f"MobiusMap(a={self.a:.6g}, b={self.b:.6g}, c={self.c:.6g}, d={self.d:.6g})"


def apply_mobius(m: MobiusMap, p: BoundaryPoint) -> BoundaryPoint:
    """Action of ``m`` on one boundary point, with the limit convention at poles."""
    return BoundaryPoint.from_complex(m(p.to_complex()))


def random_mobius(rng: np.random.Generator, keep_away: float, center=0j, min_pole_distance: float = 3.0) -> MobiusMap:
    """Random Mobius map whose pole lies far from the disk ``|z - center| <= keep_away``.

    Images of curves inside that disk stay bounded and well conditioned.
    The map is an inversion-type map composed with a random similarity.
    """
    ang = rng.uniform(0, 2 * np.pi)
    dist = keep_away * rng.uniform(min_pole_distance, 2 * min_pole_distance)
    pole = center + dist * np.exp(1j * ang)
    rot = np.exp(1j * rng.uniform(0, 2 * np.pi))
    scale = dist * rng.uniform(0.5, 2.0)
    shift = complex(*rng.normal(size=2))
    # z -> scale^2 * rot / (z - pole) followed by a shift, then normalised
    inv = MobiusMap(0, scale * scale * rot, 1, -pole)
    return MobiusMap(1, shift, 0, 1) @ inv
