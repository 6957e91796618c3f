"""Integrals over the boundary plane attached to an ideal curve.

* ``ideal_defect``  -- the conformally invariant double integral of
  ``theta sin(theta) / |y - x|^2`` over ``C x C``;
* ``nt_defect``     -- the same number as ``4 * int dz dw / |z - w|^4`` over
  point pairs of the enclosed domain that no circle inside the domain joins;
* ``chord_functional`` -- a line-space integral of signed inverse chord lengths;
* ``franklin``      -- ``int dL / sigma(L cap Omega)`` for convex domains.

For a simple closed curve these satisfy
``ideal_defect = nt_defect = 2 * chord_functional - 2 pi^2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.stats import qmc

from .curves import IdealCurve
from .errors import BudgetError, DomainError
from .estimate import CHUNK, Estimate, chunk_rngs, mc_mean

# relative tolerance for treating a line as tangent to the curve, and the jitter applied
GRAZE_TOL = 1e-9
GRAZE_JITTER = 1e-7
# independent scrambled Sobol replicates per stratum (error bars come from their spread)
N_REPLICATES = 8


@dataclass(frozen=True)
class PlanarLine:
    """Unoriented line ``{x : x . (cos phi, sin phi) = p}`` with ``phi`` in ``[0, pi)``."""

    p: float
    phi: float

    def __post_init__(self):
        if not (0.0 <= self.phi < math.pi) or not math.isfinite(self.p):
            raise DomainError(f"need finite p and phi in [0, pi), got p={self.p}, phi={self.phi}")

    @classmethod
    def normalized(cls, p: float, phi: float) -> "PlanarLine":
        """Same line with ``phi`` reduced to ``[0, pi)``."""
        k = math.floor(phi / math.pi)
        phi = phi - k * math.pi
        if phi >= math.pi:
            phi = 0.0
        return cls(p if k % 2 == 0 else -p, phi)

    @property
    def normal(self) -> np.ndarray:
        return np.array([math.cos(self.phi), math.sin(self.phi)])

    @property
    def direction(self) -> np.ndarray:
        return np.array([-math.sin(self.phi), math.cos(self.phi)])


# ---------------------------------------------------------------------- ideal defect
def _gauss_panels(a: float, b: float, panels: int, order: int = 8):
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def defect_integrand(c: IdealCurve, tx, ty) -> np.ndarray:
    """``theta sin(theta) |C'(tx)| |C'(ty)| / |C(tx) - C(ty)|^2`` in parameter coordinates."""
    tx = np.asarray(tx, dtype=float)
    ty = np.asarray(ty, dtype=float)
    th = np.asarray(c.theta(tx, ty))
    d2 = np.abs(c.eval_complex(tx) - c.eval_complex(ty)) ** 2
    sp = c.speed(tx) * c.speed(ty)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = th * np.sin(th) * sp / d2
    return np.where(th == 0.0, 0.0, out)


def _defect_rule(c: IdealCurve, n_t: int, panels: int, delta: float) -> float:
    tx = np.arange(n_t) / n_t
    s, ws = _gauss_panels(delta, 1.0 - delta, panels)
    TX = np.repeat(tx, s.size)
    S = np.tile(s, n_t)
    f = defect_integrand(c, TX, TX + S).reshape(n_t, s.size)
    return float(np.sum(f @ ws) / n_t)


def ideal_defect(c: IdealCurve, tol: float = 1e-8, max_nodes: int = 1 << 22) -> Estimate:
    """Deterministic quadrature of the ideal defect over the parameter torus.

    Coordinates are ``(t_x, s = t_y - t_x mod 1)``.  The band ``s < delta`` or
    ``s > 1 - delta`` around the diagonal is excised and bounded by
    ``2 delta sup|integrand|`` (sup taken at the band edge, doubled); ``delta``
    shrinks until that bound is below ``tol / 10``.  The rest uses a periodic
    trapezoid rule in ``t_x`` and composite Gauss-Legendre in ``s``, both
    doubled until successive values agree to ``tol``.
    """
    if not tol > 0:
        raise DomainError("tol must be positive")
    delta = 1e-3
    probe = np.arange(512) / 512
    while True:
        edge = np.concatenate([defect_integrand(c, probe, probe + delta), defect_integrand(c, probe, probe - delta)])
        band = 2.0 * delta * 2.0 * float(np.max(np.abs(edge)))
        if band <= tol / 10 or delta <= 4e-5:
            break
        delta /= 4
    n_t, panels = 32, 8
    prev = _defect_rule(c, n_t, panels, delta)
    while True:
        n_t *= 2
        panels *= 2
        if n_t * panels * 8 > max_nodes:
            raise BudgetError(f"ideal_defect did not reach tol={tol:g} within {max_nodes} nodes")
        cur = _defect_rule(c, n_t, panels, delta)
        if abs(cur - prev) <= 0.5 * tol:
            break
        prev = cur
    err = abs(cur - prev) + band
    return Estimate(cur, err, n_t * panels * 8, "quadrature", {"band_bound": band, "delta": delta})


# ---------------------------------------------------------------------- NT(Omega)
class _DistanceField:
    """Distance to the curve sampled on a grid over the enclosed domain, for fast screening."""

    def __init__(self, c: IdealCurve, n: int = 768):
        x0, x1, y0, y1 = c.bounding_box
        span = max(x1 - x0, y1 - y0)
        pad = 0.02 * span
        self.x0, self.y0 = x0 - pad, y0 - pad
        self.h = (span + 2 * pad) / (n - 1)
        nx = int(np.ceil((x1 - x0 + 2 * pad) / self.h)) + 2
        ny = int(np.ceil((y1 - y0 + 2 * pad) / self.h)) + 2
        gx = self.x0 + self.h * np.arange(nx)
        gy = self.y0 + self.h * np.arange(ny)
        X, Y = np.meshgrid(gx, gy, indexing="ij")
        pts = np.stack([X.ravel(), Y.ravel()], axis=-1)
        d, _ = c._kdtree.query(pts)
        inside = c.inside(pts)
        # signed: positive inside the domain
        self.f = np.where(inside, d, -d).reshape(nx, ny)
        self.nx, self.ny = nx, ny
        i = int(np.argmax(self.f))
        start = pts[i]
        res = minimize(lambda q: -float(c.distance(q[None])[0]), start, method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
        # inradius: largest inscribed disk; inflate slightly so it is an upper bound
        self.inradius = max(float(-res.fun), float(self.f.max())) * (1 + 1e-9) + 1e-12
        self.lipschitz_err = self.h * math.sqrt(2.0)

    def __call__(self, x, y):
        u = (x - self.x0) / self.h
        v = (y - self.y0) / self.h
        i = np.clip(np.floor(u).astype(int), 0, self.nx - 2)
        j = np.clip(np.floor(v).astype(int), 0, self.ny - 2)
        fu = np.clip(u - i, 0, 1)
        fv = np.clip(v - j, 0, 1)
        f = self.f
        return ((1 - fu) * (1 - fv) * f[i, j] + fu * (1 - fv) * f[i + 1, j]
                + (1 - fu) * fv * f[i, j + 1] + fu * fv * f[i + 1, j + 1])


def _field(c: IdealCurve) -> _DistanceField:
    fld = getattr(c, "_nt_field", None)
    if fld is None:
        fld = _DistanceField(c)
        c._nt_field = fld
    return fld


def _best_circle_gap(c: IdealCurve, z, w, n_scan: int = 256) -> float:
    """``max_s [dist(center_s, C) - radius_s]`` over circles through ``z``, ``w`` (exact distances)."""
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    m = 0.5 * (z + w)
    d = w - z
    h = 0.5 * float(np.hypot(*d))
    nvec = np.array([-d[1], d[0]]) / (2 * h)
    r_in = _field(c).inradius
    if h >= r_in:
        return -(h - r_in)
    S = math.sqrt(r_in * r_in - h * h)
    s = np.linspace(-S, S, n_scan)
    g = c.distance(m[None, :] + s[:, None] * nvec[None, :]) - np.sqrt(h * h + s * s)
    k = int(np.argmax(g))
    lo, hi = s[max(k - 1, 0)], s[min(k + 1, n_scan - 1)]

    def neg(si):
        return -(float(c.distance((m + si * nvec)[None])[0]) - math.hypot(h, si))

    res = minimize_scalar(neg, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return max(float(g[k]), -float(res.fun))


def nt_membership(c: IdealCurve, z, w) -> bool:
    """True iff every circle through ``z`` and ``w`` leaves the enclosed domain.

    A circle through both points lies in the domain iff its center is farther
    from ``C`` than its radius (the curve cannot lie inside a circle whose
    points are in the domain).  Centers lie on the perpendicular bisector;
    only offsets with radius below the inradius can fit, so that range is
    scanned and the best circle polished.  The line through ``z`` and ``w``
    always leaves the bounded domain.
    """
    z = np.asarray(z, dtype=float).reshape(2)
    w = np.asarray(w, dtype=float).reshape(2)
    for p in (z, w):
        if c.winding_number(p) % 2 == 0:
            raise DomainError(f"point {p} is not inside the curve")
    if np.allclose(z, w, rtol=0, atol=1e-15):
        raise DomainError("nt_membership needs z != w")
    return _best_circle_gap(c, z, w) <= 0.0


def _scan_best_gap(dist, m, nvec, h, S, n_scan: int = 33, n_golden: int = 24) -> np.ndarray:
    """Vectorised ``max_s [dist(m + s n) - sqrt(h^2 + s^2)]`` for ``|s| <= S``.

    Coarse scan followed by golden-section polishing around the best node.
    """
    def gfun(uu):
        s = uu * S
        return dist(m[:, 0] + s * nvec[:, 0], m[:, 1] + s * nvec[:, 1]) - np.sqrt(h * h + s * s)

    u = np.linspace(-1.0, 1.0, n_scan)
    best = np.full(h.size, -np.inf)
    best_u = np.zeros(h.size)
    for uk in u:
        g = gfun(np.full(h.size, uk))
        better = g > best
        best = np.where(better, g, best)
        best_u = np.where(better, uk, best_u)
    du = u[1] - u[0]
    a = np.clip(best_u - du, -1, 1)
    b = np.clip(best_u + du, -1, 1)
    gr = (math.sqrt(5) - 1) / 2
    x1 = b - gr * (b - a)
    x2 = a + gr * (b - a)
    g1, g2 = gfun(x1), gfun(x2)
    for _ in range(n_golden):
        left = g1 > g2
        a_new = np.where(left, a, x1)
        b_new = np.where(left, x2, b)
        xnew = np.where(left, b_new - gr * (b_new - a_new), a_new + gr * (b_new - a_new))
        gnew = gfun(xnew)
        x1, x2, g1, g2 = (np.where(left, xnew, x2), np.where(left, x1, xnew),
                          np.where(left, gnew, g2), np.where(left, g1, gnew))
        a, b = a_new, b_new
    return np.maximum(best, np.maximum(g1, g2))


def nt_membership_many(c: IdealCurve, z: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Vectorised :func:`nt_membership` for pairs already known to lie in the domain.

    The scan runs on an interpolated distance field; pairs whose best gap is
    within the interpolation error of 0 are re-scanned with exact distances.
    """
    fld = _field(c)
    z = np.asarray(z, dtype=float).reshape(-1, 2)
    w = np.asarray(w, dtype=float).reshape(-1, 2)
    m = 0.5 * (z + w)
    d = w - z
    h = 0.5 * np.hypot(d[:, 0], d[:, 1])
    out = h >= fld.inradius
    todo = np.nonzero(~out)[0]
    if todo.size == 0:
        return out
    m, d, h = m[todo], d[todo], h[todo]
    nvec = np.stack([-d[:, 1], d[:, 0]], axis=-1) / (2 * h[:, None])
    S = np.sqrt(fld.inradius ** 2 - h * h)
    best = _scan_best_gap(fld, m, nvec, h, S)
    margin = 2.0 * fld.lipschitz_err
    nt = best < 0
    amb = np.nonzero(np.abs(best) <= margin)[0]
    if amb.size:
        def exact(x, y):
            return c.distance(np.stack([x, y], axis=-1))

        g = _scan_best_gap(exact, m[amb], nvec[amb], h[amb], S[amb], n_scan=65, n_golden=40)
        nt[amb] = g <= 0.0
    out[todo] = nt
    return out


def _rho_strata(rho_lo: float, rho_hi: float, k: int):
    return np.geomspace(rho_lo, rho_hi, k + 1)


def _sample_rho(rng, a: float, b: float, size: int):
    """Sample ``rho`` on ``[a, b]`` with density proportional to ``rho^-3``."""
    u = rng.random(size)
    return 1.0 / np.sqrt(a ** -2 - u * (a ** -2 - b ** -2))


class _CubeShape:
    """Product of piecewise-constant marginals on the unit cube.

    Each marginal is ``floor * uniform + (1 - floor) * histogram`` of weighted
    samples; with no samples it is uniform.
    """

    def __init__(self, bins, samples=None, weights=None, floor: float = 0.2, min_samples: int = 30):
        self.bins = tuple(bins)
        self.floor = floor
        self.cdfs = []
        self.dens = []
        for j, nb in enumerate(self.bins):
            edges = np.linspace(0.0, 1.0, nb + 1)
            if samples is None or len(samples) < min_samples or np.sum(weights) <= 0:
                hist = np.full(nb, 1.0)
            else:
                hist, _ = np.histogram(samples[:, j], bins=edges, weights=weights)
                hist = hist / hist.sum() * nb
            dens = self.floor + (1 - self.floor) * hist
            self.dens.append(dens)
            self.cdfs.append(np.concatenate([[0.0], np.cumsum(dens) / nb]))

    def sample(self, U):
        """Map uniforms ``(n, dim)`` to shaped coordinates."""
        edges = [np.linspace(0.0, 1.0, nb + 1) for nb in self.bins]
        return np.stack([np.interp(U[:, j], self.cdfs[j], edges[j]) for j in range(len(self.bins))], axis=-1)

    def density(self, X):
        out = np.ones(X.shape[0])
        for j, nb in enumerate(self.bins):
            i = np.clip((X[:, j] * nb).astype(int), 0, nb - 1)
            out *= self.dens[j][i]
        return out


def nt_defect(c: IdealCurve, n: int = 10 ** 6, seed: int = 0, rho_lo: float = 1e-3, n_strata: int = 24) -> Estimate:
    """Monte Carlo for ``4 int_{NT} dz dw / |z - w|^4`` over ordered pairs.

    Pairs are written ``z, w = m -/+ rho e(phi)`` so the measure becomes
    ``rho^-3 dm drho dphi`` with ``phi`` in ``[0, 2 pi)``.  Sampling is
    stratified in ``log rho``; within a stratum ``rho`` has density
    ``~ rho^-3`` (the ``1/|z-w|^4`` importance density).  The midpoint and
    direction come from an equal mixture of

    * A: ``m`` in the bounding box and ``phi`` in ``[0, 2 pi)``;
    * B: ``m = C(t) + d N(t)`` in a strip ``|d| < tau ~ rho^2 / r`` and
      ``phi`` within ``beta0 ~ rho / r`` of the tangent direction, where
      ``r = min(inradius, 1 / kappa_max)``,

    weighted by the balance heuristic.  Short NT pairs hug the curve almost
    tangentially, which B targets; A keeps the estimator unbiased everywhere.
    Sampling runs in three stages: a flat pilot, then two adapted stages
    whose Neyman allocation and proposal marginals (histograms with a
    uniform floor) are learned from the NT hits of the earlier stages.  The
    two adapted stages are combined with fixed sample-size weights.  Each stratum runs as scrambled Sobol
    replicates whose spread gives the error bar.

    Pairs with half-distance below ``rho_lo`` are excluded; their share is
    bounded by ``rho_lo`` times the estimated density per unit ``rho`` of the
    lowest strata (doubled) and reported as ``info['band_bound']``.
    """
    fld = _field(c)
    x0, x1, y0, y1 = c.bounding_box
    box = (x1 - x0) * (y1 - y0)
    rho_hi = 0.5 * math.hypot(x1 - x0, y1 - y0)
    edges = _rho_strata(rho_lo, rho_hi, n_strata)
    W = box * 2 * np.pi * 0.5 * (edges[:-1] ** -2 - edges[1:] ** -2)
    kmax = c.max_curvature
    tau_cap = min(0.5 / kmax, 0.25 * fld.inradius)
    # short NT pairs sit within ~ rho^2 / r of the curve and within ~ rho / r of its tangent
    r_small = min(fld.inradius, 1.0 / kmax)
    qa = 1.0 / (box * 2 * np.pi)

    def strip_params(k):
        b = edges[k + 1]
        if b >= fld.inradius:
            return None
        return min(1.5 * b * b / r_small, tau_cap), min(0.5 * np.pi, b / r_small)

    def run_stratum(k, U, shape, shape_a):
        """Weights for unit-cube points ``U`` (columns: rho, m1, m2, phi, branch) and hit coordinates."""
        size = U.shape[0]
        a, b = edges[k], edges[k + 1]
        rho = 1.0 / np.sqrt(a ** -2 - U[:, 0] * (a ** -2 - b ** -2))
        sp = strip_params(k)
        XA = shape_a.sample(U[:, 1:4])
        m = np.stack([x0 + (x1 - x0) * XA[:, 0], y0 + (y1 - y0) * XA[:, 1]], axis=-1)
        ph = 2 * np.pi * XA[:, 2]
        if sp is not None:
            tau, beta0 = sp
            from_b = U[:, 4] < 0.5
            v = 2 * U[from_b, 3]
            X = shape.sample(np.stack([U[from_b, 1], U[from_b, 2], np.mod(v, 1.0)], axis=-1))
            t = X[:, 0]
            d = tau * (2 * X[:, 1] - 1)
            beta = beta0 * (2 * X[:, 2] - 1) + np.pi * (v >= 1)
            nl = 1j * c.eval_complex(t, 1) / c.speed(t)
            mz = c.eval_complex(t) + d * nl
            m[from_b] = np.stack([mz.real, mz.imag], axis=-1)
            ph[from_b] = np.mod(c.tangent_angle(t) + beta, 2 * np.pi)
        e = np.stack([np.cos(ph), np.sin(ph)], axis=-1) * rho[:, None]
        z, w = m - e, m + e
        hit = np.zeros(size, dtype=bool)
        inbox = (m[:, 0] >= x0) & (m[:, 0] <= x1) & (m[:, 1] >= y0) & (m[:, 1] <= y1)
        idx = np.nonzero(inbox)[0]
        both = c.inside(z[idx]) & c.inside(w[idx])
        idx = idx[both]
        if idx.size:
            hit[idx] = nt_membership_many(c, z[idx], w[idx])
        out = np.zeros(size)
        h = np.nonzero(hit)[0]
        coords = np.zeros((0, 3))
        xa = np.stack([(m[h, 0] - x0) / (x1 - x0), (m[h, 1] - y0) / (y1 - y0), ph[h] / (2 * np.pi)], axis=-1)
        qah = qa * shape_a.density(np.clip(xa, 0, 1 - 1e-15))
        if sp is None:
            out[h] = qa / qah
        elif h.size:
            tau, beta0 = sp
            th = c.closest_parameter(m[h])
            nl = 1j * c.eval_complex(th, 1) / c.speed(th)
            dz = (m[h, 0] + 1j * m[h, 1]) - c.eval_complex(th)
            dh = (np.conj(nl) * dz).real
            dev = _wrap_half(ph[h] - c.tangent_angle(th))
            X = np.stack([th, (dh + tau) / (2 * tau), (dev + beta0) / (2 * beta0)], axis=-1)
            inside_win = (np.abs(dh) < tau) & (np.abs(dev) < beta0)
            jac = c.speed(th) * np.abs(1.0 - c.curvature(th) * dh)
            qb = np.where(inside_win, shape.density(np.clip(X, 0, 1)) / (jac * 2 * tau * 4 * beta0), 0.0)
            out[h] = qa / (0.5 * qah + 0.5 * qb)
            coords = X[inside_win]
            return out, coords, out[h][inside_win], xa, out[h]
        return out, coords, np.zeros(0), xa, out[h]

    def draw(k, n_k, stream, shape, shape_a):
        """Scrambled Sobol replicates; returns replicate means, all weights and hit coordinates."""
        per = max(64, 1 << int(math.floor(math.log2(max(1, n_k // N_REPLICATES)))))
        reps, vals, coords, cw, ca, caw = [], [], [], [], [], []
        for r in range(N_REPLICATES):
            sob = qmc.Sobol(d=5, scramble=True, seed=np.random.default_rng([int(seed), k, stream, r]))
            vr = []
            left = per
            while left > 0:
                take = min(left, CHUNK)
                o, X, xw, xa, xaw = run_stratum(k, sob.random(take), shape, shape_a)
                vr.append(o)
                coords.append(X)
                cw.append(xw * W[k])
                ca.append(xa)
                caw.append(xaw)
                left -= take
            vr = np.concatenate(vr)
            reps.append(float(np.mean(vr)))
            vals.append(vr)
        return (np.array(reps), np.concatenate(vals), np.concatenate(coords), np.concatenate(cw),
                np.concatenate(ca), np.concatenate(caw))

    strip_bins, box_bins = (64, 16, 16), (32, 32, 32)

    def learn(runs):
        shape = _CubeShape(strip_bins, np.concatenate([r[2] for run in runs for r in run]),
                           np.concatenate([r[3] for run in runs for r in run]))
        shapes_a = [_CubeShape(box_bins, np.concatenate([run[k][4] for run in runs]),
                               np.concatenate([run[k][5] for run in runs]), floor=0.5, min_samples=100)
                    for k in range(n_strata)]
        return shape, shapes_a

    def neyman(run, budget):
        sd = W * np.array([np.std(r[1]) for r in run])
        if sd.sum() <= 0:
            return np.zeros(n_strata, int)
        return np.floor(budget * sd / sd.sum()).astype(int)

    # stage 0: flat proposals; stage 1: shapes learned from stage 0; stage 2: from stages 0 and 1
    n_pilot = max(64 * N_REPLICATES, n // (10 * n_strata))
    flat = _CubeShape(strip_bins)
    run0 = [draw(k, n_pilot, 0, flat, _CubeShape(box_bins)) for k in range(n_strata)]
    used = sum(r[1].size for r in run0)
    shape, shapes_a = learn([run0])
    alloc1 = neyman(run0, max(0, n // 4 - used))
    run1 = [draw(k, max(int(alloc1[k]), 64 * N_REPLICATES), 1, shape, shapes_a[k]) for k in range(n_strata)]
    used += sum(r[1].size for r in run1)
    shape, shapes_a = learn([run0, run1])
    alloc2 = neyman(run1, max(0, n - used))
    means, vars_ = [], []
    total_n = used
    for k in range(n_strata):
        reps, v = run1[k][0], run1[k][1]
        est = [(float(np.mean(reps)), float(np.var(reps, ddof=1)) / reps.size, v.size)]
        if alloc2[k] >= 64 * N_REPLICATES:
            reps2, v2 = draw(k, int(alloc2[k]), 2, shape, shapes_a[k])[:2]
            total_n += v2.size
            est.append((float(np.mean(reps2)), float(np.var(reps2, ddof=1)) / reps2.size, v2.size))
        # fixed sample-size weights keep the combination unbiased
        wts = np.array([e[2] for e in est], dtype=float)
        wts /= wts.sum()
        means.append(W[k] * float(sum(wi * e[0] for wi, e in zip(wts, est))))
        vars_.append(W[k] ** 2 * float(sum(wi * wi * e[1] for wi, e in zip(wts, est))))
    value = float(np.sum(means))
    se = math.sqrt(float(np.sum(vars_)))
    # density per unit rho near the cut, from the lowest strata
    low = [means[k] / (edges[k + 1] - edges[k]) for k in range(min(4, n_strata))]
    band = 2.0 * rho_lo * float(max(np.abs(low)))
    return Estimate(value, math.hypot(se, band), total_n, "monte-carlo",
                    {"band_bound": band, "mc_std_err": se, "rho_lo": rho_lo,
                     "strata": [float(x) for x in means], "strata_se": [math.sqrt(x) for x in vars_]})


def _wrap_half(a):
    """Distance of an angle to the nearest multiple of pi, signed, in (-pi/2, pi/2]."""
    return np.pi / 2 - np.mod(np.pi / 2 - a, np.pi)


# ---------------------------------------------------------------------- lines
def line_curve_intersections(c: IdealCurve, L: PlanarLine):
    """Sorted transverse hits ``[(t, point), ...]`` of a line with the curve.

    A line within ``GRAZE_TOL`` (relative) of tangency is shifted by
    ``GRAZE_JITTER`` in ``p`` and re-solved.
    """
    p, phi = _jitter_grazes(c, np.array([L.p]), np.array([L.phi]))[:2]
    t, s = c.crossings(p, phi)
    t, s = t[0], s[0]
    keep = np.isfinite(t)
    t = t[keep]
    pts = c.eval(t)
    return [(float(ti), pts[i]) for i, ti in enumerate(t)]


def _jitter_grazes(c: IdealCurve, p, phi, crit=None):
    if crit is None:
        crit = c.critical_points(phi)
    scale = max(1.0, c.bounding_disk[1])
    hc = crit[1]
    near = np.nanmin(np.abs(hc - p[:, None]), axis=1) < GRAZE_TOL * scale
    p = np.where(near, p + GRAZE_JITTER * scale, p)
    return p, phi, crit, near


def signed_inverse_chords(s: np.ndarray) -> np.ndarray:
    """Per row: sum over ordered pairs of sorted hits of ``(-1)^(#between) / distance``."""
    s = np.asarray(s, dtype=float)
    B, R = s.shape
    out = np.zeros(B)
    for i in range(R):
        for j in range(i + 1, R):
            d = s[:, j] - s[:, i]
            sign = -1.0 if (j - i - 1) % 2 else 1.0
            out += np.where(np.isfinite(d), 2.0 * sign / np.where(np.isfinite(d), d, 1.0), 0.0)
    return out


def _critical_intervals(hc: np.ndarray):
    """Sorted distinct critical heights per row (NaN padded)."""
    return np.sort(hc, axis=1)


def chord_functional(c: IdealCurve, n_lines: int = 10 ** 6, seed: int = 0) -> Estimate:
    """Monte Carlo for ``int sum_{x != y in L cap C} (-1)^{#(xy cap C)} / |y - x| dL``.

    ``dL = dp dphi`` with ``phi`` in ``[0, pi)``; the sum runs over ordered
    pairs of hits.  For each direction ``p`` is drawn in one of the intervals
    between consecutive critical heights of the curve (chosen proportionally
    to length) through ``p = a + len (1 - cos(pi v)) / 2``; the Jacobian
    ``sin(pi v)`` cancels the inverse-square-root blow-up of short chords, so
    the weights are bounded.
    """
    vals = []
    grazes = 0
    scale = max(1.0, c.bounding_disk[1])
    for i, size, rng in chunk_rngs(seed, n_lines):
        phi = rng.uniform(0, np.pi, size)
        v = rng.random(size)
        pick = rng.random(size)
        tc, hc = c.critical_points(phi)
        H = _critical_intervals(hc)
        lens = np.diff(H, axis=1)
        lens = np.where(np.isfinite(lens), lens, 0.0)
        tot = lens.sum(axis=1)
        cum = np.cumsum(lens, axis=1) / tot[:, None]
        k = np.minimum((pick[:, None] >= cum).sum(axis=1), lens.shape[1] - 1)
        a = np.take_along_axis(H, k[:, None], axis=1)[:, 0]
        ln = np.take_along_axis(lens, k[:, None], axis=1)[:, 0]
        p = a + ln * 0.5 * (1 - np.cos(np.pi * v))
        # near-tangent lines move into the interval (not out of it) and keep their weight
        # consistent with the moved line; the weighted integrand is smooth in v
        jit = np.minimum(GRAZE_JITTER * scale, 0.25 * ln)
        lo = p - a < GRAZE_TOL * scale
        hi = a + ln - p < GRAZE_TOL * scale
        p = np.where(lo, a + jit, np.where(hi, a + ln - jit, p))
        v = np.where(lo | hi, np.arccos(np.clip(1 - 2 * (p - a) / np.where(ln > 0, ln, 1.0), -1, 1)) / np.pi, v)
        grazes += int(np.count_nonzero(lo | hi))
        _, s = c.crossings(p, phi, (tc, hc))
        f = signed_inverse_chords(s)
        vals.append(np.pi * tot * 0.5 * np.pi * np.sin(np.pi * v) * f)
    mu, se = mc_mean(np.concatenate(vals))
    return Estimate(mu, se, n_lines, "monte-carlo", {"grazes": grazes})


# ---------------------------------------------------------------------- Franklin
def _franklin_rule(c: IdealCurve, n_phi: int, n_u: int) -> float:
    phi = np.pi * np.arange(n_phi) / n_phi
    tc, hc = c.critical_points(phi)
    pmin = np.nanmin(hc, axis=1)
    pmax = np.nanmax(hc, axis=1)
    half = 0.5 * (pmax - pmin)
    x, w = np.polynomial.legendre.leggauss(n_u)
    # u in [0, sqrt(half)]
    U = 0.5 * (x + 1)[None, :] * np.sqrt(half)[:, None]
    WU = 0.5 * w[None, :] * np.sqrt(half)[:, None]
    total = 0.0
    for side in (0, 1):
        p = pmin[:, None] + U * U if side == 0 else pmax[:, None] - U * U
        P = p.ravel()
        PH = np.repeat(phi, n_u)
        crit = (np.repeat(tc, n_u, axis=0), np.repeat(hc, n_u, axis=0))
        _, s = c.crossings(P, PH, crit)
        sigma = (s[:, 1] - s[:, 0]).reshape(n_phi, n_u)
        total += float(np.sum(2 * U * WU / sigma))
    return total * np.pi / n_phi


def franklin(c: IdealCurve, tol: float = 1e-8, max_nodes: int = 1 << 22) -> Estimate:
    """Deterministic quadrature of ``int dL / sigma(L cap Omega)`` for a convex curve.

    Periodic trapezoid rule in ``phi``; in ``p`` each half of the support
    interval is mapped by ``p = p_support -/+ u^2``, which turns the
    inverse-square-root endpoint singularity into an analytic integrand for
    Gauss-Legendre.  Node counts double until successive values agree.
    """
    if not c.is_convex():
        raise DomainError("franklin requires a convex curve")
    n_phi, n_u = 16, 8
    prev = _franklin_rule(c, n_phi, n_u)
    while True:
        n_phi *= 2
        n_u *= 2
        if n_phi * n_u > max_nodes:
            raise BudgetError(f"franklin did not reach tol={tol:g} within {max_nodes} nodes")
        cur = _franklin_rule(c, n_phi, n_u)
        if abs(cur - prev) <= tol:
            break
        prev = cur
    return Estimate(cur, abs(cur - prev), n_phi * n_u * 2, "quadrature")
