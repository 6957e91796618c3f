"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run on its own with ``python tests/test_acceptance.py`` (or ``pytest tests/test_acceptance.py -s``).
The verdict lines are also repeated in the pytest terminal summary.
"""
import functools
import math
import time

import numpy as np
import pytest

from hypint import defect, geodesic_mc, harness, surfaces
from hypint.curves import circle, ellipse, perturbed_circle
from hypint.geom_core import HPoint, hyp_distance_array, random_mobius

VERDICTS = []

PI2_HALF = math.pi ** 2 / 2


def criterion(num, title):
    """Wrap a test returning ``(ok, detail)``; record and print its verdict, then assert."""
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*a, **kw):
            t0 = time.perf_counter()
            try:
                ok, detail = fn(*a, **kw)
            except Exception as exc:
                ok, detail = False, f"{type(exc).__name__}: {exc}"
                _emit(num, title, ok, detail, time.perf_counter() - t0)
                raise
            _emit(num, title, ok, detail, time.perf_counter() - t0)
            assert ok, detail
        return wrapper
    return deco


def _emit(num, title, ok, detail, secs):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num:2d}: {title} | {detail} ({secs:.1f} s)"
    VERDICTS.append((num, line))
    print(line, flush=True)


def run_cfg(d):
    return harness.run(harness.RunConfig.from_dict(d))


def convex_suite():
    curves = [ellipse(a, 1.0) for a in (1.2, 1.5, 2.0, 3.0, 4.0)]
    curves += [perturbed_circle(m) for m in ([(2, 0.05, 0.0)], [(3, 0.04, 0.5)], [(2, 0.03, 0.0), (3, 0.02, 1.0)],
                                             [(4, 0.02, 0.3)], [(2, 0.08, 1.2)])]
    return curves


@criterion(1, "Franklin value of the unit circle")
def test_franklin_disk_value():
    t0 = time.perf_counter()
    f = defect.franklin(circle()).value
    dt = time.perf_counter() - t0
    err = abs(f - PI2_HALF)
    return err < 1e-6 and dt < 30, f"|F - pi^2/2| = {err:.2e}, {dt:.2f} s"


@criterion(2, "Franklin minimality and Mobius stability on 10 convex curves")
def test_franklin_minimality():
    rng = np.random.default_rng(2024)
    worst_gap, worst_rel = math.inf, 0.0
    for c in convex_suite():
        assert c.is_convex()
        f = defect.franklin(c).value
        worst_gap = min(worst_gap, f - PI2_HALF)
        cen, rad = c.bounding_disk
        for _ in range(2):
            for _ in range(100):
                img = c.transformed(random_mobius(rng, rad, complex(*cen)))
                if img.is_convex():
                    break
            worst_rel = max(worst_rel, abs(defect.franklin(img).value - f) / f)
    ok = worst_gap > 1e-4 and worst_rel < 1e-3
    return ok, f"min(F - pi^2/2) = {worst_gap:.4g}, worst image rel diff = {worst_rel:.2e}"


@criterion(3, "Circle defect vanishes")
def test_circle_defect():
    vals = [abs(defect.ideal_defect(c).value) for c in (circle(), circle((5, 1), 3), circle((-2, 0.5), 0.1))]
    return max(vals) < 1e-8, f"max |D| = {max(vals):.2e}"


@criterion(4, "Three-way defect agreement on ellipse (2, 1)")
def test_three_way_defect():
    t0 = time.perf_counter()
    c = ellipse(2.0, 1.0)
    d = defect.ideal_defect(c)
    nt = defect.nt_defect(c, n=10 ** 6, seed=42)
    ch = defect.chord_functional(c, n_lines=10 ** 6, seed=43)
    via = math.pi * ((2 / math.pi) * ch.value - 2 * math.pi)
    routes = {
        "quadrature": (d.value, d.std_err, 0.0, "quadrature"),
        "nt": (nt.value, nt.std_err, nt.info.get("band_bound", 0.0), "monte-carlo"),
        "chord": (via, 2 * ch.std_err, 0.0, "monte-carlo"),
    }
    dt = time.perf_counter() - t0
    ok = dt < 300
    parts = []
    names = list(routes)
    for i in range(3):
        for j in range(i + 1, 3):
            a, b = routes[names[i]], routes[names[j]]
            quad = sum(x[1] for x in (a, b) if x[3] == "quadrature")
            mc = math.hypot(*(x[1] for x in (a, b) if x[3] == "monte-carlo"))
            tol = quad + 3 * mc + a[2] + b[2]
            diff = abs(a[0] - b[0])
            rel = diff / abs(d.value)
            ok &= diff <= tol and rel < 0.01
            parts.append(f"{names[i]}-{names[j]} {diff:.4f}/{tol:.4f} ({100 * rel:.2f}%)")
    return ok, f"D = {d.value:.6f}, nt = {nt.value:.4f}, chord = {via:.4f}; " + ", ".join(parts) + f"; {dt:.0f} s"


@criterion(5, "Mobius invariance of the defect")
def test_mobius_invariance():
    r = run_cfg({"command": "mobius-check", "seed": 7, "curve": {"kind": "ellipse", "a": 2.0, "b": 1.0},
                 "params": {"quantity": "defect", "k": 5}})
    return r.extra["spread"] < 1e-3, f"relative spread = {r.extra['spread']:.2e}"


@criterion(6, "Curvature formula oracle gate")
def test_curvature_gate():
    u, v = np.meshgrid(np.linspace(0.01, 0.99, 40), np.linspace(0.02, 0.98, 40))
    u, v = u.ravel(), v.ravel()

    def on(s):
        return u, s.v_lo + (s.v_hi - s.v_lo) * v

    plane = surfaces.make_vertical_plane_patch((0.5, -1.0), (0.6, 0.8), 2.0, (0.1, 5.0))
    hemi = surfaces.make_hemisphere((0.3, -0.2), 2.5)
    flat = max(np.max(np.abs(s.extrinsic_curvature(*on(s)))) for s in (plane, hemi))
    rel = 0.0
    for rho in (0.5, 1.0, 2.0):
        s = surfaces.make_geodesic_sphere(HPoint(0.2, 0.1, 1.3), rho)
        K = s.extrinsic_curvature(*on(s))
        rel = max(rel, float(np.max(np.abs(K * math.tanh(rho) ** 2 - 1))))
    return flat < 1e-10 and rel < 1e-8, f"flat max |K| = {flat:.1e}, sphere max rel err = {rel:.1e}"


@criterion(7, "Ideal-limit curvature of spherical caps")
def test_cap_limit():
    errs = []
    for deg in (30, 60):
        beta = math.radians(deg)
        s = surfaces.make_spherical_cap(beta, 1.0)
        v = s.v_hi - np.geomspace(1e-2, 1e-4, 8)
        K = s.extrinsic_curvature(np.full_like(v, 0.3), v)
        lim = np.polyval(np.polyfit(s.height(v), K, 2), 0.0)
        errs.append(abs(lim - math.cos(beta) ** 2))
    return max(errs) < 1e-2, "errors vs cos^2(beta): " + ", ".join(f"{e:.1e}" for e in errs)


@criterion(8, "Compact Gauss-Bonnet for geodesic spheres and disks")
def test_compact_gauss_bonnet():
    worst = 0.0
    for surf in ({"kind": "geodesic-sphere", "params": {"center": [0.2, 0.1, 1.3], "rho": 1.0}, "resolution": 32},
                 {"kind": "geodesic-disk", "params": {"rho": 1.0}, "resolution": 64}):
        r = run_cfg({"command": "compact-check", "seed": 0, "surface": surf})
        # the disk has int K = 0, so the residual is measured against the largest term
        scale = max(abs(r.lhs.value), *(abs(t.value) for t in r.rhs_terms.values()))
        worst = max(worst, abs(r.residual) / scale)
    return worst < 1e-3, f"worst relative residual = {worst:.1e}"


@criterion(9, "Crofton calibration on the geodesic disk, rho = 1")
def test_crofton_calibration():
    r = run_cfg({"command": "crofton", "seed": 11, "n_samples": 10 ** 6,
                 "surface": {"kind": "geodesic-disk", "params": {"rho": 1.0}, "resolution": 256}})
    exact = 2 * math.pi * (math.cosh(1.0) - 1)
    rel = abs(r.lhs.value - exact) / exact
    return rel < 0.01, f"estimate {r.lhs.value:.5f} +- {r.lhs.std_err:.5f} vs {exact:.5f} ({100 * rel:.2f}%)"


def _gb(curve, cap_height):
    t0 = time.perf_counter()
    r = run_cfg({"command": "gauss-bonnet", "seed": 5, "n_samples": 10 ** 6,
                 "surface": {"kind": "capped-cylinder", "curve": curve, "params": {"cap_height": cap_height},
                             "resolution": 256}})
    return r, time.perf_counter() - t0


@criterion(10, "Main identity on capped cylinders (circle and ellipse)")
def test_main_identity():
    rc, tc = _gb({"kind": "circle"}, 100.0)
    re, te = _gb({"kind": "ellipse", "a": 2.0, "b": 1.0}, 10.0)
    k_rel = abs(rc.lhs.value - 2 * math.pi) / (2 * math.pi)
    ok = k_rel < 0.02 and rc.passed and re.passed and max(tc, te) < 600
    return ok, (f"circle: int K = {rc.lhs.value:.4f} ({100 * k_rel:.2f}% from 2pi), residual {rc.residual:.4f} "
                f"/ tol {rc.combined_tolerance:.4f}; ellipse: residual {re.residual:.4f} "
                f"/ tol {re.combined_tolerance:.4f}; {tc:.0f} s + {te:.0f} s")


@criterion(11, "Monotone truncation sweep")
def test_monotone_truncation():
    s = surfaces.make_capped_cylinder(ellipse(2.0, 1.0), cap_height=10.0)
    values, _ = geodesic_mc.truncation_sweep(s, [0.4, 0.2, 0.1, 0.05], n=2 * 10 ** 5, seed=17, resolution=128)
    ok = all(b.value >= a.value - max(a.std_err, b.std_err) for a, b in zip(values, values[1:]))
    return ok, ", ".join(f"h={v.info['h']}: {v.value:.4f}+-{v.std_err:.4f}" for v in values)


@criterion(12, "Distance inequalities and shadow identity on 1e5 pairs")
def test_property_suites():
    rng = np.random.default_rng(12)
    n = 10 ** 5
    p = np.column_stack([rng.uniform(-3, 3, (n, 2)), np.exp(rng.uniform(-4, 2, n))])
    q = np.column_stack([rng.uniform(-3, 3, (n, 2)), np.exp(rng.uniform(-4, 2, n))])
    sh = np.sinh(hyp_distance_array(p, q))
    d = np.linalg.norm(p - q, axis=1)
    # 1e-12 relative slack covers floating point rounding only
    v1 = np.count_nonzero(p[:, 2] * q[:, 2] * sh < 0.5 * d ** 2 * (1 - 1e-12))
    v2 = np.count_nonzero(np.maximum(p[:, 2], q[:, 2]) * sh < d * (1 - 1e-12))
    dxy = np.linalg.norm(p[:, :2] - q[:, :2], axis=1)
    sc = (dxy ** 2 + q[:, 2] ** 2 - p[:, 2] ** 2) / (2 * dxy)
    R = np.hypot(sc, p[:, 2])
    rel = float(np.max(np.abs(p[:, 2] * q[:, 2] * sh - dxy * R) / (dxy * R)))
    return v1 == 0 and v2 == 0 and rel < 1e-10, f"violations (i) {v1}, (ii) {v2}; identity max rel err {rel:.1e}"


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-s", "-q"]))
