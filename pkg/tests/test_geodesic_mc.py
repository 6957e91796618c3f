import math

import numpy as np
import pytest

from hypint import geodesic_mc as gmc
from hypint import surfaces
from hypint.curves import circle, ellipse
from hypint.errors import DomainError, GeometryInconsistencyError
from hypint.geom_core import INFINITY, BoundaryPoint, Geodesic

RHO = 1.0
DISK_AREA = 2 * math.pi * (math.cosh(RHO) - 1)


def geodesic_disk(rho=RHO, R=1.0, center=(0.0, 0.0)):
    return surfaces.truncate(surfaces.make_hemisphere(center, R), R / math.cosh(rho))


@pytest.fixture(scope="module")
def disk_target():
    return gmc.surface_target(geodesic_disk(), 128)


@pytest.fixture(scope="module")
def cyl():
    return surfaces.make_capped_cylinder(ellipse(2.0, 1.0), cap_height=10.0)


@pytest.fixture(scope="module")
def cyl_target(cyl):
    return gmc.surface_target(cyl, 128)


def g(z, w):
    return Geodesic(BoundaryPoint(*z), BoundaryPoint(*w))


def test_weights_positive_and_finite(cyl_target):
    smp = cyl_target.sampler(seed=1)
    batch, _ = smp.draw(np.random.default_rng(0), 5000)
    assert np.all(np.isfinite(batch.weight)) and np.all(batch.weight > 0)


def test_weights_recomputed_from_endpoints(cyl_target):
    smp = cyl_target.sampler(seed=1)
    batch, _ = smp.draw(np.random.default_rng(1), 2000)
    again, _ = smp.weigh(batch.z, batch.w)
    assert np.allclose(again.weight, batch.weight, rtol=1e-9)


def test_crofton_calibration(disk_target):
    e = gmc.crofton(disk_target, n=200_000, seed=3)
    mesh_area = disk_target.mesh.hyperbolic_area()
    assert abs(e.value - mesh_area) <= 3 * e.std_err + e.info["tail_bound"]
    assert e.value == pytest.approx(DISK_AREA, rel=0.03)


def test_std_err_scaling(disk_target):
    a = gmc.crofton(disk_target, n=50_000, seed=5)
    b = gmc.crofton(disk_target, n=200_000, seed=5)
    assert a.std_err / b.std_err == pytest.approx(2.0, rel=0.2)


def test_two_seeds_agree(disk_target):
    a = gmc.crofton(disk_target, n=100_000, seed=6)
    b = gmc.crofton(disk_target, n=100_000, seed=7)
    assert abs(a.value - b.value) <= 3 * math.hypot(a.std_err, b.std_err)


def test_deterministic(disk_target):
    a = gmc.crofton(disk_target, n=70_000, seed=8)
    b = gmc.crofton(disk_target, n=70_000, seed=8)
    assert a.value == b.value and a.std_err == b.std_err


def test_count_intersections_simple():
    m = surfaces.mesh(surfaces.truncate(surfaces.make_hemisphere(), 0.05), 64)
    rec = gmc.count_intersections(Geodesic(BoundaryPoint(0.0, 0.0), INFINITY), m)
    assert rec.count == 1 and len(rec.hits) == 1
    assert gmc.count_intersections(g((5, 5), (8, 3)), m).count == 0
    assert gmc.count_intersections(g((-3, 0.1), (3, 0.2)), m).count == 0  # arches over the hemisphere
    assert gmc.count_intersections(g((0.1, 0.1), (3, 0.2)), m).count == 1


def test_count_matches_polyline_oracle():
    m = surfaces.mesh(surfaces.truncate(surfaces.make_capped_cylinder(ellipse(2, 1), 10.0), 0.2), 48)
    rng = np.random.default_rng(9)
    agree = 0
    for _ in range(60):
        z = rng.uniform(-3, 3, 2)
        w = z + rng.normal(size=2) * rng.choice([0.5, 2, 8])
        geo = g(z, w)
        rec = gmc.count_intersections(geo, m)
        c, s, deg = gmc.count_intersections_polyline(geo, m, rel_sagitta=1e-6)
        if deg or rec.jittered:
            continue
        assert rec.count == c
        assert sum(h[2] for h in rec.hits) == s
        agree += 1
    assert agree > 50


def test_cylinder_count_equals_chord_crossings(cyl, cyl_target):
    # geodesics that stay below the wall top meet the surface exactly where the chord crosses the curve
    c = cyl.end_curve
    smp = cyl_target.sampler(seed=2)
    batch, cr = smp.draw(np.random.default_rng(2), 10 ** 4)
    low = batch.rho < 0.9 * cyl.params["wall_top"]
    cnt, sgn, lam2, _ = cyl_target.evaluate_robust(batch, cr, (2, 0))
    # independent oracle: segment against a dense polygon
    P = c.eval_complex(np.arange(200_000) / 200_000)
    a, b = P, np.roll(P, -1)
    for i in np.nonzero(low)[0][:400]:
        z, w = batch.z[i], batch.w[i]
        d = w - z
        # proper crossings of segment zw with polygon edges ab
        s1 = np.sign((np.conj(d) * (a - z)).imag) != np.sign((np.conj(d) * (b - z)).imag)
        e = b - a
        s2 = np.sign((np.conj(e) * (z - a)).imag) != np.sign((np.conj(e) * (w - a)).imag)
        assert cnt[i] == np.count_nonzero(s1 & s2)


def test_linking_ideal():
    c = circle()
    assert gmc.linking_sq_ideal(g((0, 0), (3, 0)), c) == 1
    assert gmc.linking_sq_ideal(g((2, 0), (3, 0)), c) == 0
    assert gmc.linking_sq_ideal(g((-3, 0), (3, 0)), c) == 0
    assert gmc.linking_sq_ideal(Geodesic(BoundaryPoint(0.2, 0.1), INFINITY), c) == 1


def test_linking_compact_signs():
    m = surfaces.mesh(surfaces.truncate(surfaces.make_hemisphere(), 0.3), 64)
    assert abs(gmc.linking_compact(g((0.0, 0.1), (3, 0)), m)) == 1
    assert gmc.linking_compact(g((0.0, 0.1), (3, 0)), m) == -gmc.linking_compact(g((3, 0), (0.0, 0.1)), m)


def test_hemisphere_geodesic_term_zero():
    s = surfaces.make_hemisphere((0.5, -0.5), 1.5)
    t = gmc.surface_target(s, 64)
    smp = t.sampler(seed=4)
    batch, cr = smp.draw(np.random.default_rng(4), 20_000)
    cnt, _, lam2, _ = t.evaluate_robust(batch, cr, (4, 0))
    assert np.array_equal(cnt, lam2)
    e = gmc.geodesic_term(t, s.end_curve, n=50_000, seed=4)
    assert abs(e.value) <= 3 * e.std_err + 1e-15


def test_per_sample_dominance(cyl):
    t = gmc.surface_target(surfaces.truncate(cyl, 0.1), 128)
    smp = t.sampler(seed=5)
    batch, cr = smp.draw(np.random.default_rng(5), 20_000)
    cnt, sgn, lam2, _ = t.evaluate_robust(batch, cr, (5, 0))
    assert np.all(lam2 <= cnt)
    # count = p + q and signed count = p - q have the same parity
    assert np.all((cnt - sgn) % 2 == 0)


def test_banchoff_pohl_geodesic_circle(disk_target):
    e = gmc.banchoff_pohl_area(disk_target, n=200_000, seed=10)
    assert e.value == pytest.approx(DISK_AREA, rel=0.03)
    tiny = gmc.banchoff_pohl_area(gmc.surface_target(geodesic_disk(0.01), 32), n=50_000, seed=11)
    assert tiny.value < 1e-3


def test_banchoff_pohl_below_area(cyl):
    t = gmc.surface_target(surfaces.truncate(cyl, 0.2), 128)
    a = gmc.banchoff_pohl_area(t, n=50_000, seed=12)
    f = gmc.crofton(t, n=50_000, seed=12)
    assert a.value < f.value


def test_geodesic_term_isometry_invariance():
    base = surfaces.make_capped_cylinder(ellipse(2.0, 1.0), cap_height=10.0)
    moved = surfaces.make_capped_cylinder(ellipse(4.0, 2.0, center=(3.0, -1.0)), cap_height=20.0)
    a = gmc.geodesic_term(gmc.surface_target(base, 128), n=100_000, seed=13)
    b = gmc.geodesic_term(gmc.surface_target(moved, 128), n=100_000, seed=14)
    assert abs(a.value - b.value) <= 3 * math.hypot(a.std_err, b.std_err) + a.info["small_rho_bound"]


def test_truncation_sweep_monotone(cyl):
    values, inc = gmc.truncation_sweep(cyl, [0.4, 0.2, 0.1], n=40_000, seed=15, resolution=96)
    assert [v.info["h"] for v in values] == [0.4, 0.2, 0.1]
    for d in inc:
        assert d.value >= -d.std_err


def test_mismatched_curve_rejected(cyl, cyl_target):
    with pytest.raises(DomainError):
        gmc.geodesic_term(cyl_target, circle(), n=1000)


def test_inconsistent_target_detected(cyl):
    # a mesh of the hemisphere paired with the ellipse as its ideal curve is not one surface
    m = surfaces.mesh(surfaces.truncate(surfaces.make_hemisphere((0, 0), 1.0), 1e-3), 64)
    bad = gmc.SurfaceTarget(m, seam=1e-3, h_min=0.0, end_curve=cyl.end_curve, curve=cyl.end_curve,
                            radius=2.0, height=10.0, scale=2.0)
    with pytest.raises(GeometryInconsistencyError):
        gmc.geodesic_term(bad, n=50_000, seed=1)
