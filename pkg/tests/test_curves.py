import json
import math

import numpy as np
import pytest

from hypint.curves import IdealCurve, circle, ellipse, perturbed_circle, separation, tangent_circle, winding_number
from hypint.errors import ConfigError, DegenerateInputError, DomainError, OnCurveError
from hypint.geom_core import random_mobius


def polygon_even_odd(poly, p):
    """Ray-casting parity oracle on a dense polygon."""
    x, y = poly[:, 0], poly[:, 1]
    x2, y2 = np.roll(x, -1), np.roll(y, -1)
    cross = (y > p[1]) != (y2 > p[1])
    xi = x + (p[1] - y) * (x2 - x) / np.where(y2 != y, y2 - y, 1.0)
    return int(np.count_nonzero(cross & (xi > p[0])) % 2)


def test_circle_eval():
    c = circle()
    assert c.eval(0.0) == pytest.approx([1.0, 0.0], abs=1e-15)
    assert c.tangent(0.0) == pytest.approx([0.0, 1.0], abs=1e-15)
    assert c.curvature(0.0) == pytest.approx(1.0)


def test_ellipse_eval():
    e = ellipse(2.0, 1.0)
    assert e.eval(0.0) == pytest.approx([2.0, 0.0], abs=1e-15)
    assert e.curvature(0.0) == pytest.approx(2.0)
    assert e.curvature(0.25) == pytest.approx(1.0 / 4.0)


def test_curvature_finite_difference():
    c = perturbed_circle([(3, 0.1, 0.2), (5, 0.03, 1.0)])
    rng = np.random.default_rng(0)
    h = 2e-4
    for t in rng.uniform(0, 1, 100):
        z = [c.eval_complex(t + k * h) for k in (-2, -1, 0, 1, 2)]
        # fourth-order central differences
        d1 = (z[0] - 8 * z[1] + 8 * z[3] - z[4]) / (12 * h)
        d2 = (-z[0] + 16 * z[1] - 30 * z[2] + 16 * z[3] - z[4]) / (12 * h * h)
        k_fd = (d1.real * d2.imag - d1.imag * d2.real) / abs(d1) ** 3
        assert c.curvature(t) == pytest.approx(k_fd, rel=1e-6)


def test_file_round_trip(tmp_path):
    c = perturbed_circle([(2, 0.2, 0.0)], radius=1.5, center=(0.5, -1.0))
    c.save(tmp_path / "c.json")
    d = json.loads((tmp_path / "c.json").read_text())
    assert set(d) == {"harmonics_x", "harmonics_y", "orientation"}
    back = IdealCurve.load(tmp_path / "c.json")
    t = np.linspace(0, 1, 57)
    assert np.allclose(back.eval_complex(t), c.eval_complex(t), atol=1e-14)
    with pytest.raises(ConfigError):
        IdealCurve.from_dict({"harmonics_x": [[0, 0], [1, 0]]})


def test_orientation_and_reversal():
    c = ellipse(2, 1)
    assert c.orientation_tag == "ccw"
    r = c.reversed_curve()
    assert r.orientation_tag == "cw"
    assert winding_number(r, (0, 0)) == -1


def test_rejects_non_simple_and_degenerate():
    # a figure eight crosses itself
    with pytest.raises(DomainError):
        IdealCurve.from_harmonics([[0, 0], [1, 0]], [[0, 0], [0, 0], [0, 1]])
    with pytest.raises(DomainError):
        IdealCurve(np.zeros(3, dtype=complex))


def test_winding_number():
    c = circle()
    assert winding_number(c, (0, 0)) == 1
    assert winding_number(c, (5, 0)) == 0
    with pytest.raises(OnCurveError):
        winding_number(c, (1.0, 0.0))
    p = perturbed_circle([(4, 0.3, 0.0)])
    poly = p.eval(np.arange(20000) / 20000)
    rng = np.random.default_rng(1)
    pts = rng.uniform(-1.5, 1.5, (300, 2))
    fast = p.winding_numbers(pts)
    for q, w in zip(pts, fast):
        if p.distance(q[None])[0] < 1e-3:
            continue
        assert winding_number(p, q) % 2 == polygon_even_odd(poly, q)
        assert w == winding_number(p, q)


def test_separation():
    c = circle()
    assert separation(c, (0, 0), (3, 0)) == 1
    assert separation(c, (2, 0), (3, 0)) == 0
    e = ellipse(2, 1, angle=0.3)
    rng = np.random.default_rng(2)
    z = rng.uniform(-3, 3, (10 ** 4, 2))
    w = rng.uniform(-3, 3, (10 ** 4, 2))
    fast = (e.winding_numbers(z) - e.winding_numbers(w)) % 2
    for i in range(0, 10 ** 4, 50):
        assert separation(e, z[i], w[i]) == fast[i]


def test_tangent_circle():
    c = circle()
    for ty in (0.0, 0.3, 0.77):
        oc = tangent_circle(c, ty, c.eval(0.5))
        assert oc.center == pytest.approx([0, 0], abs=1e-12)
        assert oc.radius == pytest.approx(1.0)
        assert oc.orientation == 1
    # tangent at y=(0,0) along +x, through (0,2)
    e = ellipse(1, 1, center=(0, 1))  # y = C(0.75) = (0, 0), tangent (1, 0)
    oc = tangent_circle(e, 0.75, (0, 2))
    assert oc.center == pytest.approx([0, 1], abs=1e-12) and oc.radius == pytest.approx(1.0)
    oc = tangent_circle(e, 0.75, (3, 0))
    assert oc.is_line
    with pytest.raises(DegenerateInputError):
        tangent_circle(e, 0.75, e.eval(0.75))


def test_tangent_circle_angle_matches_theta():
    e = ellipse(2, 1)
    for tx, ty in [(0.1, 0.4), (0.6, 0.05), (0.3, 0.9)]:
        x = e.eval(tx)
        oc = tangent_circle(e, ty, x)
        tc = oc.tangent_at(x)
        tcur = e.tangent(tx)
        ang = math.atan2(tcur[0] * tc[1] - tcur[1] * tc[0], tcur @ tc)
        assert abs(ang) == pytest.approx(abs(e.theta(tx, ty)), abs=1e-10)


def test_theta_circle_zero():
    c = circle(center=(1, 2), radius=3)
    t = np.linspace(0, 1, 40)
    assert np.max(np.abs(c.theta(t[:, None], t[None, :]))) < 1e-12


def test_theta_symmetry_and_reversal():
    for c in (ellipse(2, 1), perturbed_circle([(3, 0.25, 0.4)])):
        t = np.arange(64) / 64 + 0.003
        A = c.theta(t[:, None], t[None, :])
        assert np.max(np.abs(A - A.T)) < 1e-8
        r = c.reversed_curve()
        # reversed curve: C_r(s) = C(-s)
        B = r.theta(-t[:, None], -t[None, :])
        assert np.max(np.abs(A - B)) < 1e-8


def test_theta_ellipse_reflections():
    e = ellipse(2, 1)
    t = np.linspace(0.01, 0.99, 31)
    A = e.theta(t[:, None], t[None, :])
    # reflections (t -> -t and t -> 1/2 - t) reverse oriented angles; the half turn keeps them
    assert np.allclose(A, -e.theta(-t[:, None], -t[None, :]), atol=1e-10)
    assert np.allclose(A, -e.theta(0.5 - t[:, None], 0.5 - t[None, :]), atol=1e-10)
    assert np.allclose(A, e.theta(0.5 + t[:, None], 0.5 + t[None, :]), atol=1e-10)


def test_theta_near_diagonal():
    c = perturbed_circle([(2, 0.3, 0.0)])
    vals = [abs(c.theta(0.2, 0.2 + d)) for d in (1e-2, 1e-3, 1e-4)]
    assert vals[1] < 0.2 * vals[0] and vals[2] < 0.2 * vals[1]
    assert c.theta(0.4, 0.4) == 0.0


def test_theta_convex_bounded():
    for c in (ellipse(4, 1), ellipse(1.3, 1)):
        t = np.arange(128) / 128
        A = c.theta(t[:, None], t[None, :] + 0.001)
        assert np.all(np.abs(A) < np.pi)


def test_theta_mobius_covariance():
    e = ellipse(2, 1)
    rng = np.random.default_rng(7)
    m = random_mobius(rng, e.bounding_disk[1])
    img = e.transformed(m)
    # match parameters through the image points
    t = np.linspace(0.03, 0.97, 12)
    s = img.closest_parameter(np.column_stack([m(e.eval_complex(t)).real, m(e.eval_complex(t)).imag]))
    A = e.theta(t[:, None], t[None, :])
    B = img.theta(s[:, None], s[None, :])
    assert np.max(np.abs(np.abs(A) - np.abs(B))) < 1e-6
