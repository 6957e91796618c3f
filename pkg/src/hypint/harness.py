"""End-to-end identity checks, run configurations and report files."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import defect, geodesic_mc, surfaces
from .curves import IdealCurve, circle, ellipse, perturbed_circle
from .errors import ConfigError, HypintError
from .estimate import Estimate
from .geom_core import HPoint, random_mobius

COMMANDS = ("gauss-bonnet", "multi-end", "compact-check", "defect", "nt", "chord", "franklin", "crofton",
            "mobius-check")
CSV_HEADER = ["quantity", "value", "std_err", "n_samples", "seed"]


# ---------------------------------------------------------------------- config
@dataclass
class RunConfig:
    """Everything that determines a run.  Two equal configs give identical reports."""

    command: str
    seed: int
    curve: dict | None = None
    surface: dict | list | None = None
    quad_tol: float = 1e-8
    mc_rel_tol: float = 0.01
    n_samples: int = 10 ** 6
    max_seconds: float = 3600.0
    params: dict = field(default_factory=dict)
    out: str | None = None
    base_dir: str = field(default=".", compare=False)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; expected one of {', '.join(COMMANDS)}")
        if self.seed is None or isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)):
            raise ConfigError("a master seed is required (no entropy default)")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        for name in ("quad_tol", "mc_rel_tol", "max_seconds"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if int(self.n_samples) < 1:
            raise ConfigError("n_samples must be >= 1")
        self.n_samples = int(self.n_samples)

    @classmethod
    def from_dict(cls, d: dict, base_dir=".", **overrides) -> "RunConfig":
        d = dict(d)
        d.update({k: v for k, v in overrides.items() if v is not None})
        known = {f for f in cls.__dataclass_fields__ if f != "base_dir"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        if "command" not in d:
            raise ConfigError("config needs a 'command'")
        if "seed" not in d:
            raise ConfigError("a master seed is required (config 'seed' or --seed)")
        return cls(**d, base_dir=str(base_dir))

    @classmethod
    def load(cls, path, **overrides) -> "RunConfig":
        path = Path(path)
        try:
            d = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(d, base_dir=path.parent, **overrides)

    def canonical(self) -> dict:
        return {k: getattr(self, k) for k in ("command", "seed", "curve", "surface", "quad_tol", "mc_rel_tol",
                                              "n_samples", "max_seconds", "params")}

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def build_curve(spec, base_dir=".") -> IdealCurve:
    """Curve from a config entry: a named family, harmonics, or a file reference."""
    if spec is None:
        raise ConfigError("this command needs a 'curve'")
    if isinstance(spec, str):
        spec = {"file": spec}
    kind = spec.get("kind")
    try:
        if "file" in spec:
            p = Path(spec["file"])
            return IdealCurve.load(p if p.is_absolute() else Path(base_dir) / p)
        if kind == "circle":
            return circle(tuple(spec.get("center", (0.0, 0.0))), spec.get("radius", 1.0))
        if kind == "ellipse":
            return ellipse(spec["a"], spec["b"], tuple(spec.get("center", (0.0, 0.0))), spec.get("angle", 0.0))
        if kind == "perturbed-circle":
            return perturbed_circle([tuple(m) for m in spec["modes"]], spec.get("radius", 1.0),
                                    tuple(spec.get("center", (0.0, 0.0))))
        if kind in (None, "harmonics") and ("harmonics_x" in spec or "coeffs" in spec):
            return IdealCurve.from_dict(spec)
    except HypintError:
        raise
    except (KeyError, TypeError, ValueError, OSError) as exc:
        raise ConfigError(f"bad curve spec {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown curve kind {kind!r}")


def build_surface(spec, base_dir="."):
    """``(ParamSurface or Truncation, resolution)`` from a surface config entry."""
    if spec is None:
        raise ConfigError("this command needs a 'surface'")
    if isinstance(spec, list):
        raise ConfigError("surface must be a single connected surface")
    kind = spec.get("kind")
    p = dict(spec.get("params", {}))
    res = int(spec.get("resolution", 256))
    try:
        if kind == "hemisphere":
            s = surfaces.make_hemisphere(tuple(p.get("center", (0.0, 0.0))), p.get("radius", 1.0))
        elif kind == "capped-cylinder":
            c = build_curve(spec.get("curve"), base_dir)
            s = surfaces.make_capped_cylinder(c, p.get("cap_height", 100.0), p.get("blend", 0.5))
        elif kind == "geodesic-sphere":
            s = surfaces.make_geodesic_sphere(HPoint(*p.get("center", (0.0, 0.0, 1.0))), p["rho"])
        elif kind == "geodesic-disk":
            # disk of hyperbolic radius rho about the top of a unit hemisphere
            R = p.get("radius", 1.0)
            s = surfaces.truncate(surfaces.make_hemisphere(tuple(p.get("center", (0.0, 0.0))), R),
                                  R / math.cosh(p["rho"]))
        elif kind == "spherical-cap":
            s = surfaces.make_spherical_cap(math.radians(p["beta_degrees"]), p.get("radius", 1.0))
        else:
            raise ConfigError(f"unknown surface kind {kind!r}")
        if "truncate" in spec:
            s = surfaces.truncate(s, float(spec["truncate"]))
    except HypintError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad surface spec {spec!r}: {exc}") from exc
    return s, res


# ---------------------------------------------------------------------- reports
def combined_tolerance(terms, extra_bounds=0.0, k: float = 3.0) -> float:
    """Quadrature errors add linearly; Monte Carlo errors in quadrature, times ``k``."""
    quad = sum(t.std_err for t in terms if t.method == "quadrature")
    mc = math.sqrt(sum(t.std_err ** 2 for t in terms if t.method == "monte-carlo"))
    return quad + k * mc + extra_bounds


@dataclass
class IdentityReport:
    """``lhs`` against a combination of named terms; pass iff ``|residual| <= combined_tolerance``."""

    command: str
    lhs: Estimate
    rhs_terms: dict
    residual: float
    combined_tolerance: float
    config_hash: str
    seed: int
    extra: dict = field(default_factory=dict)
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return abs(self.residual) <= self.combined_tolerance

    def to_dict(self) -> dict:
        """Serialisable content; wall time is left out so identical configs give identical files."""
        return {
            "command": self.command,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "lhs": _est_dict(self.lhs),
            "rhs_terms": {k: _est_dict(v) for k, v in self.rhs_terms.items()},
            "residual": self.residual,
            "combined_tolerance": self.combined_tolerance,
            "pass": self.passed,
            "extra": _jsonable(self.extra),
            "records": self.records(),
        }

    def records(self) -> list:
        """One flat record per reported quantity (same content as the CSV rows)."""
        return [{"quantity": q, "value": float(v), "std_err": float(e), "n_samples": int(n), "seed": int(sd),
                 "config_hash": self.config_hash} for q, v, e, n, sd in self.rows()]

    def rows(self):
        rows = [("lhs", self.lhs)] + list(self.rhs_terms.items())
        out = [[name, repr(float(e.value)), repr(float(e.std_err)), e.n_samples, self.seed] for name, e in rows]
        out.append(["residual", repr(float(self.residual)), repr(float(self.combined_tolerance)), 1, self.seed])
        for name, e in self.extra.get("sweep", []):
            out.append([name, repr(float(e.value)), repr(float(e.std_err)), e.n_samples, self.seed])
        return out


def _est_dict(e: Estimate) -> dict:
    d = e.to_dict()
    if e.info:
        d["info"] = _jsonable(e.info)
    return d


def _jsonable(x):
    if isinstance(x, Estimate):
        return _est_dict(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer, int)) and not isinstance(x, bool):
        return int(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def report_json(r: IdentityReport) -> str:
    return json.dumps(r.to_dict(), sort_keys=True, indent=2) + "\n"


def report_csv(r: IdentityReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    w.writerows(r.rows())
    return buf.getvalue()


def write_report(r: IdentityReport, out) -> tuple[Path, Path]:
    """Write ``out`` (JSON) and the CSV table next to it (same stem, ``.csv``)."""
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report_json(r))
    csv_path = out.with_suffix(".csv")
    csv_path.write_text(report_csv(r))
    return out, csv_path


def _report(cfg: RunConfig, lhs, terms, residual, extra_bounds=0.0, extra=None, t0=None) -> IdentityReport:
    tol = combined_tolerance([lhs, *terms.values()], extra_bounds)
    extra = dict(extra or {})
    if extra_bounds:
        extra["tail_bounds"] = extra_bounds
    return IdentityReport(cfg.command, lhs, terms, float(residual), float(tol), cfg.config_hash, cfg.seed, extra,
                          time.perf_counter() - t0 if t0 is not None else 0.0)


def _exact(value: float) -> Estimate:
    return Estimate(float(value), 0.0, 1, "quadrature")


# ---------------------------------------------------------------------- commands
def _end_terms(cfg: RunConfig, s, res, seed):
    """Geodesic term and defect for one surface with a cone-like end."""
    if s.end_curve is None:
        raise ConfigError("surface has no cone-like end")
    target = geodesic_mc.surface_target(s, res)
    gt = geodesic_mc.geodesic_term(target, s.end_curve, n=cfg.n_samples, seed=seed)
    d = defect.ideal_defect(s.end_curve, tol=cfg.quad_tol)
    bounds = gt.info.get("tail_bound", 0.0) + gt.info.get("small_rho_bound", 0.0) + d.info.get("band_bound", 0.0) / math.pi
    return gt, d, bounds


def _multi_end_report(cfg: RunConfig, parts, chi: int, t0) -> IdentityReport:
    """``int K = 2 pi (chi - n) + sum_i [geodesic term_i - defect_i / pi]``."""
    n = len(parts)
    lhs = None
    terms = {}
    rhs = 2 * math.pi * (chi - n)
    bounds = 0.0
    for i, (s, res) in enumerate(parts):
        k = surfaces.total_curvature(s, cfg.quad_tol)
        lhs = k if lhs is None else lhs + k
        gt, d, b = _end_terms(cfg, s, res, cfg.seed + i)
        sfx = "" if n == 1 else f"[{i}]"
        terms["geodesic_term" + sfx] = gt
        terms["defect_over_pi" + sfx] = d.scaled(1 / math.pi)
        rhs = rhs + gt.value - d.value / math.pi
        bounds += b
    return _report(cfg, lhs, terms, lhs.value - rhs, bounds, {"chi": chi, "ends": n}, t0)


def cmd_gauss_bonnet(cfg: RunConfig) -> IdentityReport:
    """``int K dS = (1/pi) int (# - lambda^2) dl - (1/pi) ideal_defect`` for one cone-like end."""
    t0 = time.perf_counter()
    s, res = build_surface(cfg.surface, cfg.base_dir)
    return _multi_end_report(cfg, [(s, res)], 1, t0)


def cmd_multi_end(cfg: RunConfig) -> IdentityReport:
    """Several ends: ``int K = 2 pi (chi - n) + sum over ends``; components must form one surface."""
    t0 = time.perf_counter()
    spec = cfg.surface
    if isinstance(spec, list):
        if len(spec) > 1:
            raise ConfigError("surface components are disjoint: the surface must be connected")
        spec = spec[0]
    if isinstance(spec, dict) and spec.get("kind") == "catenoid":
        raise ConfigError("no generator for two-ended tubes is available")
    s, res = build_surface(spec, cfg.base_dir)
    return _multi_end_report(cfg, [(s, res)], int(cfg.params.get("chi", 1)), t0)


def cmd_compact_check(cfg: RunConfig) -> IdentityReport:
    """``int K = 2 pi chi + F - int k_g`` for a geodesic sphere or a truncation."""
    t0 = time.perf_counter()
    s, res = build_surface(cfg.surface, cfg.base_dir)
    if isinstance(s, surfaces.ParamSurface) and s.end_curve is not None:
        raise ConfigError("compact check needs a compact surface (geodesic sphere or a truncation)")
    lhs = surfaces.total_curvature(s, cfg.quad_tol)
    F = surfaces.area_estimate(s, cfg.quad_tol)
    m = surfaces.mesh(s, max(32, min(res, 128)))
    chi = m.euler_char
    terms = {"two_pi_chi": _exact(2 * math.pi * chi), "area": F}
    rhs = 2 * math.pi * chi + F.value
    if isinstance(s, surfaces.Truncation):
        kg = surfaces.geodesic_curvature_estimate(s, cfg.quad_tol)
        terms["kg_integral"] = kg
        rhs -= kg.value
    r = _report(cfg, lhs, terms, lhs.value - rhs, extra={"euler_char": chi}, t0=t0)
    # closed-form targets are relative; allow quad_tol relative slack on top of the error bounds
    r.combined_tolerance += cfg.quad_tol * max(1.0, abs(lhs.value))
    return r


def cmd_defect(cfg: RunConfig) -> IdentityReport:
    """Ideal defect by quadrature; compared with ``params.expected`` if given (else 0 for circles)."""
    t0 = time.perf_counter()
    c = build_curve(cfg.curve, cfg.base_dir)
    d = defect.ideal_defect(c, tol=cfg.quad_tol)
    expected = cfg.params.get("expected")
    if expected is None and (cfg.curve or {}).get("kind") == "circle":
        expected = 0.0
    if expected is None:
        return _report(cfg, d, {}, 0.0, extra={"note": "no reference value"}, t0=t0)
    return _report(cfg, d, {"expected": _exact(expected)}, d.value - expected, d.info.get("band_bound", 0.0), t0=t0)


def cmd_nt(cfg: RunConfig) -> IdentityReport:
    """Point-pair (NT) defect by Monte Carlo against the quadrature value."""
    t0 = time.perf_counter()
    c = build_curve(cfg.curve, cfg.base_dir)
    nt = defect.nt_defect(c, n=cfg.n_samples, seed=cfg.seed)
    d = defect.ideal_defect(c, tol=cfg.quad_tol)
    bounds = nt.info.get("band_bound", 0.0) + d.info.get("band_bound", 0.0)
    return _report(cfg, nt, {"ideal_defect": d}, nt.value - d.value, bounds,
                   {"relative_gap": (nt.value - d.value) / max(abs(d.value), 1e-300)}, t0)


def cmd_chord(cfg: RunConfig) -> IdentityReport:
    """``pi ((2/pi) chord_functional - 2 pi)`` against the quadrature defect."""
    t0 = time.perf_counter()
    c = build_curve(cfg.curve, cfg.base_dir)
    cf = defect.chord_functional(c, n_lines=cfg.n_samples, seed=cfg.seed)
    via = Estimate(2 * cf.value - 2 * math.pi ** 2, 2 * cf.std_err, cf.n_samples, cf.method, cf.info)
    d = defect.ideal_defect(c, tol=cfg.quad_tol)
    return _report(cfg, via, {"ideal_defect": d, "chord_functional": cf}, via.value - d.value,
                   d.info.get("band_bound", 0.0),
                   {"relative_gap": (via.value - d.value) / max(abs(d.value), 1e-300)}, t0)


def cmd_franklin(cfg: RunConfig) -> IdentityReport:
    """Franklin invariant; the identity checked is ``(4/pi) F = 2 pi + D / pi``."""
    t0 = time.perf_counter()
    c = build_curve(cfg.curve, cfg.base_dir)
    f = defect.franklin(c, tol=cfg.quad_tol)
    d = defect.ideal_defect(c, tol=cfg.quad_tol)
    lhs = f.scaled(4 / math.pi)
    terms = {"two_pi": _exact(2 * math.pi), "defect_over_pi": d.scaled(1 / math.pi), "franklin": f}
    extra = {"disk_value": math.pi ** 2 / 2, "excess_over_disk": f.value - math.pi ** 2 / 2}
    return _report(cfg, lhs, terms, lhs.value - (2 * math.pi + d.value / math.pi),
                   d.info.get("band_bound", 0.0) / math.pi, extra, t0)


def cmd_crofton(cfg: RunConfig) -> IdentityReport:
    """Crofton area of a compact surface against its quadrature area."""
    t0 = time.perf_counter()
    s, res = build_surface(cfg.surface, cfg.base_dir)
    if not isinstance(s, surfaces.Truncation):
        raise ConfigError("crofton needs a truncated surface (e.g. a geodesic disk)")
    F = surfaces.area_estimate(s, cfg.quad_tol)
    target = geodesic_mc.surface_target(s, res)
    cr = geodesic_mc.crofton(target, n=cfg.n_samples, seed=cfg.seed)
    # the mesh is inscribed, so its own area is what the counts see; report the gap
    mesh_gap = F.value - target.mesh.hyperbolic_area() if target.collar is None else 0.0
    return _report(cfg, cr, {"area": F}, cr.value - F.value, cr.info["tail_bound"] + abs(mesh_gap),
                   {"mesh_area_gap": mesh_gap}, t0)


def cmd_mobius_check(cfg: RunConfig) -> IdentityReport:
    """Spread of the defect (or Franklin value) over ``k`` random bounded Mobius images."""
    t0 = time.perf_counter()
    c = build_curve(cfg.curve, cfg.base_dir)
    k = int(cfg.params.get("k", 5))
    quantity = cfg.params.get("quantity", "defect")
    rng = np.random.default_rng([cfg.seed, 0x4D0B])
    cen, rad = c.bounding_disk
    fn = {"defect": lambda cc: defect.ideal_defect(cc, tol=cfg.quad_tol),
          "franklin": lambda cc: defect.franklin(cc, tol=cfg.quad_tol)}.get(quantity)
    if fn is None:
        raise ConfigError(f"unknown mobius-check quantity {quantity!r}")
    base = fn(c)
    sweep = [("original", base)]
    for i in range(k):
        for _ in range(100):
            m = random_mobius(rng, rad, complex(*cen) if not isinstance(cen, complex) else cen)
            img = c.transformed(m)
            if quantity != "franklin" or img.is_convex():
                break
        sweep.append((f"image_{i}", fn(img)))
    vals = np.array([e.value for _, e in sweep])
    scale = max(abs(base.value), 1e-300)
    spread = float((vals.max() - vals.min()) / scale)
    rel_tol = float(cfg.params.get("rel_tol", 1e-3))
    worst = max(sweep[1:], key=lambda t: abs(t[1].value - base.value))[1] if k else base
    r = _report(cfg, base, {"worst_image": worst}, worst.value - base.value, extra={"spread": spread,
                                                                                   "sweep": sweep}, t0=t0)
    r.combined_tolerance = rel_tol * scale
    return r


DISPATCH = {
    "gauss-bonnet": cmd_gauss_bonnet,
    "multi-end": cmd_multi_end,
    "compact-check": cmd_compact_check,
    "defect": cmd_defect,
    "nt": cmd_nt,
    "chord": cmd_chord,
    "franklin": cmd_franklin,
    "crofton": cmd_crofton,
    "mobius-check": cmd_mobius_check,
}


def run(cfg: RunConfig) -> IdentityReport:
    return DISPATCH[cfg.command](cfg)
