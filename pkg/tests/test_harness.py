import csv
import io
import json
import math

import pytest

from hypint import cli, harness
from hypint.errors import ConfigError
from hypint.harness import RunConfig

HEMI = {"kind": "hemisphere", "params": {"center": [0.2, -0.1], "radius": 1.3}, "resolution": 64}


def cfg(**kw):
    d = {"command": "franklin", "seed": 1, "curve": {"kind": "circle"}}
    d.update(kw)
    return RunConfig.from_dict(d)


def write_cfg(tmp_path, d, name="c.json"):
    p = tmp_path / name
    p.write_text(json.dumps(d))
    return p


def test_config_requires_seed():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"command": "franklin", "curve": {"kind": "circle"}})
    with pytest.raises(ConfigError):
        cfg(seed=-1)
    with pytest.raises(ConfigError):
        cfg(seed=1.5)


def test_config_validation():
    with pytest.raises(ConfigError):
        cfg(quad_tol=0.0)
    with pytest.raises(ConfigError):
        cfg(mc_rel_tol=-1e-3)
    with pytest.raises(ConfigError):
        cfg(bogus=1)
    with pytest.raises(ConfigError):
        cfg(command="nope")
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"seed": 1})


def test_config_hash_stable():
    a, b = cfg(), cfg()
    assert a.config_hash == b.config_hash and len(a.config_hash) == 16
    assert cfg(seed=2).config_hash != a.config_hash
    # the output path is not part of the run
    assert cfg(out="x.json").config_hash == a.config_hash


def test_cli_overrides(tmp_path):
    p = write_cfg(tmp_path, {"command": "franklin", "seed": 3, "curve": {"kind": "circle"}})
    c = RunConfig.load(p, seed=9, n_samples=123)
    assert c.seed == 9 and c.n_samples == 123


def test_reports_byte_identical(tmp_path):
    d = {"command": "crofton", "seed": 4, "n_samples": 20_000,
         "surface": {"kind": "geodesic-disk", "params": {"rho": 1.0}, "resolution": 64}}
    outs = []
    for k in range(2):
        r = harness.run(RunConfig.from_dict(d))
        js, cs = harness.write_report(r, tmp_path / f"r{k}.json")
        outs.append((js.read_bytes(), cs.read_bytes()))
    assert outs[0] == outs[1]


def test_csv_layout():
    r = harness.run(cfg(curve={"kind": "ellipse", "a": 1.5, "b": 1.0}))
    rows = list(csv.reader(io.StringIO(harness.report_csv(r))))
    assert rows[0] == ["quantity", "value", "std_err", "n_samples", "seed"]
    assert {row[0] for row in rows[1:]} >= {"lhs", "residual"}
    assert all(row[4] == "1" for row in rows[1:])
    recs = r.to_dict()["records"]
    assert len(recs) == len(rows) - 1 and recs[0]["config_hash"] == r.config_hash


def test_franklin_disk_report():
    r = harness.run(cfg())
    assert r.lhs.value == pytest.approx(2 * math.pi, abs=1e-6)
    assert r.extra["disk_value"] == pytest.approx(math.pi ** 2 / 2)
    assert r.passed


def test_cli_exit_codes(tmp_path, capsys):
    ok = write_cfg(tmp_path, {"command": "defect", "seed": 1, "curve": {"kind": "circle", "radius": 2.0}}, "ok.json")
    assert cli.main(["defect", "--config", str(ok)]) == 0
    assert json.loads(capsys.readouterr().out)["command"] == "defect"
    bad = write_cfg(tmp_path, {"command": "defect", "seed": 1, "curve": {"kind": "ellipse", "a": 2, "b": 1},
                               "params": {"expected": 1.0}}, "bad.json")
    assert cli.main(["defect", "--config", str(bad), "--out", str(tmp_path / "o.json")]) == 1
    assert (tmp_path / "o.json").exists() and (tmp_path / "o.csv").exists()
    noseed = write_cfg(tmp_path, {"command": "defect", "curve": {"kind": "circle"}}, "ns.json")
    assert cli.main(["defect", "--config", str(noseed)]) == 2
    assert cli.main(["defect", "--config", str(noseed), "--seed", "3"]) == 0


def test_multi_end_single_end_matches_gauss_bonnet():
    base = {"seed": 6, "n_samples": 20_000, "surface": HEMI}
    a = harness.run(RunConfig.from_dict({"command": "gauss-bonnet", **base})).to_dict()
    b = harness.run(RunConfig.from_dict({"command": "multi-end", **base})).to_dict()
    for k in ("lhs", "rhs_terms", "residual", "combined_tolerance", "extra", "pass"):
        assert a[k] == b[k]


def test_multi_end_rejects_disjoint(tmp_path):
    two = [HEMI, {**HEMI, "params": {"center": [5.0, 0.0]}}]
    with pytest.raises(ConfigError):
        harness.run(RunConfig.from_dict({"command": "multi-end", "seed": 1, "surface": two}))
    p = write_cfg(tmp_path, {"command": "multi-end", "seed": 1, "surface": two})
    assert cli.main(["multi-end", "--config", str(p)]) == 2


def test_multi_end_two_ended_fixture():
    with pytest.raises(ConfigError):
        harness.run(RunConfig.from_dict({"command": "multi-end", "seed": 1, "surface": {"kind": "catenoid"}}))
    pytest.skip("no two-ended surface generator; the n=2 fixture is recorded as skipped")


def test_mobius_check_spread():
    r = harness.run(cfg(command="mobius-check", curve={"kind": "ellipse", "a": 2.0, "b": 1.0},
                        params={"quantity": "franklin", "k": 5}))
    assert r.passed and r.extra["spread"] < 1e-3


def test_compact_check_sphere():
    r = harness.run(cfg(command="compact-check", curve=None,
                        surface={"kind": "geodesic-sphere", "params": {"center": [0, 0, 1.0], "rho": 0.8},
                                 "resolution": 32}))
    assert r.extra["euler_char"] == 2
    assert r.passed and abs(r.residual) < 1e-6 * abs(r.lhs.value)


def test_compact_check_rejects_open_end():
    with pytest.raises(ConfigError):
        harness.run(cfg(command="compact-check", surface={"kind": "hemisphere"}))


def test_combined_tolerance():
    from hypint.estimate import Estimate
    q = Estimate(1.0, 1e-9, 1, "quadrature")
    m1 = Estimate(1.0, 0.03, 100, "monte-carlo")
    m2 = Estimate(1.0, 0.04, 100, "monte-carlo")
    assert harness.combined_tolerance([q, m1, m2], 0.5) == pytest.approx(1e-9 + 3 * 0.05 + 0.5)
