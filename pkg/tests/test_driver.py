import copy
import csv
import json
from decimal import Decimal

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from homoclinic.cli import main
from homoclinic.driver import (
    STAGES,
    ConfigError,
    canonical_json,
    deser,
    load_config,
    parse_config,
    recheck_certificate,
    run_pipeline,
    ser,
    sha256,
    _walk_intervals,
)
from homoclinic.interval import Interval
from homoclinic.verdict import Verdict

from conftest import PUBLISHED_CONFIG, PROOF_CONFIG, config_with, load_raw


def write_raw(tmp_path, raw, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(raw, default=str))
    return path


# -- configuration --------------------------------------------------------------------------


@pytest.mark.parametrize("edit", [
    lambda r: r["model"].pop("R"),
    lambda r: r["model"].__setitem__("G_l", "0.08"),
    lambda r: r["model"].__setitem__("L_u", "-1"),
    lambda r: r["model"].__setitem__("T", "0"),
    lambda r: r["model"].__setitem__("time_direction", 2),
    lambda r: r["model"].__setitem__("C", [[1, 0, 0], [0, 1, 0]]),
    lambda r: r["model"].__setitem__("C", [[1, 0, 0], [0, 1, 0], [1, 0, 0]]),
    lambda r: r["model"].__setitem__("q0", [1, 2]),
    lambda r: r["integrator"].__setitem__("order", 1),
    lambda r: r.pop("model"),
])
def test_bad_configs_are_rejected(tmp_path, edit):
    raw = copy.deepcopy(load_raw(PROOF_CONFIG))
    edit(raw)
    with pytest.raises(ConfigError):
        parse_config(raw)
    path = write_raw(tmp_path, raw)
    assert main(["fixed-point", "--config", str(path)]) == 3


def test_unreadable_config_and_usage_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)
    assert main(["prove", "--config", str(bad)]) == 3
    assert main(["prove", "--config", str(tmp_path / "missing.json")]) == 3
    assert main(["frobnicate"]) == 3
    assert main(["eigen"]) == 3
    assert main(["manifold", "--config", str(PROOF_CONFIG), "--subdivision", "-1"]) == 3


def test_decimal_parameters_are_enclosed(proof_cfg):
    from fractions import Fraction
    for k in ("G_l", "G_r", "a", "b", "F"):
        x = getattr(proof_cfg, k)
        q = Fraction(str(proof_cfg.raw["model"][k]))
        assert Fraction(float(x.lo)) <= q <= Fraction(float(x.hi))


def test_config_hash_binds_every_field(proof_cfg):
    raw = load_raw(PROOF_CONFIG)
    for k in ("R", "T", "G_r", "M_s"):
        r = copy.deepcopy(raw)
        r["model"][k] = r["model"][k] * Decimal("1.0000001")
        assert parse_config(r).config_hash != proof_cfg.config_hash
    assert parse_config(copy.deepcopy(raw)).config_hash == proof_cfg.config_hash


# -- serialization -------------------------------------------------------------------------------


@settings(max_examples=300, deadline=None)
@given(st.lists(st.tuples(st.floats(allow_nan=False, allow_infinity=False),
                          st.floats(allow_nan=False, allow_infinity=False)), min_size=1, max_size=6))
def test_serialization_round_trip_is_bit_exact(pairs):
    lo = np.array([min(p) for p in pairs])
    hi = np.array([max(p) for p in pairs])
    x = Interval(lo, hi)
    y = deser(json.loads(json.dumps(ser(x))))
    assert np.array_equal(y.lo.view(np.uint64), x.lo.view(np.uint64))
    assert np.array_equal(y.hi.view(np.uint64), x.hi.view(np.uint64))


def test_canonical_json_is_order_independent():
    assert canonical_json({"b": 1, "a": [Decimal("0.1"), 2]}) == canonical_json({"a": [Decimal("0.1"), 2], "b": 1})


# -- the verifiable configuration, end to end -------------------------------------------------


@pytest.fixture(scope="module")
def cli_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("prove")
    code = main(["prove", "--config", str(PROOF_CONFIG), "--out", str(out), "--export-figures"])
    return code, out


def test_cli_prove_verifies_and_is_deterministic(cli_run, proof_pipeline):
    code, out = cli_run
    assert code == 0
    cert = json.loads((out / "proof.cert").read_text())
    mine = json.loads(json.dumps(proof_pipeline.certificate(), sort_keys=True))
    cert.pop("wall_time"), mine.pop("wall_time")
    assert cert == mine
    assert cert["proved"] and cert["verdict"] == "verified" and cert["failed_stage"] is None
    assert set(cert["stages"]) == set(STAGES)


def test_recheck_accepts_and_binds_config(cli_run, tmp_path):
    _, out = cli_run
    path = out / "proof.cert"
    rep = recheck_certificate(path)
    assert rep.ok and rep.problems == []
    assert recheck_certificate(path, PROOF_CONFIG).ok
    other = recheck_certificate(path, PUBLISHED_CONFIG)
    assert not other.ok and any("different configuration" in p for p in other.problems)
    assert main(["recheck", str(path)]) == 0
    assert main(["recheck", str(path), "--config", str(PUBLISHED_CONFIG)]) == 1
    junk = tmp_path / "junk.cert"
    junk.write_text("[")
    assert main(["recheck", str(junk)]) == 1


def test_every_single_endpoint_flip_is_detected(proof_pipeline):
    cert = json.loads(json.dumps(proof_pipeline.certificate()))
    sites = [(name, path) for name in STAGES for path, _ in _walk_intervals(cert["stages"][name]["data"])]
    assert len(sites) > 50
    for name, path in sites:
        for end in (0, 1):
            bad = copy.deepcopy(cert)
            pair = _locate(bad["stages"][name]["data"], path)
            v = float(pair[end])
            pair[end] = repr(-v if v != 0 else 1.0)
            rep = recheck_certificate(bad)
            assert not rep.ok and any(p.startswith(name) for p in rep.problems), (name, path, end)


def _locate(body, path):
    obj = body
    for tok in path.replace("]", "").replace("[", ".").split(".")[1:]:
        obj = obj[int(tok)] if isinstance(obj, list) else obj[tok]
    return obj


@pytest.mark.parametrize("name,key,value", [
    ("shooting", "h_left", ["-1e-07", "-9e-08"]),
    ("shooting", "h_prime", ["-1.0", "1.0"]),
    ("unstable", "mu1", ["0.5", "0.6"]),
    ("cones", None, None),
])
def test_semantic_tamper_with_recomputed_digest(proof_pipeline, name, key, value):
    """A forger who also recomputes the digest is caught by re-derivation."""
    cert = json.loads(json.dumps(proof_pipeline.certificate()))
    body = cert["stages"][name]["data"]
    if name == "cones":
        body["unstable"]["mu_M"] = ["0.5", "0.6"]
    else:
        body[key] = value
    cert["stages"][name]["digest"] = sha256(canonical_json(body))
    rep = recheck_certificate(cert)
    assert not rep.ok and any(p.startswith(name) for p in rep.problems)


def test_tampered_config_or_flags_are_detected(proof_pipeline):
    cert = json.loads(json.dumps(proof_pipeline.certificate()))
    bad = copy.deepcopy(cert)
    bad["config"]["model"]["R"] = "0.001"
    assert any(p.startswith("config") for p in recheck_certificate(bad).problems)
    bad = copy.deepcopy(cert)
    bad["proved"] = False
    assert not recheck_certificate(bad).ok


def test_exports(cli_run):
    _, out = cli_run
    names = {p.name for p in out.glob("*.csv")}
    assert {"unstable_manifold_G_l.csv", "unstable_manifold_G_r.csv", "stable_manifold_G_l.csv",
            "stable_manifold_G_r.csv", "stable_manifold_at_images.csv", "image_points.csv",
            "trajectory_left.csv", "trajectory_right.csv", "trajectory_all.csv"} <= names
    rows = list(csv.DictReader(open(out / "unstable_manifold_G_l.csv")))
    xs = [float(r["x"]) for r in rows]
    assert min(xs) == pytest.approx(-1e-4) and max(xs) == pytest.approx(1e-4)
    for r in rows:
        assert float(r["y1_lo"]) <= float(r["y1_hi"]) and float(r["y2_lo"]) <= float(r["y2_hi"])
    img = list(csv.DictReader(open(out / "stable_manifold_at_images.csv")))
    gap = {r["run"]: (float(r["x_lo"]) - float(r["ws_hi"]), float(r["x_hi"]) - float(r["ws_lo"])) for r in img}
    # the two endpoint images lie on opposite sides of the stable graph
    assert (gap["left"][0] > 0 and gap["right"][1] < 0) or (gap["left"][1] < 0 and gap["right"][0] > 0)


def test_export_without_shooting_writes_nothing(tmp_path):
    assert main(["export", "--config", str(PUBLISHED_CONFIG), "--out", str(tmp_path)]) == 2
    assert list(tmp_path.iterdir()) == []


# -- fail-closed behaviour ------------------------------------------------------------------------


def test_printed_constants_stop_at_unstable_stage(published_pipeline, tmp_path):
    assert published_pipeline.failed_stage == "unstable"
    assert published_pipeline.verdict is Verdict.REFUTED
    cert = published_pipeline.certificate()
    assert list(cert["stages"]) == ["fixed_point", "eigen", "unstable"]
    assert not cert["proved"]
    rep = recheck_certificate(cert)
    assert rep.problems == [] and not rep.ok
    assert main(["prove", "--config", str(PUBLISHED_CONFIG), "--out", str(tmp_path)]) == 1
    assert (tmp_path / "proof.cert").exists()


def test_partial_commands(capsys):
    assert main(["fixed-point", "--config", str(PUBLISHED_CONFIG)]) == 0
    assert main(["eigen", "--config", str(PUBLISHED_CONFIG)]) == 0
    out = capsys.readouterr().out
    assert "saddle_quantity" in out
    assert main(["manifold", "--config", str(PUBLISHED_CONFIG)]) == 1
    assert main(["manifold", "--config", str(PROOF_CONFIG)]) == 0


def test_tiny_unstable_lipschitz_constant_fails_at_rate_stage():
    p = run_pipeline(config_with(PROOF_CONFIG, L_u=Decimal("1e-6")))
    assert p.failed_stage == "unstable" and p.verdict is Verdict.REFUTED
    assert not p.stages["unstable"]["rate_ok"]


@pytest.mark.slow
def test_loose_unstable_lipschitz_constant_fails_at_shooting():
    """Rates still hold with L_u = 10, but the exit box is too wide to carry."""
    p = run_pipeline(config_with(PROOF_CONFIG, L_u=Decimal(10)))
    assert p.verdicts["unstable"] is Verdict.VERIFIED and p.verdicts["cones"] is Verdict.VERIFIED
    assert p.failed_stage == "shooting" and p.verdict is Verdict.UNDETERMINED
    assert "blew up" in p.stages["shooting"]["error"]
    assert not p.certificate()["proved"]


def test_point_parameter_range_is_refuted():
    g = Decimal("0.0752761095")
    p = run_pipeline(config_with(PROOF_CONFIG, G_l=g, G_r=g))
    assert p.failed_stage == "shooting" and p.verdict is Verdict.REFUTED
    assert p.stages["shooting"]["existence"] is False
