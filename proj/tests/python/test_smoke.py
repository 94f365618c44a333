import json
import os
from pathlib import Path

import pytest

import qkdrelay

DATA = Path(os.environ.get("QKDRELAY_DATA_DIR", Path(__file__).resolve().parents[2] / "data"))


def mesh4():
    return qkdrelay.load_topology((DATA / "topologies" / "mesh4.json").read_text())


def test_topology_roles_and_registry():
    t = mesh4()
    assert t.nodes == ["N1", "N2", "N3", "N4"]
    assert t.role("N4") == "simple"
    assert t.role("N3") == "trusted_relay"
    assert t.resolve_app("APP_B") == "N4"
    assert "KMS_3d" in t.kms_names()
    with pytest.raises(qkdrelay.UnknownApp):
        t.resolve_app("APP_Z")


def test_serialize_round_trip():
    t = mesh4()
    assert qkdrelay.load_topology(t.serialize()) == t


def test_validation_lists_violations():
    doc = json.loads((DATA / "topologies" / "mesh4.json").read_text())
    doc["links"][0]["b"] = "N9"
    doc["links"][1]["key_rate"] = 0
    text = json.dumps(doc)
    problems = qkdrelay.validate_topology(text)
    assert any("unknown node N9" in p for p in problems)
    assert any("key_rate" in p for p in problems)
    with pytest.raises(qkdrelay.ValidationError) as err:
        qkdrelay.load_topology(text)
    assert err.value.violations == problems
    with pytest.raises(qkdrelay.ParseError):
        qkdrelay.load_topology("{")


def test_relay_path():
    p = qkdrelay.compute_relay_path(mesh4(), "N1", "N4")
    assert p["kms"] == ["KMS_1b", "KMS_3b", "KMS_3d", "KMS_4d"]
    assert p["cost"] == 2.0
    assert qkdrelay.compute_relay_path(mesh4(), "N3", "N4", "distance")["kms"] == ["KMS_3d", "KMS_4d"]


def test_otp_xor():
    k1 = bytes(range(32))
    k2 = bytes(reversed(range(32)))
    assert qkdrelay.otp_xor(qkdrelay.otp_xor(k1, k2), k2) == k1
    assert qkdrelay.otp_xor(b"\xff" * 4, b"\x0f" * 4) == b"\xf0" * 4
    with pytest.raises(qkdrelay.Error):
        qkdrelay.otp_xor(b"ab", b"a")


def test_codec_recode_and_rejects_unknown_type():
    line = (DATA / "golden" / "relay1hop.trace.jsonl").read_text().splitlines()[2]
    assert qkdrelay.recode(line) == line
    with pytest.raises(qkdrelay.CodecError):
        qkdrelay.recode(line.replace('"RelayPathInstall"', '"Teleport"'))


def test_run_scenarios_against_golden():
    for name in ("direct", "relay1hop"):
        r = qkdrelay.run_scenario(str(DATA / "scenarios" / f"{name}.json"), seed=123)
        assert r["exit_code"] == 0, r["failures"]
        golden = (DATA / "golden" / f"{name}.trace.jsonl").read_text().splitlines()
        assert qkdrelay.trace_compare(golden, r["trace"])["equal"]
        assert qkdrelay.canonicalize_trace(r["trace"]) == golden
    report = json.loads(r["report"])
    assert report["exit_code"] == 0
    assert report["controller"]["installs_sent"] == 4


def test_trace_compare_reports_first_divergence():
    golden = (DATA / "golden" / "relay1hop.trace.jsonl").read_text().splitlines()
    d = qkdrelay.trace_compare(golden, golden[:5])
    assert not d["equal"]
    assert d["index"] == 5
    assert d["actual"] is None
