import pytest
from fastapi.testclient import TestClient

from goelab import __version__
from goelab.ensembles import EnsembleSpec, SeedSpec, samples_csv_text
from goelab.service import app

client = TestClient(app)

ENVELOPE_KEYS = {"schema_version", "command", "config", "report", "timing_ms"}


def test_health():
    r = client.get("/v1/health")
    assert r.status_code == 200
    assert r.json() == {"status": "ok", "version": __version__}


def test_identities_endpoint():
    r = client.post("/v1/identities", json={})
    assert r.status_code == 200
    env = r.json()
    assert set(env) == ENVELOPE_KEYS
    assert env["command"] == "identities"
    assert env["report"]["overall_pass"] is True


def test_sample_endpoint_returns_csv():
    r = client.post(
        "/v1/sample",
        json={"ensemble": {"kind": "goe", "dim": 2}, "n": 5, "seed": {"seed": 3}},
    )
    assert r.status_code == 200
    assert r.headers["content-type"].startswith("text/csv")
    lines = r.text.strip().splitlines()
    assert lines[0] == "x_1_1,x_1_2,x_2_2"
    assert len(lines) == 6


def test_sample_endpoint_matches_library():
    r = client.post(
        "/v1/sample",
        json={"ensemble": {"kind": "goe", "dim": 3}, "n": 4, "seed": {"seed": 8, "stream": 2}},
    )
    expected = samples_csv_text(EnsembleSpec("goe", 3).sample(4, SeedSpec(8, 2)))
    assert r.text == expected


def test_verify_forward_endpoint():
    r = client.post(
        "/v1/verify-forward",
        json={
            "ensemble": {"kind": "goe", "dim": 2},
            "n": 10_000,
            "seed": {"seed": 5},
            "haar_count": 1,
        },
    )
    assert r.status_code == 200
    env = r.json()
    assert env["report"]["overall_pass"] is True
    assert env["config"]["ensemble"] == {"kind": "goe", "dim": 2}


def test_characterize_endpoint_inline_csv():
    csv_text = samples_csv_text(EnsembleSpec("goe", 2).sample(20_000, SeedSpec(12)))
    r = client.post("/v1/characterize", json={"samples_csv": csv_text})
    assert r.status_code == 200
    rep = r.json()["report"]
    assert rep["verdict"] == "AffineGOE"
    assert abs(rep["sigma2"] - 1.0) < 0.05


def test_characterize_endpoint_rejects_two_sources():
    r = client.post(
        "/v1/characterize",
        json={"ensemble": {"kind": "goe", "dim": 2}, "samples_csv": "x", "n": 20_000},
    )
    assert r.status_code == 422


def test_characterize_endpoint_bad_csv_is_422():
    r = client.post("/v1/characterize", json={"samples_csv": "not,a,header\n1,2,3\n"})
    assert r.status_code == 422
    assert "bad sample csv" in r.json()["detail"]


def test_probe_cf_endpoint():
    r = client.post(
        "/v1/probe-cf",
        json={
            "ensemble": {"kind": "goe", "dim": 3},
            "probe": "offdiag:1,2",
            "n": 20_000,
            "seed": {"seed": 4},
        },
    )
    assert r.status_code == 200
    rep = r.json()["report"]
    assert rep["comparison"]["pass"] is True


def test_probe_cf_bad_probe_is_422():
    r = client.post(
        "/v1/probe-cf",
        json={"ensemble": {"kind": "goe", "dim": 3}, "probe": "nope", "n": 100},
    )
    assert r.status_code == 422


def test_validation_errors_are_422():
    r = client.post(
        "/v1/verify-forward",
        json={"ensemble": {"kind": "goe", "dim": 2}, "n": 100},  # n below minimum
    )
    assert r.status_code == 422
    r = client.post(
        "/v1/sample", json={"ensemble": {"kind": "gue", "dim": 2}, "n": 5}
    )
    assert r.status_code == 422
