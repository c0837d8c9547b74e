import json

import pytest
from fastapi.testclient import TestClient

from nrdiag.service.app import create_app


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def test_healthz(client):
    assert client.get("/healthz").json() == {"status": "ok"}


def test_cases_listing(client):
    rows = {row["name"]: row for row in client.get("/cases").json()["cases"]}
    assert rows["dc"]["m"] == 13 and rows["dc"]["q"] == 3 and rows["dc"]["p"] == 2
    assert rows["hex"]["presets"] == ["#1", "#2", "#3", "#4", "#5", "#6"]
    assert rows["ac"]["parametric"] == "ac(N,X)"


def test_run_hex1(client):
    resp = client.post("/run", json={"case": "hex#1"})
    assert resp.status_code == 200
    report = resp.json()
    assert report["schema"] == 1
    assert report["status"] == "Converged"
    assert report["iterations"] == 3
    assert report["lambda"] == pytest.approx(1.0)


def test_run_report_round_trips(client):
    resp = client.post("/run", json={"case": "hex#2"})
    report = resp.json()
    assert json.loads(json.dumps(report)) == report
    alphas = [row["value"] for row in report["alpha"]]
    assert alphas == sorted(alphas, reverse=True)
    gammas = [row["value"] for row in report["gamma"]]
    assert gammas == sorted(gammas, reverse=True)
    assert report["gamma"][0]["value"] == pytest.approx(0.211, abs=0.01)


def test_run_dc4_top_suspect(client):
    resp = client.post("/run", json={"case": "dc#4"})
    report = resp.json()
    assert report["status"] != "Converged"
    assert report["suspects"][0]["var"] == "v_d"
    assert report["suspects"][0]["direction"] == "increase"
    assert report["suspects"][0]["critical"] is True


def test_run_with_override(client):
    resp = client.post("/run", json={"case": "hex#3", "set": {"p_i": 2.1994}})
    report = resp.json()
    assert report["status"] == "Converged"
    assert report["iterations"] == 4


def test_run_with_scale_var(client):
    resp = client.post("/run", json={"case": "hex#2", "scale_var": {"p_i": 0.99}})
    assert resp.status_code == 200


def test_run_with_options(client):
    resp = client.post("/run", json={"case": "dc#3", "options": {"max_iter": 5}})
    report = resp.json()
    assert report["status"] == "MaxIterations"
    assert report["iterations"] == 5


def test_run_unknown_case(client):
    assert client.post("/run", json={"case": "nope#1"}).status_code == 400


def test_run_unknown_variable(client):
    resp = client.post("/run", json={"case": "hex#1", "set": {"bogus": 1.0}})
    assert resp.status_code == 400


def test_run_invalid_options(client):
    resp = client.post("/run", json={"case": "hex#1", "options": {"damping_factor": 2.0}})
    assert resp.status_code == 422


def test_verify_endpoint(client):
    resp = client.post("/verify", json={"case": "dc"})
    payload = resp.json()
    assert payload["passed"] is True
    classes = [c for c in payload["checks"] if c["name"] == "structure: equation classes"]
    assert classes and "source_power" in classes[0]["detail"]


def test_verify_rejects_large_grid(client):
    assert client.post("/verify", json={"case": "ac", "n": 20}).status_code == 400


def test_run_degrades_when_guess_not_evaluable(client):
    resp = client.post("/run", json={"case": "hex#1", "set": {"p_i": 2.5}})
    assert resp.status_code == 200
    report = resp.json()
    assert report["status"] == "NonEvaluable"
    assert report["alpha"] == []
    assert "diagnostics unavailable" in report["note"]


def test_run_at_exact_solution_notes_degenerate(client):
    resp = client.post("/run", json={"case": "hex#1",
                                     "set": {"f": 1.0, "k_v": 1.0, "T_o": 4.0,
                                             "gamma": 1.0, "p_o": 2.0, "p_i": 2.2}})
    report = resp.json()
    assert report["status"] == "Converged"
    assert report["iterations"] == 0
    assert "solves the nonlinear part" in report["note"]
    assert all(row["value"] == 0.0 for row in report["alpha"])


REPORT_KEYS = {"schema", "case", "preset", "status", "iterations", "lambda", "norms",
               "alpha", "gamma", "sigma_diag", "sufficient_condition", "suspects",
               "note", "warnings"}


def test_report_schema_key_set(client):
    report = client.post("/run", json={"case": "dc#2"}).json()
    assert set(report.keys()) == REPORT_KEYS
    assert set(report["norms"].keys()) == {"f_x0_inf", "r_x0_inf", "f_x1_star_inf"}
    assert set(report["sufficient_condition"].keys()) == {"alpha", "beta", "holds"}
    for entry in report["suspects"]:
        assert {"var", "score", "direction", "increment", "critical", "evidence"} <= set(entry)
