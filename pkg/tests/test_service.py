"""HTTP service endpoints over the in-process test client."""

import pytest
from fastapi.testclient import TestClient

from pnmsim.service.app import create_app
from pnmsim.sweep import CSV_HEADER, parse_csv

FAST_FIDELITY = ("[fidelity]\ncontext_pages = 64 128\ncapacity_pages = 16\n"
                 "budget_pages = 8\nsteady_budget_pages = 32\n"
                 "n_pnm_range = 1 2\nsteps = 40\nwarmup = 8\nmerge_samples = 4\n")


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def test_health(client):
    r = client.get("/health")
    assert r.status_code == 200
    assert r.json() == {"status": "ok"}


def test_devices(client):
    r = client.get("/devices")
    assert r.status_code == 200
    names = {d["name"]: d for d in r.json()}
    assert names["A100-80GB"]["kind"] == "GPU"
    assert names["CXL-PNM"]["mem_capacity"] == 512 * 1024**3


def test_models(client):
    r = client.get("/models")
    assert r.status_code == 200
    by_name = {m["name"]: m for m in r.json()}
    assert by_name["Llama3.1-8B"]["n_l"] == 32
    assert set(by_name) == {"Llama3.1-8B", "Llama3.1-70B", "Llama3.1-405B"}


def test_sizing_defaults_and_exact_kv(client):
    r = client.post("/sizing", json={"model": "Llama3.1-8B", "batch": 1,
                                     "context": 131072})
    assert r.status_code == 200
    body = r.json()
    assert body["kv_bytes_per_token"] == 131072
    assert body["kv_cache_bytes"] == 17179869184
    assert body["fc_param_bytes"] == 13958643712
    assert body["max_batch"] == 4  # one default GPU after weights


def test_sizing_with_budget(client):
    r = client.post("/sizing", json={"model": "Llama3.1-8B",
                                     "free_bytes": 16 * 1024**3,
                                     "resident_tokens": 8192})
    assert r.status_code == 200
    assert r.json()["max_batch"] == 16


def test_sizing_unknown_model_is_400(client):
    r = client.post("/sizing", json={"model": "GPT-9"})
    assert r.status_code == 400
    assert "GPT-9" in r.json()["detail"]


def test_sizing_rejects_negative_batch(client):
    r = client.post("/sizing", json={"batch": -1})
    assert r.status_code == 422  # schema validation, not simulator logic


def test_sweep_roundtrip_and_counts(client):
    cfg = ("[sweep]\nmodes = baseline pnm-kv\ncontexts = 131072\n"
           "n_gpu = 1\nn_pnm = 1\n[perf]\nrecall_source = analytic\n")
    r = client.post("/sweep", json={"config": cfg})
    assert r.status_code == 200
    body = r.json()
    assert body["n_rows"] == 2
    assert body["n_ok"] == 2 and body["n_infeasible"] == 0
    rows = parse_csv(body["csv"])
    assert [row["mode"] for row in rows] == ["baseline", "pnm-kv"]


def test_sweep_mode_and_seed_overrides(client):
    r = client.post("/sweep", json={"config": "[perf]\nrecall_source = analytic\n",
                                    "mode": "pnm-kv", "seed": 3})
    assert r.status_code == 200
    rows = parse_csv(r.json()["csv"])
    assert {row["mode"] for row in rows} == {"pnm-kv"}
    assert {row["seed"] for row in rows} == {"3"}


def test_sweep_deterministic_across_jobs(client):
    cfg = "[sweep]\nn_pnm = 1 2\n[perf]\nrecall_source = analytic\n"
    a = client.post("/sweep", json={"config": cfg, "jobs": 1}).json()["csv"]
    b = client.post("/sweep", json={"config": cfg, "jobs": 4}).json()["csv"]
    assert a == b
    assert a.startswith(CSV_HEADER)


def test_sweep_bad_config_is_400(client):
    r = client.post("/sweep", json={"config": "[sweep]\nseed = banana\n"})
    assert r.status_code == 400
    assert "[sweep] seed" in r.json()["detail"]
    r = client.post("/sweep", json={"mode": "warp"})
    assert r.status_code == 400
    assert "unknown mode" in r.json()["detail"]


def test_fidelity_endpoint(client):
    r = client.post("/fidelity", json={"config": FAST_FIDELITY, "trace_lines": 2})
    assert r.status_code == 200
    body = r.json()
    assert [p for p, _ in body["recall_curve"]] == [64, 128]
    assert len(body["steady_curve"]) == 2
    assert body["merge_max_rel_err"] < 1e-12
    assert 0.0 <= body["selection_overlap"] <= 1.0
    assert len(body["trace"]) == 2
    assert "recall curve" in body["report"]


def test_fidelity_seed_override_changes_results(client):
    a = client.post("/fidelity", json={"config": FAST_FIDELITY}).json()
    b = client.post("/fidelity", json={"config": FAST_FIDELITY, "seed": 11}).json()
    assert a["recall_curve"] != b["recall_curve"]


def test_fidelity_bad_config_is_400(client):
    r = client.post("/fidelity", json={"config": "[fidelity]\nd_h = 99\n"})
    assert r.status_code == 400
    assert "[fidelity]" in r.json()["detail"]
