"""Command-line client: subcommands, exit codes, output files, server mode."""

import pytest

from pnmsim.cli import main
from pnmsim.sweep import CSV_HEADER, parse_csv

ANALYTIC = "[perf]\nrecall_source = analytic\n"
FAST_FIDELITY = ("[fidelity]\ncontext_pages = 64 128\ncapacity_pages = 16\n"
                 "budget_pages = 8\nsteady_budget_pages = 32\n"
                 "n_pnm_range = 1 2\nsteps = 40\nwarmup = 8\nmerge_samples = 4\n")


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_no_command_is_usage_error(capsys):
    assert main([]) == 1
    err = capsys.readouterr().err
    assert "a command is required" in err


def test_unknown_command(capsys):
    assert main(["bogus"]) == 1
    assert "error" in capsys.readouterr().err


def test_sizing_prints_key_value_lines(capsys):
    assert main(["sizing", "--model", "Llama3.1-8B", "--context", "131072"]) == 0
    out = capsys.readouterr().out
    lines = dict(line.split(" ", 1) for line in out.strip().splitlines())
    assert lines["kv_bytes_per_token"] == "131072"
    assert lines["kv_cache_bytes"] == "17179869184"
    assert lines["max_batch"] == "4"


def test_sizing_accepts_scientific_byte_counts(capsys):
    assert main(["sizing", "--free-bytes", "32e9", "--resident-tokens", "8192"]) == 0
    out = capsys.readouterr().out
    assert "max_batch 29" in out  # 32e9 / (8192*131072)


def test_sizing_rejects_fractional_bytes(capsys):
    assert main(["sizing", "--free-bytes", "1.5"]) == 1
    assert "'1.5' is not an integer" in capsys.readouterr().err


def test_sizing_unknown_model(capsys):
    assert main(["sizing", "--model", "GPT-9"]) == 1
    assert "GPT-9" in capsys.readouterr().err


def test_devices_lists_builtins(capsys):
    assert main(["devices"]) == 0
    out = capsys.readouterr().out
    assert "A100-80GB kind=GPU" in out
    assert "CXL-PNM kind=PNM" in out


def test_sweep_to_stdout(capsys, tmp_path):
    cfg = write(tmp_path, "exp.cfg",
                "[sweep]\nmodes = baseline\nn_gpu = 1\nn_pnm = 1\n" + ANALYTIC)
    assert main(["sweep", "--config", cfg]) == 0
    out = capsys.readouterr().out
    assert out.startswith(CSV_HEADER)
    rows = parse_csv(out)
    assert len(rows) == 1 and rows[0]["status"] == "ok"


def test_sweep_out_file_and_rerun_identical(capsys, tmp_path):
    cfg = write(tmp_path, "exp.cfg", "[sweep]\nn_pnm = 1 2\n" + ANALYTIC)
    out_a, out_b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["sweep", "--config", cfg, "--seed", "4", "--out", str(out_a)]) == 0
    assert main(["sweep", "--config", cfg, "--seed", "4", "--out", str(out_b),
                 "--jobs", "4"]) == 0
    a = out_a.read_bytes()
    assert a == out_b.read_bytes()
    assert a.startswith(CSV_HEADER.encode())
    assert capsys.readouterr().out == ""  # --out suppresses stdout CSV


def test_sweep_mode_flag_restricts_rows(capsys):
    assert main(["sweep", "--mode", "pnm-kv"]) == 0
    rows = parse_csv(capsys.readouterr().out)
    assert {r["mode"] for r in rows} == {"pnm-kv"}


def test_sweep_mode_flag_validates(capsys):
    assert main(["sweep", "--mode", "warp"]) == 1
    assert "invalid choice" in capsys.readouterr().err


def test_sweep_all_infeasible_exits_2(capsys, tmp_path):
    cfg = write(tmp_path, "big.cfg",
                "[model]\nname = Llama3.1-405B\n"
                "[sweep]\nmodes = baseline\nn_gpu = 1\nn_pnm = 1\n")
    assert main(["sweep", "--config", cfg]) == 2
    captured = capsys.readouterr()
    assert "all 1 sweep point infeasible" in captured.err
    rows = parse_csv(captured.out)  # the CSV still carries the status row
    assert rows[0]["status"] == "weights-exceed-gpu-memory"


def test_sweep_missing_config_file(capsys):
    assert main(["sweep", "--config", "/no/such/file.cfg"]) == 1
    assert "cannot read config" in capsys.readouterr().err


def test_sweep_bad_config_content(capsys, tmp_path):
    cfg = write(tmp_path, "bad.cfg", "[sweep]\nseed = banana\n")
    assert main(["sweep", "--config", cfg]) == 1
    assert "[sweep] seed" in capsys.readouterr().err


def test_fidelity_report_stdout_and_file(capsys, tmp_path):
    cfg = write(tmp_path, "fid.cfg", FAST_FIDELITY)
    assert main(["fidelity", "--config", cfg, "--trace", "2"]) == 0
    out = capsys.readouterr().out
    assert "recall curve" in out and out.count("trace step") == 2
    dest = tmp_path / "report.txt"
    assert main(["fidelity", "--config", cfg, "--out", str(dest)]) == 0
    assert "steady sweep" in dest.read_text()


def test_fidelity_seed_changes_report(capsys, tmp_path):
    cfg = write(tmp_path, "fid.cfg", FAST_FIDELITY)
    assert main(["fidelity", "--config", cfg]) == 0
    a = capsys.readouterr().out
    assert main(["fidelity", "--config", cfg, "--seed", "11"]) == 0
    assert a != capsys.readouterr().out


def test_server_flag_sends_http(capsys, monkeypatch):
    # route the thin client at an in-process test app instead of a socket
    import httpx
    from fastapi.testclient import TestClient

    from pnmsim.service.app import create_app

    svc = TestClient(create_app(), raise_server_exceptions=False)

    def fake_post(url, json, timeout):
        return svc.post(url.removeprefix("http://svc"), json=json)

    def fake_get(url, timeout):
        return svc.get(url.removeprefix("http://svc"))

    monkeypatch.setattr(httpx, "post", fake_post)
    monkeypatch.setattr(httpx, "get", fake_get)

    assert main(["devices", "--server", "http://svc"]) == 0
    assert "A100-80GB" in capsys.readouterr().out
    assert main(["sweep", "--server", "http://svc", "--mode", "baseline"]) == 0
    assert parse_csv(capsys.readouterr().out)[0]["mode"] == "baseline"
    assert main(["sizing", "--server", "http://svc", "--model", "GPT-9"]) == 1
    assert "GPT-9" in capsys.readouterr().err


def test_server_unreachable_is_exit_1(capsys):
    assert main(["devices", "--server", "http://127.0.0.1:1"]) == 1
    assert "failed" in capsys.readouterr().err
