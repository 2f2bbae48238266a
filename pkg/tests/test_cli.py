import hashlib
import json

import pytest

from flagseq.cli import main

DESIGN = {
    "N": 32,
    "zone": {"tau_max": 2, "omega_max": 2, "case": "periodic"},
    "curtains": {"kind": "single", "xi": 1, "q": 0},
    "design": {"varrho": 1, "alpha": 0.5, "beta": 0.01, "epsilon": 0.894, "symmetric": False},
    "solver": {"t_max": 20},
}


def _write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture(scope="module")
def designed(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = _write(root / "cfg.json", DESIGN)
    assert main(["design", "--config", cfg, "--out", str(root / "a"), "--seed", "5", "--emit-gnuplot"]) == 0
    return root


def test_design_outputs_and_manifest(designed):
    out = designed / "a"
    man = json.loads((out / "manifest.json").read_text())
    names = {f["path"] for f in man["files"]}
    assert {"design.json", "flag_tx_0.csv", "flag_rx_0.csv", "convergence.jsonl", "convergence.gp"} <= names
    for f in man["files"]:
        assert hashlib.sha256((out / f["path"]).read_bytes()).hexdigest() == f["sha256"]
    assert man["seed"] == 5 and man["config"]["N"] == 32
    rec = json.loads((out / "convergence.jsonl").read_text().splitlines()[-1])
    assert {"t", "OF", "WImSL", "NWImSL_dB"} <= set(rec)


def test_same_seed_same_bytes(designed):
    cfg = str(designed / "cfg.json")
    assert main(["design", "--config", cfg, "--out", str(designed / "b"), "--seed", "5"]) == 0
    for name in ("design.json", "flag_tx_0.csv", "flag_rx_0.csv"):
        assert (designed / "a" / name).read_bytes() == (designed / "b" / name).read_bytes()


def test_verify_pass_and_corruption(designed, capsys):
    path = designed / "a" / "design.json"
    assert main(["verify", "--config", str(path), "--out", str(designed / "v")]) in (0, 1)
    data = json.loads(path.read_text())
    data["design"]["peaks_tx"][0]["re"][3] *= 2.0
    bad = _write(designed / "bad.json", data)
    assert main(["verify", "--config", bad, "--out", str(designed / "v2")]) == 1
    assert "FAIL constant_modulus_tx[0]" in capsys.readouterr().out


def test_verify_catches_non_ideal_curtain(designed, capsys):
    data = json.loads((designed / "a" / "design.json").read_text())
    data["design"]["curtains"]["members"][0]["q"] = 1
    bad = _write(designed / "par.json", data)
    assert main(["verify", "--config", bad, "--out", str(designed / "v3")]) == 1
    assert "FAIL curtain_ideality_periodic[0]" in capsys.readouterr().out


def test_missing_field_exit_2(tmp_path, capsys):
    cfg = json.loads(json.dumps(DESIGN))
    del cfg["design"]["beta"]
    assert main(["design", "--config", _write(tmp_path / "c.json", cfg), "--out", str(tmp_path / "o")]) == 2
    assert "'beta'" in capsys.readouterr().err


def test_infeasible_curtain_names_inequality(tmp_path, capsys):
    cfg = json.loads(json.dumps(DESIGN))
    cfg["zone"] = {"tau_max": 20, "omega_max": 15, "case": "periodic"}
    assert main(["design", "--config", _write(tmp_path / "c.json", cfg), "--out", str(tmp_path / "o")]) == 2
    assert "|xi|*tau_max + omega_max = 35 is not < N = 32" in capsys.readouterr().err


def test_usage_errors(tmp_path, monkeypatch):
    assert main(["nope"]) == 2
    assert main(["design", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 2
    monkeypatch.setenv("FLAGSEQ_THREADS", "zero")
    assert main(["bench", "--config", str(tmp_path / "x.json"), "--out", str(tmp_path)]) == 2


def test_evaluate_writes_grids(designed):
    out = designed / "e"
    assert main(["evaluate", "--config", str(designed / "a" / "design.json"), "--out", str(out)]) == 0
    assert (out / "af_0_0.csv").read_text().startswith("tau,omega,value")
    assert "pmmsr_db" in json.loads((out / "metrics.json").read_text())


def test_evaluate_rejects_oversized_zone(designed, tmp_path):
    cfg = _write(tmp_path / "ev.json", {"design_file": str(designed / "a" / "design.json"),
                                        "zone": {"tau_max": 40, "omega_max": 2, "case": "periodic"}})
    assert main(["evaluate", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_estimate_noiseless_and_bench(designed, tmp_path):
    est = {"design_file": str(designed / "a" / "design.json"), "p_fa": 1e-3,
           "scenario": {"f_cr": 1e9, "B": 1e6, "snr_db": None, "targets": [{"tau": 1, "omega": -2}]}}
    assert main(["estimate", "--config", _write(tmp_path / "e.json", est), "--out", str(tmp_path / "o")]) == 0
    rows = (tmp_path / "o" / "detections.csv").read_text().splitlines()
    assert rows[0] == "trial,tau_hat,omega_hat,peak,curtain_tau,curtain_omega"
    assert rows[1].startswith("0,1.0,-2.0,")
    bench = {"sizes": [31, 61], "zone": {"tau_max": 3, "omega_max": 3, "case": "periodic"}, "repeats": 1}
    assert main(["bench", "--config", _write(tmp_path / "b.json", bench), "--out", str(tmp_path / "b")]) == 0
    lines = (tmp_path / "b" / "bench.csv").read_text().splitlines()
    assert lines[0].startswith("N,exhaustive_lines") and len(lines) == 3
