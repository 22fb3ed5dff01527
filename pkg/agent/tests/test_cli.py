import csv
import json
from pathlib import Path

import pytest

from veridl.cli import build_parser, main

SAMPLE = Path(__file__).resolve().parents[2] / "config" / "samples" / "synthetic.csv"


@pytest.fixture
def workspace(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(
        json.dumps({"backend": "transparent", "seed": 4, "network": {"hidden_sizes": [3], "learning_rate": 0.5}})
    )
    assert main(["genkey", "--config", str(cfg), "--key-seed", "cli", "--out", str(tmp_path / "keys")]) == 0
    sig = tmp_path / "signature.bin"
    rc = main(
        [
            "setup", "--config", str(cfg), "--data", str(SAMPLE),
            "--secret-key", str(tmp_path / "keys" / "secret.key"),
            "--public-key", str(tmp_path / "keys" / "public.key"),
            "--out", str(sig),
        ]
    )
    assert rc == 0
    return tmp_path, cfg


def _train(tmp_path, cfg, out, *extra):
    return main(
        [
            "train-certify", "--config", str(cfg), "--data", str(SAMPLE),
            "--public-key", str(tmp_path / "keys" / "public.key"), "--out", str(out), *extra,
        ]
    )


def _verify(tmp_path, cfg, out, *extra):
    return main(
        [
            "verify", "--config", str(cfg),
            "--initial", str(out / "initial.bin"),
            "--updates", str(out / "updates.bin"),
            "--proof", str(out / "proof.bin"),
            "--signature", str(tmp_path / "signature.bin"),
            "--public-key", str(tmp_path / "keys" / "public.key"),
            *extra,
        ]
    )


def test_honest_pipeline_accepts(workspace, capsys):
    tmp_path, cfg = workspace
    out = tmp_path / "run"
    assert _train(tmp_path, cfg, out) == 0
    assert {p.name for p in out.iterdir()} >= {"initial.bin", "updates.bin", "proof.bin"}
    capsys.readouterr()
    report = tmp_path / "report.bin"
    assert _verify(tmp_path, cfg, out, "--report", str(report)) == 0
    assert capsys.readouterr().out.strip() == "accept"
    assert report.exists()


def test_unique_mode_from_the_command_line(workspace, capsys):
    tmp_path, cfg = workspace
    out = tmp_path / "unique"
    assert _train(tmp_path, cfg, out, "--mode", "unique") == 0
    capsys.readouterr()
    assert _verify(tmp_path, cfg, out) == 0


def test_tampered_error_is_rejected(workspace, capsys):
    tmp_path, cfg = workspace
    out = tmp_path / "bad"
    assert _train(tmp_path, cfg, out, "--attack", "case-3") == 0
    capsys.readouterr()
    assert _verify(tmp_path, cfg, out) == 2
    assert capsys.readouterr().out.strip() == "reject step2-E1"


def test_unknown_attack_exit_code(workspace):
    tmp_path, cfg = workspace
    assert _train(tmp_path, cfg, tmp_path / "x", "--attack", "flip-labels") == 7


def test_garbage_proof_is_malformed(workspace):
    tmp_path, cfg = workspace
    out = tmp_path / "run"
    assert _train(tmp_path, cfg, out) == 0
    (out / "proof.bin").write_bytes(b"VDL1\x01\x04\x02")
    assert _verify(tmp_path, cfg, out) == 1


def test_missing_file_is_io_error(workspace):
    tmp_path, cfg = workspace
    assert _verify(tmp_path, cfg, tmp_path / "nowhere") == 3


def test_bad_csv_is_parse_error(workspace):
    tmp_path, cfg = workspace
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    rc = main(
        ["train-certify", "--config", str(cfg), "--data", str(bad), "--public-key", str(tmp_path / "keys" / "public.key")]
    )
    assert rc == 4


def test_no_convergence_exit_code(workspace):
    tmp_path, _ = workspace
    cfg = tmp_path / "strict.json"
    cfg.write_text(
        json.dumps({"backend": "transparent", "network": {"convergence_threshold": 1e-15, "max_epochs": 2}})
    )
    assert _train(tmp_path, cfg, tmp_path / "never") == 5


def test_unsupported_security_level(tmp_path):
    assert main(["genkey", "--backend", "transparent", "--security", "80", "--out", str(tmp_path)]) == 4


def test_attack_command_writes_csv_and_ledger(tmp_path):
    cfg = tmp_path / "lab.json"
    cfg.write_text(
        json.dumps({"backend": "transparent", "ledger": str(tmp_path / "ledger.db"), "network": {"learning_rate": 0.5}})
    )
    out = tmp_path / "matrix.csv"
    rc = main(["attack", "--config", str(cfg), "--trials", "1", "--kinds", "case-3,wrong-E2", "--out", str(out)])
    assert rc == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 3 * 3
    assert {r["kind"] for r in rows} == {"honest", "case-3", "wrong-E2"}

    from veridl.api.store import Ledger

    assert len(Ledger.instance().list_soundness("case-3")) == 3


def test_bench_command(tmp_path, capsys):
    out = tmp_path / "bench.csv"
    rc = main(
        [
            "bench", "--backend", "transparent", "--samples", "12", "--input-dim", "2",
            "--widths", "2,3,4", "--out", str(out),
        ]
    )
    assert rc == 0
    rows = list(csv.DictReader(out.open()))
    assert [int(r["width"]) for r in rows] == [2, 3, 4]
    assert all(r["verdict"] == "accept" for r in rows)
    assert "R^2" in capsys.readouterr().err


def test_parser_requires_a_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])
