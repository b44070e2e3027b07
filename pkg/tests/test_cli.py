"""End-to-end command-line behavior and exit codes."""
import json
import pathlib

import pytest
import yaml

from emac.cli import main

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"
SPEC = str(FIXTURES / "checkout.yaml")
MODEL = str(FIXTURES / "model.yaml")


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_compile_writes_bundle(tmp_path, capsys):
    out = tmp_path / "artifacts"
    code, stdout, _ = run_cli(capsys, "compile", SPEC, "--model", MODEL,
                              "--out", str(out))
    assert code == 0
    assert stdout.count("wrote ") == 4
    for name in ("recording_rules.yaml", "alerting_rules.yaml",
                 "rollout_gate.yaml", "provenance.json"):
        assert (out / name).exists()
    assert "pessimistic: availability 0.999224867655, p99 <= 260 ms" in stdout
    assert "verdict: pass" in stdout


def test_compile_mode_both_prints_two_summaries(tmp_path, capsys):
    code, stdout, _ = run_cli(capsys, "compile", SPEC, "--model", MODEL,
                              "--out", str(tmp_path), "--mode", "both")
    assert code == 0
    assert "pessimistic: availability" in stdout
    assert "optimistic: availability" in stdout


def test_compile_recompiles_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    run_cli(capsys, "compile", SPEC, "--model", MODEL, "--out", str(a))
    run_cli(capsys, "compile", SPEC, "--model", MODEL, "--out", str(b))
    for name in ("recording_rules.yaml", "alerting_rules.yaml",
                 "rollout_gate.yaml", "provenance.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_compile_gate_exit_on_miss(tmp_path, capsys):
    strict = tmp_path / "strict.yaml"
    strict.write_text(pathlib.Path(SPEC).read_text().replace(
        "availability: 99.9", "availability: 99.99"))
    code, stdout, _ = run_cli(capsys, "compile", str(strict), "--model", MODEL,
                              "--out", str(tmp_path / "o1"))
    assert code == 2
    assert "verdict: fail" in stdout
    code, _, _ = run_cli(capsys, "compile", str(strict), "--model", MODEL,
                         "--out", str(tmp_path / "o2"), "--no-gate")
    assert code == 0


def test_validate_accepts_fixture(capsys):
    code, stdout, _ = run_cli(capsys, "validate", SPEC, "--model", MODEL)
    assert code == 0 and "checkout: valid" in stdout


def test_validate_spec_alone_is_structural(capsys):
    code, stdout, _ = run_cli(capsys, "validate", SPEC)
    assert code == 0 and "checkout: valid" in stdout


def test_validate_reports_unbound_leaf(tmp_path, capsys):
    broken = tmp_path / "broken.yaml"
    broken.write_text(pathlib.Path(SPEC).read_text().replace("Queue", "Ghost"))
    code, _, stderr = run_cli(capsys, "validate", str(broken),
                              "--model", MODEL)
    assert code == 1
    assert "UnboundLeaf" in stderr and "Ghost" in stderr


def test_validate_rejects_malformed_yaml(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("{nope")
    code, _, stderr = run_cli(capsys, "validate", str(bad))
    assert code == 1 and "Malformed" in stderr


def test_explain_json_is_the_trace_document(capsys):
    code, stdout, _ = run_cli(capsys, "explain", SPEC, "--model", MODEL,
                              "--format", "json")
    assert code == 0
    doc = json.loads(stdout)
    assert doc["journey"] == "checkout"
    assert doc["verdict"] == "pass"
    assert len(doc["records"]) == 10


def test_explain_text_renders_tree(capsys):
    code, stdout, _ = run_cli(capsys, "explain", SPEC, "--model", MODEL)
    assert code == 0
    assert "journey: checkout" in stdout
    assert "verdict: pass" in stdout
    assert "root.2.0.1: leaf PayB" in stdout
    assert "dominant contributor:" in stdout
    assert "deadline success probabilities:" in stdout


def test_simulate_enumerate_reports_exact(capsys):
    code, stdout, _ = run_cli(capsys, "simulate", SPEC, "--model", MODEL,
                              "--trials", "1", "--seed", "0", "--enumerate")
    assert code == 0
    doc = json.loads(stdout)
    assert doc["mode"] == "enumerate" and doc["stdError"] == 0.0
    assert 0.999 < doc["availability"] < 1.0
    assert "root.2" in doc["timeoutQ"]


def test_simulate_montecarlo_seeded(capsys):
    args = ("simulate", SPEC, "--model", MODEL, "--trials", "2000",
            "--seed", "7", "--coupling", "comonotone")
    code, out1, _ = run_cli(capsys, *args)
    code2, out2, _ = run_cli(capsys, *args)
    assert code == code2 == 0
    assert out1 == out2
    assert json.loads(out1)["coupling"] == "comonotone"


def test_simulate_validates_first(tmp_path, capsys):
    broken = tmp_path / "broken.yaml"
    broken.write_text(pathlib.Path(SPEC).read_text().replace("Queue", "Ghost"))
    code, _, stderr = run_cli(capsys, "simulate", str(broken),
                              "--model", MODEL, "--trials", "10",
                              "--seed", "0")
    assert code == 1 and "UnboundLeaf" in stderr


def test_whatif_self_comparison_is_flat(capsys):
    code, stdout, _ = run_cli(capsys, "whatif", SPEC, MODEL, SPEC, MODEL)
    assert code == 0
    doc = json.loads(stdout)
    assert doc["availability"]["lo"]["delta"] == 0
    assert doc["verdict"]["changed"] is False


def test_parse_script_emits_spec_skeleton(capsys):
    code, stdout, _ = run_cli(capsys, "parse-script",
                              str(FIXTURES / "checkout.script"))
    assert code == 0
    doc = yaml.safe_load(stdout)
    assert doc["name"] == "checkout"
    assert doc["objective"]["availability"] == 99.9
    assert doc["objective"]["latency"]["thresholdMs"] == 400.0
    assert doc["expression"].startswith("Series(Frontend,")


def test_parse_script_rejects_duplicate_objective(tmp_path, capsys):
    bad = tmp_path / "bad.script"
    bad.write_text("j := A.\nobjective: A >= 99\nobjective: A >= 98\n")
    code, _, stderr = run_cli(capsys, "parse-script", str(bad))
    assert code == 1 and "objective" in stderr


def test_missing_file_is_io_error(capsys):
    code, _, stderr = run_cli(capsys, "validate", "/nonexistent/spec.yaml")
    assert code == 3
    assert "error[IO]" in stderr


def test_resource_limit_exit(tmp_path, capsys):
    names = [f"L{i}" for i in range(9)]
    spec = {
        "emacVersion": 1, "name": "big",
        "expression": f"Series({', '.join(names)})",
        "objective": {"availability": 99.0},
    }
    buckets = [{"leMs": 10 * (j + 1), "count": j + 1} for j in range(7)]
    model = {
        "emacVersion": 1,
        "leaves": {n: {"availability": {"point": 0.99},
                       "latency": {"buckets": buckets, "samples": 7}}
                   for n in names},
    }
    spec_p, model_p = tmp_path / "s.yaml", tmp_path / "m.yaml"
    spec_p.write_text(yaml.safe_dump(spec))
    model_p.write_text(yaml.safe_dump(model))
    code, _, stderr = run_cli(capsys, "simulate", str(spec_p), "--model",
                              str(model_p), "--trials", "1", "--seed", "0",
                              "--enumerate")
    assert code == 4
    assert "error[ResourceLimit]" in stderr


def test_usage_errors_exit_one(capsys):
    assert run_cli(capsys, "compile", SPEC)[0] == 1          # missing flags
    assert run_cli(capsys, "frobnicate")[0] == 1             # unknown command
    assert run_cli(capsys, "simulate", SPEC, "--model", MODEL, "--trials",
                   "xyz", "--seed", "0")[0] == 1             # bad int
