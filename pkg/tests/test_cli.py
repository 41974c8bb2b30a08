"""Command-line interface: exit-code contract, diagnostics, spec resolution,
run/trace output, props, and the REPL."""

import io
import json

import pytest

from elevator.cli import main, repl, build_parser

from conftest import CORPUS


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_check_corpus_ok(capsys):
    code, out = run_cli(capsys, "check", str(CORPUS / "nth.elv"))
    assert code == 0
    assert "nth OK" in out


def test_check_reports_typing_error(tmp_path, capsys):
    f = tmp_path / "bad.elv"
    f.write_text("def u : Unit@P = unit@C\n")
    code, out = run_cli(capsys, "check", str(f))
    assert code == 1
    assert "TYPE_MISMATCH" in out


def test_check_reports_parse_error(tmp_path, capsys):
    f = tmp_path / "oops.elv"
    f.write_text("def u : Unit@P = (\n")
    code, out = run_cli(capsys, "check", str(f))
    assert code == 2
    assert "PARSE" in out


def test_missing_spec_file_is_config_error(tmp_path, capsys):
    f = tmp_path / "u.elv"
    f.write_text("def u : Unit@P = unit@P\n")
    code, out = run_cli(capsys, "check", "--modes", "/no/such/spec.json", str(f))
    assert code == 3


def test_json_diagnostics_shape(tmp_path, capsys):
    f = tmp_path / "bad.elv"
    f.write_text("def u : Unit@P = unit@C\n")
    code, out = run_cli(capsys, "check", "--format", "json", str(f))
    assert code == 1
    diag = json.loads(out.strip().splitlines()[-1])
    assert set(diag) == {"code", "message", "file", "line", "col"}
    assert diag["code"] == "TYPE_MISMATCH"


def test_run_trivial_entry(tmp_path, capsys):
    f = tmp_path / "m.elv"
    f.write_text("def main : Unit@P = unit@P\n")
    code, out = run_cli(capsys, "run", str(f))
    assert code == 0
    assert "unit@P" in out and "steps: 0" in out


def test_run_fuel_exhaustion(tmp_path, capsys):
    f = tmp_path / "loop.elv"
    f.write_text("def main : Nat{P} = main\n")
    code, out = run_cli(capsys, "run", "--fuel", "10", str(f))
    assert code == 4
    assert "FUEL" in out


def test_run_missing_entry(tmp_path, capsys):
    f = tmp_path / "m.elv"
    f.write_text("def other : Unit@P = unit@P\n")
    code, out = run_cli(capsys, "run", str(f))
    assert code == 3


def test_trace_prints_rules(tmp_path, capsys):
    f = tmp_path / "m.elv"
    f.write_text(
        "def main : Unit@P = ((\\x : Unit@P . x) : Unit@P -> Unit@P) unit@P\n"
    )
    code, out = run_cli(capsys, "trace", str(f))
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("annot:") and lines[1].startswith("beta:")
    assert "steps: 2" in out


def test_entry_flag(tmp_path, capsys):
    f = tmp_path / "m.elv"
    f.write_text("def go : Unit@P = unit@P\n")
    code, out = run_cli(capsys, "run", "--entry", "go", str(f))
    assert code == 0


def test_pragma_resolves_against_packaged_corpus(tmp_path, capsys):
    f = tmp_path / "m.elv"
    f.write_text('modes "three_mode.json"\ndef main : Unit@GF = unit@GF\n')
    code, out = run_cli(capsys, "run", str(f))
    assert code == 0


def test_env_fallback(tmp_path, capsys, monkeypatch):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"modes": ["X"], "signatures": {"X": ["C", "W"]}}))
    f = tmp_path / "m.elv"
    f.write_text("def main : Unit@X = unit@X\n")
    monkeypatch.setenv("ELEVATOR_MODES", str(spec))
    code, out = run_cli(capsys, "run", str(f))
    assert code == 0
    assert "unit@X" in out


def test_modes_flag_overrides_pragma(tmp_path, capsys):
    f = tmp_path / "m.elv"
    # pragma names a nonexistent file, but the flag wins
    f.write_text('modes "missing.json"\ndef main : Unit@P = unit@P\n')
    code, _ = run_cli(capsys, "run", "--modes", str(CORPUS / "two_mode.json"), str(f))
    assert code == 0


def test_props_small_run(capsys):
    code, out = run_cli(capsys, "props", "--count", "10", "--seed", "5")
    assert code == 0
    assert "preservation: 10 cases OK" in out
    assert "mode-safety: 10 cases OK" in out


def test_props_reproducible(capsys):
    _, out1 = run_cli(capsys, "props", "--count", "8", "--seed", "42")
    _, out2 = run_cli(capsys, "props", "--count", "8", "--seed", "42")
    assert out1 == out2


def test_props_zero_count(capsys):
    code, out = run_cli(capsys, "props", "--count", "0")
    assert code == 0
    assert "0 cases OK" in out


def test_fuel_must_be_positive(capsys, tmp_path):
    f = tmp_path / "m.elv"
    f.write_text("def main : Unit@P = unit@P\n")
    code = main(["run", "--fuel", "0", str(f)])
    assert code == 3


def _repl(script: str) -> str:
    args = build_parser().parse_args(["repl"])
    out = io.StringIO()
    code = repl(args, inp=io.StringIO(script), out=out)
    assert code == 0
    return out.getvalue()


def test_repl_type_query():
    out = _repl(":t unit@P\n:q\n")
    assert "Unit@P" in out


def test_repl_definition_then_query():
    out = _repl(
        "def convertNat : Nat{P} -> Down<C,P> (Nat{C}) =\\n : Nat{P} . match n with | Zero => store Zero{C} | Succ k => load N = convertNat k in store (Succ{C} N)\n"
        ":t convertNat\n:q\n"
    )
    assert "convertNat OK" in out
    assert "Nat{P} -> Down<C,P> Nat{C}" in out.replace("(", "").replace(")", "")


def test_repl_step_and_eval():
    redex = "((\\x : Unit@P . x) : Unit@P -> Unit@P) unit@P"
    out = _repl(f"{redex}\n:step {redex}\n:q\n")
    assert "unit@P : Unit@P" in out
    assert "annot:" in out or "beta:" in out


def test_repl_error_keeps_looping():
    out = _repl("missing\nunit@P\n:q\n")
    assert "unit@P : Unit@P" in out
