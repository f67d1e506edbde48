import math
from pathlib import Path

import pytest

from qtm.cli import machine_to_text, main, marked_machine_to_text, parse_machine
from qtm.compat import (
    BvMachine,
    bv_predecessor,
    encode_extra_symbols,
    example_p,
    example_s,
    from_bv,
)
from qtm.errors import ParseError

MACHINES = Path(__file__).resolve().parent.parent / "machines"

P_FILE = MACHINES / "example_p.qtm"
S_FILE = MACHINES / "example_s.qtm"
BV_FILE = MACHINES / "example_p_bv.qtm"


# -- parsing the shipped machine files ------------------------------------------

def test_shipped_predecessor_file_matches_reference():
    assert parse_machine(P_FILE.read_text()) == example_p()


def test_shipped_superposing_file_matches_reference():
    m = parse_machine(S_FILE.read_text())
    assert m == example_s()
    r = 1 / math.sqrt(2)
    assert m.delta0[("s", "1")][("qf", "1", "R")] == pytest.approx(-r, abs=0)


def test_shipped_back_loop_file_matches_reference():
    bv = parse_machine(BV_FILE.read_text())
    assert isinstance(bv, BvMachine)
    ref = bv_predecessor()
    assert bv.delta == ref.delta
    assert from_bv(bv).is_valid


def test_render_parse_round_trip():
    for m in (example_p(), example_s(), bv_predecessor()):
        text = machine_to_text(m)
        again = parse_machine(text)
        assert again == m or (isinstance(m, BvMachine) and again.delta == m.delta)
        assert machine_to_text(again) == text


def test_comments_and_blank_lines_are_skipped():
    text = "# hello\n\nmachine tiny\n  # indented comment\n" + \
        "alphabet 1 _\nstates a t\nsources a\ntargets t\ninitial a\nfinal t\n" + \
        "a , 1 -> t , 1 , R : 1  # inline\na , _ -> t , _ , R : 1\n"
    m = parse_machine(text)
    assert m.name == "tiny" and m.is_valid


# -- parse failures --------------------------------------------------------------

def reject(text, fragment):
    with pytest.raises(ParseError, match=fragment):
        parse_machine(text)


def test_parser_rejections():
    reject("", "no content")
    reject("widget foo\n", "expected 'machine NAME'")
    reject("machine\n", "missing machine name")
    reject("encoded extra-symbols\nmachine x-marked\n", "export-only")
    reject("machine x\nwibble 1 2\n", "unknown header 'wibble'")
    reject("machine x\nalphabet 1 _\nalphabet 1\n", "given twice")
    reject("bv x\nalphabet 1 _\nsources a\n", "no sources or targets")
    reject("machine x\nalphabet 1 _\n", "missing header 'states'")
    reject("machine x\ninitial a b\n", "exactly one state")


def test_rule_parse_failures():
    head = "machine x\nalphabet 1 _\nstates a t\nsources a\ntargets t\ninitial a\nfinal t\n"
    reject(head + "a -> t , 1 , R : 1\n", "state , symbol")
    reject(head + "a , 1 -> t , 1 , R\n", "missing its ': amplitude'")
    reject(head + "a , 1 -> t , R : 1\n", "state , symbol , direction")
    reject(head + "a , 1 -> t , 1 , down : 1\n", "direction must be L or R")
    reject(head + "a , 1 -> t , 1 , R : 1/sqrt[2]\n", r"\(8:")


def test_duplicate_rule_mentions_both_lines():
    text = ("machine x\nalphabet 1 _\nstates a t\nsources a\ntargets t\n"
            "initial a\nfinal t\n"
            "a , 1 -> t , 1 , R : 1\n"
            "a , _ -> t , _ , R : 1\n"
            "a , 1 -> t , 1 , R : 1\n")
    with pytest.raises(Exception, match="8.*10|10.*8"):
        parse_machine(text)


def test_marked_export_is_not_loadable():
    text = marked_machine_to_text(encode_extra_symbols(example_p()))
    assert text.startswith("encoded extra-symbols\n")
    assert "1^" in text
    with pytest.raises(ParseError, match="export-only"):
        parse_machine(text)


# -- subcommands ------------------------------------------------------------------

def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_validate_accepts_reference(capsys):
    code, out, err = run_cli(capsys, "validate", "--machine", str(P_FILE))
    assert code == 0
    assert "3 conditions satisfied" in out


def test_validate_with_isometry(capsys):
    code, out, _ = run_cli(capsys, "validate", "--machine", str(S_FILE),
                           "--isometry", "3")
    assert code == 0
    assert "isometry spot check: depth 3" in out


def test_validate_rejects_broken_machine(tmp_path, capsys):
    bad = P_FILE.read_text().replace("q0 , 1 -> q1 , _ , R : 1",
                                     "q0 , 1 -> q1 , _ , R : 0.9")
    path = tmp_path / "bad.qtm"
    path.write_text(bad)
    code, out, _ = run_cli(capsys, "validate", "--machine", str(path))
    assert code == 1
    assert "violation" in out and "condition" in out


def test_validate_bv_reports_shape(capsys):
    code, out, _ = run_cli(capsys, "validate", "--machine", str(BV_FILE))
    assert code == 0
    assert "back-loop machine" in out


def test_run_prints_sorted_superposition(capsys):
    code, out, _ = run_cli(capsys, "run", "--machine", str(P_FILE),
                           "--input", "nbar:2", "--steps", "2")
    assert code == 0
    assert out == "1\t⟨λ, qf, 1, 0⟩\n"


def test_run_on_split_superposition(capsys):
    code, out, _ = run_cli(capsys, "run", "--machine", str(S_FILE),
                           "--input", "|$ 1⟩", "--steps", "3")
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) == 3
    assert any("qf" in line for line in lines)
    assert all("\t⟨" in line for line in lines)


def test_ppd_exact_steps(capsys):
    code, out, _ = run_cli(capsys, "ppd", "--machine", str(S_FILE),
                           "--input", "|$⟩", "--steps", "5")
    assert code == 0
    assert "0\t0.937500000000" in out
    assert "⊥\t0.062500000000" in out
    assert "# after 5 steps" in out


def test_ppd_finitary(capsys):
    code, out, _ = run_cli(capsys, "ppd", "--machine", str(P_FILE),
                           "--input", "nbar:2")
    assert code == 0
    assert "1\t1.000000000000" in out
    assert "# status: finitary(2)" in out


def test_ppd_with_epsilon(capsys):
    code, out, _ = run_cli(capsys, "ppd", "--machine", str(S_FILE),
                           "--input", "|$ 1 1⟩", "--epsilon", "1e-6",
                           "--window", "8", "--horizon", "200")
    assert code == 0
    assert "# status: converged(eps=1e-06" in out


def test_ppd_horizon_reached(capsys):
    code, out, _ = run_cli(capsys, "ppd", "--machine", str(S_FILE),
                           "--input", "|$⟩", "--horizon", "30")
    assert code == 0
    assert "# status: horizon-reached(30)" in out


def test_sample_reports_frequencies(capsys):
    code, out, _ = run_cli(capsys, "sample", "--machine", str(P_FILE),
                           "--input", "1/sqrt(2)|nbar:0> + 1/sqrt(2)|nbar:2>",
                           "--tau", "every:2", "--horizon", "9",
                           "--runs", "600", "--seed", "7")
    assert code == 0
    assert "# seed: 7" in out
    assert "# runs: 600" in out
    freq = float(next(line for line in out.splitlines()
                      if line.startswith("1\t")).split("\t")[1])
    assert abs(freq - 0.5) < 0.07
    assert "⊥\t" in out


def test_sample_seed_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("QTM_SEED", "123")
    code, out, _ = run_cli(capsys, "sample", "--machine", str(P_FILE),
                           "--input", "nbar:2", "--tau", "every:3",
                           "--horizon", "7", "--runs", "20")
    assert code == 0
    assert "# seed: 123" in out


def test_enumerate_prints_tree_and_residual(capsys):
    code, out, _ = run_cli(capsys, "enumerate", "--machine", str(S_FILE),
                           "--input", "|$ 1⟩", "--tau", "list:1,3",
                           "--horizon", "8")
    assert code == 0
    assert "k=0 start" in out
    assert "measure" in out
    residual = float(out.strip().splitlines()[-1].split(":")[1])
    assert residual <= 1e-9


def test_convert_bv_round_trip(tmp_path, capsys):
    out_path = tmp_path / "converted.qtm"
    code, _, _ = run_cli(capsys, "convert-bv", "--machine", str(BV_FILE),
                         "--output", str(out_path))
    assert code == 0
    m = parse_machine(out_path.read_text())
    assert m.is_valid
    assert m.sources == frozenset({"q0"}) and m.targets == frozenset({"qf"})


def test_convert_bv_rejects_plain_machine(capsys):
    code, _, err = run_cli(capsys, "convert-bv", "--machine", str(P_FILE))
    assert code == 1
    assert err.startswith("Parse:")


def test_encode_extra_symbols_export(tmp_path, capsys):
    out_path = tmp_path / "marked.qtm"
    code, _, _ = run_cli(capsys, "encode", "--machine", str(P_FILE),
                         "--mode", "extra-symbols", "--output", str(out_path))
    assert code == 0
    text = out_path.read_text()
    assert text.startswith("encoded extra-symbols\n")
    assert "qf , 1 -> qf , 1^ , R : 1.0" in text


def test_encode_counter_tape_view(capsys):
    code, out, _ = run_cli(capsys, "encode", "--machine", str(P_FILE),
                           "--mode", "counter-tape", "--input", "nbar:1")
    assert code == 0
    assert "q0" in out and "∥" in out


def test_encode_counter_tape_needs_input(capsys):
    code, _, err = run_cli(capsys, "encode", "--machine", str(P_FILE),
                           "--mode", "counter-tape")
    assert code == 1
    assert "needs --input" in err


# -- error plumbing ----------------------------------------------------------------

def test_missing_file_maps_to_io_error(capsys):
    code, _, err = run_cli(capsys, "validate", "--machine", "/nonexistent.qtm")
    assert code == 1
    assert err.startswith("IO:")


def test_domain_error_exit_code(capsys):
    code, _, err = run_cli(capsys, "run", "--machine", str(P_FILE),
                           "--input", "|nbar:1⟩ + |nbar:2⟩", "--steps", "1")
    assert code == 1
    assert err.startswith("NotNormalized:")


def test_bad_usage_exits_two(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run", "--machine", str(P_FILE)])
    assert exc.value.code == 2


def test_bad_tau_text(capsys):
    code, _, err = run_cli(capsys, "sample", "--machine", str(P_FILE),
                           "--input", "nbar:2", "--tau", "sometimes",
                           "--horizon", "9", "--runs", "5", "--seed", "1")
    assert code == 1
    assert err.startswith("Parse:")
