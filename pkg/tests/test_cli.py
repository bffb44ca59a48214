import json
import subprocess
import sys
from fractions import Fraction

import pytest

from hkrenorm.cli import OUTPUT_ENV, RunConfig, UsageError, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_enumerate_small(capsys):
    code, out, _ = run(capsys, "trees", "enumerate", "--n", "2", "--d", "1")
    assert code == 0
    data = json.loads(out)
    assert data["count"] == 6 and len(data["trees"]) == 6


def test_encode_canonicalizes(capsys):
    _, out, _ = run(capsys, "trees", "encode", "1[1[] 0[]]")
    data = json.loads(out)
    assert data["canonical"] == "1[0[] 1[]]" and data["size"] == 3 and data["zeros"] == 1


def test_coproduct_three_terms(capsys):
    code, out, _ = run(capsys, "hopf", "coproduct", "1[1[]]")
    terms = json.loads(out)
    assert code == 0 and len(terms) == 3
    assert {"tensor": [["1[]"], ["1[]"]], "num": "1", "den": "1"} in terms


def test_words_and_maps(capsys):
    _, out, _ = run(capsys, "words", "shuffle", "1[],0[]", "1[1[]]")
    assert len(json.loads(out)) == 3
    _, out, _ = run(capsys, "maps", "psi", "1[0[]]")
    assert len(json.loads(out)) == 2
    _, out, _ = run(capsys, "words", "weight", "1[],1[1[]]")
    assert Fraction(json.loads(out)["omega"]) == 3


def test_outputs_are_byte_reproducible(capsys):
    argv = ["rp", "lift", "--depth", "2", "--N", "3", "--gamma", "3/10"]
    _, first, _ = run(capsys, *argv)
    _, second, _ = run(capsys, *argv)
    assert first == second


def test_parse_error_exits_2(capsys):
    code, out, err = run(capsys, "hopf", "coproduct", "1[")
    assert code == 2 and not out
    assert json.loads(err)["error"] == "TreeParseError"


def test_truncation_must_match_gamma(capsys):
    code, _, err = run(capsys, "trees", "enumerate", "--N", "3", "--gamma", "6/25")
    assert code == 2 and "gamma" in json.loads(err)["message"]
    with pytest.raises(UsageError):
        RunConfig(N=4, gamma=Fraction(1, 5))
    RunConfig(N=5, gamma=Fraction(1, 5))


def test_renorm_needs_a_map(capsys):
    code, _, _ = run(capsys, "renorm", "build", "--N", "3", "--gamma", "3/10")
    assert code == 2


def test_renorm_check_and_g_table(tmp_path, capsys, monkeypatch):
    char = tmp_path / "v.json"
    char.write_text(json.dumps({"1[]": "2", "1[1[]]": "-1/2"}))
    common = ["--N", "3", "--gamma", "3/10", "--depth", "2", "--character", str(char)]
    code, out, _ = run(capsys, "renorm", "check", *common)
    assert code == 0 and json.loads(out)["passed"]
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "out"))
    code, out, _ = run(capsys, "transfer", "g-table", *common)
    assert code == 0
    csv_text = (tmp_path / "out" / "g-table.csv").read_text()
    assert csv_text.startswith("tree,t,g_value\n")
    report = json.loads((tmp_path / "out" / "g-report.json").read_text())
    assert report["passed"] and "exploratory_bar_adjoint" in report


def test_failing_check_exits_1(tmp_path, capsys):
    rule = tmp_path / "r.json"
    rule.write_text(json.dumps({"1[1[]]": [
        {"forest": ["1[1[]]"], "num": "1", "den": "1"}, {"forest": ["0[]"], "num": "3", "den": "1"},
    ]}))
    code, out, _ = run(capsys, "renorm", "check", "--N", "3", "--gamma", "3/10", "--rule", str(rule))
    assert code == 1 and not json.loads(out)["passed"]


def test_iso_basis(capsys):
    code, out, _ = run(capsys, "iso", "basis")
    data = json.loads(out)
    assert code == 0 and data["audit"]["total_monomials"] == 36


def test_verify_subset(capsys):
    code, out, err = run(capsys, "verify", "all", "--criteria", "1", "2")
    assert code == 0
    assert len(json.loads(out)["reports"]) == 2
    assert err.count("[PASS]") == 2


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "hkrenorm", "trees", "enumerate", "--n", "1"], capture_output=True, text=True,
    )
    assert proc.returncode == 0 and json.loads(proc.stdout)["count"] == 2
