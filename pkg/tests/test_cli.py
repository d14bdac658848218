import csv
import io
import json
import math
import subprocess
import sys

import pytest

from qcorr.cli import main, parse_forms, parse_matrix, UsageError
from qcorr.correlate import zeros_count_bruteforce


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_repcount(capsys):
    assert run(["repcount", "--form", "1,0,1", "--n", "5"], capsys)[:2] == (0, "8\n")
    assert run(["repcount", "--form", "1,0,1", "--n", "0"], capsys)[:2] == (0, "1\n")
    code, out, err = run(["repcount", "--form", "1,0", "--n", "5"], capsys)
    assert code == 2 and "bad form literal" in err and out == ""
    code, _, err = run(["repcount", "--form", "1,3,1", "--n", "5"], capsys)
    assert code == 2


def test_usage_errors(capsys):
    assert run([], capsys)[0] == 2
    assert run(["nonsense"], capsys)[0] == 2
    assert run(["repcount", "--form", "1,0,1"], capsys)[0] == 2
    assert run(["equid", "--poly", "n", "--N", "-5", "--delta", "0.1"], capsys)[0] == 2


def test_literal_parsers():
    fs = parse_forms("1,0,1x3; 2,2,3")
    assert [f.as_tuple() for f in fs] == [(1, 0, 1)] * 3 + [(2, 2, 3)]
    assert parse_matrix("1 1 -1 -1") == [[1, 1, -1, -1]]
    assert parse_matrix("1 1 1 0; 0 1 1 1") == [[1, 1, 1, 0], [0, 1, 1, 1]]
    with pytest.raises(UsageError):
        parse_matrix("1 2; 3")
    with pytest.raises(UsageError):
        parse_forms(" ")


def test_table_csv_and_binary(tmp_path, capsys):
    code, out, _ = run(["table", "--form", "1,0,1", "--N", "5"], capsys)
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["n", "value"] and [r[1] for r in rows[1:]] == ["1", "4", "4", "0", "4", "8"]
    p = tmp_path / "t.bin"
    code, out, _ = run(["--output", str(p), "table", "--form", "2,2,3", "--N", "50", "--format", "bin"], capsys)
    assert code == 0 and json.loads(out)["written"] == str(p)
    from qcorr.qform import read_table_binary, rep_table

    f, tab = read_table_binary(p)
    assert f.as_tuple() == (2, 2, 3) and tab.tolist() == rep_table((2, 2, 3), 50).tolist()


def test_series_single_form_near_one(capsys):
    code, out, _ = run(["series", "--forms", "1,0,1", "--system", "1 : 0", "--N", "10000", "--P-max", "20"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert abs(rep["ratio"] - 1) < 0.01
    # lhs is sum_{n <= N} R(n), the lattice count in the disc minus the origin
    N = 10000
    r = math.isqrt(N)
    disc = sum(2 * math.isqrt(N - x * x) + 1 for x in range(-r, r + 1))
    assert int(rep["lhs"]) == disc - 1


def test_series_three_forms_and_dependent_pair(capsys):
    code, out, _ = run(["series", "--forms", "1,0,1x3", "--system", "1 0 : 0; 0 1 : 0; 1 1 : 0",
                        "--N", "200", "--P-max", "13"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert "ratio" in rep and len(rep["local_factors"]) == 6
    assert rep["local_factors"][1] == {"p": 3, "num": "14", "den": "15", "depth": 1, "stabilized": True,
                                       "method": "closed-form"}
    code, out, err = run(["series", "--forms", "1,0,1x2", "--system", "1 : 0; 2 : 1", "--N", "50"], capsys)
    assert code == 2 and "linear forms 1" in err and "(1,)" in err and "(2,)" in err


def test_series_convergence_csv(capsys):
    code, out, _ = run(["series", "--forms", "1,0,1", "--system", "1 : 0", "--convergence", "100,1000",
                        "--P-max", "10"], capsys)
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["N", "lhs", "rhs", "ratio"] and [r[0] for r in rows[1:]] == ["100", "1000"]


def test_local_command_and_unstable_exit(capsys):
    code, out, _ = run(["local", "--forms", "1,0,1x3", "--system", "1 0 : 0; 0 1 : 0; 1 1 : 0", "--p", "5"],
                       capsys)
    assert code == 0 and json.loads(out)["num"] == "31"
    # depth one cannot certify a limit for the ramified prime on a mixed system
    code, out, _ = run(["local", "--forms", "1,0,1;1,1,1;2,2,3", "--system", "1 0 : 1; 1 1 : 0; 1 2 : 0",
                        "--p", "3", "--depth", "1"], capsys)
    assert code == 3 and json.loads(out)["stabilized"] is False


def test_zeros(capsys):
    code, out, _ = run(["zeros", "--A", "1 1 -1 -1", "--forms", "1,0,1x4", "--N", "12"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["count"] == "212658433"
    assert int(rep["count"]) == zeros_count_bruteforce([(1, 0, 1)] * 4, [[1, 1, -1, -1]], 12)
    code, out, _ = run(["zeros", "--A", "1 -1 0 0", "--forms", "1,0,1x4", "--N", "3"], capsys)
    assert code == 2
    code, out, _ = run(["zeros", "--A", "1 1 -1 -1", "--forms", "1,0,1x4", "--N", "10", "--predict",
                        "--P-max", "10"], capsys)
    assert code == 0 and 0.8 < json.loads(out)["ratio"] < 1.2


def test_equid_golden(capsys):
    code, out, _ = run(["equid", "--poly", "0 + golden*n", "--N", "100000", "--delta", "0.05"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["verdict"] == "pass"
    # a witness may exist without failure: 144 theta is within 311/N of an integer
    assert rep["weyl_witness"] == 144


def test_majorant_check(capsys):
    code, out, _ = run(["majorant", "check", "--N", "100000", "--n-max", "2000"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert len(rep["checks"]) == 3 and rep["all_pass"]


def test_config_merge_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"form": "1,0,1", "n": 25}))
    assert run(["--config", str(cfg), "repcount"], capsys)[:2] == (0, "12\n")
    assert run(["--config", str(cfg), "repcount", "--n", "5"], capsys)[:2] == (0, "8\n")
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"bogus": 1}))
    assert run(["--config", str(bad), "repcount", "--form", "1,0,1", "--n", "1"], capsys)[0] == 2


def test_deterministic_output(capsys):
    argv = ["series", "--forms", "1,0,1;1,1,1", "--system", "1 0 : 0; 0 1 : 0", "--N", "300", "--P-max", "10"]
    a = run(argv, capsys)[1]
    b = run(argv, capsys)[1]
    c = run(["--workers", "4"] + argv, capsys)[1]
    assert a == b == c


def test_resource_guard_exit_code(monkeypatch, capsys):
    monkeypatch.setenv("QCORR_MAX_MEMORY", "1K")
    code, _, err = run(["table", "--form", "1,0,1", "--N", "100000"], capsys)
    assert code == 4 and "resource limit" in err


def test_console_script_entry_point():
    res = subprocess.run([sys.executable, "-m", "qcorr.cli", "repcount", "--form", "1,1,1", "--n", "7"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout == "12\n"
