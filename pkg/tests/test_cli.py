import csv
import json

import pytest

from finsler_lab.cli import main

NORM_SPEC = """\
[metric]
dim = 2
F = sqrt(y1^2 + y2^2)

[candidates]
f = sqrt(y1^2 + y2^2)
fprime = (x1*y1 + x2*y2) / sqrt(y1^2 + y2^2)

[spray]
preset = flat

[sampling]
seed = 4
samples = 20
"""


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def norm_spec(tmp_path):
    p = tmp_path / "norm.ini"
    p.write_text(NORM_SPEC)
    return str(p)


def test_analyze_preset_json(capsys):
    code, out, _ = run(capsys, "analyze", "--preset", "funk", "--point", "0,0;1,0")
    assert code == 0
    rep = json.loads(out)
    assert rep["command"] == "analyze"
    pt = rep["data"]["points"][0]
    assert max(abs(v) for v in pt["chi"]) <= 1e-12
    assert rep["summary"]["failed"] == 0


def test_analyze_is_deterministic(capsys):
    a = run(capsys, "analyze", "--preset", "conformal", "--dim", "3", "--seed", "2")[1]
    b = run(capsys, "analyze", "--preset", "conformal", "--dim", "3", "--seed", "2")[1]
    assert a == b


def test_classify_from_spec(capsys, norm_spec):
    code, out, _ = run(capsys, "classify", norm_spec)
    assert code == 0
    v = json.loads(out)["data"]["verdicts"]
    assert v == {"hamel": "pass", "strong_hamel": "pass", "weak_funk": "fail", "funk": "fail"}


def test_classify_override_candidate(capsys, norm_spec):
    code, out, _ = run(capsys, "classify", norm_spec, "--f", "x1*sqrt(y1^2+y2^2)", "--fprime", "x1")
    assert code == 0
    v = json.loads(out)["data"]["verdicts"]
    assert set(v.values()) == {"fail"}


def test_classify_without_candidate_is_input_error(capsys):
    code, _, err = run(capsys, "classify", "--preset", "euclidean")
    assert code == 2 and "candidate" in err


def test_spec_errors_carry_line_numbers(capsys, tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text("[metric]\ndim = 2\nF = y1^2 + y2^2\n")
    code, _, err = run(capsys, "analyze", str(p))
    assert code == 2
    assert f"{p}:3:" in err

    p.write_text("[metric]\ndim = 2\n\nF = sqrt(y1^2 + ) \n")
    code, _, err = run(capsys, "analyze", str(p))
    assert code == 2 and f"{p}:4:" in err

    p.write_text("[metric]\ndim = 2\nF = sqrt(y1^2+y2^2)\n[extra]\nk = 1\n")
    code, _, err = run(capsys, "analyze", str(p))
    assert code == 2 and f"{p}:4:" in err and "unknown section" in err


def test_missing_spec_file(capsys, tmp_path):
    code, _, err = run(capsys, "analyze", str(tmp_path / "nope.ini"))
    assert code == 2 and "cannot read" in err


def test_zero_velocity_point_is_input_error(capsys):
    code, _, _ = run(capsys, "analyze", "--preset", "euclidean", "--point", "0,0;0,0")
    assert code == 2


def test_source_is_required(capsys):
    code, _, err = run(capsys, "analyze")
    assert code == 2 and "--preset" in err


def test_geodesic_csv_and_drift(capsys, tmp_path):
    path = tmp_path / "g.csv"
    code, out, _ = run(capsys, "geodesic", "--preset", "conformal", "--x0", "0,0", "--y0", "1,0.5",
                       "--h", "1e-3", "--T", "0.5", "--monitor", "p=x1", "--csv", str(path))
    assert code == 0
    rep = json.loads(out)
    assert rep["data"]["steps"] == 500
    assert rep["data"]["drift"]["p"]["relative"] > 0.1
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["t", "x1", "x2", "y1", "y2", "F", "L", "p"]
    assert len(rows) == 502


def test_geodesic_bad_monitor(capsys):
    code, _, err = run(capsys, "geodesic", "--preset", "euclidean", "--x0", "0,0", "--y0", "1,0",
                       "--monitor", "oops")
    assert code == 2 and "NAME=EXPR" in err


def test_verify_suite_text_output(capsys, tmp_path):
    out_path = tmp_path / "r.txt"
    code, out, _ = run(capsys, "verify", "spray", "--dim", "2", "--format", "text", "--out", str(out_path))
    assert code == 0 and out == ""
    text = out_path.read_text()
    assert text.rstrip().endswith("checks passed")


def test_verify_is_deterministic_across_threads(capsys, monkeypatch):
    a = run(capsys, "verify", "projective", "--dim", "2")[1]
    monkeypatch.setenv("FINSLER_LAB_THREADS", "4")
    b = run(capsys, "verify", "projective", "--dim", "2")[1]
    assert a == b


def test_failing_check_exits_one(capsys):
    code, out, _ = run(capsys, "geodesic", "--preset", "conformal", "--x0", "0,0", "--y0", "1,0.5",
                       "--h", "0.05", "--T", "1", "--tol-scale", "1e-6")
    assert code == 1
    assert json.loads(out)["summary"]["failed"] >= 1


def test_bad_options(capsys):
    assert run(capsys, "verify", "spray", "--samples", "0")[0] == 2
    assert run(capsys, "verify", "spray", "--dim", "1")[0] == 2
    assert run(capsys, "verify", "spray", "--tol-scale", "-1")[0] == 2
