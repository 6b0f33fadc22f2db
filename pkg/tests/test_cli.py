import csv
import json
import pytest
from main import main

SMALL = ["--depth-omega", "10", "--depth-sigma", "8", "--k-max", "4"]


def test_construct_writes_snapshot(tmp_path):
    """Test construct writes 2^(K+1) - 1 atoms"""
    out = tmp_path / "snap.json"
    code = main(["construct", *SMALL, "--no-rows", "--out", str(out)])
    assert code == 0
    data = json.loads(out.read_text())
    assert len(data["atoms"]) == 2 ** 9 - 1
    assert data["schema_version"] == 1
    assert data["rows"] == []


def test_construct_with_rows(tmp_path):
    """Test the row layout follows the targets"""
    out = tmp_path / "snap.json"
    code = main(["construct", *SMALL, "--n-targets", "1,2", "--out", str(out)])
    assert code == 0
    rows = json.loads(out.read_text())["rows"]
    assert [r["a_n"] for r in rows] == [0.0, 2.0]
    assert rows[0]["height"] > rows[1]["height"] > 0.0


def test_construct_rejects_alpha(tmp_path):
    """Test alpha outside [0, 2) exits with 2"""
    assert main(["construct", *SMALL, "--alpha", "2.5", "--out", str(tmp_path / "x.json")]) == 2


def test_verify_empty_claims(tmp_path):
    """Test an empty claim list exits with 2"""
    assert main(["verify", *SMALL, "--claims", "", "--out", str(tmp_path / "r.json")]) == 2


def test_verify_unknown_claim(tmp_path):
    """Test an unknown claim id exits with 2"""
    assert main(["verify", *SMALL, "--claims", "a2-3d"]) == 2


def test_verify_lemma_json_is_deterministic(tmp_path):
    """Test two identical runs write identical reports"""
    first = tmp_path / "a.json"
    assert main(["verify", *SMALL, "--claims", "lemma-c", "--out", str(first)]) == 0
    before = first.read_text()
    assert main(["verify", *SMALL, "--claims", "lemma-c", "--out", str(first)]) == 0
    assert first.read_text() == before
    report = json.loads(first.read_text())
    assert report["passed"] is True
    assert [c["claim_id"] for c in report["claims"]] == ["lemma-c"]
    assert report["timings"] is None


def test_verify_csv_columns(tmp_path):
    """Test the CSV report uses the fixed columns"""
    out = tmp_path / "r.csv"
    assert main(["verify", *SMALL, "--claims", "lemma-c", "--format", "csv", "--timings", "--out", str(out)]) == 0
    with out.open() as handle:
        rows = list(csv.DictReader(handle))
    assert list(rows[0].keys()) == ["claim_id", "param", "value", "bound", "pass"]
    assert {r["claim_id"] for r in rows} == {"lemma-c"}
    assert "ratio" in {r["param"] for r in rows}


def test_verify_infeasible_target(tmp_path, capsys):
    """Test an unreachable off-testing target exits with 2 and a hint"""
    code = main(["verify", *SMALL, "--claims", "offtest-frac", "--n-targets", "1e30"])
    assert code == 2
    assert "raise --depth-sigma" in capsys.readouterr().err


def test_sweep_b_records_failures(tmp_path):
    """Test a b sweep keeps going past inadmissible values"""
    out = tmp_path / "sweep.json"
    code = main([
        "sweep", *SMALL, "--alpha", "0", "--parameter", "b", "--values", "0.3333333333333333,0.4",
        "--claims", "lemma-c", "--out", str(out),
    ])
    assert code == 1
    entries = json.loads(out.read_text())["entries"]
    assert entries[0]["passed"] is True
    assert entries[1]["passed"] is False
    assert "invalid-parameters" in entries[1]["error"]


def test_sweep_b_s0_monotone(tmp_path):
    """Test s0 grows with b inside the alpha = 1 window"""
    out = tmp_path / "sweep.json"
    code = main([
        "sweep", *SMALL, "--alpha", "1", "--parameter", "b", "--values", "0.3333333333333333,0.35,0.4",
        "--claims", "lemma-c", "--out", str(out),
    ])
    entries = json.loads(out.read_text())["entries"]
    s0 = [e["s0"] for e in entries if e["s0"] is not None]
    assert len(s0) == 3
    assert s0 == sorted(s0)
    assert code in (0, 1)


def test_sweep_empty_values():
    """Test an empty value list exits with 2"""
    assert main(["sweep", *SMALL, "--parameter", "b", "--values", ""]) == 2


def test_missing_subcommand():
    """Test argparse rejects a bare invocation"""
    with pytest.raises(SystemExit):
        main([])
