import json
import subprocess
import sys

import pytest

from btspec.cli import main, parse_axis, parse_complex


@pytest.fixture
def harmonic_spec(tmp_path):
    p = tmp_path / "spec.json"
    p.write_text(json.dumps({"kind": "ComplexHarmonic", "grid": {"a": -8, "b": 8, "n": 401}}))
    return p


def test_parsers():
    assert parse_axis("0:1:3") == [0.0, 0.5, 1.0]
    assert parse_axis([1, 2]) == [1.0, 2.0]
    assert parse_complex("0.2+1i") == 0.2 + 1j
    assert parse_complex([1, -2]) == 1 - 2j


def test_spectrum_writes_csv(tmp_path, harmonic_spec, capsys):
    out = tmp_path / "o"
    assert main(["spectrum", "--spec", str(harmonic_spec), "--window", "0,6,-6,0", "--out", str(out)]) == 0
    rows = (out / "eigenvalues.csv").read_text().splitlines()
    assert rows[0] == "re,im,residual,flagged" and len(rows) == 4
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["passed"] and manifest["outputs"] == ["eigenvalues.csv"]
    assert "PASS" in capsys.readouterr().out


def test_pseudospectrum_rerun_is_identical(tmp_path, harmonic_spec):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["pseudospectrum", "--spec", str(harmonic_spec), "--re", "0:2:4",
                 "--im", "-2:0:3", "--out", str(a)]) == 0
    assert main(["pseudospectrum", "--config", str(a / "manifest.json"), "--out", str(b)]) == 0
    assert (a / "pseudospectrum.csv").read_bytes() == (b / "pseudospectrum.csv").read_bytes()
    assert len((a / "pseudospectrum.csv").read_text().splitlines()) == 13


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"interval": [0, 1], "n": [63, 127]}))
    out = tmp_path / "o"
    assert main(["rho0", "--config", str(cfg), "--n", "127,255", "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["n"] == [127, 255]
    assert manifest["config"]["interval"] == [0.0, 1.0]


def test_usage_errors(tmp_path, harmonic_spec):
    out = str(tmp_path / "o")
    with pytest.raises(SystemExit) as exc:
        main(["bogus"])
    assert exc.value.code == 64
    with pytest.raises(SystemExit) as exc:
        main(["rho0", "--no-such-flag", "1"])
    assert exc.value.code == 64
    assert main(["rho0", "--interval", "1,0", "--out", out]) == 64
    assert main(["spectrum", "--spec", str(tmp_path / "missing.json"), "--out", out]) == 64
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"colour": "blue"}))
    assert main(["rho0", "--config", str(cfg), "--out", out]) == 64
    bad = tmp_path / "bad_spec.json"
    bad.write_text(json.dumps({"kind": "QuarticM", "grid": {"a": -1, "b": 1, "n": 9},
                               "eps": 0.1, "lambda": [1, 0]}))
    assert main(["spectrum", "--spec", str(bad), "--out", out]) == 64


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["rho0", "--out", str(blocker / "sub")]) == 73


def test_runtime_error_exit(tmp_path, harmonic_spec):
    # dense survey of an over-cap matrix is an operational error, not a usage error
    big = tmp_path / "big.json"
    big.write_text(json.dumps({"kind": "ComplexHarmonic", "grid": {"a": -8, "b": 8, "n": 2500}}))
    assert main(["spectrum", "--spec", str(big), "--out", str(tmp_path / "o")]) == 1


def test_failed_prediction_exit_two(tmp_path):
    # a deliberately wrong coefficient makes the refined slope miss its window
    code = main(["asymptotics", "--eps", "0.08,0.04,0.02", "--modes", "1", "--mu1", "5+5i",
                 "--out", str(tmp_path / "o")])
    assert code == 2


def test_console_script_entry(tmp_path):
    r = subprocess.run([sys.executable, "-m", "btspec.cli", "rho0", "--n", "63,127",
                        "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert r.returncode == 0
    assert "rho0(0,1)" in r.stdout
