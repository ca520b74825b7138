import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from heunmon import cli
from heunmon.config import SCHEMA_VERSION


def call(capsys, *args):
    code = cli.run(list(args))
    out = capsys.readouterr()
    return code, out.out, out.err


def c(d):
    return complex(d["re"], d["im"])


@pytest.mark.parametrize("text,val", [("0+1i", 1j), ("0.5+1.2i", 0.5 + 1.2j), ("-0.25+0.9i", -0.25 + 0.9j),
                                      ("1i", 1j), ("1e-1+2E0j", 0.1 + 2j), ("3", 3 + 0j), ("-2.5-i", -2.5 - 1j)])
def test_parse_complex(text, val):
    assert cli.parse_complex(text) == val


@pytest.mark.parametrize("text", ["1-1i", "2", "0+0i"])
def test_parse_tau_rejects_lower_half_plane(text):
    with pytest.raises(ValueError):
        cli.parse_tau(text)


def test_invariants_square(capsys):
    code, out, _ = call(capsys, "invariants", "--tau", "0+1i")
    doc = json.loads(out)
    assert code == 0
    assert doc["schema_version"] == SCHEMA_VERSION and len(doc["config_hash"]) == 16
    assert abs(c(doc["result"]["e3"])) < 1e-12


def test_spectral_lame_one(capsys):
    code, out, _ = call(capsys, "spectral", "--n", "1,0,0,0", "--tau", "0+1i")
    doc = json.loads(out)
    e1 = c(json.loads(call(capsys, "invariants", "--tau", "0+1i")[1])["result"]["e1"])
    coeffs = np.array([c(x) for x in doc["result"]["coefficients"]])
    assert code == 0 and doc["index_tuple"] == [1, 0, 0, 0]
    assert np.abs(coeffs - np.poly([e1, 0, -e1])).max() < 1e-9


def test_premodular_eval_half_period(capsys):
    code, out, _ = call(capsys, "premodular-eval", "--n", "2,0,0,0", "--r", "0.5", "--s", "0",
                        "--tau", "0.5+1.2i")
    assert code == 0
    assert abs(c(json.loads(out)["result"]["value"])) < 1e-10


def test_premodular_grid_csv(capsys):
    code, out, _ = call(capsys, "premodular-eval", "--n", "1,0,0,0", "--tau", "0.5+1.2i", "--grid", "3")
    lines = out.splitlines()
    assert code == 0 and lines[0].startswith("# ")
    rows = list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))
    assert len(rows) == 9 and set(rows[0]) == {"x", "y", "re", "im", "abs"}


def test_wp_point_and_grid(capsys):
    code, out, _ = call(capsys, "wp", "--tau", "0.5+1.2i", "--z", "0.3+0.2i")
    assert code == 0
    assert abs(c(json.loads(out)["result"]["wp"]) - (3.068107962477335 - 6.28080074935284j)) < 1e-10
    code, out, _ = call(capsys, "wp", "--tau", "1i", "--grid", "2", "--kind", "zeta")
    assert code == 0 and len(out.splitlines()) == 6


def test_monodromy_command(capsys):
    code, out, _ = call(capsys, "monodromy", "--n", "1,1,0,0", "--B", "1+0.5i", "--tau", "0.5+1.2i")
    res = json.loads(out)["result"]
    assert code == 0 and res["kind"] == "CR"
    M1 = np.array([[c(x) for x in row] for row in res["M1"]])
    assert abs(np.linalg.det(M1) - 1) < 1e-9


def test_premodular_zeros_command(capsys):
    code, out, _ = call(capsys, "premodular-zeros", "--n", "2,0,0,0", "--tau", "0.5+1.25i")
    assert code == 0 and json.loads(out)["result"]["count"] == 1


def test_deterministic_output(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        assert cli.run(["--out", str(p), "spectral", "--n", "2,0,0,0", "--tau", "0.5+1.2i"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_config_changes_hash(capsys, tmp_path, monkeypatch):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"ode_rtol": 1e-11}))
    h0 = json.loads(call(capsys, "invariants", "--tau", "1i")[1])["config_hash"]
    monkeypatch.setenv("HEUNMON_CONFIG", str(p))
    h1 = json.loads(call(capsys, "invariants", "--tau", "1i")[1])["config_hash"]
    assert h0 != h1


@pytest.mark.parametrize("args", [
    ["bogus"],
    ["invariants", "--tau", "1-1i"],
    ["spectral", "--n", "1,0,0", "--tau", "1i"],
    ["premodular-eval", "--n", "7,0,0,0", "--r", "0.1", "--s", "0.2", "--tau", "1i"],
    ["wp", "--tau", "1i"],
])
def test_usage_errors(capsys, args):
    assert call(capsys, *args)[0] == 2


def test_numerical_error_emits_diagnostic(capsys):
    code, out, _ = call(capsys, "premodular-eval", "--n", "1,0,0,0", "--r", "0", "--s", "0", "--tau", "1i")
    assert code == 3
    assert json.loads(out)["error"] == "DomainError"


def test_verify_subset(capsys):
    code, out, err = call(capsys, "verify", "--only", "2,8")
    doc = json.loads(out)
    assert code == 0
    assert doc["result"]["2"]["ok"] and doc["result"]["8"]["ok"]
    assert "PASS" in err


def test_console_script_module_entry():
    p = subprocess.run([sys.executable, "-m", "heunmon.cli", "invariants", "--tau", "0.5+1.2i"],
                       capture_output=True, text=True)
    assert p.returncode == 0
    assert json.loads(p.stdout)["command"] == "invariants"
