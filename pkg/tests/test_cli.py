"""Command-line interface: outputs, exit codes and determinism."""

from __future__ import annotations

import json
import math
import subprocess
import sys

import pytest

from revspec.cli import EXIT_INPUT, EXIT_OK, RunConfig, main
from revspec.numerics import InputError
from revspec.quantization import JointSpectrum


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("name, coeffs", [("sphere", [1.0]), ("asym", [1.0, 0.1, 0.05])])
def test_preset(capsys, name, coeffs):
    code, out, _ = run(capsys, "preset", name)
    assert code == EXIT_OK
    assert json.loads(out)["besse"]["coeffs"] == coeffs


def test_unknown_preset(capsys):
    code, _, err = run(capsys, "preset", "nosuch")
    assert code == EXIT_INPUT and "available" in err


def test_spectrum_csv(capsys):
    code, out, _ = run(capsys, "spectrum", "sphere", "--lambda-max", "50")
    assert code == EXIT_OK
    assert len(JointSpectrum.from_csv(out)) == 49
    assert run(capsys, "spectrum", "sphere")[0] == EXIT_INPUT


def test_oracle_csv(capsys):
    code, out, _ = run(capsys, "oracle", "sphere", "0:2", "--count", "3")
    assert code == EXIT_OK
    spec = JointSpectrum.from_csv(out)
    assert len(spec) == 9
    assert sorted(spec.arrays()[2])[-1] == pytest.approx(20.0, abs=1e-8)
    assert run(capsys, "oracle", "sphere", "2:0")[0] == EXIT_INPUT


def test_actions_csv(capsys):
    code, out, _ = run(capsys, "actions", "asym", "--nodes", "11")
    assert code == EXIT_OK
    assert len(out.strip().splitlines()) == 12


def test_lengths_on_the_sphere(capsys):
    code, _, err = run(capsys, "lengths", "sphere")
    assert code == EXIT_OK
    assert json.loads(err)["degenerate"] is True


def test_trace_from_a_spectrum_file(capsys, tmp_path):
    rows = [(n, l, float(l * (l + 1))) for l in range(61) for n in range(-l, l + 1)]
    path = tmp_path / "sphere.csv"
    path.write_text(JointSpectrum(rows, "exact", 3660.0).to_csv())
    csv = tmp_path / "trace.csv"
    code, out, _ = run(capsys, "trace", str(path), "--out", str(csv))
    assert code == EXIT_OK
    peaks = [r["t"] for r in json.loads(out)]
    assert min(abs(t - 2 * math.pi) for t in peaks) <= 0.02
    assert csv.read_text().splitlines()[0] == "t,re,im,abs"


def test_trace_matches_sphere_lengths(capsys):
    code, out, _ = run(capsys, "trace", "sphere", "--tmax", "8")
    assert code == EXIT_OK
    hits = [r for r in json.loads(out) if r["matched_length"] is not None]
    assert any(r["matched_length"] == pytest.approx(2 * math.pi) for r in hits)


def test_reconstruct_from_a_normal_form_file(capsys, tmp_path, nf_of):
    path = tmp_path / "nf.json"
    path.write_text(json.dumps(nf_of("asym").to_json()))
    code, out, _ = run(capsys, "reconstruct", str(path))
    assert code == EXIT_OK
    rep = json.loads(out)
    assert rep["format"] == "revspec-reconstruction-v1"
    assert rep["residuals"]["F"] < 1e-6
    code, out, _ = run(capsys, "reconstruct", str(path), "--family", "2")
    assert code == EXIT_OK
    assert json.loads(out)["coefficients"] == pytest.approx([0.1, 0.05], abs=1e-6)


def test_roundtrip(capsys):
    code, out, _ = run(capsys, "roundtrip", "asym", "--tol", "1e-2")
    rep = json.loads(out)
    assert code == EXIT_OK and rep["pass"]
    assert rep["isometry_distance"] <= 1e-2


@pytest.mark.parametrize("argv", [
    ["reconstruct", ""],
    ["reconstruct", "/nonexistent/file.csv"],
    ["trace", "sphere", "--sigma", "5"],
    ["spectrum", "sphere", "--lambda-max", "-1"],
    ["spectrum", "sphere", "--bogus", "1"],
    ["nosuchcommand"],
])
def test_usage_errors_exit_two(capsys, argv):
    assert run(capsys, *argv)[0] == EXIT_INPUT


def test_malformed_input_file(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "reconstruct", str(bad))[0] == EXIT_INPUT


def test_run_config_validation():
    with pytest.raises(InputError):
        RunConfig("trace", overrides={"nope": 1})
    with pytest.raises(InputError):
        RunConfig("trace", overrides={"sigma": 2.0})
    assert RunConfig("trace", overrides={"sigma": None}).get("sigma", 0.05) == 0.05


def test_output_is_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert run(capsys, "spectrum", "asym", "--lambda-max", "200", "--out", str(path))[0] == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "revspec", "preset", "sphere"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["besse"]["coeffs"] == [1.0]
