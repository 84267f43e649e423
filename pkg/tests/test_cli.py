"""In-process tests of the command-line interface and its exit codes."""

import json
import warnings

import numpy as np
import pytest

from sphereflow.cli import main
from sphereflow.serialize import spectrum_from_bytes, spectrum_to_bytes
from sphereflow.spectral import random_stream

BASE = """
[model]
L = 5
nu = 1.0
Omega = 1.0
alpha = 0.3
forcing = [{l = 2, m = 0, re = 0.4, im = 0.0}, {l = 2, m = 1, re = 0.25, im = -0.1}]

[noise]
sigma = 0.1
s = 1.0
seed = 9
dt_noise = 0.01

[integrator]
dt = 0.02

[simulate]
t_end = 1.0
record = "basic"
record_every = 5

[pullback]
releases = [20, 60, 150]
members = 5

[measure]
burn = 40
samples = 30
sample_every = 5
members = 8
spinup = 60
mode = "both"
"""


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text(BASE)
    return str(p)


def test_verify_reports_one_line_per_check(capsys):
    assert main(["verify"]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert out[-1] == "all checks passed"
    assert len(out) > 10
    assert all(line.startswith("ok") for line in out[:-1])


def test_verify_reads_truncation_from_config(cfg, capsys):
    assert main(["verify", "--config", cfg]) == 0
    assert "all checks passed" in capsys.readouterr().out


def test_simulate_writes_diagnostics_and_checkpoint(cfg, tmp_path, capsys):
    out = tmp_path / "diag.csv"
    ck = tmp_path / "state.json"
    code = main(["simulate", "--config", cfg, "--out", str(out), "--checkpoint", str(ck)])
    assert code == 0
    assert "energy" in capsys.readouterr().out
    header, *rows = out.read_text().strip().splitlines()
    assert header.split(",")[:3] == ["t", "energy", "vnorm2"]
    assert len(rows) == 11  # t=0 plus 50 steps sampled every 5
    assert float(rows[-1].split(",")[0]) == pytest.approx(1.0, abs=1e-12)
    doc = json.loads(ck.read_text())
    assert doc["format"] == "sphereflow-checkpoint-1"
    assert doc["state"]["step"] == 50


def test_simulate_output_is_reproducible(cfg, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["simulate", "--config", cfg, "--out", str(a)]) == 0
    assert main(["simulate", "--config", cfg, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_seed_override_changes_the_realization(cfg, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["simulate", "--config", cfg, "--out", str(a)]) == 0
    assert main(["simulate", "--config", cfg, "--seed", "1234", "--out", str(b)]) == 0
    assert a.read_bytes() != b.read_bytes()


def test_pullback_reports_contraction(cfg, tmp_path, capsys):
    out = tmp_path / "pull.csv"
    assert main(["pullback", "--config", cfg, "--out", str(out)]) == 0
    assert "monotone contraction: True" in capsys.readouterr().out
    header, *rows = out.read_text().strip().splitlines()
    assert header == "release_steps,time,diameter,center"
    assert len(rows) == 3
    diameters = [float(r.split(",")[2]) for r in rows]
    assert diameters[0] > diameters[-1]


def test_pullback_is_thread_invariant(cfg, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["pullback", "--config", cfg, "--threads", "1", "--out", str(a)]) == 0
    assert main(["pullback", "--config", cfg, "--threads", "3", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_measure_writes_comparison_report(cfg, tmp_path, capsys):
    out = tmp_path / "measure.json"
    assert main(["measure", "--config", cfg, "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert set(doc) == {"mode", "along", "across", "report"}
    assert set(doc["along"]) == {"energy", "enstrophy", "l4"}
    for stats in doc["report"].values():
        assert "mean_rel_diff" in stats and "hist_l1" in stats
    assert "compare" in capsys.readouterr().out


def test_measure_is_thread_invariant(cfg, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["measure", "--config", cfg, "--threads", "1", "--out", str(a)]) == 0
    assert main(["measure", "--config", cfg, "--threads", "4", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_spectrum_conversion_round_trip(tmp_path, capsys):
    x = random_stream(4, np.random.default_rng(3))
    src = tmp_path / "x.bin"
    src.write_bytes(spectrum_to_bytes(x))
    mid = tmp_path / "x.json"
    back = tmp_path / "y.bin"
    assert main(["spectrum", str(src), "--out", str(mid)]) == 0
    assert main(["spectrum", str(mid), "--out", str(back)]) == 0
    assert back.read_bytes() == src.read_bytes()
    y = spectrum_from_bytes(back.read_bytes())
    assert np.array_equal(y.coeffs, x.coeffs)
    assert "|u|" in capsys.readouterr().out


def test_missing_and_malformed_configs_exit_2(tmp_path, capsys):
    assert main(["simulate", "--config", str(tmp_path / "nope.toml")]) == 2
    bad = tmp_path / "bad.toml"
    bad.write_text(BASE + "\n[model2]\nx = 1\n")
    assert main(["simulate", "--config", str(bad)]) == 2
    nodt = tmp_path / "nodt.toml"
    nodt.write_text("[model]\nL = 4\nnu = 1.0\n[integrator]\nscheme = \"etdrk2\"\n")
    assert main(["simulate", "--config", str(nodt)]) == 2
    capsys.readouterr()


def test_pullback_without_noise_exits_2(tmp_path, capsys):
    p = tmp_path / "det.toml"
    p.write_text("[model]\nL = 4\nnu = 1.0\n[integrator]\ndt = 0.05\n")
    assert main(["pullback", "--config", str(p)]) == 2
    assert main(["measure", "--config", str(p)]) == 2
    capsys.readouterr()


def test_runaway_run_exits_3(tmp_path, capsys):
    p = tmp_path / "hot.toml"
    p.write_text(
        "[model]\nL = 4\nnu = 0.001\n"
        "forcing = [{l = 2, m = 1, re = 40.0, im = 0.0}]\n"
        "[integrator]\ndt = 0.05\nblowup_factor = 10.0\n"
        "[simulate]\nt_end = 40.0\n"
    )
    assert main(["simulate", "--config", str(p)]) == 3
    assert "blowup" in capsys.readouterr().err


def test_strict_mode_promotes_warnings(tmp_path, capsys):
    p = tmp_path / "rough.toml"
    p.write_text(BASE.replace("s = 1.0", "s = 0.4"))
    with warnings.catch_warnings():
        assert main(["simulate", "--config", str(p), "--strict"]) == 2
    assert "strict" in capsys.readouterr().err
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        out = tmp_path / "ok.csv"
        assert main(["simulate", "--config", str(p), "--out", str(out)]) == 0
