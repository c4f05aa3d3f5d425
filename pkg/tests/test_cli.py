import math
import subprocess
import sys

import numpy as np
import pytest

from tricolor import tables
from tricolor.cli import main
from tricolor.fit import synthetic_scan
from tricolor.opo import OpoParams, spectral_covariance

FITTED_CFG = "sigma = 1.34\ndelta0 = 0.2\ndelta = 0.26\nexcess_pump_phase_noise = 15\n"
SMALL_DSP = "nu = 1e5\nrf_rate = 4e5\nsample_rate = 5e4\nn_samples = 5000\n"


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "fitted.cfg"
    p.write_text(FITTED_CFG)
    return p


def run(*argv):
    return main([str(a) for a in argv])


def test_scan_writes_table(cfg, tmp_path):
    out = tmp_path / "scan.csv"
    assert run("scan", "--config", cfg, "--n-points", 61, "-o", out) == 0
    t = tables.read_scan(out)
    i0 = int(np.argmin(np.abs(t.delta)))
    assert t.delta[i0] == 0
    assert 0.4 < t.diff_noise[i0] < 0.65  # difference channel reads the twin squeezing


def test_scan_vacuum_is_flat(tmp_path):
    out = tmp_path / "v.csv"
    assert run("scan", "--set", "coupling=0", "-o", out) == 0
    t = tables.read_scan(out)
    assert np.allclose(t.sum_noise, 1) and np.allclose(t.diff_noise, 1)


def test_below_threshold_exit_3(cfg, capsys):
    assert run("scan", "--config", cfg, "--set", "sigma=0.5") == 3
    assert "sigma" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["fig3", "--n-points", "1"],
    ["scan", "--n-points", "1"],
    ["scan", "--delta-min", "2", "--delta-max", "1"],
    ["scan", "--set", "nonsense=1"],
    ["scan", "--set", "eta_twin=2"],
    ["traces", "--seed", "-1"],
    ["traces", "--seed", str(2**64)],
    ["frobnicate"],
])
def test_usage_errors_exit_2(argv):
    assert main(argv) == 2


def test_config_error_names_line(tmp_path, capsys):
    p = tmp_path / "c.cfg"
    p.write_text("sigma = 1.2\n\nwrong_key = 1\n")
    assert run("scan", "--config", p) == 2
    assert f"{p}:3" in capsys.readouterr().err


def test_fig3_band_and_columns(cfg, tmp_path):
    out = tmp_path / "f3.csv"
    assert run("fig3", "--config", cfg, "--sigma-min", 1.1, "--n-points", 8, "-o", out) == 0
    d = tables.read_sigma_scan(out)
    assert np.all((d.beta0 >= 0.05) & (d.beta0 <= 0.30))
    # exact in the model; the CSV keeps 9 significant digits
    assert np.allclose(d.var_q_plus_corr, d.var_q_plus - d.beta0, rtol=0, atol=1e-8)


def test_fig3_zero_detuning_strong_phase_correlation(tmp_path):
    out = tmp_path / "f3.csv"
    assert run("fig3", "-o", out) == 0
    d = tables.read_sigma_scan(out)
    assert np.all(d.beta0 < 1e-12)
    assert np.allclose(d.var_q_plus_corr, d.var_q_plus)
    # all pump/phase-sum correlation sits in the phase-phase channel
    assert np.all(d.extra["c_q0_qplus"] > 0.02)
    assert np.all(np.abs(d.extra["c_p0_qplus"]) < 1e-9)
    assert np.all(np.diff(d.extra["r_q0_qplus"]) > 0)


def test_criteria_reference_fixture(tmp_path, capsys):
    p = tmp_path / "m.csv"
    p.write_text(f"var_p_minus,var_q_plus,var_p0,cov_p0_qplus\n0.53,0.99,1,{math.sqrt(0.13)!r}\n")
    assert run("criteria", "--moments", p) == 0
    out = capsys.readouterr().out
    assert "duan_simon_value = 1.5200" in out
    assert "vlf_value = 1.3900" in out
    assert "var_q_plus_corrected = 0.8600" in out
    assert "duan_simon: ENTANGLED" in out and "pump_corrected: ENTANGLED" in out
    assert "QUANTUM CORRELATION: yes" in out


def test_criteria_vacuum_traces(tmp_path, capsys):
    a, p = tmp_path / "a.csv", tmp_path / "p.csv"
    assert run("traces", "--vacuum", "--seed", 1, "--set", "n_samples=20000", "-o", a) == 0
    assert run("traces", "--vacuum", "--seed", 2, "--set", "n_samples=20000", "--set", "window=phase", "-o", p) == 0
    capsys.readouterr()
    assert run("criteria", "--traces", a, p) == 0
    out = capsys.readouterr().out
    value = float(out.split("duan_simon_value = ")[1].split()[0])
    err = float(out.split("duan_simon_value = ")[1].split("+/- ")[1].split()[0])
    assert abs(value - 2.0) < 3 * err
    assert "QUANTUM CORRELATION: no" in out


def test_criteria_truncated_csv(tmp_path, capsys):
    p = tmp_path / "m.csv"
    p.write_text("p0,q_plus,p_minus\n0.1,0.2,0.3\n0.4,0.5\n")
    assert run("criteria", "--moments", p) == 2
    assert ":3:" in capsys.readouterr().err


def test_traces_deterministic_bytes(cfg, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        assert run("traces", "--config", cfg, "--seed", 18446744073709551615,
                   "--set", "n_samples=3000", "-o", out) == 0
    assert a.read_bytes() == b.read_bytes()
    assert tables.read_trace(a).seed == 18446744073709551615


def test_rf_traces_demodulate_to_model(tmp_path):
    c = tmp_path / "small.cfg"
    c.write_text(FITTED_CFG + SMALL_DSP)
    rf, bb = tmp_path / "rf.csv", tmp_path / "bb.csv"
    assert run("traces", "--config", c, "--rf", "--seed", 3, "-o", rf) == 0
    assert run("demod", "--config", c, rf, "-o", bb) == 0
    trace = tables.read_trace(bb)
    assert len(trace) == 5000
    assert trace.sample_rate == 5e4
    model = spectral_covariance(OpoParams(sigma=1.34, delta0=0.2, delta=0.26, excess_pump_phase_noise=15), 1e5)
    scaled = trace.shot_units()
    rel_se = math.sqrt(4 / len(trace))  # channel and shot-reference scatter combined
    for ch, k in (("pump", 0), ("signal", 2), ("idler", 4)):
        assert abs(np.var(scaled[ch]) / model.matrix[k, k] - 1) < 4 * rel_se
    # wrong input kind is rejected
    assert run("demod", "--config", c, bb) == 2


def test_fit_command(tmp_path):
    data = tmp_path / "d.csv"
    tables.write_sigma_scan(data, synthetic_scan(OpoParams(delta0=0.2, delta=0.26, excess_pump_phase_noise=15),
                                                 np.linspace(1.05, 1.6, 8), 0.02, seed=3))
    out = tmp_path / "fit.txt"
    assert run("fit", data, "-o", out) == 0
    kv = tables.parse_key_values(out.read_text())
    assert abs(float(kv["delta0"]) - 0.2) < 0.05 and abs(float(kv["delta"]) - 0.26) < 0.05
    assert abs(float(kv["s_q0"]) - 15) < 3
    assert kv["converged"] in ("true", "false")


def test_entry_point_subprocess(cfg):
    r = subprocess.run([sys.executable, "-m", "tricolor.cli", "scan", "--config", str(cfg), "--n-points", "3"],
                       capture_output=True, text=True)
    assert r.returncode == 0
    assert r.stdout.splitlines()[0] == "delta,sum_noise,diff_noise,w_p,w_q"
