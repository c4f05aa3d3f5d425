import numpy as np
import pytest

from tricolor.errors import InsufficientDataError, NoOscillationError, ParameterError
from tricolor.fit import SigmaScanData, fit_parameters, predict_sigma_scan, scan_residuals, synthetic_scan
from tricolor.opo import OpoParams

GRID = np.linspace(1.05, 1.6, 8)
TRUTH = OpoParams(delta0=0.2, delta=0.26, excess_pump_phase_noise=15.0)


def test_scan_data_validation():
    with pytest.raises(ParameterError):
        SigmaScanData([0.9, 1.2], [1, 1], [0, 0], [1, 1])
    with pytest.raises(ParameterError):
        SigmaScanData([1.1, 1.2], [1, 1], [0], [1, 1])


def test_prediction_pipeline_consistency():
    d = predict_sigma_scan(TRUTH, GRID)
    assert np.array_equal(d.var_q_plus_corr, d.var_q_plus - d.beta0)
    assert d.provenance == "model"


def test_near_threshold_squeezing_and_beta_peak():
    d = predict_sigma_scan(OpoParams(), [1.02, 1.05])
    assert np.all(d.var_q_plus < 1)
    d = predict_sigma_scan(TRUTH, np.linspace(1.05, 1.6, 23))
    peak = d.sigma[int(np.argmax(d.beta0))]
    assert 1.3 <= peak <= 1.6
    assert np.all(np.diff(d.beta0[d.sigma < 1.3]) > 0)


def test_below_threshold_grid_point():
    with pytest.raises(NoOscillationError):
        predict_sigma_scan(TRUTH, [1.2, 0.5])


def test_synthetic_provenance_and_determinism():
    a = synthetic_scan(TRUTH, GRID, 0.02, seed=4)
    b = synthetic_scan(TRUTH, GRID, 0.02, seed=4)
    assert np.array_equal(a.var_q_plus, b.var_q_plus)
    assert "seed=4" in a.provenance and "delta0=0.2" in a.provenance


def test_fit_guards():
    d = synthetic_scan(TRUTH, GRID[:3], 0.02, seed=1)
    with pytest.raises(InsufficientDataError):
        fit_parameters(d, OpoParams())
    flat = SigmaScanData([1.2] * 4, [1.0] * 4, [0.1] * 4, [0.9] * 4)
    with pytest.raises(ParameterError):
        fit_parameters(flat, OpoParams())
    d = synthetic_scan(TRUTH, GRID, 0.02, seed=1)
    with pytest.raises(ParameterError):
        fit_parameters(d, OpoParams(), init=(2.0, 0.0, 10.0))
    with pytest.raises(ParameterError):
        fit_parameters(d, OpoParams(), free=("sigma",))


def test_fixed_point_noise_free():
    d = predict_sigma_scan(TRUTH, GRID)
    r = fit_parameters(d, OpoParams(), init=(0.2, 0.26, 15.0))
    assert r.residual < 1e-10
    assert (r.delta0, r.delta, r.s_q0) == pytest.approx((0.2, 0.26, 15.0), abs=1e-5)


def test_roundtrip_from_default_init():
    d = synthetic_scan(TRUTH, GRID, 0.02, seed=3)
    r = fit_parameters(d, OpoParams(), init=(0.0, 0.0, 10.0))
    assert abs(r.delta0 - 0.2) < 0.05 and abs(r.delta - 0.26) < 0.05 and abs(r.s_q0 - 15) < 3
    assert r.residual >= 0
    assert -1 <= r.delta0 <= 1 and -1 <= r.delta <= 1 and r.s_q0 >= 0
    assert len(r.point_residuals) == len(d)
    # best-so-far log never increases
    assert np.all(np.diff(r.history) <= 0)


def test_zero_detuning_roundtrip_with_fixed_noise():
    d = synthetic_scan(OpoParams(), GRID, 0.01, seed=5)
    r = fit_parameters(d, OpoParams(), init=(0.3, -0.2, 0.0), free=("delta0", "delta"))
    assert abs(r.delta0) < 0.05 and abs(r.delta) < 0.05
    assert r.s_q0 == 0.0


def test_sign_symmetry_canonicalized():
    flipped = TRUTH.replace(delta0=-0.2, delta=-0.26)
    a, b = predict_sigma_scan(TRUTH, GRID), predict_sigma_scan(flipped, GRID)
    assert np.allclose(a.var_q_plus, b.var_q_plus, atol=1e-12)
    assert np.allclose(a.beta0, b.beta0, atol=1e-12)
    r = fit_parameters(b, OpoParams(), init=(-0.2, -0.26, 15.0))
    assert r.delta >= 0


def test_residuals_weighted():
    d = synthetic_scan(TRUTH, GRID, 0.02, seed=2)
    res = scan_residuals(d, TRUTH)
    assert res.shape == (16,)
    # at the truth, weighted residuals are draws of unit scale
    assert np.sqrt(np.mean(res ** 2)) < 3


def test_fit_result_text():
    d = predict_sigma_scan(TRUTH, GRID)
    text = fit_parameters(d, OpoParams(), init=(0.2, 0.26, 15.0), max_iter=50).as_text()
    keys = [line.split("=")[0] for line in text.splitlines()]
    assert keys[:6] == ["delta0", "delta", "s_q0", "residual", "iterations", "converged"]
