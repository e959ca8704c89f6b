import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from secure_dfrc.config import ConfigError, SystemConfig
from secure_dfrc.scenario import (ChannelSet, apply_csi_error, draw_rician, draw_scenario,
                                  realization_rngs, steering_ula, steering_upa)


# ---------------------------------------------------------------- config

def test_defaults_and_linear_mirrors():
    cfg = SystemConfig()
    assert (cfg.n_tx, cfg.n_rx, cfg.n_irs, cfg.irs_shape) == (16, 16, 64, (8, 8))
    assert cfg.p_radar == pytest.approx(1000.0)
    assert cfg.gamma_r_th == pytest.approx(10 ** -1.1)
    assert cfg.epsilon == pytest.approx(0.01)
    assert cfg.beta == pytest.approx(1e-2)      # amplitude of -40 dB
    assert cfg.sigma_e2 == 0.0


def test_beta_scale_readings():
    assert SystemConfig(beta_db=-40.0, beta_scale="power").beta == pytest.approx(1e-4)
    assert SystemConfig(beta_db=-40.0, beta_scale="amplitude").beta == pytest.approx(1e-2)


@pytest.mark.parametrize("changes", [
    {"beta_scale": "volts"}, {"n_tx": 0}, {"omega": 1.5}, {"n_irs": 10}, {"sigma_e2_db": 0.0},
    {"p_radar_dbm": math.inf}, {"power_split": "both"}, {"t_max": 0},
])
def test_invalid_config_rejected(changes):
    with pytest.raises(ConfigError):
        SystemConfig(**changes)


def test_config_json_roundtrip_and_unknown_keys(tmp_path):
    cfg = SystemConfig(omega=0.3, rician_db={"g": 10.0}, sigma_e2_db=-10.0)
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    back = SystemConfig.from_json(path)
    assert back.to_dict() == cfg.to_dict()
    assert back.kappa["g"] == pytest.approx(10.0) and back.kappa["f"] == pytest.approx(100.0)
    with pytest.raises(ConfigError):
        SystemConfig.from_dict({"bogus": 1})


# ---------------------------------------------------------------- steering

def test_ula_trivial_cases():
    np.testing.assert_allclose(steering_ula(4, 0.5, 0.0), np.ones(4))
    np.testing.assert_allclose(steering_ula(2, 0.5, 90.0), [1, -1], atol=1e-15)


def test_ula_matches_direct_formula():
    got = steering_ula(3, 0.5, 30.0)
    want = [complex(math.cos(math.pi * k * 0.5), math.sin(math.pi * k * 0.5)) for k in range(3)]
    np.testing.assert_allclose(got, want, atol=1e-15)


def test_upa_trivial_and_degenerate_row():
    np.testing.assert_allclose(steering_upa(2, 2, 0.5, 0.0, 37.0), np.ones(4))
    # one row, elevation 90, azimuth 90: phase n*pi, same as a ULA at 90 degrees
    np.testing.assert_allclose(steering_upa(1, 5, 0.5, 90.0, 90.0), steering_ula(5, 0.5, 90.0), atol=1e-12)


def test_upa_matches_direct_formula():
    got = steering_upa(3, 3, 0.5, 60.0, 30.0)
    se, ca, sa = math.sin(math.radians(60)), math.cos(math.radians(30)), math.sin(math.radians(30))
    want = []
    for m in range(3):
        for n in range(3):
            ph = 2 * math.pi * 0.5 * (m * se * ca + n * se * sa)
            want.append(complex(math.cos(ph), math.sin(ph)))
    np.testing.assert_allclose(got, want, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.floats(-180, 180), st.floats(-180, 180))
def test_steering_unit_modulus(rows, cols, e, a):
    np.testing.assert_allclose(np.abs(steering_upa(rows, cols, 0.5, e, a)), 1.0, atol=1e-12)
    np.testing.assert_allclose(np.abs(steering_ula(rows * cols, 0.5, a)), 1.0, atol=1e-12)


# ---------------------------------------------------------------- fading

def test_rician_los_limit_and_determinism():
    los = steering_ula(4, 0.5, 20.0)
    out = draw_rician(los, 90.0, 1.0, np.random.default_rng(0))
    np.testing.assert_allclose(out, los, rtol=1e-3, atol=1e-3)
    a = draw_rician(los, 20.0, 1.0, np.random.default_rng(5))
    b = draw_rician(los, 20.0, 1.0, np.random.default_rng(5))
    np.testing.assert_array_equal(a, b)


def test_rician_sample_mean():
    los = steering_ula(3, 0.5, 40.0)
    draws = 10_000
    samples = draw_rician(np.tile(los, (draws, 1)), 20.0, 1.0, np.random.default_rng(1))
    kappa = 100.0
    se = math.sqrt(1.0 / (kappa + 1) / draws)   # per-entry standard error of the complex mean
    np.testing.assert_allclose(samples.mean(axis=0), math.sqrt(kappa / (kappa + 1)) * los, atol=3 * se)


def test_csi_error_zero_gives_identical_views():
    truth, est = apply_csi_error(np.ones(5), 10.0, 1.0, 0.0, np.random.default_rng(2))
    np.testing.assert_array_equal(truth, est)


def test_csi_error_variances():
    draws = 10_000
    los = np.ones(draws, dtype=complex)
    truth, est = apply_csi_error(los, 1.0, 1.0, 0.5, np.random.default_rng(3))
    err = truth - est
    # error variance 0.5 * 1 / 2 = 0.25; var of |x|^2 for CN(0, v) is v^2
    assert abs(np.mean(np.abs(err) ** 2) - 0.25) <= 3 * 0.25 / math.sqrt(draws)
    scattered = truth - math.sqrt(0.5) * los
    assert abs(np.mean(np.abs(scattered) ** 2) - 0.5) <= 3 * 0.5 / math.sqrt(draws)
    with pytest.raises(ValueError):
        apply_csi_error(los, 1.0, 1.0, 1.0, np.random.default_rng(3))


def test_scenario_dimensions_and_determinism():
    cfg = SystemConfig(n_tx=3, n_rx=2, n_irs=6, irs_shape=(2, 3), sigma_e2_db=-10.0)
    v1 = draw_scenario(cfg, realization_rngs(7)["channels"])
    v2 = draw_scenario(cfg, realization_rngs(7)["channels"])
    t = v1.truth
    assert t.g.shape == (3,) and t.f.shape == (6,) and t.h_dl.shape == (6, 3) and t.h_ul.shape == (2, 6)
    np.testing.assert_allclose(np.abs(t.a_target), 1.0, atol=1e-12)
    for name in ("g", "f", "h_dl", "h_ul"):
        np.testing.assert_array_equal(getattr(v1.truth, name), getattr(v2.truth, name))
    assert not np.allclose(v1.truth.g, v1.estimate.g)


def test_perfect_csi_estimate_equals_truth():
    view = draw_scenario(SystemConfig(n_irs=4), realization_rngs(1)["channels"])
    np.testing.assert_array_equal(view.truth.h_dl, view.estimate.h_dl)


def test_channel_set_rejects_bad_dimensions():
    with pytest.raises(ValueError):
        ChannelSet(g=np.ones(2), f=np.ones(3), h_dl=np.ones((3, 3)), h_ul=np.ones((2, 3)), a_target=np.ones(3))
