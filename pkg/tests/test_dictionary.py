import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from radioslam.dictionary import (DictionaryConfig, angle_grid, delay_grid, quantize_delay,
                                  quantize_orientation, quantize_sin_grid, quantize_uniform_angle)
from radioslam.errors import InvalidConfig


def test_delay_grid_example():
    np.testing.assert_allclose(delay_grid(4, 400e-9), [0, 100e-9, 200e-9, 300e-9], rtol=1e-15, atol=0)
    assert delay_grid(7, 1e-6)[0] == 0.0
    with pytest.raises(InvalidConfig):
        delay_grid(1, 1e-6)


def test_angle_grid_example():
    np.testing.assert_allclose(angle_grid(4), [-math.pi / 2, -math.pi / 6, 0.0, math.pi / 6], atol=1e-15)
    for k in (2, 8, 64, 256):
        g = angle_grid(k)
        assert g[k // 2] == 0.0
        assert np.all(np.diff(g) > 0) and g[0] >= -math.pi / 2 and g[-1] < math.pi / 2
    with pytest.raises(InvalidConfig):
        angle_grid(3)


def test_dictionary_config_validation():
    cfg = DictionaryConfig(k_tau=4, k_theta=4, k_phi=8, t_cp=400e-9)
    assert len(cfg.delays) == 4 and len(cfg.daoas) == 8
    for bad in ({"k_tau": 1}, {"k_phi": 7}, {"t_cp": 0.0}, {"n_q": 1}):
        with pytest.raises(InvalidConfig):
            DictionaryConfig(**bad)


@given(st.integers(-512, 511), st.sampled_from([4, 16, 256, 1024]))
def test_uniform_quantizer_idempotent_on_grid(n, k):
    x = quantize_uniform_angle(n * math.pi / k, k)
    assert quantize_uniform_angle(x, k) == x
    assert -math.pi < x <= math.pi


@given(st.floats(-math.pi, math.pi), st.sampled_from([2, 16, 256]))
def test_uniform_quantizer_error_bound(x, k):
    q = quantize_uniform_angle(x, k)
    err = abs(math.remainder(q - x, 2 * math.pi))
    assert err <= math.pi / (2 * k) + 1e-12
    # halving the step halves the bound
    q2 = quantize_uniform_angle(x, 2 * k)
    assert abs(math.remainder(q2 - x, 2 * math.pi)) <= math.pi / (4 * k) + 1e-12


def test_uniform_quantizer_variance_and_distribution():
    rng = np.random.default_rng(0)
    k = 256
    x = rng.uniform(-math.pi, math.pi, 100_000)
    err = np.remainder(quantize_uniform_angle(x, k) - x + math.pi, 2 * math.pi) - math.pi
    want = (math.pi / k) ** 2 / 12
    assert abs(err.var() / want - 1) < 0.05
    half = math.pi / (2 * k)
    p = stats.kstest(err[:10_000], stats.uniform(loc=-half, scale=2 * half).cdf).pvalue
    assert p > 0.01


def test_sin_grid_projection():
    g = angle_grid(16)
    assert quantize_sin_grid(g[5], 16) == g[5]
    x = np.linspace(-1.4, 1.4, 101)
    q = quantize_sin_grid(x, 16)
    brute = np.array([g[np.argmin(np.abs(g - v))] for v in x])
    np.testing.assert_array_equal(q, brute)


def test_quantize_delay():
    assert quantize_delay(149e-9, 4, 400e-9) == pytest.approx(100e-9)
    assert quantize_delay(-5e-9, 4, 400e-9) == 0.0
    assert quantize_delay(1e-6, 4, 400e-9) == pytest.approx(300e-9)


def _brute_orientation(phi, n_q):
    levels = np.arange(n_q) * 2 * math.pi / n_q
    d = np.abs(np.remainder(phi - levels + math.pi, 2 * math.pi) - math.pi)
    return levels[int(np.argmin(d))]  # argmin returns the first (smallest n) on ties


def test_quantize_orientation_examples():
    assert quantize_orientation(0.0, 64) == 0.0
    assert quantize_orientation(math.pi / 64, 64) == 0.0
    phi = 2 * math.pi - 1e-6
    assert quantize_orientation(phi, 64) == _brute_orientation(phi, 64) == 0.0


@given(st.floats(0, 2 * math.pi, exclude_max=True), st.sampled_from([2, 8, 64]))
def test_quantize_orientation_matches_brute_force(phi, n_q):
    q = quantize_orientation(phi, n_q)
    b = _brute_orientation(phi, n_q)
    d_q = abs(math.remainder(phi - q, 2 * math.pi))
    d_b = abs(math.remainder(phi - b, 2 * math.pi))
    assert d_q == pytest.approx(d_b, abs=1e-12)
    assert quantize_orientation(q, n_q) == pytest.approx(q, abs=1e-12)
