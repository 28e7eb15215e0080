import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from radioslam.dictionary import quantize_orientation, quantize_uniform_angle
from radioslam.errors import InsufficientPaths, SingularPath
from radioslam.geometry import SPEED_OF_LIGHT, MultipathSet, ScenarioConfig, Scene, observe, path_arrays, sample_scene
from radioslam.localization import clock_and_los, map_reflectors, path_coefficients, solve_location

from conftest import random_scenes


def test_path_coefficients_symmetric_case():
    p, q = path_coefficients(math.pi / 4, 3 * math.pi / 4)
    assert p == pytest.approx(math.sqrt(2))
    assert q == pytest.approx(0.0, abs=1e-15)
    # d_ox P + d_oy Q - l_e closes on the path length for rx=(10, 0), tau_e=0
    assert 10 * p + 0 * q - 0.0 == pytest.approx(10 * math.sqrt(2))


def test_path_coefficients_singular():
    with pytest.raises(SingularPath):
        path_coefficients(0.3, 0.3)


def test_path_coefficients_match_tangent_form():
    rng = np.random.default_rng(1)
    for th, ph in rng.uniform(-1.4, 1.4, (50, 2)):
        if abs(math.sin(th - ph)) < 1e-3:
            continue
        q_tan = (1 / math.cos(th) + 1 / math.cos(ph)) / (math.tan(th) - math.tan(ph))
        p_tan = -q_tan * math.tan(ph) - 1 / math.cos(ph)
        p, q = path_coefficients(th, ph)
        assert p == pytest.approx(p_tan, rel=1e-9) and q == pytest.approx(q_tan, rel=1e-9)


def test_linear_rows_close_on_exact_data(scenes):
    for s in scenes:
        arr = path_arrays(s)
        l_e = SPEED_OF_LIGHT * s.clock_offset
        for th, ph, tdoa in zip(arr["aod"], arr["aoa"], arr["tdoa"]):
            p, q = path_coefficients(th, ph)
            resid = s.rx_position[0] * p + s.rx_position[1] * q - l_e - SPEED_OF_LIGHT * tdoa
            assert abs(resid) < 1e-9


def test_solve_location_exact(scene_obs):
    for s, obs in scene_obs:
        est = solve_location(obs, s.orientation)
        assert np.linalg.norm(est.rx_position - s.rx_position) < 1e-9
        assert est.l_e == pytest.approx(SPEED_OF_LIGHT * s.clock_offset, abs=1e-8)
        assert est.residual_norm < 1e-9
        assert len(est.reflectors) == len(est.used_paths)


def test_solve_location_with_quantized_orientation():
    errs = []
    for s in random_scenes(100, seed=3):
        est = solve_location(observe(s), quantize_orientation(s.orientation, 64))
        errs.append(np.linalg.norm(est.rx_position - s.rx_position))
    errs = np.array(errs)
    # a coarse sensor costs roughly ten orders of magnitude w.r.t. exact orientation
    assert np.median(errs) > 1e-2
    assert np.median(errs) < 10.0


def test_solve_location_insufficient_paths():
    s = Scene([30.0, 40.0], 0.2, 1e-7, [[10.0, 60.0], [70.0, 5.0]])
    with pytest.raises(InsufficientPaths):
        solve_location(observe(s), s.orientation)


def test_singular_path_dropped():
    s = random_scenes(1, seed=9)[0]
    obs = observe(s)
    # place one path exactly on the tx-rx line: theta == phi
    aod = obs.aod.copy()
    aod[0] = obs.daoa[0] + s.orientation
    est = solve_location(obs.replace(aod=aod), s.orientation)
    assert 0 in est.dropped_paths and 0 not in est.used_paths


def test_map_reflectors_exact_and_symmetric(square_scene, scene_obs):
    obs = observe(square_scene)
    est = solve_location(obs, 0.0)
    np.testing.assert_allclose(map_reflectors(est, obs, 0.0)[0], [5.0, 5.0], atol=1e-9)
    for s, obs in scene_obs:
        est = solve_location(obs, s.orientation)
        assert np.max(np.linalg.norm(est.reflectors - s.reflectors[est.used_paths], axis=1)) < 1e-9


def test_clock_and_los_exact(scene_obs):
    for s, obs in scene_obs:
        est = solve_location(obs, s.orientation)
        clock, los = clock_and_los(est, obs)
        # oracle: min(tau_i) - min(tdoa_i) is tau_e by construction
        oracle = path_arrays(s)["delay"].min() - obs.tdoa.min()
        assert abs(oracle - s.clock_offset) < 1e-15
        assert abs(clock - s.clock_offset) < 1e-15
        assert clock == pytest.approx(est.l_e / SPEED_OF_LIGHT, rel=1e-12, abs=1e-18)
        excess = path_arrays(s)["length"].min() - np.hypot(*s.rx_position)
        if excess > 0.5:
            assert not los


def test_los_detected_when_a_path_is_nearly_direct():
    s = Scene([40.0, 30.0], 0.0, 1e-7, [[20.0, 15.2], [5.0, 60.0], [70.0, 10.0], [90.0, 80.0]])
    est = solve_location(observe(s), 0.0)
    assert est.los


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 100_000), st.floats(-50e-9, 50e-9))
def test_clock_shift_is_absorbed(seed, delta):
    s = sample_scene(ScenarioConfig(n_paths=8), seed)
    obs = observe(s)
    a = solve_location(obs, s.orientation)
    b = solve_location(obs.replace(tdoa=obs.tdoa + delta), s.orientation)
    assert np.linalg.norm(a.rx_position - b.rx_position) < 1e-9
    assert b.l_e - a.l_e == pytest.approx(-SPEED_OF_LIGHT * delta, abs=1e-8)


def test_permutation_invariance(scenes):
    rng = np.random.default_rng(0)
    s = scenes[0]
    obs = quantize = observe(s)
    obs = quantize.replace(daoa=quantize_uniform_angle(quantize.daoa, 64))
    perm = rng.permutation(len(obs))
    a = solve_location(obs, s.orientation)
    b = solve_location(obs.subset(perm), s.orientation)
    np.testing.assert_allclose(a.rx_position, b.rx_position, atol=1e-9)


def test_residual_drops_when_corrupted_path_removed(scene_obs):
    s, obs = scene_obs[0]
    tdoa = obs.tdoa.copy()
    tdoa[4] += 5e-9
    bad = obs.replace(tdoa=tdoa)
    full = solve_location(bad, s.orientation)
    keep = [i for i in range(len(obs)) if i != 4]
    clean = solve_location(bad.subset(keep), s.orientation)
    assert clean.residual_norm < full.residual_norm
    assert clean.residual_norm < 1e-9
