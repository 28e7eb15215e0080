import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from radioslam.errors import DegenerateGeometry, InvalidArgument, InvalidConfig
from radioslam.geometry import (SPEED_OF_LIGHT, MultipathSet, ScenarioConfig, Scene, forward_model,
                                observe, path_arrays, sample_scene, wrap_angle)
from radioslam.localization import solve_location

from conftest import random_scenes


@pytest.mark.parametrize("x, want", [(0.0, 0.0), (1.5 * math.pi, -0.5 * math.pi), (-math.pi, math.pi)])
def test_wrap_angle_examples(x, want):
    assert wrap_angle(x) == pytest.approx(want, abs=1e-15)


@given(st.floats(-1e6, 1e6))
def test_wrap_angle_range_and_congruence(x):
    w = wrap_angle(x)
    assert -math.pi < w <= math.pi
    k = (x - w) / (2 * math.pi)
    assert abs(k - round(k)) < 1e-6


def test_wrap_angle_rejects_nonfinite():
    with pytest.raises(InvalidArgument):
        wrap_angle(float("nan"))


def test_forward_model_symmetric_case():
    scene = Scene([10.0, 0.0], 0.0, 0.0, [[5.0, 5.0]])
    (p,) = forward_model(scene)
    assert p.aod == pytest.approx(math.pi / 4)
    assert p.aoa == pytest.approx(3 * math.pi / 4)
    assert p.daoa == pytest.approx(3 * math.pi / 4)
    assert p.length == pytest.approx(10 * math.sqrt(2))
    assert p.delay == pytest.approx(p.length / SPEED_OF_LIGHT)
    assert p.tdoa == p.delay


def test_forward_model_orientation_subtracts():
    (p,) = forward_model(Scene([10.0, 0.0], math.pi / 2, 0.0, [[5.0, 5.0]]))
    assert p.daoa == pytest.approx(math.pi / 4)


def test_forward_model_rejects_reflector_on_terminal():
    with pytest.raises(DegenerateGeometry):
        forward_model(Scene([10.0, 0.0], 0.0, 0.0, [[10.2, 0.1]]))
    with pytest.raises(DegenerateGeometry):
        forward_model(Scene([10.0, 0.0], 0.0, 0.0, [[0.0, 0.5]]))


def test_round_trip_through_localization(scene_obs):
    for scene, obs in scene_obs:
        est = solve_location(obs, scene.orientation)
        assert np.linalg.norm(est.rx_position - scene.rx_position) < 1e-9


def test_lengths_exceed_los_distance(scenes):
    for s in scenes:
        arr = path_arrays(s)
        assert np.all(arr["length"] >= np.hypot(*s.rx_position) - 1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(-10.0, 10.0))
def test_orientation_equivariance(seed, delta):
    s = sample_scene(ScenarioConfig(n_paths=5), seed)
    a = observe(s)
    b = observe(Scene(s.rx_position, s.orientation + delta, s.clock_offset, s.reflectors))
    np.testing.assert_array_equal(a.tdoa, b.tdoa)
    np.testing.assert_array_equal(a.aod, b.aod)
    diff = wrap_angle(b.daoa - a.daoa + delta)
    np.testing.assert_allclose(diff, 0.0, atol=1e-9)


def test_sample_scene_deterministic():
    cfg = ScenarioConfig()
    a, b = sample_scene(cfg, 11), sample_scene(cfg, 11)
    assert a.to_dict() == b.to_dict()
    assert sample_scene(cfg, 12).to_dict() != a.to_dict()


def test_sample_scene_uniform_means():
    side, n = 100.0, 10_000
    refl = sample_scene(ScenarioConfig(side=side, n_paths=n), 5).reflectors
    stderr = side / math.sqrt(12) / math.sqrt(n)
    assert np.all(np.abs(refl.mean(axis=0) - side / 2) < 3 * stderr)
    assert refl.min() >= 0 and refl.max() <= side


def test_sample_scene_clock_and_separation():
    for s in random_scenes(50):
        excess = s.clock_offset - np.hypot(*s.rx_position) / SPEED_OF_LIGHT
        assert -1e-18 <= excess <= 40e-9
        assert np.all(np.linalg.norm(s.reflectors, axis=1) >= 1.0)
        assert np.all(np.linalg.norm(s.reflectors - s.rx_position, axis=1) >= 1.0)


def test_sample_scene_needs_three_paths():
    with pytest.raises(InvalidConfig):
        sample_scene(ScenarioConfig(n_paths=2), 0)


def test_scene_json_round_trip(scenes):
    s = scenes[0]
    assert Scene.from_dict(s.to_dict()).to_dict() == s.to_dict()
    with pytest.raises(InvalidArgument):
        Scene.from_dict({"rx": [0, 0]})


def test_multipath_set_contract():
    m = MultipathSet([1e-9, 2e-9, 3e-9], [0.1, 0.2, 0.3], [0.0, 1.0, 2.0])
    assert len(m) == 3 and m.triplets[1] == (2e-9, 0.2, 1.0)
    assert MultipathSet.from_dict(m.to_dict()).triplets == m.triplets
    with pytest.raises(InvalidArgument):
        MultipathSet([1.0], [0.1, 0.2], [0.0])
    with pytest.raises(InvalidArgument):
        MultipathSet([float("inf")], [0.1], [0.0])
    with pytest.raises(ValueError):
        m.tdoa[0] = 1.0
