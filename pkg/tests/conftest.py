import numpy as np
import pytest

from radioslam.geometry import ScenarioConfig, Scene, observe, sample_scene

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def record():
    """Register one acceptance line; call before asserting so failures are listed too."""
    def _record(name: str, passed: bool, detail: str) -> bool:
        _ACCEPTANCE.append((name, bool(passed), detail))
        return bool(passed)
    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")


@pytest.fixture
def square_scene():
    """Receiver at (10, 0) with one reflector at (5, 5) plus two helpers."""
    return Scene([10.0, 0.0], 0.0, 0.0, [[5.0, 5.0], [3.0, -8.0], [12.0, 9.0]])


def random_scenes(n, seed=0, **kw):
    cfg = ScenarioConfig(**kw)
    return [sample_scene(cfg, np.random.SeedSequence(seed, spawn_key=(i,))) for i in range(n)]


@pytest.fixture
def scenes():
    return random_scenes(30)


@pytest.fixture
def scene_obs(scenes):
    return [(s, observe(s)) for s in scenes]
