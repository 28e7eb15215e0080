"""2D single-bounce multipath geometry.

The transmitter sits at the origin. Every path leaves it towards a reflector
and bounces once before reaching the receiver. All quantities are SI
(meters, seconds, radians); angles are wrapped to (-pi, pi].
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .errors import DegenerateGeometry, InvalidArgument, InvalidConfig

SPEED_OF_LIGHT = 299_792_458.0
MIN_SEPARATION = 1.0


def wrap_angle(x):
    """Wrap an angle (scalar or array) into (-pi, pi]."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgument("angle must be finite")
    out = np.pi - np.mod(np.pi - arr, 2 * np.pi)
    if np.ndim(out) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class Scene:
    """Ground truth for one realization.

    Attributes
    ----------
    rx_position : (2,) receiver position d_o in meters
    orientation : receiver array rotation phi_o in radians
    clock_offset : receiver time reference tau_e in seconds
    reflectors : (N_p, 2) reflector positions in meters
    """

    rx_position: np.ndarray
    orientation: float
    clock_offset: float
    reflectors: np.ndarray

    def __post_init__(self) -> None:
        rx = np.array(self.rx_position, dtype=float).reshape(2)
        rx.flags.writeable = False
        refl = np.array(self.reflectors, dtype=float).reshape(-1, 2)
        refl.flags.writeable = False
        object.__setattr__(self, "rx_position", rx)
        object.__setattr__(self, "reflectors", refl)
        object.__setattr__(self, "orientation", wrap_angle(float(self.orientation)))
        object.__setattr__(self, "clock_offset", float(self.clock_offset))

    @property
    def n_paths(self) -> int:
        return len(self.reflectors)

    def to_dict(self) -> dict[str, Any]:
        return {
            "rx": self.rx_position.tolist(),
            "phi0": self.orientation,
            "tau_e": self.clock_offset,
            "reflectors": self.reflectors.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Scene":
        try:
            return cls(
                rx_position=data["rx"],
                orientation=data["phi0"],
                clock_offset=data["tau_e"],
                reflectors=data["reflectors"],
            )
        except KeyError as exc:
            raise InvalidArgument(f"scene is missing field {exc.args[0]!r}") from None

    def rotated(self, delta: float) -> "Scene":
        """The same scene rotated about the transmitter by ``delta``."""
        c, s = math.cos(delta), math.sin(delta)
        rot = np.array([[c, -s], [s, c]])
        return Scene(rot @ self.rx_position, self.orientation + delta,
                     self.clock_offset, self.reflectors @ rot.T)


@dataclass(frozen=True)
class PathParameters:
    delay: float
    tdoa: float
    aod: float
    aoa: float
    daoa: float
    length: float


@dataclass(frozen=True)
class MultipathSet:
    """Per-path observations ``(tdoa, aod, daoa)`` as parallel arrays."""

    tdoa: np.ndarray
    aod: np.ndarray
    daoa: np.ndarray
    provenance: str = "exact"

    def __post_init__(self) -> None:
        arrays = [np.array(getattr(self, k), dtype=float).reshape(-1) for k in ("tdoa", "aod", "daoa")]
        if not (len(arrays[0]) == len(arrays[1]) == len(arrays[2])):
            raise InvalidArgument("tdoa, aod and daoa must have equal length")
        for name, arr in zip(("tdoa", "aod", "daoa"), arrays):
            if not np.all(np.isfinite(arr)):
                raise InvalidArgument(f"{name} contains non-finite values")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.provenance not in ("exact", "quantized"):
            raise InvalidArgument(f"unknown provenance {self.provenance!r}")

    def __len__(self) -> int:
        return len(self.tdoa)

    @property
    def triplets(self) -> list[tuple[float, float, float]]:
        return list(zip(self.tdoa.tolist(), self.aod.tolist(), self.daoa.tolist()))

    def subset(self, idx: Sequence[int]) -> "MultipathSet":
        idx = np.asarray(idx, dtype=int)
        return MultipathSet(self.tdoa[idx], self.aod[idx], self.daoa[idx], self.provenance)

    def replace(self, **changes) -> "MultipathSet":
        kw = {"tdoa": self.tdoa, "aod": self.aod, "daoa": self.daoa, "provenance": self.provenance}
        kw.update(changes)
        return MultipathSet(**kw)

    def to_dict(self) -> dict[str, Any]:
        return {"paths": [list(t) for t in self.triplets], "provenance": self.provenance}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "MultipathSet":
        paths = np.asarray(data["paths"], dtype=float).reshape(-1, 3)
        return cls(paths[:, 0], paths[:, 1], paths[:, 2], data.get("provenance", "exact"))


@dataclass(frozen=True)
class ScenarioConfig:
    """Random scene ensemble: square ``[0, side]^2``, transmitter at its corner."""

    side: float = 100.0
    n_paths: int = 20
    clock_excess_max: float = 40e-9
    min_separation: float = MIN_SEPARATION


def _check_separation(scene: Scene, eps: float) -> None:
    d_tx = np.linalg.norm(scene.reflectors, axis=1)
    d_rx = np.linalg.norm(scene.reflectors - scene.rx_position, axis=1)
    bad = np.flatnonzero((d_tx < eps) | (d_rx < eps))
    if bad.size:
        raise DegenerateGeometry(
            f"reflector(s) {bad.tolist()} within {eps} m of the transmitter or receiver")


def path_arrays(scene: Scene, min_separation: float = MIN_SEPARATION) -> dict[str, np.ndarray]:
    """Vectorized forward model; returns one array per PathParameters field."""
    _check_separation(scene, min_separation)
    refl = scene.reflectors
    to_rx = refl - scene.rx_position
    length = np.linalg.norm(refl, axis=1) + np.linalg.norm(to_rx, axis=1)
    delay = length / SPEED_OF_LIGHT
    aod = wrap_angle(np.arctan2(refl[:, 1], refl[:, 0]))
    aoa = wrap_angle(np.arctan2(to_rx[:, 1], to_rx[:, 0]))
    return {
        "delay": delay,
        "tdoa": delay - scene.clock_offset,
        "aod": np.atleast_1d(aod),
        "aoa": np.atleast_1d(aoa),
        "daoa": np.atleast_1d(wrap_angle(aoa - scene.orientation)),
        "length": length,
    }


def forward_model(scene: Scene, min_separation: float = MIN_SEPARATION) -> list[PathParameters]:
    arrs = path_arrays(scene, min_separation)
    return [PathParameters(*(float(arrs[k][i]) for k in ("delay", "tdoa", "aod", "aoa", "daoa", "length")))
            for i in range(scene.n_paths)]


def observe(scene: Scene, min_separation: float = MIN_SEPARATION) -> MultipathSet:
    """Exact ``(tdoa, aod, daoa)`` observations of every path in ``scene``."""
    arrs = path_arrays(scene, min_separation)
    return MultipathSet(arrs["tdoa"], arrs["aod"], arrs["daoa"], "exact")


def sample_scene(config: ScenarioConfig, seed) -> Scene:
    """Draw a random scene.

    ``seed`` may be an int, a ``numpy.random.SeedSequence`` or a ``Generator``.
    Reflectors closer than ``config.min_separation`` to either terminal are
    redrawn.
    """
    if config.n_paths < 3:
        raise InvalidConfig(f"n_paths must be >= 3, got {config.n_paths}")
    if config.side <= 0 or config.clock_excess_max < 0:
        raise InvalidConfig("side must be positive and clock_excess_max non-negative")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    side = config.side
    rx = rng.uniform(0.0, side, 2)
    refl = rng.uniform(0.0, side, (config.n_paths, 2))
    orientation = rng.uniform(0.0, 2 * np.pi)
    clock = np.hypot(*rx) / SPEED_OF_LIGHT + rng.uniform(0.0, config.clock_excess_max)
    eps = config.min_separation
    for _ in range(10_000):
        bad = (np.linalg.norm(refl, axis=1) < eps) | (np.linalg.norm(refl - rx, axis=1) < eps)
        if not bad.any():
            break
        refl[bad] = rng.uniform(0.0, side, (int(bad.sum()), 2))
    else:  # pragma: no cover
        raise InvalidConfig("could not place reflectors away from the terminals")
    return Scene(rx, orientation, clock, refl)
