"""Dictionary grids and the quantizers that model on-grid estimation error."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfig


@dataclass(frozen=True)
class DictionaryConfig:
    """Grid sizes of the (TDoA, AoD, DAoA) dictionary.

    ``t_cp`` is the cyclic-prefix length in seconds; ``n_q`` the number of
    levels of the coarse orientation sensor.
    """

    k_tau: int = 256
    k_theta: int = 256
    k_phi: int = 256
    t_cp: float = 1e-6
    n_q: int = 64

    def __post_init__(self) -> None:
        for name in ("k_tau", "k_theta", "k_phi", "n_q"):
            if int(getattr(self, name)) < 2:
                raise InvalidConfig(f"{name} must be >= 2, got {getattr(self, name)}")
        for name in ("k_theta", "k_phi"):
            if getattr(self, name) % 2:
                raise InvalidConfig(f"{name} must be even, got {getattr(self, name)}")
        if not self.t_cp > 0:
            raise InvalidConfig(f"t_cp must be positive, got {self.t_cp}")

    @property
    def delays(self) -> np.ndarray:
        return delay_grid(self.k_tau, self.t_cp)

    @property
    def aods(self) -> np.ndarray:
        return angle_grid(self.k_theta)

    @property
    def daoas(self) -> np.ndarray:
        return angle_grid(self.k_phi)


def delay_grid(k_tau: int, t_cp: float) -> np.ndarray:
    """``k_tau`` candidate TDoAs ``{0, 1, ..., k_tau-1} * t_cp / k_tau``."""
    if k_tau < 2:
        raise InvalidConfig(f"k_tau must be >= 2, got {k_tau}")
    if not t_cp > 0:
        raise InvalidConfig(f"t_cp must be positive, got {t_cp}")
    return np.arange(k_tau) * (t_cp / k_tau)


def angle_grid(k: int) -> np.ndarray:
    """Sine-uniform angle grid ``asin(2n/k)`` for ``n = -k/2 .. k/2-1``."""
    if k < 2 or k % 2:
        raise InvalidConfig(f"angle grid size must be even and >= 2, got {k}")
    return np.arcsin(2.0 * np.arange(-k // 2, k // 2) / k)


def quantize_uniform_angle(x, k: int):
    """Round an angle to the nearest multiple of ``pi / k``, wrapped to (-pi, pi].

    The rounding error is uniform on ``[-pi/(2k), pi/(2k)]`` for uniformly
    distributed inputs, i.e. variance ``(pi/k)^2 / 12``.
    """
    if k < 2:
        raise InvalidConfig(f"k must be >= 2, got {k}")
    step = np.pi / k
    x = np.asarray(x, dtype=float)
    n = np.round((np.pi - np.mod(np.pi - x, 2 * np.pi)) / step)
    n = np.where(n <= -k, n + 2 * k, np.where(n > k, n - 2 * k, n))
    q = n * step
    return float(q) if np.ndim(q) == 0 else q


def _circular_distance(a, b):
    d = np.asarray(a) - np.asarray(b)
    return np.abs(d - 2 * np.pi * np.round(d / (2 * np.pi)))


def quantize_to_grid(x, grid: np.ndarray):
    """Nearest point of ``grid`` in circular distance (ties to the lower index)."""
    x = np.asarray(x, dtype=float)
    dist = _circular_distance(x[..., None], np.asarray(grid))
    q = np.asarray(grid)[np.argmin(dist, axis=-1)]
    return float(q) if np.ndim(q) == 0 else q


def quantize_sin_grid(x, k: int):
    """Project an angle onto the dictionary's ``angle_grid(k)``."""
    return quantize_to_grid(x, angle_grid(k))


def quantize_delay(x, k_tau: int, t_cp: float):
    """Nearest point of ``delay_grid(k_tau, t_cp)``; values outside are clipped."""
    step = t_cp / k_tau
    n = np.clip(np.round(np.asarray(x, dtype=float) / step), 0, k_tau - 1)
    q = n * step
    return float(q) if np.ndim(q) == 0 else q


def quantize_orientation(phi, n_q: int):
    """Coarse orientation sensor: nearest level ``n * 2pi / n_q``, ``n`` in 0..n_q-1.

    Distance is circular and ties go to the smaller ``n``.
    """
    if n_q < 2:
        raise InvalidConfig(f"n_q must be >= 2, got {n_q}")
    step = 2 * np.pi / n_q
    phi = np.asarray(phi, dtype=float)
    lo = np.mod(np.floor(phi / step), n_q)
    hi = np.mod(lo + 1, n_q)
    d_lo = _circular_distance(phi, lo * step)
    d_hi = _circular_distance(phi, hi * step)
    pick_hi = (d_hi < d_lo) | ((d_hi == d_lo) & (hi < lo))
    q = np.where(pick_hi, hi, lo) * step
    return float(q) if np.ndim(q) == 0 else q
