"""Cramér-Rao bounds for receiver location and reflector mapping.

Measurement rows are ordered ``(aod_i, daoa_i, tdoa_i)`` per path. Location
parameters are ordered ``(d_ox, d_oy, tau_e, phi_o, d_1x, d_1y, ...)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConfiguration, DegenerateGeometry
from .geometry import MIN_SEPARATION, SPEED_OF_LIGHT, Scene


@dataclass(frozen=True)
class TransformMatrix:
    """Jacobian of the measurements w.r.t. the location parameters, ``(3 N_p, 4 + 2 N_p)``."""

    T: np.ndarray

    @property
    def n_paths(self) -> int:
        return self.T.shape[0] // 3

    def rows(self, kind: str) -> np.ndarray:
        """Row indices of one measurement kind: ``"aod"``, ``"daoa"`` or ``"tdoa"``."""
        return np.arange(self.n_paths) * 3 + ("aod", "daoa", "tdoa").index(kind)

    @property
    def user_block(self) -> np.ndarray:
        """Derivatives of the DAoA rows w.r.t. the receiver position, ``(N_p, 2)``."""
        return self.T[self.rows("daoa")][:, :2]


@dataclass
class LocationBound:
    fim: np.ndarray
    rank: int
    bound: np.ndarray | None
    null_space: np.ndarray | None

    @property
    def user_bound(self) -> np.ndarray | None:
        return None if self.bound is None else self.bound[:2, :2]


def transform_matrix(scene: Scene, min_separation: float = MIN_SEPARATION) -> TransformMatrix:
    """Analytic derivatives of every path's ``(aod, daoa, tdoa)``.

    The TDoA rows differentiate ``(|d_i| + |d_i - d_o|) / c - tau_e``
    directly.
    """
    d_o = scene.rx_position
    refl = scene.reflectors
    n = len(refl)
    u = refl - d_o
    r_rx = np.linalg.norm(u, axis=1)
    r_tx = np.linalg.norm(refl, axis=1)
    bad = np.flatnonzero((r_rx < min_separation) | (r_tx < min_separation))
    if bad.size:
        raise DegenerateGeometry(f"reflector(s) {bad.tolist()} too close to a terminal")
    t = np.zeros((3 * n, 4 + 2 * n))
    for i in range(n):
        ra, rp, rt = 3 * i, 3 * i + 1, 3 * i + 2
        ci = slice(4 + 2 * i, 6 + 2 * i)
        ux, uy = u[i]
        dx, dy = refl[i]
        t[ra, ci] = np.array([-dy, dx]) / r_tx[i] ** 2
        t[rp, 0:2] = np.array([uy, -ux]) / r_rx[i] ** 2
        t[rp, 3] = -1.0
        t[rp, ci] = np.array([-uy, ux]) / r_rx[i] ** 2
        t[rt, 0:2] = -u[i] / (SPEED_OF_LIGHT * r_rx[i])
        t[rt, 2] = -1.0
        t[rt, ci] = u[i] / (SPEED_OF_LIGHT * r_rx[i]) + refl[i] / (SPEED_OF_LIGHT * r_tx[i])
    return TransformMatrix(t)


def location_fim(j_m: np.ndarray, transform: TransformMatrix | np.ndarray,
                 rank_tol: float = 1e-10) -> LocationBound:
    """Project measurement information onto the location parameters.

    When ``T^T J_m T`` is singular no bound is returned; ``rank`` and an
    orthonormal basis of the unidentifiable directions are reported instead.
    """
    t = transform.T if isinstance(transform, TransformMatrix) else np.asarray(transform)
    j_d = t.T @ np.asarray(j_m) @ t
    j_d = 0.5 * (j_d + j_d.T)
    # Scale to unit diagonal so that columns in seconds and meters compare fairly.
    diag = np.sqrt(np.clip(np.diag(j_d), 0, None))
    scale = np.where(diag > 0, 1.0 / np.where(diag > 0, diag, 1.0), 1.0)
    j_s = j_d * scale[:, None] * scale[None, :]
    w, v = np.linalg.eigh(j_s)
    keep = w > rank_tol * max(w[-1], 0.0)
    rank = int(keep.sum()) if w[-1] > 0 else 0
    if rank < len(w):
        null = v[:, ~keep] * scale[:, None]
        null /= np.linalg.norm(null, axis=0, keepdims=True)
        return LocationBound(j_d, rank, None, null)
    inv_s = (v / w) @ v.T
    bound = inv_s * scale[:, None] * scale[None, :]
    return LocationBound(j_d, rank, 0.5 * (bound + bound.T), None)


def daoa_quantization_variance(k_phi: int) -> float:
    """Variance of a uniform rounding error with step ``pi / k_phi``."""
    return (np.pi / k_phi) ** 2 / 12.0


def approx_crlb(scene: Scene, k_phi: int) -> float:
    """RMS receiver-position bound when only the DAoAs carry (quantization) error."""
    t_o = transform_matrix(scene).user_block
    gram = t_o.T @ t_o
    s = np.linalg.svd(t_o, compute_uv=False)
    if s[-1] <= 1e-12 * s[0]:
        raise DegenerateConfiguration("DAoA geometry does not constrain both coordinates")
    return float(np.sqrt(daoa_quantization_variance(k_phi) * np.trace(np.linalg.inv(gram))))
