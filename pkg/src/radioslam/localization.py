"""Clock-robust linear location with a known (or hypothesized) orientation.

Each single-bounce path closes the triangle transmitter-reflector-receiver,
which makes its length a linear function of the receiver position once both
path angles are known::

    d_ox * P_i + d_oy * Q_i - l_e = c * tdoa_i

The unknown clock reference ``l_e = c * tau_e`` enters every row with the
same coefficient, so three or more paths determine ``(d_ox, d_oy, l_e)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateConfiguration, InsufficientPaths, SingularPath
from .geometry import SPEED_OF_LIGHT, MultipathSet

EPS_SING = 1e-6
RANK_TOL = 1e-10
EPS_LOS = 0.3


@dataclass
class LocationEstimate:
    rx_position: np.ndarray
    l_e: float
    clock_offset: float
    reflectors: np.ndarray
    los: bool
    residual_norm: float
    used_paths: list[int]
    orientation: float = float("nan")
    dropped_paths: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "rx": self.rx_position.tolist(),
            "l_e": self.l_e,
            "clock_offset": self.clock_offset,
            "orientation": self.orientation,
            "reflectors": self.reflectors.tolist(),
            "los": self.los,
            "residual_norm": self.residual_norm,
            "used_paths": list(self.used_paths),
            "dropped_paths": list(self.dropped_paths),
        }


def coefficients(theta, phi):
    """Array version of :func:`path_coefficients`; returns ``(P, Q, sin(theta - phi))``.

    No singularity check is made, callers mask on the returned sine.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    s = np.sin(theta - phi)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = -(np.sin(theta) + np.sin(phi)) / s
        q = (np.cos(phi) + np.cos(theta)) / s
    return p, q, s


def path_coefficients(theta: float, phi: float, eps_sing: float = EPS_SING) -> tuple[float, float]:
    """Row coefficients ``(P, Q)`` of one path given its AoD and absolute AoA.

    Written over ``sin(theta - phi)`` rather than with tangents so that
    vertical directions stay finite.
    """
    p, q, s = coefficients(theta, phi)
    if abs(float(s)) < eps_sing:
        raise SingularPath(f"|sin(theta - phi)| = {abs(float(s)):.3g} < {eps_sing}")
    return float(p), float(q)


def lstsq_batch(b_mat: np.ndarray, rhs: np.ndarray, rank_tol: float = RANK_TOL):
    """Least squares for a stack of ``(n, 3)`` systems through the SVD.

    Returns ``(x, ok)``; systems whose numerical rank is below 3 get NaN.
    Zeroed rows are equivalent to dropped equations.
    """
    u, s, vh = np.linalg.svd(b_mat, full_matrices=False)
    ok = s[..., -1] > rank_tol * s[..., 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.einsum("...ni,...n->...i", u, rhs) / s
        x = np.einsum("...ij,...i->...j", vh, coef)
    x = np.where(ok[..., None], x, np.nan)
    return x, ok


def _design(obs: MultipathSet, phi_o: float, eps_sing: float):
    phi = obs.daoa + phi_o
    p, q, s = coefficients(obs.aod, phi)
    usable = np.abs(s) >= eps_sing
    return p, q, usable


def solve_location(obs: MultipathSet, phi_o: float, eps_sing: float = EPS_SING,
                   rank_tol: float = RANK_TOL, eps_los: float = EPS_LOS) -> LocationEstimate:
    """Receiver position, clock reference and reflector map for a given orientation.

    Paths with ``|sin(theta - phi)| < eps_sing`` are left out and listed in
    ``dropped_paths``.

    Raises
    ------
    InsufficientPaths
        fewer than three usable paths remain.
    DegenerateConfiguration
        the remaining rows have numerical rank below three.
    """
    p, q, usable = _design(obs, phi_o, eps_sing)
    used = np.flatnonzero(usable)
    if used.size < 3:
        raise InsufficientPaths(f"need >= 3 usable paths, have {used.size} of {len(obs)}")
    b_mat = np.column_stack([p[used], q[used], -np.ones(used.size)])
    dl = SPEED_OF_LIGHT * obs.tdoa[used]
    x, ok = lstsq_batch(b_mat, dl, rank_tol)
    if not ok:
        raise DegenerateConfiguration("path geometry gives a rank-deficient system")
    residual = float(np.linalg.norm(b_mat @ x - dl))
    est = LocationEstimate(
        rx_position=x[:2].copy(),
        l_e=float(x[2]),
        clock_offset=float(x[2]) / SPEED_OF_LIGHT,
        reflectors=np.empty((0, 2)),
        los=False,
        residual_norm=residual,
        used_paths=used.tolist(),
        orientation=float(phi_o),
        dropped_paths=np.flatnonzero(~usable).tolist(),
    )
    est.reflectors = map_reflectors(est, obs, phi_o, eps_sing)[used]
    est.clock_offset, est.los = clock_and_los(est, obs, eps_los)
    return est


def map_reflectors(estimate: LocationEstimate, obs: MultipathSet, phi_o: float,
                   eps_sing: float = EPS_SING) -> np.ndarray:
    """Reflector positions, index-aligned with ``obs``; singular paths are NaN rows.

    The reflector lies along the AoD ray at range
    ``(d_oy cos(phi) - d_ox sin(phi)) / sin(theta - phi)``.
    """
    theta = obs.aod
    phi = obs.daoa + phi_o
    s = np.sin(theta - phi)
    dx, dy = estimate.rx_position
    with np.errstate(divide="ignore", invalid="ignore"):
        r = (dy * np.cos(phi) - dx * np.sin(phi)) / s
    out = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    out[np.abs(s) < eps_sing] = np.nan
    return out


def clock_and_los(estimate: LocationEstimate, obs: MultipathSet,
                  eps_los: float = EPS_LOS) -> tuple[float, bool]:
    """Clock offset ``min(l_i)/c - min(tdoa_i)`` and the line-of-sight verdict."""
    tdoa = obs.tdoa[estimate.used_paths]
    lengths = estimate.l_e + SPEED_OF_LIGHT * tdoa
    clock = float(lengths.min() / SPEED_OF_LIGHT - tdoa.min())
    l_o = float(np.hypot(*estimate.rx_position))
    return clock, bool(l_o >= lengths.min() - eps_los)
