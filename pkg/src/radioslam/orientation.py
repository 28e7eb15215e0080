"""Orientation recovery by location consensus across path groups.

With the wrong orientation hypothesis every group of paths produces a
different ``(x, y, l_e)`` solution; at the true orientation they coincide.
The scalar spread of the group solutions is minimized over the hypothesis
with a coarse grid followed by golden-section refinement.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidConfig, OrientationUnrecoverable
from .geometry import SPEED_OF_LIGHT, MultipathSet, wrap_angle
from .localization import (EPS_LOS, EPS_SING, RANK_TOL, LocationEstimate, coefficients,
                           lstsq_batch, solve_location)

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class GroupingStrategy:
    """``kind`` is ``"3p"`` (sliding triples), ``"d1"`` (drop one) or ``"custom"``."""

    kind: str = "d1"
    groups: tuple[tuple[int, ...], ...] | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("3p", "d1", "custom"):
            raise InvalidConfig(f"unknown grouping kind {self.kind!r}")
        if self.kind == "custom":
            if not self.groups:
                raise InvalidConfig("custom grouping needs explicit groups")
            object.__setattr__(self, "groups", tuple(tuple(int(i) for i in g) for g in self.groups))

    @classmethod
    def parse(cls, value: "str | GroupingStrategy") -> "GroupingStrategy":
        if isinstance(value, GroupingStrategy):
            return value
        return cls(str(value).lower())


@dataclass(frozen=True)
class OrientationSolverConfig:
    grid_points: int = 100
    refine_tolerance: float = 1e-9
    max_refine_iters: int = 200
    init: str = "brute"
    sensor_value: float | None = None
    n_q: int = 64
    eps_sing: float = EPS_SING
    refine: bool = True

    def __post_init__(self) -> None:
        if self.grid_points < 8:
            raise InvalidConfig(f"grid_points must be >= 8, got {self.grid_points}")
        if not self.refine_tolerance > 0:
            raise InvalidConfig("refine_tolerance must be positive")
        if self.init not in ("brute", "sensor"):
            raise InvalidConfig(f"init must be 'brute' or 'sensor', got {self.init!r}")
        if self.init == "sensor" and self.sensor_value is None:
            raise InvalidConfig("sensor init needs sensor_value")


@dataclass
class OrientationDiagnostics:
    grid_argmin: float | None
    grid_cost: float | None
    final_cost: float
    iterations: int
    invalid_candidates: int
    invalid_groups: int
    init: str


def make_groups(n_paths: int, strategy: GroupingStrategy | str) -> list[list[int]]:
    """Zero-based index groups for ``strategy``.

    3P needs at least 5 paths and D1 at least 4, so that there are three or
    more groups of three or more paths.
    """
    strategy = GroupingStrategy.parse(strategy)
    if strategy.kind == "3p":
        if n_paths < 5:
            raise InvalidConfig(f"3P grouping needs >= 5 paths, got {n_paths}")
        return [[m, m + 1, m + 2] for m in range(n_paths - 2)]
    if strategy.kind == "d1":
        if n_paths < 4:
            raise InvalidConfig(f"D1 grouping needs >= 4 paths, got {n_paths}")
        return [[i for i in range(n_paths) if i != m] for m in range(n_paths)]
    groups = [list(g) for g in strategy.groups]
    if len(groups) < 3:
        raise InvalidConfig(f"need >= 3 groups, got {len(groups)}")
    for g in groups:
        if len(set(g)) < 3:
            raise InvalidConfig(f"group {g} has fewer than 3 distinct paths")
        if min(g) < 0 or max(g) >= n_paths:
            raise InvalidConfig(f"group {g} indexes outside 0..{n_paths - 1}")
    return groups


def _masks(groups: Sequence[Sequence[int]], n_paths: int) -> np.ndarray:
    masks = np.zeros((len(groups), n_paths), dtype=bool)
    for m, g in enumerate(groups):
        masks[m, list(g)] = True
    return masks


def group_solutions(candidates, masks: np.ndarray, obs: MultipathSet,
                    eps_sing: float = EPS_SING, rank_tol: float = RANK_TOL):
    """Solve every group at every candidate orientation.

    Returns ``(F, valid)`` with shapes ``(C, G, 3)`` and ``(C, G)``. A group
    is invalid at a candidate when fewer than three of its paths are
    non-singular there or its rows are rank deficient.
    """
    cand = np.atleast_1d(np.asarray(candidates, dtype=float))
    p, q, s = coefficients(obs.aod[None, :], obs.daoa[None, :] + cand[:, None])
    use = masks[None, :, :] & (np.abs(s) >= eps_sing)[:, None, :]
    rows = np.stack([p, q, -np.ones_like(p)], axis=-1)[:, None, :, :]
    b_mat = np.where(use[..., None], rows, 0.0)
    rhs = np.where(use, SPEED_OF_LIGHT * obs.tdoa, 0.0)
    x, ok = lstsq_batch(b_mat, rhs, rank_tol)
    valid = ok & (use.sum(axis=-1) >= 3)
    return x, valid


def group_solution(group: Sequence[int], obs: MultipathSet, phi_candidate: float,
                   eps_sing: float = EPS_SING) -> np.ndarray | None:
    """``(x, y, l_e)`` from the paths in ``group`` alone; ``None`` if degenerate."""
    x, valid = group_solutions([phi_candidate], _masks([group], len(obs)), obs, eps_sing)
    return x[0, 0].copy() if valid[0, 0] else None


def _spread(x: np.ndarray, valid: np.ndarray) -> np.ndarray:
    n_valid = valid.sum(axis=-1)
    xz = np.where(valid[..., None], x, 0.0)
    mean = xz.sum(axis=-2) / np.maximum(n_valid, 1)[..., None]
    dev = np.where(valid[..., None], x - mean[..., None, :], 0.0)
    cost = np.sum(dev ** 2, axis=(-2, -1))
    return np.where(n_valid >= 3, cost, np.inf)


def cost_curve(candidates, groups, obs: MultipathSet, eps_sing: float = EPS_SING):
    """Vectorized :func:`orientation_cost`; also returns invalid-group counts."""
    masks = _masks(groups, len(obs))
    x, valid = group_solutions(candidates, masks, obs, eps_sing)
    return _spread(x, valid), (~valid).sum(axis=-1)


def group_trajectories(obs: MultipathSet, strategy: GroupingStrategy | str, candidates,
                       eps_sing: float = EPS_SING):
    """Per-group location guesses along a sweep of orientation candidates.

    Returns ``(F, valid, cost)`` with shapes ``(C, G, 3)``, ``(C, G)`` and
    ``(C,)``; where all group guesses meet, the candidate is the orientation.
    """
    groups = make_groups(len(obs), strategy)
    x, valid = group_solutions(candidates, _masks(groups, len(obs)), obs, eps_sing)
    return x, valid, _spread(x, valid)


def orientation_cost(phi_candidate: float, groups, obs: MultipathSet,
                     eps_sing: float = EPS_SING) -> float:
    """Sum of squared distances of the group solutions from their mean.

    ``inf`` marks a candidate where fewer than three groups are solvable.
    """
    cost, _ = cost_curve([phi_candidate], groups, obs, eps_sing)
    return float(cost[0])


def golden_section(f, a: float, b: float, tol: float, max_iter: int) -> tuple[float, float, int]:
    """Minimize ``f`` on ``[a, b]``; returns ``(x, f(x), iterations)``."""
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while b - a > tol and it < max_iter:
        it += 1
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    fx = f(x)
    best = min((fx, x), (fc, c), (fd, d))
    return best[1], best[0], it


def estimate_orientation(obs: MultipathSet, strategy: GroupingStrategy | str = "d1",
                         cfg: OrientationSolverConfig | None = None
                         ) -> tuple[float, OrientationDiagnostics]:
    """Orientation minimizing the group-consensus cost.

    Brute-force init scans ``cfg.grid_points`` candidates on ``[0, 2pi)``
    (ties to the smallest angle) and refines between the neighbouring grid
    points. Sensor init refines within ``sensor_value +- pi / n_q``. With
    ``refine=False`` the grid (or sensor) value is returned as is.
    """
    cfg = cfg or OrientationSolverConfig()
    groups = make_groups(len(obs), strategy)
    masks = _masks(groups, len(obs))

    def f(phi: float) -> float:
        x, valid = group_solutions([phi], masks, obs, cfg.eps_sing)
        return float(_spread(x, valid)[0])

    grid_argmin = grid_cost = None
    invalid_candidates = invalid_groups = 0
    if cfg.init == "brute":
        step = 2 * np.pi / cfg.grid_points
        grid = step * np.arange(cfg.grid_points)
        x, valid = group_solutions(grid, masks, obs, cfg.eps_sing)
        costs = _spread(x, valid)
        invalid_candidates = int(np.sum(~np.isfinite(costs)))
        invalid_groups = int(np.sum(~valid))
        if invalid_candidates == cfg.grid_points:
            raise OrientationUnrecoverable("no grid candidate has three solvable groups")
        k = int(np.argmin(costs))
        grid_argmin, grid_cost = float(grid[k]), float(costs[k])
        lo, hi = grid_argmin - step, grid_argmin + step
    else:
        half = np.pi / cfg.n_q
        lo, hi = cfg.sensor_value - half, cfg.sensor_value + half
    if cfg.refine:
        phi, cost, iters = golden_section(f, lo, hi, cfg.refine_tolerance, cfg.max_refine_iters)
    elif cfg.init == "brute":
        phi, cost, iters = grid_argmin, grid_cost, 0
    else:
        phi, cost, iters = cfg.sensor_value, f(cfg.sensor_value), 0
    if not np.isfinite(cost):
        raise OrientationUnrecoverable("refinement bracket contains no feasible candidate")
    diag = OrientationDiagnostics(grid_argmin, grid_cost, cost, iters,
                                  invalid_candidates, invalid_groups, cfg.init)
    return wrap_angle(phi), diag


def robust_locate(obs: MultipathSet, strategy: GroupingStrategy | str = "d1",
                  cfg: OrientationSolverConfig | None = None, eps_los: float = EPS_LOS
                  ) -> tuple[LocationEstimate, float, OrientationDiagnostics]:
    """Full estimate with unknown clock and orientation, using all paths at the end."""
    cfg = cfg or OrientationSolverConfig()
    phi, diag = estimate_orientation(obs, strategy, cfg)
    est = solve_location(obs, phi, cfg.eps_sing, eps_los=eps_los)
    return est, phi, diag
