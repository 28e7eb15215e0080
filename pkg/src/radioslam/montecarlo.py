"""Monte Carlo harness: scene ensembles, corrupted observations, estimators, statistics.

Every trial draws from its own random stream derived from
``(master_seed, trial_index)``, so results do not depend on execution order
or on the number of worker processes.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Sequence

import numpy as np

from .crlb import approx_crlb
from .dictionary import (DictionaryConfig, quantize_delay, quantize_orientation,
                         quantize_sin_grid, quantize_uniform_angle)
from .errors import EmptyResult, InvalidConfig, SlamError
from .geometry import SPEED_OF_LIGHT, MultipathSet, ScenarioConfig, Scene, observe, sample_scene, wrap_angle
from .localization import EPS_LOS, solve_location
from .orientation import GroupingStrategy, OrientationSolverConfig, make_groups, robust_locate

CORRUPTIONS = ("none", "daoa", "aod", "tdoa")
METRICS = ("position", "mapping", "clock", "orientation")


@dataclass(frozen=True)
class EstimatorSpec:
    """One estimator of the roster.

    ``kind`` is ``known`` (true orientation), ``sensor`` (orientation
    quantized to ``n_q`` levels), ``robust`` (orientation recovered from the
    multipath with ``strategy`` and ``init``) or ``random`` (uniform guess).
    ``init`` is ``brute``, ``sensor`` or ``grid`` (brute-force grid without
    refinement).
    """

    kind: str
    n_q: int = 64
    strategy: str = "d1"
    init: str = "brute"

    def __post_init__(self) -> None:
        if self.kind not in ("known", "sensor", "robust", "random"):
            raise InvalidConfig(f"unknown estimator kind {self.kind!r}")
        if self.kind == "robust":
            GroupingStrategy.parse(self.strategy)
            if self.init not in ("brute", "sensor", "grid"):
                raise InvalidConfig(f"unknown init {self.init!r}")
        if self.n_q < 2:
            raise InvalidConfig("n_q must be >= 2")

    @property
    def name(self) -> str:
        if self.kind == "sensor":
            return f"sensor{self.n_q}"
        if self.kind == "robust":
            return f"robust-{self.strategy}-{self.init}"
        return self.kind

    @classmethod
    def parse(cls, text: str) -> "EstimatorSpec":
        """Parse ``known``, ``random``, ``sensor[:N_Q]`` or ``robust[:3p|d1[:brute|sensor|grid]]``."""
        parts = text.strip().lower().split(":")
        kind = parts[0]
        if kind == "sensor":
            return cls("sensor", n_q=int(parts[1]) if len(parts) > 1 else 64)
        if kind == "robust":
            strategy = parts[1] if len(parts) > 1 else "d1"
            init = parts[2] if len(parts) > 2 else "brute"
            return cls("robust", strategy=strategy, init=init)
        if len(parts) > 1:
            raise InvalidConfig(f"estimator {kind!r} takes no options")
        return cls(kind)


DEFAULT_ESTIMATORS = (
    EstimatorSpec("known"),
    EstimatorSpec("sensor"),
    EstimatorSpec("robust", strategy="d1", init="sensor"),
    EstimatorSpec("robust", strategy="d1", init="brute"),
    EstimatorSpec("robust", strategy="3p", init="grid"),
    EstimatorSpec("random"),
)


@dataclass(frozen=True)
class ExperimentConfig:
    n_sim: int = 1000
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    corruption: str = "none"
    quantizer: str = "uniform"
    dictionary: DictionaryConfig = field(default_factory=DictionaryConfig)
    estimators: tuple[EstimatorSpec, ...] = DEFAULT_ESTIMATORS
    master_seed: int = 0
    grid_points: int = 100
    refine_tolerance: float = 1e-9
    eps_los: float = EPS_LOS

    def __post_init__(self) -> None:
        if self.n_sim < 1:
            raise InvalidConfig("n_sim must be >= 1")
        if self.corruption not in CORRUPTIONS:
            raise InvalidConfig(f"corruption must be one of {CORRUPTIONS}, got {self.corruption!r}")
        if self.quantizer not in ("uniform", "sin-grid"):
            raise InvalidConfig(f"quantizer must be 'uniform' or 'sin-grid', got {self.quantizer!r}")
        if not self.estimators:
            raise InvalidConfig("at least one estimator is required")
        object.__setattr__(self, "estimators", tuple(self.estimators))
        for est in self.estimators:
            if est.kind == "robust":
                try:
                    make_groups(self.scenario.n_paths, est.strategy)
                except InvalidConfig as exc:
                    raise InvalidConfig(f"{est.name}: {exc}") from None
        names = [e.name for e in self.estimators]
        if len(set(names)) != len(names):
            raise InvalidConfig(f"duplicate estimators in {names}")


@dataclass
class TrialRecord:
    trial: int
    seed: int
    estimator: str
    position_error: float = math.nan
    mapping_errors: list[float] = field(default_factory=list)
    clock_error: float = math.nan
    orientation_error: float = math.nan
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def trial_streams(master_seed: int, trial: int) -> tuple[int, np.random.SeedSequence, np.random.SeedSequence]:
    """Recorded seed plus independent streams for the scene and the random guess."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(trial,))
    scene_ss, guess_ss = ss.spawn(2)
    return int(ss.generate_state(1)[0]), scene_ss, guess_ss


def trial_scene(cfg: ExperimentConfig, trial: int) -> Scene:
    _, scene_ss, _ = trial_streams(cfg.master_seed, trial)
    return sample_scene(cfg.scenario, scene_ss)


def corrupt(obs: MultipathSet, cfg: ExperimentConfig) -> MultipathSet:
    """Apply the configured dictionary quantization to one parameter of every path."""
    d = cfg.dictionary
    if cfg.corruption == "none":
        return obs

    def q_angle(x, k):
        return quantize_uniform_angle(x, k) if cfg.quantizer == "uniform" else quantize_sin_grid(x, k)

    if cfg.corruption == "daoa":
        return obs.replace(daoa=q_angle(obs.daoa, d.k_phi), provenance="quantized")
    if cfg.corruption == "aod":
        return obs.replace(aod=q_angle(obs.aod, d.k_theta), provenance="quantized")
    return obs.replace(tdoa=quantize_delay(obs.tdoa, d.k_tau, d.t_cp), provenance="quantized")


def _errors(rec: TrialRecord, scene: Scene, rx, clock, phi, reflectors, used) -> None:
    rec.position_error = float(np.linalg.norm(np.asarray(rx) - scene.rx_position))
    rec.mapping_errors = np.linalg.norm(np.asarray(reflectors) - scene.reflectors[used], axis=1).tolist()
    rec.clock_error = abs(float(clock) - scene.clock_offset)
    rec.orientation_error = abs(wrap_angle(float(phi) - scene.orientation))


def _run_estimator(spec: EstimatorSpec, obs: MultipathSet, scene: Scene, cfg: ExperimentConfig,
                   guess_rng: np.random.Generator, rec: TrialRecord) -> None:
    if spec.kind == "random":
        side = cfg.scenario.side
        rx = guess_rng.uniform(0.0, side, 2)
        refl = guess_rng.uniform(0.0, side, (scene.n_paths, 2))
        phi = guess_rng.uniform(0.0, 2 * np.pi)
        clock = np.hypot(*rx) / SPEED_OF_LIGHT + guess_rng.uniform(0.0, cfg.scenario.clock_excess_max)
        _errors(rec, scene, rx, clock, phi, refl, np.arange(scene.n_paths))
        return
    if spec.kind in ("known", "sensor"):
        phi = scene.orientation if spec.kind == "known" else quantize_orientation(scene.orientation, spec.n_q)
        est = solve_location(obs, phi, eps_los=cfg.eps_los)
    else:
        solver = OrientationSolverConfig(
            grid_points=cfg.grid_points,
            refine_tolerance=cfg.refine_tolerance,
            init="sensor" if spec.init == "sensor" else "brute",
            sensor_value=quantize_orientation(scene.orientation, spec.n_q),
            n_q=spec.n_q,
            refine=spec.init != "grid",
        )
        est, phi, _ = robust_locate(obs, spec.strategy, solver, eps_los=cfg.eps_los)
    _errors(rec, scene, est.rx_position, est.clock_offset, phi, est.reflectors, est.used_paths)


def run_trial(cfg: ExperimentConfig, trial: int) -> list[TrialRecord]:
    """All estimators on one scene; every estimator sees the same observations."""
    seed, scene_ss, guess_ss = trial_streams(cfg.master_seed, trial)
    scene = sample_scene(cfg.scenario, scene_ss)
    obs = corrupt(observe(scene, cfg.scenario.min_separation), cfg)
    out = []
    for spec in cfg.estimators:
        rec = TrialRecord(trial, seed, spec.name)
        guess_rng = np.random.default_rng(guess_ss)
        try:
            _run_estimator(spec, obs, scene, cfg, guess_rng, rec)
        except SlamError as exc:
            rec = TrialRecord(trial, seed, spec.name, status=f"{exc.reason}: {exc}")
        out.append(rec)
    return out


def _run_chunk(args) -> list[list[TrialRecord]]:
    cfg, trials = args
    return [run_trial(cfg, t) for t in trials]


def iter_trials(cfg: ExperimentConfig, threads: int = 1, trials: Iterable[int] | None = None
                ) -> Iterator[list[TrialRecord]]:
    """Yield per-trial record lists in trial order, optionally across worker processes."""
    trials = list(range(cfg.n_sim)) if trials is None else list(trials)
    if threads <= 1 or len(trials) < 2:
        for t in trials:
            yield run_trial(cfg, t)
        return
    size = max(1, min(64, len(trials) // (4 * threads)))
    chunks = [(cfg, trials[i:i + size]) for i in range(0, len(trials), size)]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        for block in pool.map(_run_chunk, chunks):
            yield from block


def run_trials(cfg: ExperimentConfig, threads: int = 1) -> dict[str, list[TrialRecord]]:
    """Records grouped by estimator name, each list in trial order."""
    out: dict[str, list[TrialRecord]] = {e.name: [] for e in cfg.estimators}
    for recs in iter_trials(cfg, threads):
        for rec in recs:
            out[rec.estimator].append(rec)
    return out


def nearest_rank(sorted_values: np.ndarray, prob: float) -> float:
    """Nearest-rank percentile: the ``ceil(p * n)``-th smallest value (1-based, at least 1)."""
    n = len(sorted_values)
    k = min(max(int(math.ceil(prob * n - 1e-12)), 1), n)
    return float(sorted_values[k - 1])


@dataclass
class CdfTable:
    metric: str
    values: np.ndarray
    cdf: np.ndarray
    percentiles: dict[float, float]
    n_ok: int
    n_failed: int


def metric_values(records: Sequence[TrialRecord], metric: str) -> np.ndarray:
    ok = [r for r in records if r.ok]
    if metric == "mapping":
        return np.array([e for r in ok for e in r.mapping_errors], dtype=float)
    attr = {"position": "position_error", "clock": "clock_error",
            "orientation": "orientation_error"}[metric]
    return np.array([getattr(r, attr) for r in ok], dtype=float)


def cdf_and_percentiles(records: Sequence[TrialRecord], probs: Sequence[float] = (0.8,),
                        metric: str = "position") -> CdfTable:
    """Empirical CDF of one metric over the successful trials.

    Mapping errors are pooled over all reflectors of all trials. Failed
    trials are only counted.
    """
    if metric not in METRICS:
        raise InvalidConfig(f"unknown metric {metric!r}")
    values = np.sort(metric_values(records, metric))
    n_failed = sum(1 for r in records if not r.ok)
    if values.size == 0:
        raise EmptyResult(f"no successful trials for metric {metric!r}")
    cdf = np.arange(1, values.size + 1) / values.size
    pct = {float(p): nearest_rank(values, p) for p in probs}
    return CdfTable(metric, values, cdf, pct, len(records) - n_failed, n_failed)


SWEEP_COLUMNS = ("k_phi", "estimator", "metric", "prob", "value", "approx_crlb", "n_ok", "n_failed")


def sweep(cfg: ExperimentConfig, k_phi_list: Sequence[int], probs: Sequence[float] = (0.8,),
          threads: int = 1) -> Iterator[dict]:
    """Percentile rows versus the DAoA dictionary size.

    All dictionary sizes share the scene ensemble of ``cfg``. The
    ``approx_crlb`` column holds the same percentile of the per-scene
    position bound and is filled on position rows only.
    """
    if not k_phi_list:
        raise InvalidConfig("k_phi_list must not be empty")
    scenes = [trial_scene(cfg, t) for t in range(cfg.n_sim)]
    for k_phi in k_phi_list:
        sub = replace(cfg, dictionary=replace(cfg.dictionary, k_phi=int(k_phi)))
        records = run_trials(sub, threads)
        bounds = []
        for sc in scenes:
            try:
                bounds.append(approx_crlb(sc, int(k_phi)))
            except SlamError:
                pass
        bounds = np.sort(bounds)
        for est in cfg.estimators:
            for metric in METRICS:
                try:
                    table = cdf_and_percentiles(records[est.name], probs, metric)
                except EmptyResult:
                    table = None
                for p in probs:
                    crlb = nearest_rank(bounds, p) if metric == "position" and bounds.size else ""
                    yield {
                        "k_phi": int(k_phi),
                        "estimator": est.name,
                        "metric": metric,
                        "prob": float(p),
                        "value": table.percentiles[float(p)] if table else math.nan,
                        "approx_crlb": crlb,
                        "n_ok": table.n_ok if table else 0,
                        "n_failed": table.n_failed if table else len(records[est.name]),
                    }
