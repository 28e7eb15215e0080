"""``slam`` command line: scene generation, single-shot location, bounds and Monte Carlo runs.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from typing import Sequence

import numpy as np

from . import __version__
from .crlb import approx_crlb
from .dictionary import DictionaryConfig, quantize_orientation
from .errors import InvalidArgument, InvalidConfig, SlamError
from .geometry import MultipathSet, ScenarioConfig, Scene, observe, wrap_angle
from .localization import EPS_LOS, solve_location
from .montecarlo import (CORRUPTIONS, METRICS, SWEEP_COLUMNS, EstimatorSpec,
                         ExperimentConfig, cdf_and_percentiles, corrupt, iter_trials, nearest_rank,
                         run_trials, sweep, trial_scene)
from .orientation import OrientationSolverConfig, group_trajectories, robust_locate


DEFAULT_ESTIMATOR_LIST = "known,sensor:64,robust:d1:sensor,robust:d1:brute,robust:3p:grid,random"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="master random seed (integer)")
    p.add_argument("--out", default="-", help="output file path; '-' writes to stdout")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                   help="worker processes (default: all cores); output does not depend on it")
    p.add_argument("--config", help="flat JSON file of option defaults; flags override it")


def _add_scenario(p: argparse.ArgumentParser) -> None:
    p.add_argument("--side", type=float, default=100.0, help="scene square side [m]")
    p.add_argument("--n-paths", type=int, default=20, help="reflectors per scene [count]")
    p.add_argument("--clock-excess", type=float, default=40e-9,
                   help="upper bound of tau_e - tau_o, uniform from 0 [s]")
    p.add_argument("--min-separation", type=float, default=1.0,
                   help="minimum reflector distance to either terminal [m]")


def _add_dictionary(p: argparse.ArgumentParser, corruption_default: str = "none") -> None:
    p.add_argument("--corruption", choices=CORRUPTIONS, default=corruption_default,
                   help="which path parameter is quantized")
    p.add_argument("--quantizer", choices=("uniform", "sin-grid"), default="uniform",
                   help="angle quantizer: uniform step pi/K [rad] or the asin dictionary grid")
    p.add_argument("--k-tau", type=int, default=256, help="TDoA dictionary size [count]")
    p.add_argument("--k-theta", type=int, default=256, help="AoD dictionary size [count]")
    p.add_argument("--k-phi", type=int, default=256, help="DAoA dictionary size [count]")
    p.add_argument("--t-cp", type=float, default=1e-6, help="cyclic prefix / TDoA grid span [s]")
    p.add_argument("--n-q", type=int, default=64, help="orientation sensor levels [count]")


def _add_solver(p: argparse.ArgumentParser) -> None:
    p.add_argument("--grid-points", type=int, default=100,
                   help="brute-force orientation grid size over [0, 2pi) [count]")
    p.add_argument("--refine-tol", type=float, default=1e-9,
                   help="orientation refinement bracket tolerance [rad]")
    p.add_argument("--eps-los", type=float, default=EPS_LOS, help="LoS decision margin [m]")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="slam", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("scene", help="emit a random scene as JSON")
    _add_common(p)
    _add_scenario(p)

    p = sub.add_parser("locate", help="locate from a scene or multipath JSON file")
    _add_common(p)
    p.add_argument("--input", required=True, help="scene JSON or multipath JSON ({'paths': [[tdoa s, aod rad, daoa rad], ...]})")
    p.add_argument("--phi0", default="known",
                   help="orientation: 'known' (from the file), 'sensor' (quantized to --n-q levels), "
                        "'robust' (recovered), or a value [rad]")
    p.add_argument("--grouping", choices=("3p", "d1"), default="d1", help="path grouping for --phi0 robust")
    p.add_argument("--init", choices=("brute", "sensor"), default="brute",
                   help="orientation refinement start for --phi0 robust")
    p.add_argument("--trajectories", metavar="PATH",
                   help="also write per-group location guesses over an orientation sweep to this CSV")
    p.add_argument("--trajectory-points", type=int, default=720,
                   help="orientation sweep size over [0, 2pi) for --trajectories [count]")
    _add_dictionary(p)
    _add_solver(p)

    for name, help_text in (("simulate", "Monte Carlo trials, CSV per trial / CDF / percentiles"),
                            ("sweep", "percentiles versus DAoA dictionary size, CSV")):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        _add_scenario(p)
        _add_dictionary(p, "daoa" if name == "sweep" else "none")
        _add_solver(p)
        p.add_argument("--n-sim", type=int, default=1000, help="number of trials [count]")
        p.add_argument("--estimators", default=DEFAULT_ESTIMATOR_LIST,
                       help="comma list of known | random | sensor[:N_Q] | robust[:3p|d1[:brute|sensor|grid]]")
        p.add_argument("--probs", type=_float_list, default=[0.8],
                       help="comma list of percentile probabilities in (0, 1]")
        if name == "simulate":
            p.add_argument("--table", choices=("trials", "cdf", "percentiles"), default="trials",
                           help="per-trial records, empirical CDF points, or percentiles")
        else:
            p.add_argument("--k-phi-list", type=_int_list, default=[64, 128, 256, 512, 1024],
                           help="comma list of DAoA dictionary sizes [count]")

    p = sub.add_parser("crlb", help="approximate position bound per scene and its percentiles, CSV")
    _add_common(p)
    _add_scenario(p)
    p.add_argument("--k-phi-list", type=_int_list, default=[64, 128, 256, 512, 1024],
                   help="comma list of DAoA dictionary sizes [count]")
    p.add_argument("--n-scenes", type=int, default=1000, help="number of scenes [count]")
    p.add_argument("--probs", type=_float_list, default=[0.8],
                   help="comma list of percentile probabilities in (0, 1]")
    return parser


def _parse(parser: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    try:
        with open(args.config, encoding="utf-8") as fh:
            values = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"cannot read config {args.config}: {exc}")
    if not isinstance(values, dict):
        parser.error("config file must hold a flat JSON object")
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in subparser._actions}
    values = {k.replace("-", "_"): v for k, v in values.items()}
    unknown = sorted(set(values) - known - {"config", "command"})
    if unknown:
        parser.error(f"unknown config keys: {', '.join(unknown)}")
    for key in ("k_phi_list", "probs"):
        if isinstance(values.get(key), str):
            values[key] = (_int_list if key == "k_phi_list" else _float_list)(values[key])
    if isinstance(values.get("estimators"), list):
        values["estimators"] = ",".join(values["estimators"])
    subparser.set_defaults(**values)
    return parser.parse_args(argv)


def _scenario(args) -> ScenarioConfig:
    return ScenarioConfig(args.side, args.n_paths, args.clock_excess, args.min_separation)


def _dictionary(args) -> DictionaryConfig:
    return DictionaryConfig(args.k_tau, args.k_theta, args.k_phi, args.t_cp, args.n_q)


def _experiment(args) -> ExperimentConfig:
    estimators = tuple(EstimatorSpec.parse(e) for e in args.estimators.split(",") if e.strip())
    return ExperimentConfig(
        n_sim=args.n_sim, scenario=_scenario(args), corruption=args.corruption,
        quantizer=args.quantizer, dictionary=_dictionary(args), estimators=estimators,
        master_seed=args.seed, grid_points=args.grid_points, refine_tolerance=args.refine_tol,
        eps_los=args.eps_los)


class _Output:
    def __init__(self, path: str):
        self.path = path

    def __enter__(self):
        if self.path == "-":
            self.fh = sys.stdout
        else:
            self.fh = open(self.path, "w", encoding="utf-8", newline="")
        return self.fh

    def __exit__(self, *exc):
        if self.fh is not sys.stdout:
            self.fh.close()
        else:
            self.fh.flush()


def _csv_writer(fh):
    return csv.writer(fh, lineterminator="\n")


def cmd_scene(args) -> None:
    from .geometry import sample_scene
    scene = sample_scene(_scenario(args), args.seed)
    with _Output(args.out) as fh:
        json.dump(scene.to_dict(), fh, indent=2)
        fh.write("\n")


def cmd_locate(args) -> None:
    try:
        with open(args.input, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidArgument(f"cannot read {args.input}: {exc}") from None
    truth = None
    if "paths" in data:
        obs = MultipathSet.from_dict(data)
        if "truth" in data:
            truth = Scene.from_dict(data["truth"])
    else:
        truth = Scene.from_dict(data)
        obs = observe(truth)
    exp = ExperimentConfig(n_sim=1, corruption=args.corruption, quantizer=args.quantizer,
                           dictionary=_dictionary(args), estimators=(EstimatorSpec("known"),),
                           scenario=ScenarioConfig(n_paths=max(len(obs), 3)))
    obs = corrupt(obs, exp)
    mode = args.phi0.lower()
    if mode in ("known", "sensor") and truth is None:
        raise InvalidArgument(f"--phi0 {mode} needs the true orientation in the input file")
    diag = None
    if mode == "known":
        est = solve_location(obs, truth.orientation, eps_los=args.eps_los)
    elif mode == "sensor":
        est = solve_location(obs, quantize_orientation(truth.orientation, args.n_q), eps_los=args.eps_los)
    elif mode == "robust":
        sensor = quantize_orientation(truth.orientation, args.n_q) if truth is not None else None
        if args.init == "sensor" and sensor is None:
            raise InvalidArgument("--init sensor needs the true orientation in the input file")
        solver = OrientationSolverConfig(grid_points=args.grid_points, refine_tolerance=args.refine_tol,
                                         init=args.init, sensor_value=sensor, n_q=args.n_q)
        est, _, diag = robust_locate(obs, args.grouping, solver, eps_los=args.eps_los)
    else:
        try:
            phi = float(mode)
        except ValueError:
            raise UsageError(f"--phi0 must be known, sensor, robust or a number, got {args.phi0!r}") from None
        est = solve_location(obs, phi, eps_los=args.eps_los)
    out = {"estimate": est.to_dict()}
    if diag is not None:
        out["orientation_diagnostics"] = diag.__dict__
    if truth is not None:
        refl = truth.reflectors[est.used_paths]
        out["errors"] = {
            "position_m": float(np.linalg.norm(est.rx_position - truth.rx_position)),
            "clock_s": abs(est.clock_offset - truth.clock_offset),
            "orientation_rad": abs(wrap_angle(est.orientation - truth.orientation)),
            "mapping_max_m": float(np.max(np.linalg.norm(est.reflectors - refl, axis=1))),
        }
    with _Output(args.out) as fh:
        json.dump(out, fh, indent=2)
        fh.write("\n")
    if args.trajectories:
        _write_trajectories(args.trajectories, obs, args.grouping, args.trajectory_points)


def _write_trajectories(path: str, obs: MultipathSet, grouping: str, n_points: int) -> None:
    if n_points < 1:
        raise UsageError("--trajectory-points must be >= 1")
    phis = 2 * np.pi * np.arange(n_points) / n_points
    x, valid, cost = group_trajectories(obs, grouping, phis)
    with _Output(path) as fh:
        w = _csv_writer(fh)
        w.writerow(("phi_rad", "group", "d_ox_m", "d_oy_m", "l_e_m", "valid", "cost_m2"))
        for c, phi in enumerate(phis):
            for g in range(x.shape[1]):
                vals = x[c, g] if valid[c, g] else (math.nan,) * 3
                w.writerow([_fmt(v) for v in (float(phi), g, *map(float, vals), int(valid[c, g]),
                                              float(cost[c]))])


TRIAL_COLUMNS = ("trial", "seed", "estimator", "status", "position_error_m", "clock_error_s",
                 "orientation_error_rad", "mapping_error_median_m", "mapping_error_max_m")


def cmd_simulate(args) -> None:
    cfg = _experiment(args)
    with _Output(args.out) as fh:
        w = _csv_writer(fh)
        if args.table == "trials":
            w.writerow(TRIAL_COLUMNS)
            for recs in iter_trials(cfg, args.threads):
                for r in recs:
                    m = r.mapping_errors
                    w.writerow([_fmt(v) for v in (
                        r.trial, r.seed, r.estimator, r.status, r.position_error, r.clock_error,
                        r.orientation_error, float(np.median(m)) if m else math.nan,
                        float(np.max(m)) if m else math.nan)])
                fh.flush()
            return
        records = run_trials(cfg, args.threads)
        if args.table == "cdf":
            w.writerow(("estimator", "metric", "value", "cdf", "n_ok", "n_failed"))
        else:
            w.writerow(("estimator", "metric", "prob", "value", "n_ok", "n_failed"))
        for est in cfg.estimators:
            for metric in METRICS:
                t = cdf_and_percentiles(records[est.name], args.probs, metric)
                if args.table == "cdf":
                    for v, c in zip(t.values, t.cdf):
                        w.writerow([_fmt(x) for x in (est.name, metric, float(v), float(c), t.n_ok, t.n_failed)])
                else:
                    for p, v in t.percentiles.items():
                        w.writerow([_fmt(x) for x in (est.name, metric, p, v, t.n_ok, t.n_failed)])


def cmd_sweep(args) -> None:
    cfg = _experiment(args)
    with _Output(args.out) as fh:
        w = _csv_writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for row in sweep(cfg, args.k_phi_list, args.probs, args.threads):
            w.writerow([_fmt(row[c]) for c in SWEEP_COLUMNS])
            fh.flush()


def cmd_crlb(args) -> None:
    cfg = ExperimentConfig(n_sim=args.n_scenes, scenario=_scenario(args), master_seed=args.seed,
                           estimators=(EstimatorSpec("known"),))
    scenes = [trial_scene(cfg, t) for t in range(args.n_scenes)]
    with _Output(args.out) as fh:
        w = _csv_writer(fh)
        w.writerow(("kind", "index", "prob", "k_phi", "approx_crlb_m"))
        for k in args.k_phi_list:
            bounds = []
            for i, sc in enumerate(scenes):
                try:
                    b = approx_crlb(sc, k)
                except SlamError:
                    b = math.nan
                bounds.append(b)
                w.writerow([_fmt(x) for x in ("scene", i, "", k, b)])
            finite = np.sort([b for b in bounds if math.isfinite(b)])
            for p in args.probs:
                w.writerow([_fmt(x) for x in ("percentile", "", float(p), k,
                                              nearest_rank(finite, p) if finite.size else math.nan)])


COMMANDS = {"scene": cmd_scene, "locate": cmd_locate, "simulate": cmd_simulate,
            "sweep": cmd_sweep, "crlb": cmd_crlb}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _parse(parser, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    for name in ("probs",):
        for p in getattr(args, name, []) or []:
            if not 0 < p <= 1:
                parser.print_usage(sys.stderr)
                print(f"slam: error: probabilities must lie in (0, 1], got {p}", file=sys.stderr)
                return 1
    if getattr(args, "threads", 1) < 1:
        print("slam: error: --threads must be >= 1", file=sys.stderr)
        return 1
    try:
        COMMANDS[args.command](args)
    except (UsageError, InvalidConfig) as exc:
        parser.print_usage(sys.stderr)
        print(f"slam: error: {exc}", file=sys.stderr)
        return 1
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the interpreter's flush on exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 2
    except SlamError as exc:
        print(f"slam: {exc.reason}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
