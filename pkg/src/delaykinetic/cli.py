"""Config-driven experiment runner.

One JSON config file fully describes a run; the only flags are --config,
--out and --verbose.  Every run writes its artifacts plus a manifest.json
holding the resolved config, the library version and the wall time.  Data
files are byte-reproducible for a fixed config and seed (17 significant
digits, LF line endings); only the manifest carries timing.

Exit codes: 0 success, 2 invalid config, 3 numerical divergence,
4 Picard non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .analysis import convergence_study, sample_initial_paths, stability_study
from .dde import IntegratorConfig, simulate_particles
from .errors import (ConfigError, DivergenceError, DomainError,
                     NonConvergenceError, ShapeError)
from .kernels import (BUILTIN_MODELS, DelayKernel, DelayMeasure, PointKernel,
                      compose_imperfect)
from .meanfield import FixedPointConfig, coherence_check, solve_fixed_point, solve_transport
from .measures import DiscreteMeasure, MeasureCurve

_MODES = ("simulate", "meanfield", "transport", "coherence", "converge", "stability")

_TOP_KEYS = {"mode", "model", "rho", "tau", "dt", "T", "scheme", "initial",
             "fixed_point", "study", "output"}


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    _require(isinstance(cfg, dict), "config must be a JSON object")
    unknown = set(cfg) - _TOP_KEYS
    _require(not unknown, f"unknown config keys: {sorted(unknown)}")
    for key in ("mode", "model", "tau", "dt", "T", "initial"):
        _require(key in cfg, f"config key {key!r} is required")
    _require(cfg["mode"] in _MODES, f"mode must be one of {_MODES}")
    return cfg


def _build_rho(spec, tau: float) -> DelayMeasure:
    if spec == "delta0" or spec is None:
        return DelayMeasure.delta_zero()
    _require(isinstance(spec, list) and spec, "rho must be 'delta0' or a list of [s, w] pairs")
    pairs = np.asarray(spec, dtype=float)
    _require(pairs.ndim == 2 and pairs.shape[1] == 2, "rho entries must be [s, w] pairs")
    try:
        rho = DelayMeasure(pairs[:, 0], pairs[:, 1])
        rho.check_span(tau)
    except ShapeError as exc:
        raise ConfigError(f"invalid rho: {exc}") from exc
    return rho


def _build_kernel(cfg: dict) -> DelayKernel:
    model = cfg["model"]
    _require(isinstance(model, dict) and "name" in model, "model must carry a name")
    unknown = set(model) - {"name", "params"}
    _require(not unknown, f"unknown model keys: {sorted(unknown)}")
    name = model["name"]
    _require(name in BUILTIN_MODELS, f"unknown model {name!r}; see describe-models")
    constructor, _doc = BUILTIN_MODELS[name]
    params = dict(model.get("params", {}))
    tau = float(cfg["tau"])
    try:
        if name in ("pure_delay_linear", "pheromone"):
            built = constructor(tau=tau, **params)
        else:
            built = constructor(**params)
    except (TypeError, ConfigError) as exc:
        raise ConfigError(f"invalid parameters for model {name!r}: {exc}") from exc
    if isinstance(built, PointKernel):
        return compose_imperfect(built, _build_rho(cfg.get("rho"), tau), tau)
    _require("rho" not in cfg, f"model {name!r} defines its own delay measure; drop 'rho'")
    return built


def _integrator(cfg: dict, default_scheme: str) -> IntegratorConfig:
    try:
        config = IntegratorConfig(float(cfg["dt"]), cfg.get("scheme", default_scheme),
                                  float(cfg["T"]))
        config.history_steps(float(cfg["tau"]))
        config.horizon_steps()
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid integrator settings: {exc}") from exc
    return config


def _initial_paths(cfg: dict, config: IntegratorConfig):
    spec = cfg["initial"]
    _require(isinstance(spec, dict), "initial must be an object")
    unknown = set(spec) - {"sampler", "n", "radius", "dim", "seed"}
    _require(not unknown, f"unknown initial-data keys: {sorted(unknown)}")
    sampler = spec.get("sampler", "constant")
    n = int(spec.get("n", 10))
    radius = float(spec.get("radius", 1.0))
    dim = int(spec.get("dim", 1))
    seed = int(spec.get("seed", 0))
    _require(n >= 1 and radius > 0 and dim >= 1, "initial data needs n >= 1, radius > 0, dim >= 1")
    tau = float(cfg["tau"])
    rng = np.random.default_rng(seed)
    paths = sample_initial_paths(rng, sampler, n, dim, radius, tau,
                                 config.history_steps(tau) + 1)
    return paths, {"sampler": sampler, "n": n, "radius": radius, "dim": dim, "seed": seed}


def _fixed_point_config(cfg: dict, integrator: IntegratorConfig) -> FixedPointConfig:
    spec = dict(cfg.get("fixed_point", {}))
    unknown = set(spec) - {"tol", "max_iters"}
    _require(not unknown, f"unknown fixed_point keys: {sorted(unknown)}")
    return FixedPointConfig(integrator, float(spec.get("tol", 1e-10)),
                            int(spec.get("max_iters", 200)))


def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _write_trajectories(path: str, trajectories) -> None:
    dim = trajectories[0].dim
    rows = []
    for i, traj in enumerate(trajectories):
        for t, x in zip(traj.grid, traj.values):
            rows.append([_fmt(t), i] + [_fmt(v) for v in x])
    _write_csv(path, ["t", "particle_id"] + [f"x_{k + 1}" for k in range(dim)], rows)


def _write_measure_curve(path: str, curve: MeasureCurve) -> None:
    dim = curve.dim
    rows = []
    for t, mu in zip(curve.times, curve.measures):
        for a, (w, x) in enumerate(zip(mu.weights, mu.atoms)):
            rows.append([_fmt(t), a, _fmt(w)] + [_fmt(v) for v in x])
    _write_csv(path, ["t", "atom_id", "weight"] + [f"x_{k + 1}" for k in range(dim)], rows)


def _run_mode(cfg: dict, out_dir: str, verbose: bool) -> list:
    mode = cfg["mode"]
    default_scheme = "rk4" if mode == "simulate" else "euler"
    integ = _integrator(cfg, default_scheme)
    kernel = _build_kernel(cfg)
    paths, initial_meta = _initial_paths(cfg, integ)
    cfg["initial"] = initial_meta
    cfg["scheme"] = integ.scheme
    study = dict(cfg.get("study", {}))
    outputs = []

    def emit(name, writer, *args):
        target = os.path.join(out_dir, name)
        writer(target, *args)
        outputs.append(name)

    if mode == "simulate":
        _require(not study, "mode 'simulate' takes no 'study' options")
        trajs = simulate_particles(kernel, paths, integ)
        emit("trajectories.csv", _write_trajectories, trajs)

    elif mode == "meanfield":
        _require(not study, "mode 'meanfield' takes no 'study' options")
        fp = _fixed_point_config(cfg, integ)
        mu_in = DiscreteMeasure(paths)
        curve, trace = solve_fixed_point(mu_in, kernel, fp)
        emit("residuals.csv", _write_csv, ["iter", "window_start", "residual"],
             [[it, _fmt(ws), _fmt(r)] for it, ws, r in trace])
        emit("trajectories.csv", _write_trajectories, curve.atom_trajectories())
        emit("positions.csv", _write_measure_curve, curve.position_curve())

    elif mode == "transport":
        _require(not study, "mode 'transport' takes no 'study' options")
        _require(kernel.is_composite, "mode 'transport' needs a delay-averaged kernel")
        fp = _fixed_point_config(cfg, integ)
        m = integ.history_steps(float(cfg["tau"]))
        hist_times = np.arange(-m, 1, dtype=float) * integ.dt
        initial_curve = MeasureCurve(
            hist_times,
            [DiscreteMeasure(np.stack([p.evaluate(t) for p in paths])) for t in hist_times],
            float(cfg["tau"]))
        curve, trace = solve_transport(initial_curve, kernel.point_kernel,
                                       kernel.delay_measure, fp)
        emit("residuals.csv", _write_csv, ["iter", "window_start", "residual"],
             [[it, _fmt(ws), _fmt(r)] for it, ws, r in trace])
        emit("measures.csv", _write_measure_curve, curve)

    elif mode == "coherence":
        _require(not study, "mode 'coherence' takes no 'study' options")
        _require(kernel.is_composite, "mode 'coherence' needs a delay-averaged kernel")
        fp = _fixed_point_config(cfg, integ)
        report = coherence_check(DiscreteMeasure(paths), kernel.point_kernel,
                                 kernel.delay_measure, fp)
        emit("gap.csv", _write_csv, ["t", "gap"],
             [[_fmt(t), _fmt(g)] for t, g in zip(report.times, report.gap)])
        emit("summary.json", _write_json,
             {"max_gap": report.max_gap, "compatibility_gap": report.compatibility_gap})

    elif mode == "converge":
        unknown = set(study) - {"n_list", "seeds", "ref_n", "out_times"}
        _require(not unknown, f"unknown study keys: {sorted(unknown)}")
        _require("n_list" in study and "seeds" in study and "ref_n" in study,
                 "mode 'converge' needs study.n_list, study.seeds and study.ref_n")
        rows, summary = convergence_study(
            kernel, integ, study["n_list"], study["seeds"], ref_n=int(study["ref_n"]),
            sampler=initial_meta["sampler"], radius=initial_meta["radius"],
            dim=initial_meta["dim"], out_times=study.get("out_times"),
            master_seed=initial_meta["seed"])
        emit("table.csv", _write_csv, ["N", "seed", "t", "w1"],
             [[r["N"], r["seed"], _fmt(r["t"]), _fmt(r["w1"])] for r in rows])
        emit("summary.json", _write_json, summary)

    elif mode == "stability":
        unknown = set(study) - {"epsilon"}
        _require(not unknown, f"unknown study keys: {sorted(unknown)}")
        _require("epsilon" in study, "mode 'stability' needs study.epsilon")
        fp = _fixed_point_config(cfg, integ)
        rows, summary = stability_study(kernel, DiscreteMeasure(paths),
                                        float(study["epsilon"]), fp)
        emit("table.csv", _write_csv, ["t", "measured_w1", "envelope"],
             [[_fmt(r["t"]), _fmt(r["measured_w1"]), _fmt(r["envelope"])] for r in rows])
        emit("summary.json", _write_json, summary)

    if verbose:
        print(f"mode {mode}: wrote {', '.join(outputs)}", file=sys.stderr)
    return outputs


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _error_record(exc: Exception, code: int) -> dict:
    return {"error": type(exc).__name__, "message": str(exc), "exit_code": code}


def run(config_path: str, out_dir: str | None = None, verbose: bool = False) -> int:
    """Execute one experiment; returns the process exit code."""
    started = time.time()
    try:
        cfg = _load_config(config_path)
    except ConfigError as exc:
        print(json.dumps(_error_record(exc, 2)), file=sys.stderr)
        return 2
    out_dir = out_dir or cfg.get("output") or "."
    os.makedirs(out_dir, exist_ok=True)
    try:
        outputs = _run_mode(cfg, out_dir, verbose)
    except (ConfigError, ShapeError, DomainError) as exc:
        record = _error_record(exc, 2)
    except DivergenceError as exc:
        record = _error_record(exc, 3)
    except NonConvergenceError as exc:
        record = _error_record(exc, 4)
    else:
        threads = os.environ.get("DELAYKINETIC_THREADS", "0")
        manifest = {
            "config": cfg,
            "version": __version__,
            "threads": threads,
            "wall_time_s": time.time() - started,
            "outputs": outputs,
        }
        _write_json(os.path.join(out_dir, "manifest.json"), manifest)
        return 0
    print(json.dumps(record), file=sys.stderr)
    _write_json(os.path.join(out_dir, "error.json"), record)
    return record["exit_code"]


def describe_models() -> str:
    """A stable, alphabetized listing of the builtin kernels and their parameters."""
    lines = []
    for name in sorted(BUILTIN_MODELS):
        _ctor, doc = BUILTIN_MODELS[name]
        lines.append(f"{name}: {doc}")
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="delaykinetic",
                                     description="delayed interacting-particle experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="execute a JSON experiment config")
    run_p.add_argument("--config", required=True)
    run_p.add_argument("--out", default=None)
    run_p.add_argument("--verbose", action="store_true")
    sub.add_parser("describe-models", help="list builtin kernels")

    args = parser.parse_args(argv)
    if args.command == "describe-models":
        print(describe_models())
        return 0
    return run(args.config, args.out, args.verbose)


if __name__ == "__main__":
    sys.exit(main())
