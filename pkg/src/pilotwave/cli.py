"""Command-line front end.

    pilotwave --mode nonretarded --n 10000 --seed 1 --out runs/nr.json
    pilotwave --mode retarded --l 1 --c 1 --emit-samples --out runs/ret.json
    pilotwave --mode sweep --T-list 0 0.5 1 2 4 --out runs/sweep.json
    pilotwave --mode physical_units --l 3 --m 9.109e-31 --lambda 5e-7 --d 1e-10

Settings come from built-in defaults, then ``--config`` (JSON or YAML), then
flags. A JSON summary written by a previous run is itself a valid config
file, which is how a run gets reproduced.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__, _accel, ensemble, experiment, guidance, retarded, wavefield

SCHEMA_VERSION = 1
MODES = ("equivariance", "nonretarded", "retarded", "sweep", "oracle_check", "physical_units")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4

DEFAULTS = {
    "mode": None,
    "seed": 0,
    "n": 10_000,
    "a": 1.0,
    "p": 1.0,
    "m": 1.0,
    "l": 1.0,
    "c": None,
    "T": None,
    "T_list": None,
    "t_final": None,
    "dt": 1e-3,
    "t1": 1.0,
    "lambda": None,
    "d": None,
    "u0": None,
    "v0": None,
    "out": None,
    "emit_samples": False,
    "emit_trajectories": 0,
    "parallel": None,
}
CODE_UNIT_KEYS = ("T", "T_list")
PHYSICAL_UNIT_KEYS = ("c",)
DEFAULT_SWEEP = [0.0, 0.5, 1.0, 2.0, 4.0]
DEFAULT_T_FINAL = 10.0
ORACLE_DEFAULT_N = 100
ORACLE_TOLERANCE = 1e-6
KS_TOLERANCE = 0.025
# settings that only describe where results go; never part of the echo
_OUTPUT_KEYS = ("out", "emit_samples", "emit_trajectories", "parallel")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    mode: str
    seed: int
    n: int
    values: dict
    given: frozenset
    out: Path | None = None
    emit_samples: bool = False
    emit_trajectories: int = 0
    parallel: int | None = None
    experiment: experiment.ExperimentConfig | None = None
    retarded: retarded.RetardedConfig | None = None
    derived: dict = field(default_factory=dict)

    def echo(self) -> dict:
        """Resolved settings that reproduce this run's statistics."""
        return {k: v for k, v in self.values.items() if v is not None and k not in _OUTPUT_KEYS}


# -- parsing -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pilotwave", description="Bohmian two-detector simulations")
    S = argparse.SUPPRESS
    ap.add_argument("--mode", choices=MODES, default=S)
    ap.add_argument("--config", help="JSON or YAML file with settings")
    ap.add_argument("--seed", type=int, default=S)
    ap.add_argument("--n", type=int, default=S, help="number of samples (default 10000)")
    ap.add_argument("--T", type=float, default=S, help="retardation delay, code units")
    ap.add_argument("--T-list", dest="T_list", type=float, nargs="+", default=S)
    ap.add_argument("--l", type=float, default=S, help="half-separation of the detectors")
    ap.add_argument("--c", type=float, default=S, help="speed of light; with l gives T = 2l/c")
    ap.add_argument("--m", type=float, default=S)
    ap.add_argument("--p", type=float, default=S)
    ap.add_argument("--a", type=float, default=S)
    ap.add_argument("--t-final", dest="t_final", type=float, default=S)
    ap.add_argument("--dt", type=float, default=S)
    ap.add_argument("--t1", type=float, default=S, help="equivariance transport time")
    ap.add_argument("--lambda", dest="lambda", type=float, default=S, help="photon wavelength (m)")
    ap.add_argument("--d", type=float, default=S, help="detector confinement length (m)")
    ap.add_argument("--u0", type=float, default=S)
    ap.add_argument("--v0", type=float, default=S)
    ap.add_argument("--out", default=S, help="JSON summary path; CSVs are written beside it")
    ap.add_argument("--emit-samples", dest="emit_samples", action="store_true", default=S)
    ap.add_argument("--emit-trajectories", dest="emit_trajectories", type=int, nargs="?",
                    const=1, default=S, metavar="K", help="trajectory CSV for the first K runs")
    ap.add_argument("--parallel", type=int, default=S, help="worker threads (default: all cores)")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return ap


def load_config_file(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a mapping")
    if "schema_version" in data and "config" in data:
        # a previous run's summary
        cfg = dict(data["config"])
        cfg.setdefault("mode", data.get("mode"))
        cfg.setdefault("seed", data.get("seed"))
        return cfg
    return {k.replace("-", "_") if k != "lambda" else k: v for k, v in data.items()}


def parse_config(argv=None, overrides: dict | None = None) -> RunConfig:
    """Merge defaults, config file and flags into a validated :class:`RunConfig`."""
    ns = vars(build_parser().parse_args(argv))
    merged = {}
    cfg_path = ns.pop("config", None)
    if cfg_path:
        merged.update(load_config_file(cfg_path))
    merged.update(ns)
    if overrides:
        merged.update(overrides)
    return config_from_mapping(merged)


def _positive(values, name, allow_none=False):
    val = values[name]
    if val is None and allow_none:
        return
    if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val) or val <= 0:
        raise ConfigError(f"{name} must be a positive number, got {val!r}")


def config_from_mapping(mapping: dict) -> RunConfig:
    unknown = sorted(set(mapping) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    given = frozenset(k for k, v in mapping.items() if v is not None)
    values = {**DEFAULTS, **{k: v for k, v in mapping.items() if v is not None}}
    mode = values["mode"]
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {', '.join(MODES)}; got {mode!r}")

    code = [k for k in CODE_UNIT_KEYS if k in given]
    phys = [k for k in PHYSICAL_UNIT_KEYS if k in given]
    if code and phys:
        raise ConfigError(
            f"code-unit settings ({', '.join(code)}) and physical-unit settings "
            f"({', '.join(phys)}) cannot be mixed"
        )

    for name in ("a", "p", "m", "l", "dt"):
        _positive(values, name)
    for name in ("c", "t_final", "lambda", "d"):
        _positive(values, name, allow_none=True)
    if mode == "equivariance":
        _positive(values, "t1")
    n = values["n"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ConfigError(f"n must be a positive integer, got {n!r}")
    seed = values["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {seed!r}")
    if values["T"] is not None and not (math.isfinite(values["T"]) and values["T"] >= 0):
        raise ConfigError(f"T must be non-negative, got {values['T']!r}")
    if values["T_list"] is not None:
        tl = values["T_list"]
        if not isinstance(tl, list) or not tl or any(not (isinstance(x, (int, float)) and x >= 0) for x in tl):
            raise ConfigError("T_list must be a non-empty list of non-negative numbers")
    if (values["u0"] is None) != (values["v0"] is None):
        raise ConfigError("u0 and v0 must be given together")
    emit_k = values["emit_trajectories"]
    if isinstance(emit_k, bool) or not isinstance(emit_k, int) or emit_k < 0:
        raise ConfigError("emit_trajectories must be a non-negative integer")
    if values["parallel"] is not None and (not isinstance(values["parallel"], int) or values["parallel"] < 1):
        raise ConfigError("parallel must be a positive integer")
    if (values["emit_samples"] or emit_k) and values["out"] is None:
        raise ConfigError("emitting CSV files needs --out")

    rc = RunConfig(
        mode=mode, seed=seed, n=n, values=values, given=given,
        out=None if values["out"] is None else Path(values["out"]),
        emit_samples=bool(values["emit_samples"]), emit_trajectories=emit_k,
        parallel=values["parallel"],
    )
    if mode == "oracle_check" and "n" not in given:
        rc.n = ORACLE_DEFAULT_N
        values["n"] = ORACLE_DEFAULT_N
    if mode in ("nonretarded", "retarded", "sweep", "oracle_check"):
        _build_experiment(rc)
    elif mode == "physical_units":
        missing = [k for k in ("l", "m", "lambda", "d") if k not in given]
        if missing:
            raise ConfigError(f"physical_units mode needs {', '.join(missing)}")
    return rc


def _build_experiment(rc: RunConfig):
    v = rc.values
    try:
        t_final = DEFAULT_T_FINAL if v["t_final"] is None else v["t_final"]
        base = experiment.ExperimentConfig(a=v["a"], p=v["p"], m=v["m"], l=v["l"], c_light=v["c"],
                                           t_final=t_final, dt=v["dt"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rc.experiment = base
    # an explicit horizon overrides the max(10, 3T) rule for delayed runs
    explicit = None if v["t_final"] is None else base.to_code_time(v["t_final"])
    if rc.mode == "retarded":
        if v["T"] is not None:
            rc.retarded = retarded.RetardedConfig(base, float(v["T"]), explicit)
        elif v["c"] is not None:
            rc.retarded = retarded.RetardedConfig.from_light_speed(base, t_final=explicit)
        else:
            raise ConfigError("retarded mode needs T, or l together with c")
        rc.derived["T"] = rc.retarded.T
        rc.derived["t_final_code"] = rc.retarded.effective_t_final
    elif rc.mode == "sweep":
        if v["T_list"] is None:
            v["T_list"] = list(DEFAULT_SWEEP)
        rc.retarded = retarded.RetardedConfig(base, 0.0, explicit)


# -- output --------------------------------------------------------------------


def _atomic_write(path: Path, write):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            write(fh)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def write_json(path: Path, payload: dict):
    _atomic_write(path, lambda fh: (json.dump(payload, fh, indent=2, sort_keys=False), fh.write("\n")))


def write_csv(path: Path, header, rows):
    def emit(fh):
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)

    _atomic_write(path, emit)


def _sibling(out: Path, suffix: str) -> Path:
    return out.with_name(f"{out.stem}_{suffix}.csv")


def _check_writable(out: Path | None):
    if out is None:
        return
    parent = out.parent if str(out.parent) else Path(".")
    probe = parent
    while not probe.exists():
        probe = probe.parent
    if not probe.is_dir() or not os.access(probe, os.W_OK):
        raise OSError(f"output location {parent} is not writable")
    if out.exists() and out.is_dir():
        raise OSError(f"output path {out} is a directory")


def _sample_rows(stats: ensemble.EnsembleStats):
    s = stats.samples
    names = [o.value for o in ensemble.Outcome]
    for i in range(s.u0.shape[0]):
        yield (i, repr(float(s.u0[i])), repr(float(s.v0[i])), names[s.codes[i]],
               repr(float(s.final_u_dot[i])), repr(float(s.final_v_dot[i])), s.T)


SAMPLE_HEADER = ("sample", "u0", "v0", "outcome", "final_u_dot", "final_v_dot", "T")
TRAJECTORY_HEADER = ("sample", "t", "u", "v", "u_dot", "v_dot")
SWEEP_HEADER = ("T", "wrong_fraction", "frac_left", "frac_right", "frac_both", "frac_neither", "n")


# -- modes ---------------------------------------------------------------------


def _initial(rc: RunConfig):
    v = rc.values
    if v["u0"] is not None:
        return np.array([[v["u0"], v["v0"]]], dtype=float)
    return None


def _trajectory_rows(rc: RunConfig, stats):
    s = stats.samples
    k = min(rc.emit_trajectories, s.u0.shape[0])
    for i in range(k):
        if rc.mode == "retarded":
            h = retarded.integrate_retarded(float(s.u0[i]), float(s.v0[i]), rc.retarded)
            cols = (h.times, h.u, h.v, h.u_dot, h.v_dot)
        else:
            ut, vt = experiment.integrate_pair(float(s.u0[i]), float(s.v0[i]), rc.experiment)
            cols = (ut.times, ut.positions, vt.positions, ut.velocities, vt.velocities)
        for row in zip(*cols):
            yield (i, *(repr(float(x)) for x in row))


def _run_ensemble(rc: RunConfig, artifacts: dict):
    init = _initial(rc)
    n = rc.n if init is None else init.shape[0]
    if rc.mode == "retarded":
        stats = ensemble.run_retarded_ensemble(n, rc.seed, rc.retarded, initial=init, parallel=rc.parallel)
    else:
        stats = ensemble.run_nonretarded_ensemble(n, rc.seed, rc.experiment, initial=init,
                                                  parallel=rc.parallel)
    if rc.emit_samples:
        path = _sibling(rc.out, "samples")
        write_csv(path, SAMPLE_HEADER, _sample_rows(stats))
        artifacts["samples"] = str(path)
    if rc.emit_trajectories:
        path = _sibling(rc.out, "trajectories")
        write_csv(path, TRAJECTORY_HEADER, _trajectory_rows(rc, stats))
        artifacts["trajectories"] = str(path)
    return stats.to_dict(), True


def _run_sweep(rc: RunConfig, artifacts: dict):
    curve = ensemble.sweep_delay(rc.values["T_list"], rc.n, rc.seed, rc.retarded, parallel=rc.parallel)
    rows = [(T, s.wrong_fraction, s.frac_left, s.frac_right, s.frac_both, s.frac_neither, s.n)
            for T, s in curve]
    if rc.out is not None:
        path = _sibling(rc.out, "sweep")
        write_csv(path, SWEEP_HEADER, rows)
        artifacts["sweep"] = str(path)
    if rc.emit_samples:
        path = _sibling(rc.out, "samples")
        write_csv(path, SAMPLE_HEADER, (r for _, s in curve for r in _sample_rows(s)))
        artifacts["samples"] = str(path)
    return {"curve": [s.to_dict() for _, s in curve]}, True


def _run_oracle(rc: RunConfig, artifacts: dict):
    cfg = rc.experiment
    init = _initial(rc)
    if init is None:
        init = ensemble.sample_initial(rc.seed, rc.n, cfg.a)
    worst, worst_i = 0.0, -1
    rows = []
    for i, (u0, v0) in enumerate(cfg.to_code_length(init)):
        ut, vt = experiment.integrate_pair(float(u0), float(v0), cfg)
        res = np.abs(experiment.implicit_solution_residual(ut.positions, ut.times, u0, v0))
        r = float(np.max(res))
        rows.append((i, repr(float(u0)), repr(float(v0)), repr(r)))
        if r > worst:
            worst, worst_i = r, i
    passed = worst < ORACLE_TOLERANCE
    if rc.emit_samples:
        path = _sibling(rc.out, "samples")
        write_csv(path, ("sample", "u0", "v0", "max_residual"), rows)
        artifacts["samples"] = str(path)
    print(f"max |implicit_solution_residual| = {worst:.3e} over {len(rows)} trajectories "
          f"(tolerance {ORACLE_TOLERANCE:g}): {'PASS' if passed else 'FAIL'}", file=sys.stderr)
    return {"max_residual": worst, "worst_sample": worst_i, "n": len(rows),
            "tolerance": ORACLE_TOLERANCE, "passed": passed}, passed


def _run_equivariance(rc: RunConfig, artifacts: dict):
    v = rc.values
    half = 20.0 / math.sqrt(v["a"])
    grid = wavefield.Grid1D(-half, half, 1024)
    try:
        psi0 = wavefield.gaussian(grid, a=v["a"], mass=v["m"])
        res = guidance.equivariance_check(psi0, n=rc.n, t1=v["t1"], dt=v["dt"], seed=rc.seed)
    except wavefield.UnstableParametersError as exc:
        raise ConfigError(str(exc)) from exc
    passed = res.ks_statistic < KS_TOLERANCE
    if rc.emit_samples:
        path = _sibling(rc.out, "samples")
        write_csv(path, ("sample", "x_final"), ((i, repr(float(x))) for i, x in enumerate(res.final_positions)))
        artifacts["samples"] = str(path)
    return {"ks_statistic": res.ks_statistic, "p_value": res.p_value, "n": res.n, "t1": res.t1,
            "tolerance": KS_TOLERANCE, "passed": passed}, passed


def _run_physical(rc: RunConfig, artifacts: dict):
    v = rc.values
    c = retarded.C_LIGHT if v["c"] is None else v["c"]
    lam_r = retarded.reduced_wavelength(v["lambda"])
    try:
        w = retarded.wrongness_parameter(v["l"], v["m"], v["d"], lam_r, c_light=c)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    regime = "many wrong outcomes" if w >= 1.0 else "wrong outcomes negligible"
    print(f"wrongness parameter = {w:.4g} ({regime})", file=sys.stderr)
    return {"wrongness_parameter": w, "reduced_wavelength": lam_r, "c_light": c,
            "equivalent_code_delay": retarded.delay_for_wrongness(w), "regime": regime}, True


_RUNNERS = {
    "equivariance": _run_equivariance,
    "nonretarded": _run_ensemble,
    "retarded": _run_ensemble,
    "sweep": _run_sweep,
    "oracle_check": _run_oracle,
    "physical_units": _run_physical,
}


def run(rc: RunConfig) -> tuple[int, dict]:
    """Execute ``rc``; returns (exit status, summary). Raises on I/O or numerical failures."""
    _check_writable(rc.out)
    parallel = rc.parallel or os.cpu_count() or 1
    artifacts: dict = {}
    t0 = time.perf_counter()
    with _accel.backend(_accel.get_backend()):
        _accel.set_num_threads(parallel)
        stats, passed = _RUNNERS[rc.mode](rc, artifacts)
    wall = time.perf_counter() - t0
    summary = {
        "schema_version": SCHEMA_VERSION,
        "mode": rc.mode,
        "seed": rc.seed,
        "config": rc.echo(),
        "derived": rc.derived,
        "stats": stats,
        "timing": {"wall_seconds": wall, "threads": parallel, "backend": _accel.get_backend()},
        "rng": ensemble.RNG_ALGORITHM,
        "version": __version__,
        "artifacts": artifacts,
    }
    if rc.out is not None:
        write_json(rc.out, summary)
    return (EXIT_OK if passed else EXIT_NUMERICAL), summary


_NUMERICAL = (
    experiment.IntegrationError,
    ensemble.AmbiguousOutcomeError,
    guidance.NodeRegionError,
    guidance.TrajectoryError,
    retarded.ConvergenceError,
    FloatingPointError,
)


def main(argv=None) -> int:
    try:
        rc = parse_config(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # argparse usage errors
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        status, summary = run(rc)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERICAL as exc:
        diag = getattr(exc, "diagnostic", None)
        print(f"numerical failure: {exc}" + (f" {json.dumps(diag, default=str)}" if diag else ""),
              file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    if rc.out is None:
        json.dump(summary, sys.stdout, indent=2)
        sys.stdout.write("\n")
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
