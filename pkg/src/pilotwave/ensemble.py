"""Monte Carlo outcome statistics for the two-detector experiment.

Initial detector offsets are drawn from |psi|^2 of the zero-momentum
packets, each run is integrated to its classification time, and the final
detector velocities decide which detector(s) recorded the photon.
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _accel, kernels
from .experiment import ExperimentConfig, IntegrationError
from .retarded import RetardedConfig
from .rng import ALGORITHM as RNG_ALGORITHM
from .rng import make_rng

FIRE_THRESHOLD = 0.99
SILENT_THRESHOLD = 0.01
#: Born-sampled runs abort when more than this fraction is unresolved
MAX_AMBIGUOUS_FRACTION = 1e-3
#: unresolved runs are re-integrated with t_final doubled, at most this often
MAX_EXTENSIONS = 3


class Outcome(str, enum.Enum):
    LEFT = "Left"
    RIGHT = "Right"
    BOTH = "Both"
    NEITHER = "Neither"
    AMBIGUOUS = "Ambiguous"


_CODES = [Outcome.LEFT, Outcome.RIGHT, Outcome.BOTH, Outcome.NEITHER, Outcome.AMBIGUOUS]


class AmbiguousOutcomeError(RuntimeError):
    pass


@dataclass(frozen=True)
class OutcomeRecord:
    u0: float
    v0: float
    outcome: Outcome
    final_u_dot: float
    final_v_dot: float
    T: float = 0.0


@dataclass(frozen=True)
class SampleTable:
    """Per-sample initial conditions, outcome codes (index into ``Outcome``) and final velocities."""

    u0: np.ndarray
    v0: np.ndarray
    codes: np.ndarray
    final_u_dot: np.ndarray
    final_v_dot: np.ndarray
    T: float = 0.0

    def outcomes(self):
        return [_CODES[c] for c in self.codes]

    def records(self):
        for i in range(self.u0.shape[0]):
            yield OutcomeRecord(
                float(self.u0[i]), float(self.v0[i]), _CODES[self.codes[i]],
                float(self.final_u_dot[i]), float(self.final_v_dot[i]), self.T,
            )


@dataclass(frozen=True)
class EnsembleStats:
    n: int
    frac_left: float
    frac_right: float
    frac_both: float
    frac_neither: float
    frac_ambiguous: float
    wrong_fraction: float
    rng_seed: int | None
    T: float = 0.0
    t_final: float = 10.0
    n_extended: int = 0
    t_final_max: float = 10.0
    samples: SampleTable | None = field(default=None, compare=False, repr=False)

    def to_dict(self):
        d = asdict(self)
        d.pop("samples")
        return d


def classify(final_u_dot, final_v_dot) -> Outcome:
    """Outcome from the final detector velocities (u: right, v: left)."""
    return _CODES[int(classify_codes(np.array([final_u_dot]), np.array([final_v_dot]))[0])]


def classify_codes(ud, vd) -> np.ndarray:
    ud = np.asarray(ud, dtype=float)
    vd = np.asarray(vd, dtype=float)
    u_fire, u_quiet = ud > FIRE_THRESHOLD, ud < SILENT_THRESHOLD
    v_fire, v_quiet = vd > FIRE_THRESHOLD, vd < SILENT_THRESHOLD
    codes = np.full(ud.shape, 4, dtype=np.int8)
    codes[v_fire & u_quiet] = 0
    codes[u_fire & v_quiet] = 1
    codes[u_fire & v_fire] = 2
    codes[u_quiet & v_quiet] = 3
    return codes


def sample_initial(rng_seed: int, n: int, a: float = 1.0) -> np.ndarray:
    """(n, 2) array of (u0, v0) drawn independently from N(0, 1/(2a))."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if not a > 0:
        raise ValueError("a must be positive")
    rng = make_rng(rng_seed)
    return rng.normal(0.0, math.sqrt(0.5 / a), size=(int(n), 2))


def _stats(u0, v0, ud, vd, seed, T, t_final, strict, runner=None, extend=True):
    codes = classify_codes(ud, vd)
    n = codes.shape[0]
    n_extended = 0
    t_max = t_final
    if extend and runner is not None:
        ud, vd = ud.copy(), vd.copy()
        idx = np.flatnonzero(codes == 4)
        n_extended = int(idx.size)
        for _ in range(MAX_EXTENSIONS):
            if idx.size == 0:
                break
            t_max *= 2.0
            eu, ev = runner(u0[idx], v0[idx], t_max)
            ud[idx], vd[idx] = eu, ev
            codes[idx] = classify_codes(eu, ev)
            idx = idx[codes[idx] == 4]
    counts = np.bincount(codes, minlength=5)
    fr = counts / n
    if strict and fr[4] > MAX_AMBIGUOUS_FRACTION:
        raise AmbiguousOutcomeError(
            f"{counts[4]} of {n} runs ({fr[4]:.2%}) unresolved at t={t_max:g}; "
            f"limit is {MAX_AMBIGUOUS_FRACTION:.1%}"
        )
    table = SampleTable(u0, v0, codes, ud, vd, T)
    return EnsembleStats(
        n=int(n),
        frac_left=float(fr[0]),
        frac_right=float(fr[1]),
        frac_both=float(fr[2]),
        frac_neither=float(fr[3]),
        frac_ambiguous=float(fr[4]),
        wrong_fraction=float(fr[2] + fr[3]),
        rng_seed=None if seed is None else int(seed),
        T=float(T),
        t_final=float(t_final),
        n_extended=n_extended,
        t_final_max=float(t_max if n_extended else t_final),
        samples=table,
    )


def _initial(n, seed, a, initial):
    if initial is not None:
        init = np.atleast_2d(np.asarray(initial, dtype=float))
        if init.shape[1] != 2:
            raise ValueError("initial must have shape (n, 2)")
        return init
    return sample_initial(seed, n, a)


def _raise_on_failures(ok, u0, v0):
    if not np.all(ok):
        bad = np.flatnonzero(~ok)
        raise IntegrationError(
            f"{bad.size} runs produced non-finite states; first at sample {bad[0]}",
            {"indices": bad.tolist()[:20], "u0": float(u0[bad[0]]), "v0": float(v0[bad[0]])},
        )


def run_nonretarded_ensemble(n: int, seed: int, cfg: ExperimentConfig | None = None,
                             initial=None, parallel: int | None = None, strict=None,
                             extend=True) -> EnsembleStats:
    """Born-sampled (or explicit ``initial``) instantaneous runs, classified at cfg.t_final.

    Runs still unresolved at the classification time are re-integrated with
    doubled horizons (``extend``). ``strict`` (default: only for sampled
    runs) then raises if more than 0.1% remain unresolved.
    """
    cfg = cfg or ExperimentConfig()
    init = _initial(n, seed, cfg.a, initial)
    u0 = cfg.to_code_length(init[:, 0])
    v0 = cfg.to_code_length(init[:, 1])
    _accel.set_num_threads(parallel)
    h, steps = cfg.code_step, cfg.n_steps

    def runner(a, b, horizon):
        _, _, ea, eb = kernels.pair_final(a, b, h, int(math.ceil(horizon / h - 1e-9)))
        _raise_on_failures(np.isfinite(ea) & np.isfinite(eb), a, b)
        return ea, eb

    ud, vd = runner(u0, v0, h * steps)
    strict = initial is None if strict is None else strict
    seed = None if initial is not None else seed
    return _stats(u0, v0, ud, vd, seed, 0.0, h * steps, strict, runner, extend)


def run_retarded_ensemble(n: int, seed: int, cfg: RetardedConfig | None = None,
                          initial=None, parallel: int | None = None, strict=None,
                          extend=True) -> EnsembleStats:
    """As :func:`run_nonretarded_ensemble` but with the delayed dynamics of ``cfg``."""
    cfg = cfg or RetardedConfig()
    base = cfg.base
    init = _initial(n, seed, base.a, initial)
    u0 = base.to_code_length(init[:, 0])
    v0 = base.to_code_length(init[:, 1])
    _accel.set_num_threads(parallel)
    h, D, steps = cfg.stepping()

    def runner(a, b, horizon):
        k = int(math.ceil(horizon / h - 1e-9))
        _, _, ea, eb, ok = kernels.retarded_final(a, b, cfg.T, h, k, D)
        _raise_on_failures(ok, a, b)
        return ea, eb

    ud, vd = runner(u0, v0, h * steps)
    strict = initial is None if strict is None else strict
    seed = None if initial is not None else seed
    return _stats(u0, v0, ud, vd, seed, cfg.T, h * steps, strict, runner, extend)


def sweep_delay(T_values, n: int, seed: int, cfg: ExperimentConfig | RetardedConfig | None = None,
                t_final: float | None = None, parallel: int | None = None, strict=True,
                extend=True):
    """Wrong-fraction curve over delays, every point on the same seed."""
    if isinstance(cfg, RetardedConfig):
        base = cfg.base
        t_final = cfg.t_final if t_final is None else t_final
    else:
        base = cfg or ExperimentConfig()
    out = []
    for T in T_values:
        if T < 0:
            raise ValueError("delays must be non-negative")
        rc = RetardedConfig(base, float(T), t_final)
        out.append((float(T), run_retarded_ensemble(n, seed, rc, parallel=parallel, strict=strict, extend=extend)))
    return out


def binomial_sigma(p, n):
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


__all__ = [
    "AmbiguousOutcomeError",
    "EnsembleStats",
    "Outcome",
    "OutcomeRecord",
    "RNG_ALGORITHM",
    "SampleTable",
    "classify",
    "classify_codes",
    "run_nonretarded_ensemble",
    "run_retarded_ensemble",
    "sample_initial",
    "sweep_delay",
]
