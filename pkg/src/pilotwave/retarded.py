"""Retarded (light-cone delayed) variant of the two-detector dynamics.

Each detector only learns about the other one after the light travel time
T = 2l/c. Before that both move as lone detectors,

    u' = sigma(t(2u - t)),   v' = sigma(t(2v - t)),            t < T

and afterwards the other detector enters at its delayed position,

    u' = sigma(2u t - 2 v(t-T) (t-T) - T(2t - T))              t >= T

(and the mirror image for v). These are integrated by the method of steps
with fixed-step RK4; T is a whole number of steps so the switch at t = T and
all delayed lookups of step-boundary stages land on stored nodes, and the
half-step stages read the history through cubic Hermite interpolation.

Also here: the general retarded-time solver for a single source curve and
the screening parameter for when delays produce wrong outcomes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import constants

from . import kernels
from .experiment import ExperimentConfig, IntegrationError, pair_velocity, DetectorState

#: upper bound on retarded-time iterations
MAX_ITERATIONS = 200
RETARDED_TIME_TOL = 1e-10


class InsufficientHistoryError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrajectoryHistory:
    """Uniformly sampled (u, v, u', v') from t = 0, queryable between nodes.

    ``u_dot``/``v_dot`` at each node are the right-hand side used for the
    step starting there; at the switch node t = T the left limit (lone
    detector form) is recomputed for interpolation on the preceding interval.
    """

    times: np.ndarray
    u: np.ndarray
    v: np.ndarray
    u_dot: np.ndarray
    v_dot: np.ndarray
    T: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        arrays = [np.asarray(getattr(self, k), dtype=float) for k in ("times", "u", "v", "u_dot", "v_dot")]
        n = arrays[0].shape[0]
        if any(a.shape != (n,) for a in arrays):
            raise ValueError("history arrays must be 1-D and of equal length")
        if n < 1 or arrays[0][0] != 0.0:
            raise ValueError("history must start at t = 0")
        if n > 1:
            d = np.diff(arrays[0])
            if np.max(np.abs(d - d[0])) > 1e-12:
                raise ValueError("history spacing must be uniform")
        for k, a in zip(("times", "u", "v", "u_dot", "v_dot"), arrays):
            object.__setattr__(self, k, a)

    @property
    def step(self) -> float:
        return float(self.times[1] - self.times[0]) if self.times.size > 1 else 0.0

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def switch_index(self) -> int | None:
        if self.T <= 0 or self.step == 0:
            return None
        return int(round(self.T / self.step))

    def _left_derivs(self, j):
        if j == self.switch_index:
            t = self.times[j]
            return kernels.sigmoid(t * (2.0 * self.u[j] - t)), kernels.sigmoid(t * (2.0 * self.v[j] - t))
        return self.u_dot[j], self.v_dot[j]

    def query(self, t):
        """(u(t), v(t)) by cubic Hermite interpolation on the stored nodes."""
        t = float(t)
        tol = 1e-12 * max(1.0, self.t_end)
        if t < -tol or t > self.t_end + tol:
            raise InsufficientHistoryError(
                f"insufficient history: t={t:.6g} outside [0, {self.t_end:.6g}]"
            )
        if self.times.size == 1:
            return float(self.u[0]), float(self.v[0])
        h = self.step
        s = min(max(t / h, 0.0), self.times.size - 1.0)
        if abs(s - round(s)) < 1e-9:
            s = float(round(s))  # on a node up to rounding of t / h
        j = min(int(math.floor(s)), self.times.size - 2)
        th = s - j
        if th == 0.0:
            return float(self.u[j]), float(self.v[j])
        h00 = 2 * th**3 - 3 * th**2 + 1
        h10 = th**3 - 2 * th**2 + th
        h01 = -2 * th**3 + 3 * th**2
        h11 = th**3 - th**2
        ul, vl = self._left_derivs(j + 1)
        u = h00 * self.u[j] + h10 * h * self.u_dot[j] + h01 * self.u[j + 1] + h11 * h * ul
        v = h00 * self.v[j] + h10 * h * self.v_dot[j] + h01 * self.v[j + 1] + h11 * h * vl
        return float(u), float(v)

    def final_velocities(self):
        return float(self.u_dot[-1]), float(self.v_dot[-1])


@dataclass(frozen=True)
class RetardedConfig:
    base: ExperimentConfig = field(default_factory=ExperimentConfig)
    T: float = 0.0
    t_final: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.T) and self.T >= 0):
            raise ValueError(f"T must be non-negative, got {self.T!r}")
        if self.t_final is not None and not self.t_final > 0:
            raise ValueError("t_final must be positive")

    @classmethod
    def from_light_speed(cls, base: ExperimentConfig, l=None, c_light=None, t_final=None):
        """T = 2l/c, converted to code time units of ``base``."""
        l = base.l if l is None else l
        c_light = base.c_light if c_light is None else c_light
        if c_light is None or not c_light > 0 or not l > 0:
            raise ValueError("need positive l and c_light to derive T")
        return cls(base, T=base.to_code_time(2.0 * l / c_light), t_final=t_final)

    @property
    def effective_t_final(self) -> float:
        """Classification time in code units: explicit value, else max(base t_final, 3T)."""
        if self.t_final is not None:
            return float(self.t_final)
        return max(self.base.to_code_time(self.base.t_final), 3.0 * self.T)

    def stepping(self):
        """(h, D, n): step, delay in steps, number of steps, all in code units."""
        h_target = self.base.code_step
        if self.T > 0:
            D = int(math.ceil(self.T / h_target - 1e-9))
            h = self.T / D
        else:
            D = 0
            h = h_target
        n = int(math.ceil(self.effective_t_final / h - 1e-9))
        return h, D, n


def retarded_pair_velocity(t, u, v, hist: TrajectoryHistory | None, T):
    """(u', v') of the delayed dynamics at time ``t`` and state (u, v)."""
    if t < T:
        return kernels.sigmoid(t * (2.0 * u - t)), kernels.sigmoid(t * (2.0 * v - t))
    if T == 0:
        return pair_velocity(DetectorState(u, v, t))
    if hist is None:
        raise InsufficientHistoryError("insufficient history: none supplied")
    u_del, v_del = hist.query(t - T)
    return (
        kernels.sigmoid(2.0 * t * (u - v_del) + T * (2.0 * v_del - 2.0 * t + T)),
        kernels.sigmoid(2.0 * t * (v - u_del) + T * (2.0 * u_del - 2.0 * t + T)),
    )


def integrate_retarded(u0, v0, cfg: RetardedConfig | None = None) -> TrajectoryHistory:
    """Method-of-steps RK4 integration of the delayed pair dynamics (code units)."""
    cfg = cfg or RetardedConfig()
    h, D, n = cfg.stepping()
    u, v, ud, vd, reached = kernels.retarded_path(u0, v0, cfg.T, h, n, D)
    times = h * np.arange(n + 1)
    if reached != n:
        k = int(reached)
        partial = TrajectoryHistory(times[:k], u[:k], v[:k], ud[:k], vd[:k], cfg.T) if k else None
        err = IntegrationError(
            f"non-finite state at step {k}", {"u0": u0, "v0": v0, "step": k, "t": k * h}
        )
        err.partial = partial
        raise err
    return TrajectoryHistory(times, u, v, ud, vd, cfg.T, {"step": h, "delay_steps": D})


def solo_run(y0, cfg: RetardedConfig):
    """Lone-detector run on exactly the stepping ``integrate_retarded`` would use."""
    h, _, n = cfg.stepping()
    y, yd = kernels.solo_path(y0, h, n)
    return h * np.arange(n + 1), y, yd


# -- general retarded time ---------------------------------------------------------


def _position_curve(other):
    if not hasattr(other, "times") and callable(other):
        return other, None, None
    times = np.asarray(other.times, dtype=float)
    pos = np.asarray(other.positions, dtype=float)
    vel = getattr(other, "velocities", None)
    vel = None if vel is None else np.asarray(vel, dtype=float)

    def curve(t):
        if t < times[0] - 1e-12 or t > times[-1] + 1e-12:
            raise InsufficientHistoryError(
                f"history too short: t={t:.6g} outside [{times[0]:.6g}, {times[-1]:.6g}]"
            )
        if vel is None:
            return float(np.interp(t, times, pos))
        j = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, times.size - 2))
        h = times[j + 1] - times[j]
        th = (t - times[j]) / h
        return float(
            (2 * th**3 - 3 * th**2 + 1) * pos[j]
            + (th**3 - 2 * th**2 + th) * h * vel[j]
            + (-2 * th**3 + 3 * th**2) * pos[j + 1]
            + (th**3 - th**2) * h * vel[j + 1]
        )

    return curve, times, vel


def retarded_time(t_i, x_i, other, c_light, tol=RETARDED_TIME_TOL, max_iter=MAX_ITERATIONS):
    """Solve t_k = t_i - |x_i - x_k(t_k)| / c for the source curve ``other``.

    ``other`` is a callable x_k(t) or anything with ``times``/``positions``
    (and optionally ``velocities`` for Hermite interpolation). Uses Newton
    steps on t - g(t) with step halving whenever the residual fails to drop.
    """
    if not c_light > 0:
        raise ValueError("c_light must be positive")
    curve, times, vel = _position_curve(other)
    if vel is not None and np.max(np.abs(vel)) >= c_light:
        raise ValueError("source speed reaches c_light; retarded time not unique")

    def resid(t):
        return t - t_i + abs(x_i - curve(t)) / c_light

    t = float(t_i) - abs(x_i - curve(t_i)) / c_light
    f = resid(t)
    for _ in range(max_iter):
        if f == 0.0:
            return t
        dh = 1e-7 * max(1.0, abs(t))
        try:
            slope = (resid(t + dh) - resid(t - dh)) / (2 * dh)
        except InsufficientHistoryError:
            # one-sided near either end of a sampled history
            try:
                slope = (f - resid(t - dh)) / dh
            except InsufficientHistoryError:
                slope = (resid(t + dh) - f) / dh
        if not slope > 0:
            slope = 1.0
        step = -f / slope
        lam = 1.0
        while True:
            t_new = t + lam * step
            f_new = resid(t_new)
            if abs(f_new) < abs(f) or lam < 1e-6:
                break
            lam *= 0.5
        delta = t_new - t
        t, f = t_new, f_new
        if abs(delta) < tol and abs(f) < 10 * tol:
            return min(t, float(t_i))
    raise ConvergenceError(f"retarded time did not converge in {max_iter} iterations")


# -- when do delays matter? ----------------------------------------------------------

HBAR = constants.hbar
C_LIGHT = constants.c
ELECTRON_MASS = constants.m_e


def reduced_wavelength(wavelength):
    """lambda / (2 pi): the length with p = hbar / length."""
    return wavelength / (2.0 * math.pi)


def wrongness_parameter(l, m, d, lam, hbar=HBAR, c_light=C_LIGHT):
    """l hbar / (m c d lam); values >= 1 mean many both/neither outcomes.

    ``lam`` is the reduced wavelength (photon momentum hbar/lam) and ``d`` the
    initial spread of the detector particle.
    """
    vals = {"l": l, "m": m, "d": d, "lam": lam, "hbar": hbar, "c_light": c_light}
    for name, val in vals.items():
        if not (math.isfinite(val) and val > 0):
            raise ValueError(f"{name} must be positive, got {val!r}")
    return l * hbar / (m * c_light * d * lam)


def delay_for_wrongness(value):
    """Code-unit delay T matching a given wrongness parameter (T = 2 l/c, l/c = value)."""
    return 2.0 * value
