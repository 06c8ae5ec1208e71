"""Two-detector photon experiment with instantaneous (non-retarded) guidance.

A photon leaves the origin as two packets, one per direction. Each detector
is a free particle in a zero-momentum Gaussian at -l (left) or +l (right)
that picks up the photon momentum if it absorbs it. With the photon carrying
no trajectory, each detector moves with the branch-weighted velocity.

Reduced coordinates u = x_R - l and v = -(x_L + l) measure how far each
detector has moved outward. In code units (a = p/m = hbar = 1)

    u' = sigma(-2t(v - u)),   v' = sigma(-2t(u - v)),

whose sum is exactly 1, so u + v - t is conserved.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import kernels
from .guidance import NodeRegionError, Trajectory, marginal_velocity

#: asymptotic classification needs late times
MIN_T_FINAL = 10.0


class IntegrationError(RuntimeError):
    """Non-finite state encountered; ``diagnostic`` describes where."""

    def __init__(self, message, diagnostic=None):
        super().__init__(message)
        self.diagnostic = diagnostic or {}


@dataclass(frozen=True)
class ExperimentConfig:
    a: float = 1.0
    p: float = 1.0
    m: float = 1.0
    l: float = 1.0
    c_light: float | None = None
    t_final: float = 10.0
    dt: float = 1e-3

    def __post_init__(self):
        for name in ("a", "p", "m", "l", "t_final", "dt"):
            val = getattr(self, name)
            if not (isinstance(val, (int, float)) and math.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be positive, got {val!r}")
        if self.c_light is not None and not self.c_light > 0:
            raise ValueError(f"c_light must be positive, got {self.c_light!r}")
        if self.to_code_time(self.t_final) < MIN_T_FINAL - 1e-12:
            raise ValueError(f"t_final must be at least {MIN_T_FINAL} code time units")

    # code units: length 1/sqrt(a), velocity p/m, time m/(p sqrt(a))
    @property
    def length_unit(self) -> float:
        return 1.0 / math.sqrt(self.a)

    @property
    def velocity_unit(self) -> float:
        return self.p / self.m

    @property
    def time_unit(self) -> float:
        return self.length_unit / self.velocity_unit

    @property
    def is_code_units(self) -> bool:
        return self.a == 1.0 and self.p == self.m

    def to_code_time(self, t):
        return t / self.time_unit

    def to_code_length(self, x):
        return x / self.length_unit

    @property
    def n_steps(self) -> int:
        ratio = self.t_final / self.dt
        return int(math.ceil(ratio - 1e-9))

    @property
    def code_step(self) -> float:
        return self.to_code_time(self.dt)


@dataclass(frozen=True)
class DetectorState:
    u: float
    v: float
    t: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(x) for x in (self.u, self.v, self.t)):
            raise ValueError("detector state must be finite")

    @classmethod
    def from_positions(cls, x_left, x_right, t, l):
        return cls(u=x_right - l, v=-(x_left + l), t=t)

    def positions(self, l):
        """(x_L, x_R) for half-separation ``l``."""
        return -(self.v + l), self.u + l


@dataclass(frozen=True)
class GaussianPacket:
    """Non-spreading Gaussian packet translating at momentum/mass."""

    center: float
    momentum: float = 0.0
    a: float = 1.0
    phase_offset: float = 0.0
    mass: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("width parameter a must be positive")

    def center_at(self, t):
        return self.center + self.momentum / self.mass * t


def packet_eval(pkt: GaussianPacket, x, t):
    """Amplitude (a/pi)^(1/4) exp(i(kx - k^2 t/2m)/hbar) exp(-a (x - c(t))^2 / 2), k = momentum.

    The phase is the free-particle phase of momentum k, so the Bohm velocity
    of a lone packet equals its envelope velocity k/m.
    """
    x = np.asarray(x, dtype=float)
    k = pkt.momentum
    phase = (k * x - k * k * t / (2.0 * pkt.mass)) / pkt.hbar + pkt.phase_offset
    env = -0.5 * pkt.a * (x - pkt.center_at(t)) ** 2
    return (pkt.a / math.pi) ** 0.25 * np.exp(env + 1j * phase)


def packet_derivative(pkt: GaussianPacket, x, t):
    """d/dx of :func:`packet_eval`."""
    x = np.asarray(x, dtype=float)
    return (1j * pkt.momentum / pkt.hbar - pkt.a * (x - pkt.center_at(t))) * packet_eval(pkt, x, t)


def packet_current(pkt: GaussianPacket, x, t):
    """psi* (p psi) with p = -i hbar d/dx."""
    return np.conj(packet_eval(pkt, x, t)) * (-1j * pkt.hbar) * packet_derivative(pkt, x, t)


def detector_packets(cfg: ExperimentConfig):
    """Static and recoiling packets for each detector after the photon has passed.

    Returns a dict with keys ``left``, ``left_moving``, ``right``, ``right_moving``.
    """
    return {
        "left": GaussianPacket(-cfg.l, 0.0, cfg.a, mass=cfg.m),
        "left_moving": GaussianPacket(-cfg.l, -cfg.p, cfg.a, mass=cfg.m),
        "right": GaussianPacket(cfg.l, 0.0, cfg.a, mass=cfg.m),
        "right_moving": GaussianPacket(cfg.l, cfg.p, cfg.a, mass=cfg.m),
    }


# -- velocities ---------------------------------------------------------------


def pair_velocity(state: DetectorState):
    """(u', v') of the instantaneous two-detector dynamics, code units."""
    t, u, v = state.t, state.u, state.v
    return kernels.sigmoid(-2.0 * t * (v - u)), kernels.sigmoid(-2.0 * t * (u - v))


def pair_velocity_from_wavefunction(x_left, x_right, t, cfg: ExperimentConfig, density_floor=None):
    """(x_L', x_R') from the branch-weighted current of the post-interaction state.

    Photon branches are taken as non-overlapping, so each contributes its
    detector factor with weight 1/2.
    """
    pk = detector_packets(cfg)

    def dens(name, x):
        return float(np.abs(packet_eval(pk[name], x, t)) ** 2)

    def cur(name, x):
        return complex(packet_current(pk[name], x, t))

    floor = 1e-12 * 0.5 * cfg.a / math.pi if density_floor is None else density_floor
    # branch A: photon went left, left detector recoils; branch B: photon went right
    left = marginal_velocity(
        [
            (0.5 * dens("right", x_right), cur("left_moving", x_left), dens("left_moving", x_left)),
            (0.5 * dens("right_moving", x_right), cur("left", x_left), dens("left", x_left)),
        ],
        mass=cfg.m,
        density_floor=floor,
    )
    right = marginal_velocity(
        [
            (0.5 * dens("left_moving", x_left), cur("right", x_right), dens("right", x_right)),
            (0.5 * dens("left", x_left), cur("right_moving", x_right), dens("right_moving", x_right)),
        ],
        mass=cfg.m,
        density_floor=floor,
    )
    return left, right


def single_detector_velocity(v, t):
    """v' for a lone detector (the other detector absent), code units."""
    return kernels.sigmoid(t * (2.0 * v - t))


# -- integration --------------------------------------------------------------


def _code_grid(cfg: ExperimentConfig):
    h = cfg.code_step
    n = cfg.n_steps
    return h, n


def integrate_pair(u0, v0, cfg: ExperimentConfig | None = None):
    """RK4 solution of the instantaneous pair dynamics from t = 0.

    ``u0``, ``v0`` and all returned quantities are in code units. Returns
    ``(u_trajectory, v_trajectory)``.
    """
    cfg = cfg or ExperimentConfig()
    h, n = _code_grid(cfg)
    u, v, ud, vd = kernels.pair_path(u0, v0, h, n)
    bad = ~(np.isfinite(u) & np.isfinite(v) & np.isfinite(ud) & np.isfinite(vd))
    if np.any(bad):
        k = int(np.argmax(bad))
        raise IntegrationError(
            f"non-finite state at step {k}", {"u0": u0, "v0": v0, "step": k, "t": k * h}
        )
    times = h * np.arange(n + 1)
    return Trajectory(times, u, ud), Trajectory(times, v, vd)


def integrate_single(v0, cfg: ExperimentConfig | None = None) -> Trajectory:
    """RK4 solution of the lone-detector dynamics from t = 0 (code units)."""
    cfg = cfg or ExperimentConfig()
    h, n = _code_grid(cfg)
    y, yd = kernels.solo_path(v0, h, n)
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(yd))):
        raise IntegrationError("non-finite state in single-detector run", {"v0": v0})
    return Trajectory(h * np.arange(n + 1), y, yd)


# -- closed-form first integral -------------------------------------------------

_ROOT_PI_OVER_8 = math.sqrt(math.pi / 8.0)
_SQRT2 = math.sqrt(2.0)


def gauss_integral(lo, hi):
    """Integral of exp(-2 y^2) from ``lo`` to ``hi`` via complementary error functions."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    a = _SQRT2 * lo
    b = _SQRT2 * hi
    pos = np.minimum(a, b) >= 0.0
    neg = np.maximum(a, b) <= 0.0
    # same-sign limits: erfc differences avoid cancellation near +-1
    out = np.where(
        pos,
        special.erfc(a) - special.erfc(b),
        np.where(neg, special.erfc(-b) - special.erfc(-a), special.erf(b) - special.erf(a)),
    )
    return _ROOT_PI_OVER_8 * out


def implicit_solution_residual(u, t, u0, v0):
    """First-integral residual of the pair dynamics; zero along exact solutions.

    Returns int_{-d/2}^{d/2} e^{-2y^2} dy - int_{t-w}^{w} e^{-2y^2} dy with
    d = u0 - v0 and w = u - (u0 + v0)/2.
    """
    d = u0 - v0
    w = np.asarray(u, dtype=float) - 0.5 * (u0 + v0)
    res = gauss_integral(-0.5 * d, 0.5 * d) - gauss_integral(np.asarray(t) - w, w)
    return float(res) if np.ndim(res) == 0 else res


__all__ = [
    "DetectorState",
    "ExperimentConfig",
    "GaussianPacket",
    "IntegrationError",
    "NodeRegionError",
    "detector_packets",
    "gauss_integral",
    "implicit_solution_residual",
    "integrate_pair",
    "integrate_single",
    "packet_current",
    "packet_derivative",
    "packet_eval",
    "pair_velocity",
    "pair_velocity_from_wavefunction",
    "single_detector_velocity",
]
