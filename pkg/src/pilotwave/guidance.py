"""Guidance law, quantum potential and trajectory integration in one dimension.

The velocity of a particle at x is (1/m) Re[(-i hbar d/dx psi) / psi], i.e.
(hbar/m) Im(psi'/psi); no divergence-free extra term is ever added. Grid
wavefunctions are differentiated spectrally and evaluated off-grid by
four-point cubic interpolation of their real and imaginary parts.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import kernels
from .rng import make_rng
from .wavefield import (
    Potential1D,
    SchrodingerProvider,
    StaticProvider,
    WaveFunction1D,
    WavefunctionProvider,
    density,
    spectral_derivatives,
)

#: velocity is undefined where |psi|^2 falls below this fraction of the peak
DENSITY_FLOOR_RATIO = 1e-12
#: trajectories must keep this many grid cells away from either boundary
BOUNDARY_CELLS = 4


class NodeRegionError(ValueError):
    """Velocity requested where the density is below the floor."""


class TrajectoryError(RuntimeError):
    """Integration stopped early; ``partial`` holds the samples computed so far."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        x = np.asarray(self.positions, dtype=float)
        v = np.asarray(self.velocities, dtype=float)
        if t.ndim != 1 or x.shape[0] != t.shape[0] or v.shape != x.shape:
            raise ValueError("times, positions and velocities must have matching leading length")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("times must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise ValueError("trajectory contains non-finite values")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "velocities", v)

    def __len__(self):
        return self.times.shape[0]


@dataclass(frozen=True)
class GuidanceDiagnostics:
    quantum_potential: float
    total_potential: float
    acceleration_residual: float


# -- pointwise fields -----------------------------------------------------------


def default_floor(psi: WaveFunction1D) -> float:
    return DENSITY_FLOOR_RATIO * float(np.max(density(psi)))


def _interp(stack, grid, x, rows):
    return kernels.cubic_interp_periodic(stack[:rows], grid.x_min, grid.dx, np.ravel(x))


def _check_floor(rho, floor):
    if np.any(rho <= floor):
        raise NodeRegionError(
            f"node region: density {float(np.min(rho)):.3g} at or below floor {floor:.3g}"
        )


def _velocity_from_stack(stack, grid, x, mass, hbar, floor):
    psi, dpsi = _interp(stack, grid, x, 2)
    rho = np.abs(psi) ** 2
    _check_floor(rho, floor)
    return hbar / mass * np.imag(np.conj(psi) * dpsi) / rho


def _qpot_from_stack(stack, grid, x, mass, hbar, floor, vel=None):
    psi, dpsi, d2psi = _interp(stack, grid, x, 3)
    rho = np.abs(psi) ** 2
    _check_floor(rho, floor)
    if vel is None:
        vel = hbar / mass * np.imag(np.conj(psi) * dpsi) / rho
    p2_ratio = -(hbar**2) * np.real(np.conj(psi) * d2psi) / rho
    return p2_ratio / (2.0 * mass) - 0.5 * mass * np.ravel(vel) ** 2


def _shape_like(x, values):
    if np.ndim(x) == 0:
        return float(values[0])
    return np.asarray(values).reshape(np.shape(x))


def velocity_field(psi: WaveFunction1D, x, density_floor=None):
    """Guidance velocity of ``psi`` at position(s) ``x``.

    Raises NodeRegionError where |psi(x)|^2 <= density_floor (default: 1e-12
    of the peak density).
    """
    floor = default_floor(psi) if density_floor is None else density_floor
    vel = _velocity_from_stack(spectral_derivatives(psi), psi.grid, x, psi.mass, psi.hbar, floor)
    return _shape_like(x, vel)


def marginal_velocity(branches, mass=1.0, density_floor=0.0):
    """Branch-weighted velocity when some coordinates carry no trajectory.

    ``branches`` is an iterable of ``(weight, current, density)`` with
    ``current = psi* (p psi)`` for the coordinate of interest (complex is
    fine, only its real part contributes) and ``density = |psi|^2``. Returns
    Re(sum w*current) / (m * sum w*density).
    """
    num = 0.0
    den = 0.0
    for weight, current, dens in branches:
        if weight < 0 or dens < 0:
            raise ValueError("branch weights and densities must be non-negative")
        num = num + weight * current
        den = den + weight * dens
    if not den > density_floor:
        raise NodeRegionError(f"node region: marginal density {den:.3g} <= floor {density_floor:.3g}")
    return float(np.real(num) / (mass * den))


def quantum_potential(psi: WaveFunction1D, x, v=None, density_floor=None):
    """Q = Re[(p^2 psi)/psi]/(2m) - m v^2/2 at ``x``.

    ``v`` defaults to the guidance velocity at ``x``; passing another value
    (e.g. the classical velocity of a plane wave) evaluates the expression
    with that velocity instead.
    """
    floor = default_floor(psi) if density_floor is None else density_floor
    vel = None if v is None else np.broadcast_to(np.asarray(v, dtype=float), np.shape(x))
    q = _qpot_from_stack(spectral_derivatives(psi), psi.grid, x, psi.mass, psi.hbar, floor, vel)
    return _shape_like(x, q)


def diagnostics(psi: WaveFunction1D, x: float, v: Potential1D, accel: float = 0.0) -> GuidanceDiagnostics:
    """Q, V+Q and the Newton-form residual m*accel + d(V+Q)/dx at one point."""
    h = psi.grid.dx
    pts = np.array([x - h, x, x + h])
    q = quantum_potential(psi, pts)
    w = q + v(pts, psi.grid)
    return GuidanceDiagnostics(
        quantum_potential=float(q[1]),
        total_potential=float(w[1]),
        acceleration_residual=float(psi.mass * accel + (w[2] - w[0]) / (2.0 * h)),
    )


# -- trajectories -----------------------------------------------------------


def _check_step_compat(provider, dt):
    pdt = getattr(provider, "dt", None)
    if pdt is None:
        return
    ratio = pdt / dt if pdt >= dt else dt / pdt
    if abs(ratio - round(ratio)) > 1e-9 * ratio:
        raise ValueError(
            f"trajectory dt {dt} and propagator dt {pdt} must divide one another"
        )


def integrate_trajectory(psi_provider: WavefunctionProvider, x0, t0: float, t1: float,
                         dt: float = 1e-3, density_floor=None) -> Trajectory:
    """Fixed-step RK4 solution of dx/dt = velocity_field(psi(t), x).

    ``x0`` may be a scalar or an array of starting points (integrated
    together). ``velocities`` holds the field value at each sample.
    """
    if not t1 > t0:
        raise ValueError("t1 must exceed t0")
    if not dt > 0:
        raise ValueError("dt must be positive")
    _check_step_compat(psi_provider, dt)
    steps = (t1 - t0) / dt
    n = int(round(steps))
    if n < 1 or abs(steps - n) > 1e-9 * max(1.0, steps):
        raise ValueError("(t1 - t0) must be an integer multiple of dt")

    grid = psi_provider.grid
    mass, hbar = psi_provider.mass, psi_provider.hbar
    floor = (
        DENSITY_FLOOR_RATIO * psi_provider.initial_peak_density()
        if density_floor is None
        else density_floor
    )
    margin = BOUNDARY_CELLS * grid.dx
    scalar = np.ndim(x0) == 0
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()

    times = t0 + dt * np.arange(n + 1)
    pos = np.empty((n + 1, x.size))
    vel = np.empty((n + 1, x.size))

    def field(t, xs):
        return _velocity_from_stack(psi_provider.derivative_stack(t), grid, xs, mass, hbar, floor)

    def bail(k, msg):
        partial = None
        if k >= 2:
            partial = Trajectory(
                times[:k], pos[:k, 0] if scalar else pos[:k], vel[:k, 0] if scalar else vel[:k]
            )
        raise TrajectoryError(msg, partial)

    pos[0] = x
    for k in range(n + 1):
        t = times[k]
        if not np.all(grid.contains(x, margin)):
            bail(k, f"trajectory left the domain interior at t={t:.6g}")
        try:
            k1 = field(t, x)
        except NodeRegionError as err:
            bail(k, f"{err} at t={t:.6g}")
        vel[k] = k1
        if k == n:
            break
        try:
            k2 = field(t + 0.5 * dt, x + 0.5 * dt * k1)
            k3 = field(t + 0.5 * dt, x + 0.5 * dt * k2)
            k4 = field(t + dt, x + dt * k3)
        except NodeRegionError as err:
            bail(k + 1, f"{err} near t={t:.6g}")
        x = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        pos[k + 1] = x

    if scalar:
        return Trajectory(times, pos[:, 0], vel[:, 0])
    return Trajectory(times, pos, vel)


def newton_residual(traj: Trajectory, psi_provider: WavefunctionProvider, v: Potential1D) -> np.ndarray:
    """m * x'' + d(V+Q)/dx along the interior samples of ``traj``.

    x'' is the centred second difference of the sampled positions; the
    gradient is a centred difference of V+Q with the grid spacing as step.
    """
    if len(traj) < 5:
        raise ValueError("newton_residual needs at least 5 trajectory samples")
    t = traj.times
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-9, atol=0.0):
        raise ValueError("trajectory samples must be uniformly spaced")
    h_t = dt[0]
    grid = psi_provider.grid
    mass, hbar = psi_provider.mass, psi_provider.hbar
    floor = DENSITY_FLOOR_RATIO * psi_provider.initial_peak_density()
    hx = grid.dx

    x = traj.positions.reshape(len(traj), -1)
    accel = (x[2:] - 2.0 * x[1:-1] + x[:-2]) / h_t**2
    out = np.empty_like(accel)
    for i in range(1, len(traj) - 1):
        pts = np.concatenate([x[i] - hx, x[i] + hx])
        stack = psi_provider.derivative_stack(t[i])
        w = _qpot_from_stack(stack, grid, pts, mass, hbar, floor) + v(pts, grid)
        m = x.shape[1]
        out[i - 1] = mass * accel[i - 1] + (w[m:] - w[:m]) / (2.0 * hx)
    if traj.positions.ndim == 1:
        return out[:, 0]
    return out


# -- Born-rule transport check ---------------------------------------------------


def _grid_cdf(psi: WaveFunction1D):
    rho = density(psi)
    xs = psi.grid.x
    dx = psi.grid.dx
    # cell-centred cumulative sum: CDF at the right edge of each sample cell
    edges = np.concatenate([[xs[0] - 0.5 * dx], xs + 0.5 * dx])
    cum = np.concatenate([[0.0], np.cumsum(rho) * dx])
    cum /= cum[-1]
    return edges, cum


def sample_density(psi: WaveFunction1D, n: int, rng) -> np.ndarray:
    """Inverse-transform samples from |psi|^2 (piecewise-constant per grid cell)."""
    edges, cum = _grid_cdf(psi)
    u = rng.random(n)
    return np.interp(u, cum, edges)


def density_cdf(psi: WaveFunction1D):
    edges, cum = _grid_cdf(psi)
    return lambda x: np.interp(x, edges, cum)


@dataclass(frozen=True)
class EquivarianceResult:
    ks_statistic: float
    p_value: float
    n: int
    t1: float
    seed: int
    final_positions: np.ndarray


def equivariance_check(psi0: WaveFunction1D, v: Potential1D | None = None, n: int = 10_000,
                       t1: float = 1.0, dt: float = 1e-3, seed: int = 0) -> EquivarianceResult:
    """Transport |psi0|^2-distributed points to ``t1`` and KS-compare with |psi(t1)|^2."""
    provider = SchrodingerProvider(psi0, v, dt=dt)
    rng = make_rng(seed)
    x0 = sample_density(psi0, n, rng)
    traj = integrate_trajectory(provider, x0, psi0.time, psi0.time + t1, dt)
    final = traj.positions[-1]
    cdf = density_cdf(provider.wavefunction(psi0.time + t1))
    res = stats.kstest(final, cdf)
    return EquivarianceResult(float(res.statistic), float(res.pvalue), n, t1, seed, final)


__all__ = [
    "DENSITY_FLOOR_RATIO",
    "EquivarianceResult",
    "GuidanceDiagnostics",
    "NodeRegionError",
    "StaticProvider",
    "Trajectory",
    "TrajectoryError",
    "density_cdf",
    "diagnostics",
    "equivariance_check",
    "integrate_trajectory",
    "marginal_velocity",
    "newton_residual",
    "quantum_potential",
    "sample_density",
    "velocity_field",
]
