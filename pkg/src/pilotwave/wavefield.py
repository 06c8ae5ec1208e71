"""One-dimensional wavefunctions on a uniform periodic grid.

Propagation is spectral split-step (Strang): half a potential kick, an exact
kinetic step in wavenumber space, another half kick. Each factor is a pure
phase, so the discrete L2 norm is preserved to rounding.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

#: maximum phase advance per step for any occupied mode
PHASE_LIMIT = np.pi
#: spectral amplitude (relative to the peak) below which a mode counts as empty
OCCUPIED_MODE_THRESHOLD = 1e-10
#: the domain must span at least this many rms packet widths
MIN_DOMAIN_WIDTHS = 8.0


class DegenerateWavefunctionError(ValueError):
    pass


class UnstableParametersError(ValueError):
    pass


@dataclass(frozen=True)
class Grid1D:
    x_min: float
    x_max: float
    n_points: int = 1024

    def __post_init__(self):
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")
        if int(self.n_points) != self.n_points or self.n_points < 8:
            raise ValueError("n_points must be an integer >= 8")
        object.__setattr__(self, "n_points", int(self.n_points))

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def dx(self) -> float:
        return self.length / self.n_points

    @property
    def x(self) -> np.ndarray:
        # endpoint excluded: x_max is identified with x_min
        return self.x_min + self.dx * np.arange(self.n_points)

    @property
    def k(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.dx)

    def contains(self, x, margin=0.0) -> np.ndarray:
        x = np.asarray(x)
        return (x >= self.x_min + margin) & (x <= self.x_max - margin)


def default_grid() -> Grid1D:
    return Grid1D(-20.0, 20.0, 1024)


@dataclass(frozen=True)
class WaveFunction1D:
    grid: Grid1D
    amplitudes: np.ndarray
    time: float = 0.0
    mass: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.grid.n_points,):
            raise ValueError(
                f"amplitudes have shape {amps.shape}, grid expects ({self.grid.n_points},)"
            )
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes must be finite")
        if self.mass <= 0 or self.hbar <= 0:
            raise ValueError("mass and hbar must be positive")
        object.__setattr__(self, "amplitudes", amps)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.dx))

    def with_amplitudes(self, amplitudes, time=None) -> "WaveFunction1D":
        return replace(self, amplitudes=amplitudes, time=self.time if time is None else time)


@dataclass(frozen=True)
class Potential1D:
    values: np.ndarray
    tag: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or not np.all(np.isfinite(vals)):
            raise ValueError("potential values must be a finite 1-D array")
        object.__setattr__(self, "values", vals)

    @classmethod
    def free(cls, grid: Grid1D) -> "Potential1D":
        return cls(np.zeros(grid.n_points), tag="free")

    @classmethod
    def harmonic(cls, grid: Grid1D, k: float = 1.0, center: float = 0.0) -> "Potential1D":
        return cls(0.5 * k * (grid.x - center) ** 2, tag="harmonic", params={"k": k, "center": center})

    @classmethod
    def custom(cls, grid: Grid1D, values) -> "Potential1D":
        vals = np.asarray(values, dtype=float)
        if vals.shape != (grid.n_points,):
            raise ValueError(f"expected {grid.n_points} potential samples, got shape {vals.shape}")
        return cls(vals, tag="custom")

    def __call__(self, x, grid: Grid1D | None = None):
        """Analytic value where known; custom samples need ``grid`` for cubic interpolation."""
        x = np.asarray(x, dtype=float)
        if self.tag == "free":
            return np.zeros_like(x)
        if self.tag == "harmonic":
            return 0.5 * self.params["k"] * (x - self.params["center"]) ** 2
        if grid is None:
            raise TypeError("off-grid evaluation of sampled potentials needs the grid")
        from .kernels import cubic_interp_periodic

        out = cubic_interp_periodic(self.values, grid.x_min, grid.dx, x.ravel())[0]
        return out.reshape(x.shape)


# -- construction -----------------------------------------------------------


def normalize(psi: WaveFunction1D) -> WaveFunction1D:
    """Rescale ``psi`` to unit L2 norm on its grid."""
    nrm = psi.norm()
    if not np.isfinite(nrm) or nrm <= 0.0:
        raise DegenerateWavefunctionError("degenerate wavefunction: zero norm")
    return psi.with_amplitudes(psi.amplitudes / nrm)


def density(psi: WaveFunction1D) -> np.ndarray:
    return np.abs(psi.amplitudes) ** 2


def gaussian(grid: Grid1D, a=1.0, center=0.0, momentum=0.0, mass=1.0, hbar=1.0) -> WaveFunction1D:
    """Normalised Gaussian (a/pi)^(1/4) exp(i k x - a (x - center)^2 / 2), k = momentum/hbar."""
    x = grid.x
    amps = (a / np.pi) ** 0.25 * np.exp(1j * momentum / hbar * x - 0.5 * a * (x - center) ** 2)
    return normalize(WaveFunction1D(grid, amps, 0.0, mass, hbar))


def free_gaussian(grid: Grid1D, t: float, a=1.0, mass=1.0, hbar=1.0) -> WaveFunction1D:
    """Closed-form free evolution of the zero-momentum Gaussian centred at 0.

    Not renormalised on the grid, so it can serve as an independent reference.
    """
    z = 1.0 + 1j * hbar * a * t / mass
    amps = (a / np.pi) ** 0.25 / np.sqrt(z) * np.exp(-0.5 * a * grid.x**2 / z)
    return WaveFunction1D(grid, amps, t, mass, hbar)


def free_gaussian_width(t, a=1.0, mass=1.0, hbar=1.0):
    """Standard deviation of |psi|^2 for :func:`free_gaussian`."""
    return np.sqrt((1.0 + (hbar * a * np.asarray(t) / mass) ** 2) / (2.0 * a))


def harmonic_ground_state(grid: Grid1D, k=1.0, mass=1.0, hbar=1.0) -> WaveFunction1D:
    omega = np.sqrt(k / mass)
    alpha = mass * omega / hbar
    amps = (alpha / np.pi) ** 0.25 * np.exp(-0.5 * alpha * grid.x**2)
    return normalize(WaveFunction1D(grid, amps.astype(complex), 0.0, mass, hbar))


def plane_wave(grid: Grid1D, momentum: float, mass=1.0, hbar=1.0) -> WaveFunction1D:
    amps = np.exp(1j * momentum / hbar * grid.x)
    return normalize(WaveFunction1D(grid, amps, 0.0, mass, hbar))


# -- spectral calculus -------------------------------------------------------


def spectral_derivatives(psi: WaveFunction1D) -> np.ndarray:
    """Rows psi, d psi/dx, d^2 psi/dx^2 on the grid (shape ``(3, n)``)."""
    k = psi.grid.k
    spec = np.fft.fft(psi.amplitudes)
    out = np.empty((3, psi.grid.n_points), dtype=complex)
    out[0] = psi.amplitudes
    out[1] = np.fft.ifft(1j * k * spec)
    out[2] = np.fft.ifft(-(k**2) * spec)
    return out


def position_stats(psi: WaveFunction1D) -> tuple[float, float]:
    """Mean and rms width of |psi|^2."""
    rho = density(psi)
    w = rho / rho.sum()
    x = psi.grid.x
    mean = float(np.sum(w * x))
    return mean, float(np.sqrt(np.sum(w * (x - mean) ** 2)))


# -- propagation -------------------------------------------------------------


def check_stability(psi: WaveFunction1D, v: Potential1D, dt: float) -> None:
    """Raise UnstableParametersError when split-step phases alias or the box is too small.

    Potential phase per step dt*max|V|/hbar and kinetic phase
    dt*hbar*k^2/(2m) of every occupied mode must stay below pi; the domain
    must hold MIN_DOMAIN_WIDTHS rms widths of the packet.
    """
    if not dt > 0:
        raise UnstableParametersError("dt must be positive")
    if v.values.shape != (psi.grid.n_points,):
        raise UnstableParametersError("potential length does not match grid")
    pot_phase = dt * float(np.max(np.abs(v.values))) / psi.hbar
    if pot_phase > PHASE_LIMIT:
        raise UnstableParametersError(
            f"potential phase per step {pot_phase:.3g} exceeds {PHASE_LIMIT:.3g}; reduce dt"
        )
    spec = np.abs(np.fft.fft(psi.amplitudes))
    occupied = spec > OCCUPIED_MODE_THRESHOLD * spec.max()
    k_occ = float(np.max(np.abs(psi.grid.k[occupied])))
    kin_phase = dt * psi.hbar * k_occ**2 / (2.0 * psi.mass)
    if kin_phase > PHASE_LIMIT:
        raise UnstableParametersError(
            f"kinetic phase per step {kin_phase:.3g} exceeds {PHASE_LIMIT:.3g}; reduce dt"
        )
    _, width = position_stats(psi)
    if MIN_DOMAIN_WIDTHS * width > psi.grid.length:
        raise UnstableParametersError(
            f"domain length {psi.grid.length:.3g} is under {MIN_DOMAIN_WIDTHS:g} packet widths "
            f"({width:.3g} each); wrap-around would contaminate the result"
        )


class SplitStepPropagator:
    """Reusable Strang split-step stepper for a fixed grid, potential and dt."""

    def __init__(self, grid: Grid1D, v: Potential1D, dt: float, mass=1.0, hbar=1.0):
        self.grid = grid
        self.dt = float(dt)
        self._half_kick = np.exp(-0.5j * self.dt * v.values / hbar)
        self._drift = np.exp(-0.5j * self.dt * hbar * grid.k**2 / mass)

    def step(self, amps: np.ndarray, steps: int = 1) -> np.ndarray:
        for _ in range(steps):
            amps = self._half_kick * np.fft.ifft(self._drift * np.fft.fft(self._half_kick * amps))
        return amps


def propagate(psi: WaveFunction1D, v: Potential1D, dt: float, steps: int) -> WaveFunction1D:
    """Advance ``psi`` by ``steps`` split-step increments of ``dt``."""
    if int(steps) != steps or steps < 0:
        raise ValueError("steps must be a non-negative integer")
    check_stability(psi, v, dt)
    prop = SplitStepPropagator(psi.grid, v, dt, psi.mass, psi.hbar)
    amps = prop.step(psi.amplitudes, int(steps))
    return psi.with_amplitudes(amps, time=psi.time + steps * dt)


# -- time-indexed sources for trajectory integration --------------------------


class WavefunctionProvider:
    """Source of psi(t) for trajectory integration.

    Subclasses implement :meth:`wavefunction`; :meth:`derivative_stack`
    (rows psi, psi', psi'') may be overridden for caching.
    """

    grid: Grid1D
    mass: float = 1.0
    hbar: float = 1.0
    t0: float = 0.0

    def wavefunction(self, t: float) -> WaveFunction1D:
        raise NotImplementedError

    def derivative_stack(self, t: float) -> np.ndarray:
        return spectral_derivatives(self.wavefunction(t))

    def initial_peak_density(self) -> float:
        return float(np.max(density(self.wavefunction(self.t0))))


class StaticProvider(WavefunctionProvider):
    """Returns the same psi at every time."""

    def __init__(self, psi: WaveFunction1D):
        self.psi = psi
        self.grid = psi.grid
        self.mass = psi.mass
        self.hbar = psi.hbar
        self.t0 = psi.time
        self._stack = spectral_derivatives(psi)

    def wavefunction(self, t):
        return self.psi

    def derivative_stack(self, t):
        return self._stack


class AnalyticProvider(WavefunctionProvider):
    """Wraps a callable ``t -> WaveFunction1D``."""

    def __init__(self, func, grid: Grid1D, t0=0.0, mass=1.0, hbar=1.0):
        self.func = func
        self.grid = grid
        self.t0 = t0
        self.mass = mass
        self.hbar = hbar

    def wavefunction(self, t):
        return self.func(t)


class SchrodingerProvider(WavefunctionProvider):
    """Lazily split-step-propagated psi(t), linearly interpolated between steps.

    Snapshots are produced on demand and only a short window is cached, so
    requests should arrive in roughly increasing time order (as they do from
    a trajectory integrator). A request before the cached window restarts the
    propagation from psi0.
    """

    def __init__(self, psi0: WaveFunction1D, v: Potential1D | None = None, dt: float = 1e-3,
                 cache_size: int = 8):
        v = Potential1D.free(psi0.grid) if v is None else v
        check_stability(psi0, v, dt)
        self.psi0 = psi0
        self.potential = v
        self.dt = float(dt)
        self.grid = psi0.grid
        self.mass = psi0.mass
        self.hbar = psi0.hbar
        self.t0 = psi0.time
        self._prop = SplitStepPropagator(psi0.grid, v, dt, psi0.mass, psi0.hbar)
        self._cache_size = cache_size
        self._restart()

    def _restart(self):
        self._index = 0
        self._amps = self.psi0.amplitudes.copy()
        self._stacks: dict[int, np.ndarray] = {}

    def _snapshot(self, i: int) -> np.ndarray:
        if i in self._stacks:
            return self._stacks[i]
        if i < self._index:
            self._restart()
        while self._index < i:
            self._amps = self._prop.step(self._amps)
            self._index += 1
        stack = spectral_derivatives(self.psi0.with_amplitudes(self._amps))
        self._stacks[i] = stack
        for old in [j for j in self._stacks if j < i - self._cache_size]:
            del self._stacks[old]
        return stack

    def _bracket(self, t):
        s = (t - self.t0) / self.dt
        if s < -1e-9:
            raise ValueError(f"time {t} precedes the initial time {self.t0}")
        i = int(np.floor(s + 1e-9))
        frac = s - i
        if abs(frac) < 1e-9:
            frac = 0.0
        return max(i, 0), frac

    def derivative_stack(self, t):
        i, frac = self._bracket(t)
        lo = self._snapshot(i)
        if frac == 0.0:
            return lo
        hi = self._snapshot(i + 1)
        return (1.0 - frac) * lo + frac * hi

    def wavefunction(self, t):
        return self.psi0.with_amplitudes(self.derivative_stack(t)[0].copy(), time=t)
