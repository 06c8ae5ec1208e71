import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pilotwave import wavefield as wf
from pilotwave.guidance import velocity_field


@pytest.fixture
def grid():
    return wf.default_grid()


def test_grid_geometry():
    g = wf.Grid1D(-2.0, 2.0, 64)
    assert g.dx == pytest.approx(4.0 / 64, rel=1e-12)
    assert g.x[0] == -2.0 and g.x[-1] == pytest.approx(2.0 - g.dx)
    assert g.k.shape == (64,)


@pytest.mark.parametrize("args", [(1.0, 1.0, 64), (2.0, 1.0, 64), (0.0, 1.0, 4)])
def test_grid_rejects_bad_geometry(args):
    with pytest.raises(ValueError):
        wf.Grid1D(*args)


def test_normalize_constant_is_already_unit():
    g = wf.Grid1D(0.0, 1.0, 100)
    psi = wf.normalize(wf.WaveFunction1D(g, np.ones(100, complex)))
    np.testing.assert_allclose(psi.amplitudes, 1.0 + 0j, atol=1e-14)


def test_normalize_scaled_and_zero(grid):
    base = wf.gaussian(grid)
    scaled = wf.normalize(base.with_amplitudes(7.0 * base.amplitudes))
    assert abs(scaled.norm() - 1.0) < 1e-12
    np.testing.assert_allclose(scaled.amplitudes, base.amplitudes, atol=1e-14)
    with pytest.raises(wf.DegenerateWavefunctionError, match="degenerate wavefunction"):
        wf.normalize(base.with_amplitudes(np.zeros(grid.n_points, complex)))


def test_nonfinite_amplitudes_rejected(grid):
    amps = np.ones(grid.n_points, complex)
    amps[3] = np.nan
    with pytest.raises(ValueError):
        wf.WaveFunction1D(grid, amps)


def test_gaussian_density_matches_closed_form(grid):
    rho = wf.density(wf.gaussian(grid, a=1.0))
    np.testing.assert_allclose(rho, np.exp(-grid.x**2) / np.sqrt(np.pi), atol=1e-12)
    assert grid.x[np.argmax(rho)] == 0.0
    assert abs(rho.sum() * grid.dx - 1.0) < 1e-8


@given(p=st.floats(-5, 5))
def test_density_ignores_plane_wave_phase(p):
    g = wf.default_grid()
    env = wf.gaussian(g)
    boosted = env.with_amplitudes(env.amplitudes * np.exp(1j * p * g.x))
    np.testing.assert_allclose(wf.density(boosted), wf.density(env), atol=1e-15)


def test_potential_kinds(grid):
    assert np.all(wf.Potential1D.free(grid).values == 0)
    h = wf.Potential1D.harmonic(grid, k=2.0, center=1.0)
    assert h(np.array([1.0, 2.0])) == pytest.approx([0.0, 1.0])
    c = wf.Potential1D.custom(grid, np.cos(2 * np.pi * grid.x / 40.0))
    assert c(np.array([0.013]), grid)[0] == pytest.approx(np.cos(2 * np.pi * 0.013 / 40), abs=1e-9)
    with pytest.raises(ValueError):
        wf.Potential1D.custom(grid, np.ones(5))


def test_free_propagation_matches_closed_form(grid):
    psi = wf.propagate(wf.gaussian(grid), wf.Potential1D.free(grid), 1e-3, 1000)
    ref = wf.free_gaussian(grid, 1.0)
    assert psi.time == pytest.approx(1.0)
    assert np.max(np.abs(psi.amplitudes - ref.amplitudes)) < 1e-4
    _, width = wf.position_stats(psi)
    assert width == pytest.approx(float(wf.free_gaussian_width(1.0)), abs=1e-4)


def test_norm_preserved(grid):
    psi = wf.gaussian(grid, a=2.0, momentum=1.5)
    out = wf.propagate(psi, wf.Potential1D.harmonic(grid, 0.5), 1e-3, 1000)
    assert abs(out.norm() - 1.0) < 1e-8


def test_centroid_moves_with_group_velocity(grid):
    out = wf.propagate(wf.gaussian(grid, momentum=1.0), wf.Potential1D.free(grid), 1e-3, 1000)
    mean, _ = wf.position_stats(out)
    assert abs(mean - 1.0) < 1e-3


def test_ground_state_modulus_is_stationary(grid):
    psi0 = wf.harmonic_ground_state(grid)
    out = wf.propagate(psi0, wf.Potential1D.harmonic(grid), 1e-3, 2000)
    assert np.max(np.abs(np.abs(out.amplitudes) - np.abs(psi0.amplitudes))) < 1e-6


def test_stability_checks(grid):
    psi = wf.gaussian(grid)
    with pytest.raises(wf.UnstableParametersError, match="potential phase"):
        wf.propagate(psi, wf.Potential1D.harmonic(grid, k=100.0), 0.1, 1)
    with pytest.raises(wf.UnstableParametersError, match="kinetic phase"):
        wf.propagate(wf.gaussian(grid, a=25.0), wf.Potential1D.free(grid), 0.5, 1)
    narrow = wf.Grid1D(-5.0, 5.0, 256)
    with pytest.raises(wf.UnstableParametersError, match="packet widths"):
        wf.propagate(wf.gaussian(narrow, a=0.2), wf.Potential1D.free(narrow), 1e-5, 1)


def test_continuity_equation_residual():
    g = wf.Grid1D(-20.0, 20.0, 4096)  # dx ~ 0.01
    dt = 1e-4
    free = wf.Potential1D.free(g)
    psi_mid = wf.propagate(wf.gaussian(g), free, dt, 5000)
    after = wf.propagate(psi_mid, free, dt, 1)
    earlier = wf.propagate(wf.gaussian(g), free, dt, 4999)
    drho_dt = (wf.density(after) - wf.density(earlier)) / (2 * dt)
    rho = wf.density(psi_mid)
    inside = rho > 1e-10 * rho.max()
    current = np.zeros_like(rho)
    current[inside] = rho[inside] * velocity_field(psi_mid, g.x[inside])
    div = (np.roll(current, -1) - np.roll(current, 1)) / (2 * g.dx)
    assert np.max(np.abs(drho_dt + div)[2:-2]) < 1e-3


def test_spectral_derivatives_of_gaussian(grid):
    stack = wf.spectral_derivatives(wf.gaussian(grid))
    x = grid.x
    g0 = np.pi**-0.25 * np.exp(-0.5 * x**2)
    np.testing.assert_allclose(stack[1].real, -x * g0, atol=1e-12)
    np.testing.assert_allclose(stack[2].real, (x**2 - 1) * g0, atol=1e-11)


def test_schrodinger_provider_interpolates_and_restarts(grid):
    psi0 = wf.gaussian(grid)
    prov = wf.SchrodingerProvider(psi0, dt=1e-2)
    late = prov.wavefunction(0.5)
    ref = wf.free_gaussian(grid, 0.5)
    assert np.max(np.abs(late.amplitudes - ref.amplitudes)) < 1e-8
    mid = prov.derivative_stack(0.255)[0]
    lin = 0.5 * (prov.derivative_stack(0.25)[0] + prov.derivative_stack(0.26)[0])
    np.testing.assert_allclose(mid, lin, atol=1e-14)
    early = prov.wavefunction(0.1)  # behind the cache: recompute from the start
    assert np.max(np.abs(early.amplitudes - wf.free_gaussian(grid, 0.1).amplitudes)) < 1e-8
