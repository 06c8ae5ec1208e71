import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp
from scipy.special import expit

from pilotwave import _accel, kernels


@given(x=st.floats(-800, 800))
def test_sigmoid_matches_reference_and_is_symmetric(x):
    s = kernels.sigmoid(x)
    assert s == pytest.approx(float(expit(x)), rel=1e-14, abs=1e-300)
    assert s + kernels.sigmoid(-x) == pytest.approx(1.0, abs=1e-15)


def test_sigmoid_never_overflows():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert kernels.sigmoid(1e6) == 1.0
        assert kernels.sigmoid(-1e6) == 0.0
        np.testing.assert_array_equal(kernels.sigmoid(np.array([-1e308, 0.0, 1e308])), [0.0, 0.5, 1.0])


def _rk4_reference(f, y, h, n):
    t = 0.0
    for _ in range(n):
        k1 = f(t, y)
        k2 = f(t + h / 2, y + h / 2 * k1)
        k3 = f(t + h / 2, y + h / 2 * k2)
        k4 = f(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return y


def test_pair_path_is_plain_rk4(each_backend):
    def f(t, y):
        return np.array([expit(-2 * t * (y[1] - y[0])), expit(-2 * t * (y[0] - y[1]))])

    u, v, ud, vd = kernels.pair_path(0.4, -0.3, 0.01, 300)
    ref = _rk4_reference(f, np.array([0.4, -0.3]), 0.01, 300)
    assert u[-1] == pytest.approx(ref[0], abs=1e-13)
    assert v[-1] == pytest.approx(ref[1], abs=1e-13)
    assert ud[0] == vd[0] == 0.5


def test_solo_path_is_plain_rk4(each_backend):
    y, yd = kernels.solo_path(-0.2, 0.01, 500)
    ref = _rk4_reference(lambda t, y: expit(t * (2 * y - t)), -0.2, 0.01, 500)
    assert y[-1] == pytest.approx(ref, abs=1e-13)
    assert yd.shape == y.shape == (501,)


@pytest.mark.skipif(len(_accel.available_backends()) < 2, reason="needs numba")
def test_backends_agree():
    rng = np.random.default_rng(1)
    u0, v0 = rng.normal(0, 0.7, 40), rng.normal(0, 0.7, 40)
    xq = rng.uniform(-5, 5, 100)
    vals = np.vstack([np.sin(np.linspace(0, 2 * np.pi, 64, endpoint=False))] * 2) * (1 + 0.5j)
    out = {}
    for b in ("numba", "numpy"):
        with _accel.backend(b):
            out[b] = (
                kernels.pair_final(u0, v0, 1e-3, 4000),
                kernels.retarded_final(u0, v0, 1.0, 1e-3, 4000, 1000),
                kernels.solo_path(0.1, 1e-3, 4000),
                kernels.cubic_interp_periodic(vals, -5.0, 10 / 64, xq),
                kernels.retarded_path(0.3, -0.1, 0.5, 1e-3, 2000, 500),
            )
    for a, b in zip(out["numba"], out["numpy"]):
        a = a if isinstance(a, tuple) else (a,)
        b = b if isinstance(b, tuple) else (b,)
        for x, y in zip(a, b):
            np.testing.assert_allclose(np.asarray(x, dtype=complex), np.asarray(y, dtype=complex),
                                       rtol=1e-12, atol=1e-13)


def test_backend_switching():
    before = _accel.get_backend()
    with _accel.backend("numpy"):
        assert _accel.get_backend() == "numpy"
    assert _accel.get_backend() == before
    with pytest.raises(ValueError):
        _accel.set_backend("fortran")


def _dde_reference(u0, v0, T, t_end):
    """Method of steps with scipy's DOP853 and its dense output as the history."""
    pieces = []

    def hist(t):
        if t <= 0:
            return np.array([u0, v0])
        for lo, hi, sol in pieces:
            if lo - 1e-9 <= t <= hi + 1e-9:
                return sol(t)
        raise AssertionError("history gap")

    y = np.array([u0, v0])
    t0 = 0.0
    while t0 < t_end - 1e-12:
        t1 = min(t0 + T, t_end)

        def rhs(t, yy):
            if t < T:
                return np.array([expit(t * (2 * yy[0] - t)), expit(t * (2 * yy[1] - t))])
            ud, vd = hist(t - T)
            return np.array([
                expit(2 * yy[0] * t - 2 * vd * (t - T) - T * (2 * t - T)),
                expit(2 * yy[1] * t - 2 * ud * (t - T) - T * (2 * t - T)),
            ])

        sol = solve_ivp(rhs, (t0, t1), y, method="DOP853", rtol=1e-12, atol=1e-13, dense_output=True)
        pieces.append((t0, t1, sol.sol))
        y = sol.y[:, -1]
        t0 = t1
    return hist


@pytest.mark.parametrize("u0, v0, T", [(0.3, -0.2, 1.0), (-0.1, 0.05, 2.0), (0.6, 0.5, 0.1)])
def test_retarded_path_matches_independent_solver(each_backend, u0, v0, T):
    h_target = 1e-3
    D = int(np.ceil(T / h_target - 1e-9))
    h = T / D
    n = int(np.ceil(6.0 / h - 1e-9))
    u, v, _, _, reached = kernels.retarded_path(u0, v0, T, h, n, D)
    assert reached == n
    ref = _dde_reference(u0, v0, T, n * h)
    for k in range(0, n + 1, n // 12):
        ru, rv = ref(k * h)
        assert u[k] == pytest.approx(ru, abs=1e-7)
        assert v[k] == pytest.approx(rv, abs=1e-7)


def test_retarded_path_converges_at_fourth_order():
    errs = []
    ref = _dde_reference(0.2, -0.15, 1.0, 4.0)(4.0)
    for D in (25, 50, 100):
        h = 1.0 / D
        u, v, *_ = kernels.retarded_path(0.2, -0.15, 1.0, h, 4 * D, D)
        errs.append(abs(u[-1] - ref[0]) + abs(v[-1] - ref[1]))
    assert errs[0] / errs[1] > 10 and errs[1] / errs[2] > 10


def test_pre_delay_segment_is_bitwise_solo(each_backend):
    T, h, D = 1.5, 1e-3, 1500
    u, v, ud, vd, _ = kernels.retarded_path(0.37, -0.21, T, h, 3000, D)
    ys, yds = kernels.solo_path(0.37, h, D)
    assert np.array_equal(u[: D + 1], ys)
    assert np.array_equal(ud[:D], yds[:D])


def test_retarded_zero_delay_is_bitwise_pair(each_backend):
    a = kernels.retarded_path(0.37, -0.21, 0.0, 1e-3, 2000, 0)
    b = kernels.pair_path(0.37, -0.21, 1e-3, 2000)
    for x, y in zip(a[:4], b):
        assert np.array_equal(x, y)


def test_cubic_interp_reproduces_cubics(each_backend):
    x = np.linspace(-4, 4, 64, endpoint=False)
    dx = x[1] - x[0]
    poly = lambda z: 0.3 * z**3 - z**2 + 2 * z - 1  # noqa: E731
    vals = np.vstack([poly(x), 1j * poly(x)])
    xq = np.linspace(-3.5, 3.3, 57)
    out = kernels.cubic_interp_periodic(vals, -4.0, dx, xq)
    np.testing.assert_allclose(out[0].real, poly(xq), atol=1e-11)
    np.testing.assert_allclose(out[1].imag, poly(xq), atol=1e-11)
    # periodic wrap
    np.testing.assert_allclose(kernels.cubic_interp_periodic(vals, -4.0, dx, xq + 8.0), out, atol=1e-11)
