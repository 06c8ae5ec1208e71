"""Hot inner loops: fixed-step RK4 for the detector dynamics, the
constant-delay method-of-steps integrator, and periodic cubic interpolation.

Every kernel exists twice: a loop-style ``@njit`` version and a vectorised
numpy version working on a batch of samples at once. The public functions at
the bottom dispatch on :func:`pilotwave._accel.get_backend`. Both paths
perform the same floating point operations in the same order per sample, so
they agree to rounding; only the numba path is parallel.

All dynamics here are in code units (a = p/m = 1).
"""
from __future__ import annotations

import math

import numpy as np

from . import _accel
from ._accel import njit

try:
    from numba import prange
except ImportError:  # pragma: no cover
    prange = range


# ---------------------------------------------------------------------------
# numba path
# ---------------------------------------------------------------------------


@njit
def _sig(x):
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@njit
def _pair_rhs(t, u, v):
    return _sig(-2.0 * t * (v - u)), _sig(-2.0 * t * (u - v))


@njit
def _solo_rhs(t, y):
    return _sig(t * (2.0 * y - t))


@njit
def _coupled_rhs(t, u, v, u_del, v_del, T):
    # 2ut - 2v(t-T)(t-T) - T(2t-T), regrouped so T = 0 reproduces the
    # instantaneous exponent bit for bit
    return (
        _sig(2.0 * t * (u - v_del) + T * (2.0 * v_del - 2.0 * t + T)),
        _sig(2.0 * t * (v - u_del) + T * (2.0 * u_del - 2.0 * t + T)),
    )


@njit
def _pair_path_nb(u0, v0, h, n):
    u = np.empty(n + 1)
    v = np.empty(n + 1)
    ud = np.empty(n + 1)
    vd = np.empty(n + 1)
    u[0] = u0
    v[0] = v0
    for k in range(n):
        t = k * h
        uk = u[k]
        vk = v[k]
        a1, b1 = _pair_rhs(t, uk, vk)
        ud[k] = a1
        vd[k] = b1
        a2, b2 = _pair_rhs(t + 0.5 * h, uk + 0.5 * h * a1, vk + 0.5 * h * b1)
        a3, b3 = _pair_rhs(t + 0.5 * h, uk + 0.5 * h * a2, vk + 0.5 * h * b2)
        a4, b4 = _pair_rhs(t + h, uk + h * a3, vk + h * b3)
        u[k + 1] = uk + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        v[k + 1] = vk + h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
    a, b = _pair_rhs(n * h, u[n], v[n])
    ud[n] = a
    vd[n] = b
    return u, v, ud, vd


@njit(parallel=True)
def _pair_final_nb(u0s, v0s, h, n):
    m = u0s.shape[0]
    uf = np.empty(m)
    vf = np.empty(m)
    udf = np.empty(m)
    vdf = np.empty(m)
    for i in prange(m):
        uk = u0s[i]
        vk = v0s[i]
        for k in range(n):
            t = k * h
            a1, b1 = _pair_rhs(t, uk, vk)
            a2, b2 = _pair_rhs(t + 0.5 * h, uk + 0.5 * h * a1, vk + 0.5 * h * b1)
            a3, b3 = _pair_rhs(t + 0.5 * h, uk + 0.5 * h * a2, vk + 0.5 * h * b2)
            a4, b4 = _pair_rhs(t + h, uk + h * a3, vk + h * b3)
            uk = uk + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
            vk = vk + h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        a, b = _pair_rhs(n * h, uk, vk)
        uf[i] = uk
        vf[i] = vk
        udf[i] = a
        vdf[i] = b
    return uf, vf, udf, vdf


@njit
def _solo_path_nb(y0, h, n):
    y = np.empty(n + 1)
    yd = np.empty(n + 1)
    y[0] = y0
    for k in range(n):
        t = k * h
        yk = y[k]
        a1 = _solo_rhs(t, yk)
        yd[k] = a1
        a2 = _solo_rhs(t + 0.5 * h, yk + 0.5 * h * a1)
        a3 = _solo_rhs(t + 0.5 * h, yk + 0.5 * h * a2)
        a4 = _solo_rhs(t + h, yk + h * a3)
        y[k + 1] = yk + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    yd[n] = _solo_rhs(n * h, y[n])
    return y, yd


@njit
def _retarded_into(u, v, ud, vd, T, h, n, D):
    # D = T/h exactly; D == 0 means no delay. Steps k < D use the solo form.
    dl_u = 0.0
    dl_v = 0.0
    for k in range(n):
        t = k * h
        uk = u[k]
        vk = v[k]
        if D == 0:
            a1, b1 = _coupled_rhs(t, uk, vk, uk, vk, T)
            ud[k] = a1
            vd[k] = b1
            u2 = uk + 0.5 * h * a1
            v2 = vk + 0.5 * h * b1
            a2, b2 = _coupled_rhs(t + 0.5 * h, u2, v2, u2, v2, T)
            u3 = uk + 0.5 * h * a2
            v3 = vk + 0.5 * h * b2
            a3, b3 = _coupled_rhs(t + 0.5 * h, u3, v3, u3, v3, T)
            u4 = uk + h * a3
            v4 = vk + h * b3
            a4, b4 = _coupled_rhs(t + h, u4, v4, u4, v4, T)
        elif k < D:
            a1 = _solo_rhs(t, uk)
            b1 = _solo_rhs(t, vk)
            ud[k] = a1
            vd[k] = b1
            a2 = _solo_rhs(t + 0.5 * h, uk + 0.5 * h * a1)
            b2 = _solo_rhs(t + 0.5 * h, vk + 0.5 * h * b1)
            a3 = _solo_rhs(t + 0.5 * h, uk + 0.5 * h * a2)
            b3 = _solo_rhs(t + 0.5 * h, vk + 0.5 * h * b2)
            a4 = _solo_rhs(t + h, uk + h * a3)
            b4 = _solo_rhs(t + h, vk + h * b3)
        else:
            j = k - D
            a1, b1 = _coupled_rhs(t, uk, vk, u[j], v[j], T)
            ud[k] = a1
            vd[k] = b1
            if j + 1 == D:
                dur = dl_u
                dvr = dl_v
            else:
                dur = ud[j + 1]
                dvr = vd[j + 1]
            um = 0.5 * (u[j] + u[j + 1]) + 0.125 * h * (ud[j] - dur)
            vm = 0.5 * (v[j] + v[j + 1]) + 0.125 * h * (vd[j] - dvr)
            a2, b2 = _coupled_rhs(t + 0.5 * h, uk + 0.5 * h * a1, vk + 0.5 * h * b1, um, vm, T)
            a3, b3 = _coupled_rhs(t + 0.5 * h, uk + 0.5 * h * a2, vk + 0.5 * h * b2, um, vm, T)
            a4, b4 = _coupled_rhs(t + h, uk + h * a3, vk + h * b3, u[j + 1], v[j + 1], T)
        u[k + 1] = uk + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        v[k + 1] = vk + h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        if not (math.isfinite(u[k + 1]) and math.isfinite(v[k + 1])):
            return k + 1
        if k + 1 == D:
            dl_u = _solo_rhs((k + 1) * h, u[k + 1])
            dl_v = _solo_rhs((k + 1) * h, v[k + 1])
    tn = n * h
    if D == 0:
        a, b = _coupled_rhs(tn, u[n], v[n], u[n], v[n], T)
    elif n < D:
        a = _solo_rhs(tn, u[n])
        b = _solo_rhs(tn, v[n])
    else:
        a, b = _coupled_rhs(tn, u[n], v[n], u[n - D], v[n - D], T)
    ud[n] = a
    vd[n] = b
    return n


@njit
def _retarded_path_nb(u0, v0, T, h, n, D):
    u = np.full(n + 1, np.nan)
    v = np.full(n + 1, np.nan)
    ud = np.full(n + 1, np.nan)
    vd = np.full(n + 1, np.nan)
    u[0] = u0
    v[0] = v0
    reached = _retarded_into(u, v, ud, vd, T, h, n, D)
    return u, v, ud, vd, reached


@njit(parallel=True)
def _retarded_final_nb(u0s, v0s, T, h, n, D):
    m = u0s.shape[0]
    uf = np.empty(m)
    vf = np.empty(m)
    udf = np.empty(m)
    vdf = np.empty(m)
    ok = np.empty(m, dtype=np.bool_)
    for i in prange(m):
        u = np.empty(n + 1)
        v = np.empty(n + 1)
        ud = np.empty(n + 1)
        vd = np.empty(n + 1)
        u[0] = u0s[i]
        v[0] = v0s[i]
        reached = _retarded_into(u, v, ud, vd, T, h, n, D)
        ok[i] = reached == n
        uf[i] = u[reached]
        vf[i] = v[reached]
        udf[i] = ud[n] if reached == n else np.nan
        vdf[i] = vd[n] if reached == n else np.nan
    return uf, vf, udf, vdf, ok


@njit
def _cubic_weights(f):
    return (
        -f * (f - 1.0) * (f - 2.0) / 6.0,
        (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0,
        -(f + 1.0) * f * (f - 2.0) / 2.0,
        (f + 1.0) * f * (f - 1.0) / 6.0,
    )


@njit
def _cubic_interp_nb(values, x_min, dx, xq):
    k, npts = values.shape
    m = xq.shape[0]
    out = np.empty((k, m), dtype=values.dtype)
    for q in range(m):
        s = (xq[q] - x_min) / dx
        i = int(math.floor(s))
        f = s - i
        w0, w1, w2, w3 = _cubic_weights(f)
        i0 = (i - 1) % npts
        i1 = i % npts
        i2 = (i + 1) % npts
        i3 = (i + 2) % npts
        for r in range(k):
            out[r, q] = (
                w0 * values[r, i0] + w1 * values[r, i1] + w2 * values[r, i2] + w3 * values[r, i3]
            )
    return out


# ---------------------------------------------------------------------------
# numpy path
# ---------------------------------------------------------------------------


def _sig_np(x):
    x = np.asarray(x, dtype=float)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0.0, 1.0 / (1.0 + e), e / (1.0 + e))


def _pair_rhs_np(t, u, v):
    return _sig_np(-2.0 * t * (v - u)), _sig_np(-2.0 * t * (u - v))


def _solo_rhs_np(t, y):
    return _sig_np(t * (2.0 * y - t))


def _coupled_rhs_np(t, u, v, u_del, v_del, T):
    return (
        _sig_np(2.0 * t * (u - v_del) + T * (2.0 * v_del - 2.0 * t + T)),
        _sig_np(2.0 * t * (v - u_del) + T * (2.0 * u_del - 2.0 * t + T)),
    )


def _pair_path_np(u0s, v0s, h, n, keep_path=True):
    uk = np.array(u0s, dtype=float)
    vk = np.array(v0s, dtype=float)
    shape = (n + 1,) + uk.shape
    if keep_path:
        u = np.empty(shape)
        v = np.empty(shape)
        ud = np.empty(shape)
        vd = np.empty(shape)
        u[0] = uk
        v[0] = vk
    for k in range(n):
        t = k * h
        a1, b1 = _pair_rhs_np(t, uk, vk)
        a2, b2 = _pair_rhs_np(t + 0.5 * h, uk + 0.5 * h * a1, vk + 0.5 * h * b1)
        a3, b3 = _pair_rhs_np(t + 0.5 * h, uk + 0.5 * h * a2, vk + 0.5 * h * b2)
        a4, b4 = _pair_rhs_np(t + h, uk + h * a3, vk + h * b3)
        uk = uk + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        vk = vk + h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        if keep_path:
            ud[k] = a1
            vd[k] = b1
            u[k + 1] = uk
            v[k + 1] = vk
    a, b = _pair_rhs_np(n * h, uk, vk)
    if keep_path:
        ud[n] = a
        vd[n] = b
        return u, v, ud, vd
    return uk, vk, a, b


def _solo_path_np(y0, h, n):
    yk = np.array(y0, dtype=float)
    y = np.empty((n + 1,) + yk.shape)
    yd = np.empty_like(y)
    y[0] = yk
    for k in range(n):
        t = k * h
        a1 = _solo_rhs_np(t, yk)
        a2 = _solo_rhs_np(t + 0.5 * h, yk + 0.5 * h * a1)
        a3 = _solo_rhs_np(t + 0.5 * h, yk + 0.5 * h * a2)
        a4 = _solo_rhs_np(t + h, yk + h * a3)
        yd[k] = a1
        yk = yk + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        y[k + 1] = yk
    yd[n] = _solo_rhs_np(n * h, yk)
    return y, yd


def _retarded_batch_np(u0s, v0s, T, h, n, D):
    """Method of steps for a batch; returns full (n+1, B) histories."""
    u0s = np.atleast_1d(np.asarray(u0s, dtype=float))
    v0s = np.atleast_1d(np.asarray(v0s, dtype=float))
    shape = (n + 1, u0s.shape[0])
    u = np.full(shape, np.nan)
    v = np.full(shape, np.nan)
    ud = np.full(shape, np.nan)
    vd = np.full(shape, np.nan)
    u[0] = u0s
    v[0] = v0s
    dl_u = dl_v = None
    reached = n
    for k in range(n):
        t = k * h
        uk = u[k]
        vk = v[k]
        if D == 0:
            a1, b1 = _coupled_rhs_np(t, uk, vk, uk, vk, T)
            u2 = uk + 0.5 * h * a1
            v2 = vk + 0.5 * h * b1
            a2, b2 = _coupled_rhs_np(t + 0.5 * h, u2, v2, u2, v2, T)
            u3 = uk + 0.5 * h * a2
            v3 = vk + 0.5 * h * b2
            a3, b3 = _coupled_rhs_np(t + 0.5 * h, u3, v3, u3, v3, T)
            u4 = uk + h * a3
            v4 = vk + h * b3
            a4, b4 = _coupled_rhs_np(t + h, u4, v4, u4, v4, T)
        elif k < D:
            a1 = _solo_rhs_np(t, uk)
            b1 = _solo_rhs_np(t, vk)
            a2 = _solo_rhs_np(t + 0.5 * h, uk + 0.5 * h * a1)
            b2 = _solo_rhs_np(t + 0.5 * h, vk + 0.5 * h * b1)
            a3 = _solo_rhs_np(t + 0.5 * h, uk + 0.5 * h * a2)
            b3 = _solo_rhs_np(t + 0.5 * h, vk + 0.5 * h * b2)
            a4 = _solo_rhs_np(t + h, uk + h * a3)
            b4 = _solo_rhs_np(t + h, vk + h * b3)
        else:
            j = k - D
            a1, b1 = _coupled_rhs_np(t, uk, vk, u[j], v[j], T)
            ud[k] = a1
            vd[k] = b1
            if j + 1 == D:
                dur, dvr = dl_u, dl_v
            else:
                dur, dvr = ud[j + 1], vd[j + 1]
            um = 0.5 * (u[j] + u[j + 1]) + 0.125 * h * (ud[j] - dur)
            vm = 0.5 * (v[j] + v[j + 1]) + 0.125 * h * (vd[j] - dvr)
            a2, b2 = _coupled_rhs_np(t + 0.5 * h, uk + 0.5 * h * a1, vk + 0.5 * h * b1, um, vm, T)
            a3, b3 = _coupled_rhs_np(t + 0.5 * h, uk + 0.5 * h * a2, vk + 0.5 * h * b2, um, vm, T)
            a4, b4 = _coupled_rhs_np(t + h, uk + h * a3, vk + h * b3, u[j + 1], v[j + 1], T)
        ud[k] = a1
        vd[k] = b1
        u[k + 1] = uk + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        v[k + 1] = vk + h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        if not (np.all(np.isfinite(u[k + 1])) and np.all(np.isfinite(v[k + 1]))):
            reached = k + 1
            break
        if k + 1 == D:
            dl_u = _solo_rhs_np((k + 1) * h, u[k + 1])
            dl_v = _solo_rhs_np((k + 1) * h, v[k + 1])
    if reached == n:
        tn = n * h
        if D == 0:
            a, b = _coupled_rhs_np(tn, u[n], v[n], u[n], v[n], T)
        elif n < D:
            a, b = _solo_rhs_np(tn, u[n]), _solo_rhs_np(tn, v[n])
        else:
            a, b = _coupled_rhs_np(tn, u[n], v[n], u[n - D], v[n - D], T)
        ud[n] = a
        vd[n] = b
    return u, v, ud, vd, reached


def _cubic_interp_np(values, x_min, dx, xq):
    values = np.asarray(values)
    npts = values.shape[1]
    s = (np.asarray(xq, dtype=float) - x_min) / dx
    i = np.floor(s).astype(np.int64)
    f = s - i
    w0 = -f * (f - 1.0) * (f - 2.0) / 6.0
    w1 = (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0
    w2 = -(f + 1.0) * f * (f - 2.0) / 2.0
    w3 = (f + 1.0) * f * (f - 1.0) / 6.0
    return (
        w0 * values[:, (i - 1) % npts]
        + w1 * values[:, i % npts]
        + w2 * values[:, (i + 1) % npts]
        + w3 * values[:, (i + 2) % npts]
    )


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def _use_numba():
    return _accel.get_backend() == "numba"


def sigmoid(x):
    """Overflow-safe logistic function, scalar or elementwise."""
    if np.ndim(x) == 0:
        return float(_sig(float(x))) if _use_numba() else float(_sig_np(x))
    return _sig_np(x)


def pair_path(u0, v0, h, n):
    """RK4 path of the instantaneous pair dynamics; returns (u, v, u_dot, v_dot)."""
    if _use_numba():
        return _pair_path_nb(float(u0), float(v0), float(h), int(n))
    return _pair_path_np(float(u0), float(v0), h, n)


def pair_final(u0s, v0s, h, n):
    """Final (u, v, u_dot, v_dot) for a batch of instantaneous pair runs."""
    u0s = np.ascontiguousarray(u0s, dtype=float)
    v0s = np.ascontiguousarray(v0s, dtype=float)
    if _use_numba():
        return _pair_final_nb(u0s, v0s, float(h), int(n))
    return _pair_path_np(u0s, v0s, h, n, keep_path=False)


def solo_path(y0, h, n):
    """RK4 path of the lone-detector dynamics; returns (y, y_dot)."""
    if _use_numba():
        return _solo_path_nb(float(y0), float(h), int(n))
    y, yd = _solo_path_np(float(y0), h, n)
    return y, yd


def retarded_path(u0, v0, T, h, n, D):
    """Full method-of-steps history for one run; returns (u, v, u_dot, v_dot, reached)."""
    if _use_numba():
        return _retarded_path_nb(float(u0), float(v0), float(T), float(h), int(n), int(D))
    u, v, ud, vd, reached = _retarded_batch_np([u0], [v0], T, h, n, D)
    return u[:, 0], v[:, 0], ud[:, 0], vd[:, 0], reached


def retarded_final(u0s, v0s, T, h, n, D, chunk=1024):
    """Final states for a batch of delayed runs; returns (u, v, u_dot, v_dot, ok)."""
    u0s = np.ascontiguousarray(u0s, dtype=float)
    v0s = np.ascontiguousarray(v0s, dtype=float)
    if _use_numba():
        return _retarded_final_nb(u0s, v0s, float(T), float(h), int(n), int(D))
    m = u0s.shape[0]
    out = [np.empty(m) for _ in range(4)]
    ok = np.zeros(m, dtype=bool)
    for lo in range(0, m, chunk):
        hi = min(lo + chunk, m)
        u, v, ud, vd, reached = _retarded_batch_np(u0s[lo:hi], v0s[lo:hi], T, h, n, D)
        row = min(reached, n)
        out[0][lo:hi] = u[row]
        out[1][lo:hi] = v[row]
        out[2][lo:hi] = ud[n]
        out[3][lo:hi] = vd[n]
        ok[lo:hi] = np.isfinite(u[row]) & np.isfinite(v[row]) & (reached == n)
    return out[0], out[1], out[2], out[3], ok


def cubic_interp_periodic(values, x_min, dx, xq):
    """Four-point cubic interpolation of rows of ``values`` on a periodic grid."""
    values = np.ascontiguousarray(np.atleast_2d(values))
    xq = np.ascontiguousarray(np.atleast_1d(xq), dtype=float)
    if _use_numba():
        return _cubic_interp_nb(values, float(x_min), float(dx), xq)
    return _cubic_interp_np(values, x_min, dx, xq)
