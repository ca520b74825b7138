"""Compiled inner loops: wp series and an adaptive DOP853 stepper.

The Butcher tableau and the error-norm formula are the ones shipped with
scipy's DOP853; the loop itself is jitted so that the right-hand side
(four wp evaluations per stage) does not pay Python call overhead.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit
from scipy.integrate._ivp import dop853_coefficients as _dop

NS = _dop.N_STAGES
A = np.ascontiguousarray(_dop.A[:NS, :NS])
Bw = np.ascontiguousarray(_dop.B)
C = np.ascontiguousarray(_dop.C[:NS])
E3 = np.ascontiguousarray(_dop.E3)
E5 = np.ascontiguousarray(_dop.E5)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
ERR_EXP = -1.0 / 8.0

PI = math.pi


@njit(cache=True)
def wp_nb(z, tau, eta1, cw):
    """wp(z) via the Fourier series; cw[k] = (k+1) / (1 - q^(2k+2))."""
    ni = np.round(z.imag / tau.imag)
    z = z - ni * tau
    z = z - np.round(z.real)
    s = np.sin(PI * z)
    val = -eta1 + PI * PI / (s * s)
    x1 = np.exp(2j * PI * (tau + z))
    y1 = np.exp(2j * PI * (tau - z))
    xn = x1
    yn = y1
    acc = 0j
    for k in range(cw.shape[0]):
        acc += cw[k] * (xn + yn)
        xn *= x1
        yn *= y1
    return val - 4.0 * PI * PI * acc


@njit(cache=True)
def potential_nb(z, B, coef, shifts, tau, eta1, cw):
    v = B
    for k in range(4):
        if coef[k] != 0.0:
            v += coef[k] * wp_nb(z + shifts[k], tau, eta1, cw)
    return v


@njit(cache=True)
def _rhs(t, y, za, dz, B, coef, shifts, tau, eta1, cw, out):
    z = za + t * dz
    I = potential_nb(z, B, coef, shifts, tau, eta1, cw)
    ncol = 2
    for j in range(ncol):
        out[2 * j] = dz * y[2 * j + 1]
        out[2 * j + 1] = dz * I * y[2 * j]
    if y.shape[0] > 4:
        # variational columns: w'' = I w + y  (d/dB of y'' = I y)
        for j in range(ncol):
            out[4 + 2 * j] = dz * y[4 + 2 * j + 1]
            out[4 + 2 * j + 1] = dz * (I * y[4 + 2 * j] + y[2 * j])


@njit(cache=True)
def integrate_segment(za, dz, y0, B, coef, shifts, tau, eta1, cw, rtol, atol, h0, max_steps):
    """Integrate on t in [0, 1] along z = za + t*dz.

    Returns (y_end, status, nsteps, h_last); status 0 ok, 1 step underflow,
    2 too many steps.
    """
    n = y0.shape[0]
    K = np.empty((NS + 1, n), dtype=np.complex128)
    y = y0.copy()
    f = np.empty(n, dtype=np.complex128)
    _rhs(0.0, y, za, dz, B, coef, shifts, tau, eta1, cw, f)
    t = 0.0
    h_abs = h0
    tmp = np.empty(n, dtype=np.complex128)
    ynew = np.empty(n, dtype=np.complex128)
    fnew = np.empty(n, dtype=np.complex128)
    nsteps = 0
    while t < 1.0:
        if nsteps >= max_steps:
            return y, 2, nsteps, h_abs
        min_step = 1e-13
        if h_abs < min_step:
            return y, 1, nsteps, h_abs
        rejected = False
        while True:
            if h_abs < min_step:
                return y, 1, nsteps, h_abs
            h = h_abs
            t_new = t + h
            if t_new > 1.0:
                t_new = 1.0
            h = t_new - t
            # stages
            for i in range(n):
                K[0, i] = f[i]
            for s in range(1, NS):
                for i in range(n):
                    acc = 0j
                    for j in range(s):
                        acc += K[j, i] * A[s, j]
                    tmp[i] = y[i] + acc * h
                _rhs(t + C[s] * h, tmp, za, dz, B, coef, shifts, tau, eta1, cw, fnew)
                for i in range(n):
                    K[s, i] = fnew[i]
            for i in range(n):
                acc = 0j
                for j in range(NS):
                    acc += K[j, i] * Bw[j]
                ynew[i] = y[i] + h * acc
            _rhs(t + h, ynew, za, dz, B, coef, shifts, tau, eta1, cw, fnew)
            for i in range(n):
                K[NS, i] = fnew[i]
            e5 = 0.0
            e3 = 0.0
            for i in range(n):
                sc = atol + max(abs(y[i]), abs(ynew[i])) * rtol
                a5 = 0j
                a3 = 0j
                for j in range(NS + 1):
                    a5 += K[j, i] * E5[j]
                    a3 += K[j, i] * E3[j]
                e5 += (abs(a5) / sc) ** 2
                e3 += (abs(a3) / sc) ** 2
            if e5 == 0.0 and e3 == 0.0:
                err = 0.0
            else:
                err = h * e5 / math.sqrt((e5 + 0.01 * e3) * n)
            if err < 1.0:
                if err == 0.0:
                    factor = MAX_FACTOR
                else:
                    factor = min(MAX_FACTOR, SAFETY * err ** ERR_EXP)
                if rejected:
                    factor = min(1.0, factor)
                h_abs = h * factor
                break
            h_abs = h * max(MIN_FACTOR, SAFETY * err ** ERR_EXP)
            rejected = True
        t = t_new
        for i in range(n):
            y[i] = ynew[i]
            f[i] = fnew[i]
        nsteps += 1
    return y, 0, nsteps, h_abs


@njit(cache=True)
def integrate_polyline(pts, y0, B, coef, shifts, tau, eta1, cw, rtol, atol, max_steps):
    """Chain integrate_segment over consecutive waypoints."""
    y = y0.copy()
    total = 0
    h = 0.05
    for k in range(pts.shape[0] - 1):
        dz = pts[k + 1] - pts[k]
        if dz == 0:
            continue
        y, st, ns, h_last = integrate_segment(pts[k], dz, y, B, coef, shifts, tau, eta1, cw,
                                              rtol, atol, min(h, 0.1), max_steps)
        total += ns
        if st != 0:
            return y, st, k, total
        # step sizes are in t-units of the segment; rescale for the next one
        h = h_last * abs(dz) / max(abs(pts[min(k + 2, pts.shape[0] - 1)] - pts[k + 1]), 1e-300)
    return y, 0, -1, total


@njit(cache=True)
def integrate_polyline_record(pts, y0, B, coef, shifts, tau, eta1, cw, rtol, atol, max_steps):
    """Like integrate_polyline but keeps the state at every waypoint."""
    n = y0.shape[0]
    out = np.empty((pts.shape[0], n), dtype=np.complex128)
    y = y0.copy()
    out[0] = y
    h = 0.05
    for k in range(pts.shape[0] - 1):
        dz = pts[k + 1] - pts[k]
        if dz == 0:
            out[k + 1] = y
            continue
        y, st, ns, h_last = integrate_segment(pts[k], dz, y, B, coef, shifts, tau, eta1, cw,
                                              rtol, atol, min(h, 0.1), max_steps)
        if st != 0:
            return out, st, k
        out[k + 1] = y
        h = h_last * abs(dz) / max(abs(pts[min(k + 2, pts.shape[0] - 1)] - pts[k + 1]), 1e-300)
    return out, 0, -1
