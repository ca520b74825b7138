"""Weierstrass functions for the lattice Z + Z*tau.

Everything is evaluated through q-series in the nome q = exp(i*pi*tau)
after reducing the argument to the fundamental cell, so that the series
converge like |q|**n.  With X_n = exp(2 pi i n (tau + z)) and
Y_n = exp(2 pi i n (tau - z)), c_n = 1 / (1 - q**(2n)):

    wp(z)   = -eta1 + pi^2 / sin^2(pi z) - 4 pi^2 sum n c_n (X_n + Y_n)
    zeta(z) =  eta1 z + pi cot(pi z) - 2 pi i sum c_n (X_n - Y_n)

and sigma from the Jacobi triple product.  Valid for |Im z| < Im tau.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import elliprf

from .config import DEFAULT, Config
from .errors import DomainError, PoleError

PI = math.pi
TWO_PI_I = 2j * math.pi
KINDS = ("wp", "wp_prime", "wp_second", "zeta", "sigma")


@dataclass(frozen=True)
class LatticeInvariants:
    tau: complex
    q: complex
    e1: complex
    e2: complex
    e3: complex
    g2: complex
    g3: complex
    eta1: complex
    eta2: complex

    @property
    def eta3(self) -> complex:
        return self.eta1 + self.eta2

    @property
    def e(self) -> tuple:
        return (self.e1, self.e2, self.e3)

    def eta(self, k: int) -> complex:
        return (0.0, self.eta1, self.eta2, self.eta3)[k]

    def half_period(self, k: int) -> complex:
        return (0.0, 0.5, 0.5 * self.tau, 0.5 * (1 + self.tau))[k]

    def as_dict(self) -> dict:
        return {"tau": self.tau, "q": self.q, "e1": self.e1, "e2": self.e2, "e3": self.e3,
                "g2": self.g2, "g3": self.g3, "eta1": self.eta1, "eta2": self.eta2,
                "eta3": self.eta3}


@dataclass(frozen=True)
class TorusPoint:
    z: complex
    z0: complex
    m: int
    n: int


def check_tau(tau) -> complex:
    tau = complex(tau)
    if not (tau.imag > 0) or not np.isfinite(tau.real):
        raise DomainError(f"tau must lie in the upper half plane, got {tau}")
    return tau


def _n_terms(absq: float, power: int, tol: float, cap: int) -> int:
    # smallest K with K^power |q|^K < tol (worst case |Im z| = Im tau / 2)
    lq = -math.log(absq)
    k = 1
    while k < cap and power * math.log(k) - k * lq > math.log(tol):
        k += 1
    return k


class Lattice:
    """Per-tau series data.  Build through :func:`lattice` (memoized)."""

    def __init__(self, tau: complex, cfg: Config = DEFAULT):
        tau = check_tau(tau)
        self.tau = tau
        self.cfg = cfg
        self.q = np.exp(1j * PI * tau)
        absq = abs(self.q)
        self.K = _n_terms(absq, 3, cfg.series_tol, cfg.max_series_terms)
        if 3 * math.log(self.K) + self.K * math.log(absq) > math.log(cfg.series_tol):
            raise DomainError(f"q-series needs more than {cfg.max_series_terms} terms at tau={tau} "
                              "(Im tau too small); move tau into the fundamental domain")
        n = np.arange(1, self.K + 1, dtype=float)
        self.n = n
        q2n = np.exp(TWO_PI_I * n * tau)
        self.c = 1.0 / (1.0 - q2n)
        self.q2n = q2n
        e2_series = 1.0 - 24.0 * np.sum(n * q2n * self.c)
        self.eta1 = complex(PI ** 2 / 3.0 * e2_series)
        self.eta2 = complex(self.eta1 * tau - TWO_PI_I)
        th2, th3, th4 = theta_constants(tau, cfg)
        c = PI ** 2 / 3.0
        e1 = c * (th3 ** 4 + th4 ** 4)
        e2 = -c * (th2 ** 4 + th3 ** 4)
        e3 = c * (th2 ** 4 - th4 ** 4)
        g2 = 2.0 * (e1 * e1 + e2 * e2 + e3 * e3)
        g3 = 4.0 * e1 * e2 * e3
        self.inv = LatticeInvariants(tau, complex(self.q), complex(e1), complex(e2), complex(e3),
                                     complex(g2), complex(g3), self.eta1, self.eta2)

    # -- reduction -----------------------------------------------------
    def reduce(self, z):
        z = np.asarray(z, dtype=complex)
        y = z.imag / self.tau.imag
        x = z.real - y * self.tau.real
        n = np.floor(y + 0.5 + 1e-12)
        m = np.floor(x + 0.5 + 1e-12)
        z0 = z - m - n * self.tau
        return z0, m.astype(np.int64), n.astype(np.int64)

    def _check_poles(self, z0, m, n):
        d = np.abs(z0)
        bad = d < self.cfg.pole_threshold
        if np.any(bad):
            i = int(np.flatnonzero(bad.ravel())[0])
            mm, nn = int(m.ravel()[i]), int(n.ravel()[i])
            raise PoleError(f"pole at lattice point {mm}+{nn}*tau", mm + nn * self.tau, (mm, nn))

    # -- raw series on reduced arguments -----------------------------------
    def _xy(self, z0):
        zz = z0[..., None]
        X = np.exp(TWO_PI_I * self.n * (self.tau + zz))
        Y = np.exp(TWO_PI_I * self.n * (self.tau - zz))
        return X, Y

    def _wp0(self, z0):
        X, Y = self._xy(z0)
        s = np.sin(PI * z0)
        return -self.eta1 + PI ** 2 / s ** 2 - 4 * PI ** 2 * np.sum(self.n * self.c * (X + Y), axis=-1)

    def _wp1_0(self, z0):
        X, Y = self._xy(z0)
        s = np.sin(PI * z0)
        return (-2 * PI ** 3 * np.cos(PI * z0) / s ** 3
                - 8j * PI ** 3 * np.sum(self.n ** 2 * self.c * (X - Y), axis=-1))

    def _wp2_0(self, z0):
        X, Y = self._xy(z0)
        s2 = np.sin(PI * z0) ** 2
        return (2 * PI ** 4 * (3 - 2 * s2) / s2 ** 2
                + 16 * PI ** 4 * np.sum(self.n ** 3 * self.c * (X + Y), axis=-1))

    def _zeta0(self, z0):
        X, Y = self._xy(z0)
        return (self.eta1 * z0 + PI / np.tan(PI * z0)
                - TWO_PI_I * np.sum(self.c * (X - Y), axis=-1))

    def _logsigma0(self, z0):
        zz = z0[..., None]
        a = np.log1p(-self.q2n * np.exp(TWO_PI_I * zz))
        b = np.log1p(-self.q2n * np.exp(-TWO_PI_I * zz))
        corr = np.sum(a + b - 2 * np.log1p(-self.q2n), axis=-1)
        with np.errstate(divide="ignore"):
            ls = np.log(np.sin(PI * z0) / PI)
        return 0.5 * self.eta1 * z0 ** 2 + ls + corr

    # -- public evaluation ---------------------------------------------------
    def wp(self, z):
        z0, m, n = self.reduce(z)
        self._check_poles(z0, m, n)
        return self._wp0(z0)

    def wp_prime(self, z):
        z0, m, n = self.reduce(z)
        self._check_poles(z0, m, n)
        return self._wp1_0(z0)

    def wp_second(self, z):
        z0, m, n = self.reduce(z)
        self._check_poles(z0, m, n)
        return self._wp2_0(z0)

    def zeta(self, z):
        z0, m, n = self.reduce(z)
        self._check_poles(z0, m, n)
        return self._zeta0(z0) + m * self.eta1 + n * self.eta2

    def log_sigma(self, z):
        """log sigma(z) on some branch; exp of it is sigma(z)."""
        z = np.asarray(z, dtype=complex)
        z0, m, n = self.reduce(z)
        w = m + n * self.tau
        sign = (m + n + m * n) % 2
        return (self._logsigma0(z0) + (m * self.eta1 + n * self.eta2) * (z0 + 0.5 * w)
                + 1j * PI * sign)

    def sigma(self, z):
        z = np.asarray(z, dtype=complex)
        z0, m, n = self.reduce(z)
        out = np.exp(self.log_sigma(z))
        return np.where(np.abs(z0) == 0, 0.0, out)


def theta_constants(tau: complex, cfg: Config = DEFAULT):
    """Jacobi theta_2, theta_3, theta_4 at argument 0 (nome exp(i pi tau))."""
    q = np.exp(1j * PI * tau)
    lq = -math.log(abs(q))
    K = max(4, int(math.sqrt(-math.log(cfg.series_tol) / lq)) + 3)
    n = np.arange(0, K + 1, dtype=float)
    th2 = 2 * np.sum(np.exp(1j * PI * tau * (n + 0.5) ** 2))
    m = n[1:]
    qn2 = np.exp(1j * PI * tau * m ** 2)
    th3 = 1 + 2 * np.sum(qn2)
    th4 = 1 + 2 * np.sum((-1.0) ** m * qn2)
    return complex(th2), complex(th3), complex(th4)


@functools.lru_cache(maxsize=256)
def _lattice_cached(tau: complex, cfg: Config) -> Lattice:
    return Lattice(tau, cfg)


def lattice(tau, cfg: Config = DEFAULT) -> Lattice:
    return _lattice_cached(check_tau(tau), cfg)


def invariants(tau, cfg: Config = DEFAULT) -> LatticeInvariants:
    return lattice(tau, cfg).inv


def _scalarize(v, like):
    return complex(v) if np.ndim(like) == 0 else v


def eval_weierstrass(kind: str, z, tau, cfg: Config = DEFAULT):
    """Evaluate one of ``wp, wp_prime, wp_second, zeta, sigma`` at z."""
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}")
    L = lattice(tau, cfg)
    return _scalarize(getattr(L, kind)(z), z)


def wp(z, tau, cfg: Config = DEFAULT):
    return _scalarize(lattice(tau, cfg).wp(z), z)


def wp_prime(z, tau, cfg: Config = DEFAULT):
    return _scalarize(lattice(tau, cfg).wp_prime(z), z)


def zeta(z, tau, cfg: Config = DEFAULT):
    return _scalarize(lattice(tau, cfg).zeta(z), z)


def sigma(z, tau, cfg: Config = DEFAULT):
    return _scalarize(lattice(tau, cfg).sigma(z), z)


def reduce_point(z, tau, cfg: Config = DEFAULT) -> TorusPoint:
    L = lattice(tau, cfg)
    z0, m, n = L.reduce(complex(z))
    return TorusPoint(complex(z), complex(z0), int(m), int(n))


def half_period_mu(k: int, tau, cfg: Config = DEFAULT) -> complex:
    """mu_k = wp''(omega_k/2) / 2, k in {1, 2, 3}."""
    if k not in (1, 2, 3):
        raise ValueError("k must be 1, 2 or 3")
    L = lattice(tau, cfg)
    return complex(0.5 * L.wp_second(L.inv.half_period(k)))


def wp_inverse(x, tau, cfg: Config = DEFAULT) -> complex:
    """A point u in the fundamental cell with wp(u) = x.

    Seeds from Carlson's R_F (u = R_F(x-e1, x-e2, x-e3) up to sign and
    lattice), falls back to a local square-root seed near the e_k and to a
    coarse seed grid, and polishes with Newton.  The result is reduced.
    """
    x = complex(x)
    L = lattice(tau, cfg)
    inv = L.inv
    scale = 1.0 + abs(x)

    def polish(u):
        for _ in range(60):
            try:
                f = complex(L.wp(u)) - x
                d = complex(L.wp_prime(u))
            except PoleError:
                return None
            if d == 0:
                return None
            du = f / d
            u = complex(L.reduce(u - du)[0])
            if abs(du) < 1e-15 * (1 + abs(u)):
                break
        try:
            if abs(complex(L.wp(u)) - x) < 1e-9 * scale:
                return u
        except PoleError:
            pass
        return None

    seeds = []
    if abs(x) > 1e12:
        return complex(1.0 / np.sqrt(x))
    with np.errstate(all="ignore"):
        u0 = complex(elliprf(x - inv.e1, x - inv.e2, x - inv.e3))
    if np.isfinite(u0):
        seeds.append(u0)
    for k in (1, 2, 3):
        ek = inv.e[k - 1]
        mu = (ek - inv.e[k % 3]) * (ek - inv.e[(k + 1) % 3])
        if abs(x - ek) < 0.3 * abs(mu) ** 0.5 + 1e-300:
            seeds.insert(0, inv.half_period(k) + complex(np.sqrt((x - ek) / mu)))
    for u in seeds:
        r = polish(u)
        if r is not None:
            return r
    for a in np.linspace(-0.45, 0.45, 7):
        for b in np.linspace(-0.45, 0.45, 7):
            r = polish(a + b * tau)
            if r is not None:
                return r
    raise DomainError(f"could not invert wp at {x}")
