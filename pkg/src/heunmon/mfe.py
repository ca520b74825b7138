"""Mean field equation side: developing maps, even solutions, counting.

Even solutions of Delta u + e^u = 8 pi sum n_k delta_{w_k/2} are never
computed by a PDE solver.  They are synthesized from unitary monodromy,
u = log 8|f'|^2 / (1 + |f|^2)^2 with f = y_a / y_-a, and only checked.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import heun
from . import monodromy as mono
from .config import DEFAULT, Config
from .elliptic import lattice
from .errors import (HeunmonError, InvalidInputError, PreconditionError, UnitarityError)
from .tuples import IndexTuple, as_tuple

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# developing map

@dataclass
class DevelopingMap:
    a: heun.ZeroSet
    tau: complex
    r: float
    s: float
    cfg: Config = DEFAULT

    def __post_init__(self):
        self._L = lattice(self.tau, self.cfg)
        self._pts = np.asarray(self.a.points, dtype=complex)
        self._zsum = complex(np.sum(self._L.zeta(self._pts)))

    def log_f(self, z):
        """log f = 2 z sum zeta(a_i) + sum log sigma(z - a_i) - log sigma(z + a_i)."""
        z = np.asarray(z, dtype=complex)
        out = 2 * z * self._zsum
        for p in self._pts:
            out = out + self._L.log_sigma(z - p) - self._L.log_sigma(z + p)
        return out

    def f(self, z):
        return np.exp(self.log_f(z))

    def g(self, z):
        """f'/f."""
        z = np.asarray(z, dtype=complex)
        out = 2 * self._zsum + 0 * z
        for p in self._pts:
            out = out + self._L.zeta(z - p) - self._L.zeta(z + p)
        return out

    def fprime(self, z):
        return self.f(z) * self.g(z)

    def u(self, z):
        # log 8|f'|^2/(1+|f|^2)^2 = log 2 + 2 log|g| - 2 log cosh(log|f|)
        lf = np.real(self.log_f(z))
        g = np.abs(self.g(z))
        return math.log(2.0) + 2 * np.log(g) - 2 * _logcosh(lf)


def _logcosh(x):
    x = np.abs(x)
    return x + np.log1p(np.exp(-2 * x)) - math.log(2.0)


def developing_map(a, tau, cfg: Config = DEFAULT, tol: float = 1e-8) -> DevelopingMap:
    """f = y_a / y_-a for a zero set with real monodromy data (r, s)."""
    tau = complex(tau)
    if getattr(a, "branch_point", False):
        raise UnitarityError("zero set is self-paired; monodromy is not completely reducible")
    r, s = mono.rs_from_zero_set(a, tau, cfg, canonical=False)
    r, s = complex(r), complex(s)
    if abs(r.imag) > tol or abs(s.imag) > tol:
        raise UnitarityError(f"(r, s) = ({r:.6g}, {s:.6g}) is not real; u would not be doubly periodic")
    if mono.near_half_lattice(r.real, s.real, 1e-8):
        raise UnitarityError("(r, s) lies in (1/2) Z^2")
    return DevelopingMap(a, tau, r.real, s.real, cfg)


def invariant_residuals(dm: DevelopingMap, zs) -> dict:
    """f(-z) f(z) - 1, u(z) - u(-z) and u(z + w) - u(z) at the given points."""
    zs = np.asarray(zs, dtype=complex)
    lf = dm.log_f(zs) + dm.log_f(-zs)
    # exp(log f(z) + log f(-z)) == 1 up to 2 pi i multiples
    prod = np.abs(np.exp(lf) - 1)
    sym = np.abs(dm.u(zs) - dm.u(-zs))
    per = np.maximum(np.abs(dm.u(zs + 1) - dm.u(zs)), np.abs(dm.u(zs + dm.tau) - dm.u(zs)))
    return {"f_inversion": float(prod.max()), "u_even": float(sym.max()), "u_periodic": float(per.max())}


# ---------------------------------------------------------------------------
# residual suite

# central differences, 8th order
_D1 = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0.0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])
_D2 = np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560])


def _schwarzian_fd(dm: DevelopingMap, z, h):
    # phi(z + k h) - phi(z) with phi = log f', taken as logs of ratios
    ks = np.arange(-4, 5)
    zk = z + ks * h
    lfp = dm.log_f(zk) + np.log(dm.g(zk))
    d = lfp - lfp[4]
    d = (d.imag + np.pi) % (2 * np.pi) - np.pi
    d = (lfp - lfp[4]).real + 1j * d
    p1 = np.dot(_D1, d) / h
    p2 = np.dot(_D2, d) / h ** 2
    return p2 - 0.5 * p1 * p1


def _schwarzian_exact(dm: DevelopingMap, z):
    L = dm._L
    g = dm.g(z)
    g1 = sum(-L.wp(z - p) + L.wp(z + p) for p in dm._pts)
    g2 = sum(-L.wp_prime(z - p) + L.wp_prime(z + p) for p in dm._pts)
    p1 = g + g1 / g
    p2 = g1 + g2 / g - (g1 / g) ** 2
    return p2 - 0.5 * p1 * p1


def _excluded(dm: DevelopingMap, z, delta):
    return _sing_dist(dm, z) < delta


def _sing_dist(dm: DevelopingMap, z) -> float:
    bad = list(heun.half_periods(dm.tau)) + list(dm._pts) + list(-dm._pts)
    return min(heun.lattice_distance(z - b, dm.tau) for b in bad)


def default_grid(dm: DevelopingMap, m: int = 7, delta: float = 0.08):
    """Points of an m x m lattice-coordinate grid outside the exclusion disks."""
    out = []
    for x in np.linspace(0.07, 0.93, m):
        for y in np.linspace(0.07, 0.93, m):
            z = mono._coords(x, y, dm.tau)
            if not _excluded(dm, z, delta):
                out.append(z)
    return out


def residual_suite(dm: DevelopingMap, grid=None, h: float = 1e-3, delta: float = 0.08,
                   fd_step: float = 0.02) -> dict:
    """PDE, Schwarzian and cone-order checks for a developing map."""
    n = dm.a.n
    tau = dm.tau
    grid = default_grid(dm, delta=delta) if grid is None else list(grid)
    for z in grid:
        if _excluded(dm, z, delta):
            raise PreconditionError(f"grid point {z} lies within {delta} of E[2] or of +-a")
    zs = np.asarray(grid, dtype=complex)
    B = dm.a.B
    I = heun.potential(n, B, tau, zs)
    # step proportional to the distance to the nearest singularity of log f'
    sch_fd = np.array([_schwarzian_fd(dm, z, fd_step * _sing_dist(dm, z)) for z in zs])
    sch_ex = np.array([_schwarzian_exact(dm, z) for z in zs])
    sres = float(np.max(np.abs(sch_fd + 2 * I)))
    sres_exact = float(np.max(np.abs(sch_ex + 2 * I)))

    def pde(hh):
        c = dm.u(zs)
        lap = (dm.u(zs + hh) + dm.u(zs - hh) + dm.u(zs + 1j * hh) + dm.u(zs - 1j * hh) - 4 * c) / hh ** 2
        return float(np.max(np.abs(lap + np.exp(c))))

    p1, p2 = pde(h), pde(h / 2)
    # cone orders: slope of u against 4 log|z - w_k/2|
    cones = {}
    hp = heun.half_periods(tau)
    for k in range(4):
        if n[k] == 0:
            continue
        rad = np.geomspace(1e-4, 1e-3, 6)
        angs = [0.3, 1.9, 4.1]
        slopes = []
        for t in angs:
            zz = hp[k] + rad * np.exp(1j * t)
            uu = dm.u(zz)
            slopes.append(np.polyfit(np.log(rad), uu, 1)[0] / 4)
        cones[k] = float(np.mean(slopes))
    return {"pde_residual": p1, "pde_residual_half": p2, "pde_ratio": p1 / p2 if p2 > 0 else math.inf,
            "h": h, "schwarzian_residual": sres, "schwarzian_residual_exact": sres_exact,
            "cone_orders": cones, "grid_size": len(zs)}


# ---------------------------------------------------------------------------
# counting even solutions via unitary monodromy

@dataclass
class CountResult:
    n: IndexTuple
    tau: complex
    count: int
    B: list
    certificates: list
    region: tuple
    reliable: bool = True
    skipped: int = 0
    notes: dict = field(default_factory=dict)


def default_region(n, tau, cfg: Config = DEFAULT):
    n = as_tuple(n)
    e = lattice(tau, cfg).inv.e
    center = -sum(n[k] * (n[k] + 2 * n[0]) * e[k - 1] for k in (1, 2, 3)) / 3
    half = 4 * (1 + max(abs(x) for x in e))
    return (center.real - half, center.real + half, center.imag - half, center.imag + half)


def _imag_rs_newton(n, B, tau, cfg, iters=30, tol=1e-11):
    """Newton on B -> (Im r, Im s); returns (B, converged)."""
    for _ in range(iters):
        r, s, dr, ds, _res = mono.rs_with_derivative(n, B, tau, cfg)
        F = np.array([r.imag, s.imag])
        if np.max(np.abs(F)) < tol:
            return B, True
        # d Im r / d(Re B, Im B) = (Im dr, Re dr)
        J = np.array([[dr.imag, dr.real], [ds.imag, ds.real]])
        try:
            d = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            return B, False
        step = complex(d[0], d[1])
        lim = 0.25 * (1 + abs(B))
        if abs(step) > lim:
            step *= lim / abs(step)
        B = B + step
    return B, False


def unitary_certificate(n, B, tau, cfg: Config = DEFAULT) -> dict | None:
    """Monodromy certificate for B, or None if the monodromy is not unitary."""
    res = mono.monodromy(n, B, tau, cfg, local_check=True)
    if res.kind != "CR" or not res.unitary:
        return None
    r, s = res.r.real, res.s.real
    if abs(res.r.imag) > 1e-7 or abs(res.s.imag) > 1e-7 or mono.near_half_lattice(r, s, 1e-6):
        return None
    return {"B": complex(B), "r": r, "s": s, "trace1": complex(np.trace(res.M1)),
            "trace2": complex(np.trace(res.M2)), "local_loops": dict(res.local_loops)}


def count_even_solutions(n, tau, B_region=None, resolution: int | None = None,
                         cfg: Config = DEFAULT) -> CountResult:
    """Number of B in the region with unitary monodromy."""
    n = as_tuple(n)
    tau = complex(tau)
    region = tuple(B_region) if B_region is not None else default_region(n, tau, cfg)
    x0, x1, y0, y1 = region
    m = resolution or cfg.count_resolution
    xs = np.linspace(x0, x1, m)
    ys = np.linspace(y0, y1, m)
    found = []
    skipped = 0
    reliable = True
    for x in xs:
        for y in ys:
            try:
                B, ok = _imag_rs_newton(n, complex(x, y), tau, cfg)
            except HeunmonError as exc:
                skipped += 1
                log.debug("seed %s skipped: %s", complex(x, y), exc)
                continue
            if not ok:
                continue
            if not (x0 <= B.real <= x1 and y0 <= B.imag <= y1):
                continue
            if any(abs(B - b) < 1e-6 * (1 + abs(B)) for b in found):
                continue
            found.append(B)
    found.sort(key=lambda b: (round(b.real, 8), round(b.imag, 8)))
    Bs, certs = [], []
    span = max(x1 - x0, y1 - y0)
    for B in found:
        try:
            c = unitary_certificate(n, B, tau, cfg)
        except HeunmonError as exc:
            log.debug("certificate failed at %s: %s", B, exc)
            c = None
        if c is None:
            continue
        edge = min(B.real - x0, x1 - B.real, B.imag - y0, y1 - B.imag)
        if edge < 0.02 * span:
            reliable = False
        Bs.append(B)
        certs.append(c)
    return CountResult(n, tau, len(Bs), Bs, certs, region, reliable, skipped)


def count_stable(n, tau, resolution: int | None = None, cfg: Config = DEFAULT) -> CountResult:
    """Count in the default region and confirm it is unchanged when the region doubles."""
    x0, x1, y0, y1 = default_region(n, tau, cfg)
    c = count_even_solutions(n, tau, (x0, x1, y0, y1), resolution, cfg)
    cx, cy = (x0 + x1) / 2, (y0 + y1) / 2
    big = (cx - (x1 - x0), cx + (x1 - x0), cy - (y1 - y0), cy + (y1 - y0))
    c2 = count_even_solutions(n, tau, big, resolution, cfg)
    c.notes["doubled_region_count"] = c2.count
    if c2.count != c.count:
        c.reliable = False
    return c


def even_solution(n, B, tau, cfg: Config = DEFAULT) -> DevelopingMap:
    """Developing map for a unitary B (zero set taken from the even product)."""
    a = heun.extract_zero_set(n, B, tau, cfg)
    return developing_map(a, tau, cfg)


def B_from_rs(n, r, s, tau, seeds=None, cfg: Config = DEFAULT, tol: float = 1e-7):
    """B with monodromy data +-(r, s) mod Z^2, by Newton on wp(r(B) + s(B) tau).

    Returns the list of distinct solutions found from the seeds.
    """
    n = as_tuple(n)
    tau = complex(tau)
    L = lattice(tau, cfg)
    target = complex(L.wp(r + s * tau))
    if seeds is None:
        x0, x1, y0, y1 = default_region(n, tau, cfg)
        seeds = [complex(x, y) for x in np.linspace(x0, x1, 7) for y in np.linspace(y0, y1, 7)]
    out = []
    for B in seeds:
        B = complex(B)
        try:
            for _ in range(30):
                rb, sb, dr, ds, _res = mono.rs_with_derivative(n, B, tau, cfg)
                sig = rb + sb * tau
                F = complex(L.wp(sig)) - target
                dF = complex(L.wp_prime(sig)) * (dr + ds * tau)
                if dF == 0:
                    break
                step = F / dF
                lim = 0.25 * (1 + abs(B))
                if abs(step) > lim:
                    step *= lim / abs(step)
                B -= step
                if abs(step) < 1e-12 * (1 + abs(B)):
                    break
            rb, sb, *_ = mono.rs_with_derivative(n, B, tau, cfg)
        except HeunmonError:
            continue
        if mono.rs_distance((rb, sb), (r, s)) > tol:
            continue
        if not any(abs(B - b) < 1e-6 * (1 + abs(B)) for b in out):
            out.append(B)
    out.sort(key=lambda b: (round(b.real, 8), round(b.imag, 8)))
    return out


# ---------------------------------------------------------------------------
# isomonodromy

def isomonodromy_companion(n: int) -> IndexTuple:
    n = int(n)
    if n < 1:
        raise InvalidInputError("n must be a positive integer")
    if n % 2 == 0:
        return IndexTuple(n // 2 - 1, n // 2, n // 2, n // 2)
    return IndexTuple((n + 1) // 2, (n - 1) // 2, (n - 1) // 2, (n - 1) // 2)


def isomonodromy_check(n: int, B, tau, cfg: Config = DEFAULT) -> tuple:
    """|tr M_j(H((n,0,0,0))) - tr M_j(H(companion))| for j = 1, 2."""
    a = mono.monodromy_pair(IndexTuple(int(n), 0, 0, 0), B, tau, cfg, local_check=False)
    comp = isomonodromy_companion(n)
    if tuple(comp) == (int(n), 0, 0, 0):
        return 0.0, 0.0
    b = mono.monodromy_pair(comp, B, tau, cfg, local_check=False)
    return (float(abs(np.trace(a.M1) - np.trace(b.M1))), float(abs(np.trace(a.M2) - np.trace(b.M2))))
