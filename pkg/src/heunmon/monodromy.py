"""Monodromy of y'' = I_n(z; B, tau) y along the two lattice cycles.

Transfer matrices are built by integrating the first-order system
(y, y') along polylines.  For a fundamental matrix Y(z) with Y(z0) = I the
continuation of the row (y1, y2) along a cycle ends at (y1, y2) @ T, so an
eigenvector v of T gives a solution y = (y1, y2) @ v with y(z + w) = lam y(z).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .config import DEFAULT, Config
from .elliptic import lattice
from .errors import (IntegratorAccuracyError, InvalidInputError, NotCompletelyReducibleError,
                     PathTooCloseError)
from .tuples import IndexTuple, as_tuple

TWO_PI_I = 2j * math.pi


@dataclass(frozen=True)
class CyclePath:
    waypoints: tuple

    def reversed(self) -> "CyclePath":
        return CyclePath(tuple(reversed(self.waypoints)))

    def __add__(self, other: "CyclePath") -> "CyclePath":
        return CyclePath(self.waypoints + other.waypoints[1:])


@dataclass
class MonodromyResult:
    M1: np.ndarray
    M2: np.ndarray
    kind: str = "unclassified"  # "CR" | "NCR"
    r: complex | None = None
    s: complex | None = None
    eps1: int | None = None
    eps2: int | None = None
    C: complex | None = None  # inf encoded as complex('inf')
    unitary: bool = False
    eigvecs: np.ndarray | None = None
    lam1: np.ndarray | None = None
    lam2: np.ndarray | None = None
    dM1: np.ndarray | None = None
    dM2: np.ndarray | None = None
    local_loops: dict = field(default_factory=dict)
    degenerate: bool = False

    @property
    def completely_reducible(self) -> bool:
        return self.kind == "CR"

    def summary(self) -> dict:
        out = {"M1": self.M1, "M2": self.M2, "kind": self.kind, "unitary": self.unitary,
               "trace1": complex(np.trace(self.M1)), "trace2": complex(np.trace(self.M2))}
        if self.kind == "CR":
            out.update(r=self.r, s=self.s)
        elif self.kind == "NCR":
            out.update(eps1=self.eps1, eps2=self.eps2, C=self.C, degenerate=self.degenerate)
        if self.local_loops:
            out["local_loop_deviation"] = {str(k): v for k, v in self.local_loops.items()}
        return out


# ---------------------------------------------------------------------------
# geometry

def _coords(x, y, tau):
    return complex(x + y * tau)


def singular_points(n: IndexTuple, tau) -> list:
    """Representatives omega_k/2 of the singular set (only n_k > 0)."""
    hp = (0.0, 0.5, 0.5 * tau, 0.5 * (1 + tau))
    return [complex(hp[k]) for k in range(4) if n[k] > 0]


def _seg_dist(p, a, b):
    d = b - a
    if d == 0:
        return abs(p - a)
    t = ((p - a) * d.conjugate()).real / abs(d) ** 2
    t = min(1.0, max(0.0, t))
    return abs(p - (a + t * d))


def clearance(path: CyclePath, n: IndexTuple, tau) -> float:
    tau = complex(tau)
    pts = np.asarray(path.waypoints, dtype=complex)
    sing = singular_points(n, tau)
    ys = pts.imag / tau.imag
    xs = pts.real - ys * tau.real
    best = math.inf
    for m in range(int(math.floor(xs.min())) - 1, int(math.ceil(xs.max())) + 2):
        for k in range(int(math.floor(ys.min())) - 1, int(math.ceil(ys.max())) + 2):
            for p0 in sing:
                p = p0 + m + k * tau
                for a, b in zip(pts[:-1], pts[1:]):
                    best = min(best, _seg_dist(p, a, b))
    return best


def min_clearance(tau, cfg: Config = DEFAULT) -> float:
    return cfg.clearance_factor * min(1.0, complex(tau).imag)


def base_point(tau, cfg: Config = DEFAULT) -> complex:
    x, y = cfg.base_point
    return _coords(x, y, complex(tau))


def cycle_paths(tau, cfg: Config = DEFAULT, z0: complex | None = None):
    """Polylines for l1: z0 -> z0 + 1 and l2: z0 -> z0 + tau.

    The long legs run along the lines y = 1/4 and x = 1/4 in lattice
    coordinates, midway between rows/columns of half periods.
    """
    tau = complex(tau)
    if z0 is None:
        z0 = base_point(tau, cfg)
    y0 = z0.imag / tau.imag
    x0 = z0.real - y0 * tau.real
    l1 = CyclePath((z0, _coords(x0, 0.25, tau), _coords(x0 + 1, 0.25, tau), z0 + 1))
    l2 = CyclePath((z0, _coords(0.25, y0, tau), _coords(0.25, y0 + 1, tau), z0 + tau))
    return l1, l2


# ---------------------------------------------------------------------------
# transport

def _params(n: IndexTuple, tau, cfg: Config):
    L = lattice(tau, cfg)
    coef = np.array(n.coef, dtype=float)
    shifts = np.array([0.0, 0.5, 0.5 * L.tau, 0.5 * (1 + L.tau)], dtype=complex)
    cw = np.ascontiguousarray(L.n * L.c)
    return coef, shifts, L.tau, complex(L.eta1), cw


def transport(n, B, tau, path: CyclePath, frame=None, variational: bool = False,
              cfg: Config = DEFAULT, check_clearance: bool = True):
    """Transfer matrix of (y, y') along ``path``.

    ``frame`` holds the initial data column-wise ([[y_a, y_b], [y_a', y_b']]).
    With ``variational`` the derivative of the result with respect to B is
    returned as a second matrix.
    """
    n = as_tuple(n)
    pts = np.asarray(path.waypoints, dtype=complex)
    if frame is None:
        frame = np.eye(2, dtype=complex)
    frame = np.asarray(frame, dtype=complex)
    if pts.size < 2:
        return (frame.copy(), np.zeros((2, 2), complex)) if variational else frame.copy()
    if check_clearance:
        cl = clearance(path, n, tau)
        if cl < min_clearance(tau, cfg):
            raise PathTooCloseError(f"path clearance {cl:.3g} below minimum", None)
    coef, shifts, tau_c, eta1, cw = _params(n, tau, cfg)
    y0 = np.zeros(8 if variational else 4, dtype=complex)
    y0[0], y0[1], y0[2], y0[3] = frame[0, 0], frame[1, 0], frame[0, 1], frame[1, 1]
    y, st, k, _ = _kernels.integrate_polyline(pts, y0, complex(B), coef, shifts, tau_c, eta1, cw,
                                              cfg.ode_rtol, cfg.ode_atol, 200000)
    if st != 0:
        raise PathTooCloseError(f"step control failed on segment {k} (status {st})",
                                complex(pts[k]))
    T = np.array([[y[0], y[2]], [y[1], y[3]]])
    if variational:
        dT = np.array([[y[4], y[6]], [y[5], y[7]]])
        return T, dT
    return T


def local_loop(n, B, tau, k: int, cfg: Config = DEFAULT, nvert: int = 48) -> float:
    """max |L - I| for a small polygonal loop around omega_k/2."""
    n = as_tuple(n)
    tau = complex(tau)
    hp = (0.0, 0.5, 0.5 * tau, 0.5 * (1 + tau))
    c = hp[k]
    others = []
    for j in range(4):
        for m in (-1, 0, 1):
            for l in (-1, 0, 1):
                p = hp[j] + m + l * tau
                if abs(p - c) > 1e-12:
                    others.append(abs(p - c))
    rho = 0.3 * min(others)
    ang = np.linspace(0.0, 2 * math.pi, nvert + 1)
    pts = c + rho * np.exp(1j * ang)
    pts[-1] = pts[0]
    L = transport(n, B, tau, CyclePath(tuple(pts)), cfg=cfg, check_clearance=False)
    return float(np.max(np.abs(L - np.eye(2))))


def monodromy_pair(n, B, tau, cfg: Config = DEFAULT, variational: bool = False,
                   local_check: bool = True) -> MonodromyResult:
    """Transfer matrices along l1 and l2 with identity frame at the base point."""
    n = as_tuple(n)
    l1, l2 = cycle_paths(tau, cfg)
    if clearance(l1, n, tau) < min_clearance(tau, cfg) or clearance(l2, n, tau) < min_clearance(tau, cfg):
        rng = np.random.default_rng(cfg.base_seed)
        for _ in range(20):
            x, y = rng.uniform(0.1, 0.4, size=2)
            l1, l2 = cycle_paths(tau, cfg, z0=_coords(x, y, complex(tau)))
            if min(clearance(l1, n, tau), clearance(l2, n, tau)) >= min_clearance(tau, cfg):
                break
        else:
            raise PathTooCloseError("no admissible base point found")
    if variational:
        M1, dM1 = transport(n, B, tau, l1, variational=True, cfg=cfg, check_clearance=False)
        M2, dM2 = transport(n, B, tau, l2, variational=True, cfg=cfg, check_clearance=False)
    else:
        M1 = transport(n, B, tau, l1, cfg=cfg, check_clearance=False)
        M2 = transport(n, B, tau, l2, cfg=cfg, check_clearance=False)
        dM1 = dM2 = None
    res = MonodromyResult(M1=M1, M2=M2, dM1=dM1, dM2=dM2)
    if local_check:
        for k in range(4):
            if n[k] > 0:
                dev = local_loop(n, B, tau, k, cfg)
                res.local_loops[k] = dev
                if dev > cfg.local_loop_tol:
                    raise IntegratorAccuracyError(
                        f"local monodromy at half period {k} deviates from I by {dev:.2e}")
    return res


# ---------------------------------------------------------------------------
# classification

def canonical_rs(r, s):
    """Representative of (r, s) modulo Z^2 and the sign flip.

    Real parts go to [0, 1); of (r, s) and (-r, -s) (reduced again) the
    lexicographically smaller one wins.  Values within 1e-9 of 1 wrap to 0
    so that the choice is stable under round-off.
    """
    def red(v):
        v = complex(v)
        x = v.real - math.floor(v.real)
        if x > 1 - 1e-9:
            x = 0.0
        return complex(x, v.imag)

    a = (red(r), red(s))
    b = (red(-complex(r)), red(-complex(s)))

    def key(p):
        return tuple(round(t, 9) for t in (p[0].real, p[1].real, p[0].imag, p[1].imag))

    best = min(a, b, key=key)
    if np.isrealobj(r) and np.isrealobj(s):
        return best[0].real, best[1].real
    return best


def rs_distance(p, q) -> float:
    """Distance between (r, s) pairs modulo Z^2 and the sign flip."""
    def d(u, v):
        out = 0.0
        for x, y in zip(u, v):
            w = complex(x) - complex(y)
            out = max(out, abs(complex(w.real - round(w.real), w.imag)))
        return out

    return min(d(p, q), d(p, (-complex(q[0]), -complex(q[1]))))


def near_half_lattice(r, s, tol: float) -> bool:
    return all(abs(complex(2 * v) - round(complex(2 * v).real)) < 2 * tol for v in (r, s))


def classify(M1, M2, cfg: Config = DEFAULT, result: MonodromyResult | None = None) -> MonodromyResult:
    M1 = np.asarray(M1, dtype=complex)
    M2 = np.asarray(M2, dtype=complex)
    res = result if result is not None else MonodromyResult(M1=M1, M2=M2)
    scale = max(1.0, np.linalg.norm(M1) * np.linalg.norm(M2))
    comm = np.linalg.norm(M1 @ M2 - M2 @ M1)
    if comm > 1e-7 * scale:
        raise InvalidInputError(f"matrices do not commute (|[M1,M2]| = {comm:.2e})")
    t1, t2 = np.trace(M1), np.trace(M2)
    ptol = cfg.parabolic_tol
    I2 = np.eye(2)

    def parabolic(t):
        if abs(t - 2) < ptol:
            return 1
        if abs(t + 2) < ptol:
            return -1
        return 0

    e1, e2 = parabolic(t1), parabolic(t2)
    if e1 and e2:
        N1 = e1 * M1 - I2
        N2 = e2 * M2 - I2
        n1, n2 = np.linalg.norm(N1), np.linalg.norm(N2)
        rt = cfg.rank_tol * max(1.0, np.linalg.norm(M1), np.linalg.norm(M2))
        res.kind = "NCR"
        res.eps1, res.eps2 = e1, e2
        res.unitary = False
        if n1 < rt and n2 < rt:
            res.C = complex("inf")
            res.degenerate = True
        elif n1 < rt:
            res.C = complex("inf")
        else:
            res.C = complex(np.vdot(N1, N2) / np.vdot(N1, N1))
        return res
    # completely reducible: diagonalize the matrix with distinct eigenvalues
    Mref = M1 if not e1 else M2
    w, V = np.linalg.eig(Mref)
    V = V / np.linalg.norm(V, axis=0)
    # eigenvalues of both matrices on the shared eigenvectors
    lam1 = np.array([np.vdot(V[:, j], M1 @ V[:, j]) for j in range(2)])
    lam2 = np.array([np.vdot(V[:, j], M2 @ V[:, j]) for j in range(2)])
    s = -cmath.log(lam1[0]) / TWO_PI_I
    r = cmath.log(lam2[0]) / TWO_PI_I
    res.kind = "CR"
    res.eigvecs = V
    res.lam1, res.lam2 = lam1, lam2
    r, s = canonical_rs(r, s)
    res.r, res.s = complex(r), complex(s)
    res.unitary = bool(all(abs(abs(l) - 1) < cfg.unitary_tol for l in np.concatenate([lam1, lam2])))
    return res


def monodromy(n, B, tau, cfg: Config = DEFAULT, variational: bool = False,
              local_check: bool = False) -> MonodromyResult:
    """monodromy_pair followed by classify."""
    res = monodromy_pair(n, B, tau, cfg, variational=variational, local_check=local_check)
    return classify(res.M1, res.M2, cfg, result=res)


def rs_with_derivative(n, B, tau, cfg: Config = DEFAULT):
    """(r, s) on the eigenvector branch of the first eigenvector, with d/dB.

    Returned (r, s) are *not* canonicalized, so that they vary analytically
    with B; the derivatives are exact up to integration error.
    """
    res = monodromy_pair(n, B, tau, cfg, variational=True, local_check=False)
    M1, M2 = res.M1, res.M2
    t1 = np.trace(M1)
    Mref = M1 if min(abs(t1 - 2), abs(t1 + 2)) > 1e-4 else M2
    w, V = np.linalg.eig(Mref)
    Vinv = np.linalg.inv(V)
    u = Vinv[0]
    v = V[:, 0]
    lam1 = u @ M1 @ v
    lam2 = u @ M2 @ v
    dl1 = u @ res.dM1 @ v
    dl2 = u @ res.dM2 @ v
    s = -cmath.log(lam1) / TWO_PI_I
    r = cmath.log(lam2) / TWO_PI_I
    ds = -dl1 / lam1 / TWO_PI_I
    dr = dl2 / lam2 / TWO_PI_I
    return complex(r), complex(s), complex(dr), complex(ds), res


def rs_from_zero_set(a, tau, cfg: Config = DEFAULT, canonical: bool = True):
    """(r, s) from sum(a) - sum n_k w_k/2 = r + s tau and the zeta sum."""
    if getattr(a, "branch_point", False):
        raise NotCompletelyReducibleError("zero set is self-paired (branch point)")
    L = lattice(tau, cfg)
    inv = L.inv
    n = a.n
    pts = np.asarray(a.points, dtype=complex)
    w = (0.0, 1.0, inv.tau, 1 + inv.tau)
    A = complex(np.sum(pts) - sum(n[k] * w[k] for k in range(4)) / 2)
    Zs = complex(np.sum(L.zeta(pts)) - sum(n[k] * inv.eta(k) for k in range(4)) / 2)
    s = (inv.eta1 * A - Zs) / TWO_PI_I
    r = A - s * inv.tau
    if canonical:
        return canonical_rs(r, s)
    return r, s


def route(z_from: complex, z_to: complex, tau) -> CyclePath:
    """Polyline from z_from to z_to that keeps away from the half periods.

    Long legs run on the lines x, y in 1/4 + Z/2 (lattice coordinates), which
    stay a quarter period away from every point of E[2].
    """
    tau = complex(tau)

    def co(z):
        y = z.imag / tau.imag
        return z.real - y * tau.real, y

    def safe(v):
        return math.floor(v * 2) / 2 + 0.25

    xa, ya = co(complex(z_from))
    xb, yb = co(complex(z_to))
    ra = safe(ya)
    cb = safe(xb)
    rb = safe(yb)
    wp = [(xa, ya), (xa, ra), (cb, ra), (cb, rb), (xb, yb)]
    out = []
    for x, y in wp:
        z = _coords(x, y, tau)
        if not out or abs(out[-1] - z) > 1e-15:
            out.append(z)
    if len(out) == 1:
        out.append(out[0])
    return CyclePath(tuple(out))


def solution_basis_at(n, B, tau, zs, cfg: Config = DEFAULT, z0: complex | None = None):
    """Values (y1, y2, y1', y2') of the identity-frame basis at points zs.

    Returns an array of shape (len(zs), 4) ordered [y1, y1', y2, y2'].
    """
    n = as_tuple(n)
    if z0 is None:
        z0 = base_point(tau, cfg)
    coef, shifts, tau_c, eta1, cw = _params(n, tau, cfg)
    out = np.empty((len(zs), 4), dtype=complex)
    y0 = np.array([1, 0, 0, 1], dtype=complex)
    for i, z in enumerate(zs):
        path = route(z0, complex(z), tau)
        cl = clearance(CyclePath(path.waypoints[:-1] + (path.waypoints[-1],)), n, tau)
        if cl < min_clearance(tau, cfg):
            raise PathTooCloseError(f"point {z} too close to a singular point", complex(z))
        y, st, k, _ = _kernels.integrate_polyline(np.asarray(path.waypoints, dtype=complex), y0,
                                                  complex(B), coef, shifts, tau_c, eta1, cw,
                                                  cfg.ode_rtol, cfg.ode_atol, 200000)
        if st != 0:
            raise PathTooCloseError(f"step control failed toward {z}", complex(z))
        out[i] = y
    return out


def sample_along(n, B, tau, pts, cfg: Config = DEFAULT):
    """Basis values at every waypoint of a polyline starting at the base point."""
    n = as_tuple(n)
    coef, shifts, tau_c, eta1, cw = _params(n, tau, cfg)
    y0 = np.array([1, 0, 0, 1], dtype=complex)
    out, st, k = _kernels.integrate_polyline_record(np.asarray(pts, dtype=complex), y0, complex(B),
                                                    coef, shifts, tau_c, eta1, cw,
                                                    cfg.ode_rtol, cfg.ode_atol, 200000)
    if st != 0:
        raise PathTooCloseError(f"step control failed on segment {k}", complex(pts[k]))
    return out
