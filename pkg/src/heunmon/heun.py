"""The equation y'' = [sum n_k(n_k+1) wp(z + w_k/2) + B] y and its
Hermite-Halphen structure.

Conventions: w_0 = 0, w_1 = 1, w_2 = tau, w_3 = 1 + tau; H(x) is the
product over k = 1..3 of (x - e_k)^{n_k}.  The even elliptic product
solution is stored in reduced form

    Phi_e(z) = P(wp(z)) / H(wp(z)),     deg P = N,

and its roots in x = wp(z) are the values wp(a_i) of the zero set.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import monodromy as mono
from .config import DEFAULT, Config
from .elliptic import lattice, wp_inverse
from .errors import (ConsistencyError, DegeneracyError, HeunmonError, PoleError, PreconditionError,
                     SignResolutionError, ZeroLocalizationError)
from .tuples import IndexTuple, as_tuple


# translation z -> z + w_j/2 permutes half periods like XOR on indices
_XOR = [[0, 1, 2, 3], [1, 0, 3, 2], [2, 3, 0, 1], [3, 2, 1, 0]]


def translate_tuple(n) -> tuple:
    """For n0 = 0: (j, n') with n'_m = n_{m xor j} and n'_0 >= 1."""
    n = as_tuple(n)
    if n.n0 >= 1:
        return 0, n
    j = next(k for k in (1, 2, 3) if n[k] > 0)
    return j, IndexTuple(*[n[_XOR[m][j]] for m in range(4)])


def half_periods(tau) -> tuple:
    tau = complex(tau)
    return (0j, 0.5 + 0j, 0.5 * tau, 0.5 * (1 + tau))


def potential(n, B, tau, z, cfg: Config = DEFAULT):
    """I_n(z; B, tau) = sum n_k(n_k+1) wp(z + w_k/2) + B."""
    n = as_tuple(n)
    L = lattice(tau, cfg)
    hp = half_periods(L.tau)
    z = np.asarray(z, dtype=complex)
    out = np.full(z.shape, complex(B))
    for k in range(4):
        if n[k]:
            out = out + n[k] * (n[k] + 1) * L.wp(z + hp[k])
    return complex(out) if out.ndim == 0 else out


def H_poly(n, tau, cfg: Config = DEFAULT) -> np.poly1d:
    inv = lattice(tau, cfg).inv
    p = np.poly1d([1.0 + 0j])
    for k in (1, 2, 3):
        for _ in range(n[k]):
            p = p * np.poly1d([1.0, -inv.e[k - 1]])
    return p


# ---------------------------------------------------------------------------
# zero sets

def lattice_distance(z, tau, cfg: Config = DEFAULT) -> float:
    """Distance from z to the nearest lattice point."""
    L = lattice(tau, cfg)
    z0 = complex(L.reduce(complex(z))[0])
    return min(abs(z0 - m - k * L.tau) for m in (-1, 0, 1) for k in (-1, 0, 1))


@dataclass
class ZeroSet:
    n: IndexTuple
    tau: complex
    points: tuple
    branch_point: bool = False
    B_input: complex | None = None
    translated: int = 0  # j when the tuple was translated by w_j/2
    notes: dict = field(default_factory=dict)

    def _L(self):
        return lattice(self.tau)

    @property
    def c(self) -> complex:
        return c_of(self.points, self.n, self.tau)

    @property
    def B(self) -> complex:
        return B_of(self.points, self.n, self.tau)

    @property
    def sigma_n(self):
        from .elliptic import reduce_point
        inv = self._L().inv
        w = (0.0, 1.0, inv.tau, 1 + inv.tau)
        s = sum(self.points) - sum(self.n[k] * w[k] for k in range(4)) / 2
        return reduce_point(s, self.tau)

    def negated(self) -> "ZeroSet":
        return ZeroSet(self.n, self.tau, tuple(-p for p in self.points), self.branch_point,
                       self.B_input, self.translated)

    # predicate flags, tolerance 1e-9 in reduced coordinates
    def in_e2(self, tol: float = 1e-9) -> list:
        return [lattice_distance(2 * a, self.tau) < tol for a in self.points]

    def satisfies_I62(self, tol: float = 1e-9) -> bool:
        if any(self.in_e2(tol)):
            return False
        return all(lattice_distance(a - b, self.tau) >= tol
                   for a, b in itertools.combinations(self.points, 2))

    def satisfies_I0620(self, tol: float = 1e-9) -> bool:
        if not self.satisfies_I62(tol):
            return False
        return all(lattice_distance(a + b, self.tau) >= tol
                   for a, b in itertools.combinations(self.points, 2))

    def satisfies_a0a(self, tol: float = 1e-9) -> bool:
        return all(lattice_distance(a + b, self.tau) >= tol
                   for a in self.points for b in self.points)


def c_of(points, n, tau, cfg: Config = DEFAULT) -> complex:
    L = lattice(tau, cfg)
    inv = L.inv
    pts = np.asarray(points, dtype=complex)
    return complex(np.sum(L.zeta(pts)) - 0.5 * sum(n[k] * inv.eta(k) for k in (1, 2, 3)))


def B_of(points, n, tau, cfg: Config = DEFAULT) -> complex:
    L = lattice(tau, cfg)
    inv = L.inv
    pts = np.asarray(points, dtype=complex)
    return complex((2 * n.n0 - 1) * np.sum(L.wp(pts))
                   - sum(n[k] * (n[k] + 2 * n.n0) * inv.e[k - 1] for k in (1, 2, 3)))


def _make_zero_set(a, n, tau) -> ZeroSet:
    if isinstance(a, ZeroSet):
        return a
    return ZeroSet(as_tuple(n), complex(tau), tuple(complex(p) for p in a))


def _check_I62(a: ZeroSet):
    e2 = a.in_e2()
    for i, flag in enumerate(e2):
        if flag:
            raise PreconditionError(f"a_{i + 1} = {a.points[i]} lies in E[2]")
    for (i, p), (j, q) in itertools.combinations(enumerate(a.points), 2):
        if lattice_distance(p - q, a.tau) < 1e-9:
            raise PreconditionError(f"a_{i + 1} and a_{j + 1} coincide on the torus")


def _check_I0620(a: ZeroSet):
    _check_I62(a)
    for (i, p), (j, q) in itertools.combinations(enumerate(a.points), 2):
        if lattice_distance(p + q, a.tau) < 1e-9:
            raise PreconditionError(f"a_{i + 1} = -a_{j + 1} on the torus")


def log_derivative(a: ZeroSet, z, cfg: Config = DEFAULT):
    """(y'/y, (y'/y)') of the ansatz solution at z."""
    L = lattice(a.tau, cfg)
    hp = half_periods(L.tau)
    z = np.asarray(z, dtype=complex)
    c = c_of(a.points, a.n, a.tau, cfg)
    g = np.full(z.shape, c)
    dg = np.zeros(z.shape, complex)
    for p in a.points:
        g = g + L.zeta(z - p)
        dg = dg - L.wp(z - p)
    for k in range(4):
        if a.n[k]:
            g = g - a.n[k] * L.zeta(z - hp[k])
            dg = dg + a.n[k] * L.wp(z - hp[k])
    return g, dg


class AnsatzSolution:
    """y_a(z) = e^{c z} prod sigma(z - a_i) / prod sigma(z - w_k/2)^{n_k}."""

    def __init__(self, a: ZeroSet, cfg: Config = DEFAULT):
        self.a = a
        self.cfg = cfg
        self.c = c_of(a.points, a.n, a.tau, cfg)
        self.B = B_of(a.points, a.n, a.tau, cfg)

    def log(self, z):
        L = lattice(self.a.tau, self.cfg)
        hp = half_periods(L.tau)
        z = np.asarray(z, dtype=complex)
        out = self.c * z
        for p in self.a.points:
            out = out + L.log_sigma(z - p)
        for k in range(4):
            if self.a.n[k]:
                out = out - self.a.n[k] * L.log_sigma(z - hp[k])
        return out

    def __call__(self, z):
        v = np.exp(self.log(z))
        return complex(v) if np.ndim(v) == 0 else v

    def ode_residual(self, z):
        """y''/y - I_n at z (vanishes iff y_a solves the equation)."""
        g, dg = log_derivative(self.a, z, self.cfg)
        return dg + g * g - potential(self.a.n, self.B, self.a.tau, z, self.cfg)


def hermite_ansatz(a, n, tau, cfg: Config = DEFAULT):
    """Return (c, B, y) for the zero set ``a``."""
    n = as_tuple(n)
    if n.n0 < 1:
        raise PreconditionError("ansatz routines need n0 >= 1; translate the tuple first "
                                "(see translate_tuple)")
    a = _make_zero_set(a, n, tau)
    if len(a.points) != n.N:
        raise PreconditionError(f"expected {n.N} points, got {len(a.points)}")
    _check_I62(a)
    y = AnsatzSolution(a, cfg)
    return y.c, y.B, y


def ansatz_residual(a, n, tau, form: str = "transcendental", cfg: Config = DEFAULT,
                    relative: bool = False) -> np.ndarray:
    """Left-minus-right sides of the ansatz conditions.

    ``transcendental``: N entries (one per a_i) followed by one entry per
    l in {1, 2, 3} with n_l > 0.  ``algebraic``: the n0 - 1 power-sum
    conditions followed by sum n_k product conditions.  With ``relative``
    every entry is divided by the sum of absolute values of its terms.
    """
    n = as_tuple(n)
    a = _make_zero_set(a, n, tau)
    L = lattice(tau, cfg)
    inv = L.inv
    hp = half_periods(L.tau)
    pts = list(a.points)
    N = len(pts)
    out, scale = [], []
    if form == "transcendental":
        _check_I62(a)
        z = {p: complex(L.zeta(p)) for p in pts}
        for i, ai in enumerate(pts):
            lhs_terms = []
            for k in (1, 2, 3):
                if n[k]:
                    lhs_terms += [n[k] * complex(L.zeta(ai + hp[k])), n[k] * complex(L.zeta(ai - hp[k])),
                                  -2 * n[k] * z[ai]]
            rhs_terms = []
            for j, aj in enumerate(pts):
                if j != i:
                    rhs_terms += [2 * complex(L.zeta(ai - aj)), 2 * z[aj], -2 * z[ai]]
            out.append(sum(lhs_terms) - sum(rhs_terms))
            scale.append(sum(abs(t) for t in lhs_terms + rhs_terms))
        for l in (1, 2, 3):
            if n[l]:
                terms = []
                for ai in pts:
                    terms += [complex(L.zeta(ai + hp[l])), complex(L.zeta(ai - hp[l])), -2 * z[ai]]
                out.append(sum(terms))
                scale.append(sum(abs(t) for t in terms))
    elif form == "algebraic":
        _check_I0620(a)
        x = [complex(L.wp(p)) for p in pts]
        d = [complex(L.wp_prime(p)) for p in pts]
        for l in range(0, n.n0 - 1):
            terms = [d[i] * x[i] ** l for i in range(N)]
            out.append(sum(terms))
            scale.append(sum(abs(t) for t in terms))
        for k in (1, 2, 3):
            ek = inv.e[k - 1]
            for l in range(1, n[k] + 1):
                terms = []
                for i in range(N):
                    prod = 1 + 0j
                    for j in range(N):
                        if j != i:
                            prod *= (x[j] - ek) ** l
                    terms.append(d[i] * prod)
                out.append(sum(terms))
                scale.append(sum(abs(t) for t in terms))
    else:
        raise ValueError(f"unknown form {form!r}")
    out = np.array(out, dtype=complex)
    if relative:
        out = out / np.maximum(np.array(scale), 1e-300) if out.size else out
    return out


def residual_norm(a, n, tau, form: str = "transcendental", cfg: Config = DEFAULT,
                  relative: bool = True) -> float:
    """Max-norm of ansatz_residual; 0 for an empty system."""
    r = np.abs(ansatz_residual(a, n, tau, form, cfg, relative))
    return float(r.max()) if r.size else 0.0


def psi_poly(a: ZeroSet, cfg: Config = DEFAULT) -> np.poly1d:
    """psi(x) = sum_h wp'(a_h) prod_{j != h} (x - wp(a_j))."""
    L = lattice(a.tau, cfg)
    x = [complex(L.wp(p)) for p in a.points]
    d = [complex(L.wp_prime(p)) for p in a.points]
    out = np.poly1d([0j])
    for h in range(len(x)):
        term = np.poly1d([d[h]])
        for j in range(len(x)):
            if j != h:
                term = term * np.poly1d([1.0, -x[j]])
        out = out + term
    return out


def order_check(a: ZeroSet, probes, cfg: Config = DEFAULT) -> float:
    """Relative mismatch between g = f'/f and d H(wp) / prod(wp - wp(a_i)).

    d is the coefficient of x^{N - n0} in psi; this is the statement that
    f' vanishes to order 2 n_k at every half period.
    """
    L = lattice(a.tau, cfg)
    n = a.n
    psi = psi_poly(a, cfg)
    N = len(a.points)
    coeffs = np.concatenate([np.zeros(max(0, N - 1 - psi.order), complex), psi.coeffs])
    # psi has degree <= N - 1; coefficient of x^{N - n0}
    deg = N - n.n0
    dcoef = coeffs[len(coeffs) - 1 - deg] if deg < len(coeffs) else 0j
    H = H_poly(n, a.tau, cfg)
    worst = 0.0
    zeta_a = [complex(L.zeta(p)) for p in a.points]
    for z in probes:
        g = sum(complex(L.zeta(z - p)) - complex(L.zeta(z + p)) + 2 * za
                for p, za in zip(a.points, zeta_a))
        x = complex(L.wp(z))
        den = np.prod([x - complex(L.wp(p)) for p in a.points])
        model = dcoef * H(x) / den
        worst = max(worst, abs(g - model) / max(abs(g), abs(model), 1e-300))
    return worst


# ---------------------------------------------------------------------------
# even product solution

def _sample_path(tau) -> np.ndarray:
    """Serpentine polyline through the half cell 0 < y < 1/2 (lattice coords)."""
    tau = complex(tau)
    xs = np.linspace(-0.4, 0.4, 9)
    rows = [0.4, 0.3, 0.2, 0.1]
    pts = [mono._coords(0.31, 0.43, tau), mono._coords(0.4, 0.4, tau)]
    for i, y in enumerate(rows):
        seq = xs[::-1] if i % 2 == 0 else xs
        for x in seq:
            pts.append(mono._coords(x, y, tau))
    # drop consecutive duplicates
    out = [pts[0]]
    for p in pts[1:]:
        if abs(p - out[-1]) > 1e-14:
            out.append(p)
    return np.array(out)


def invariant_form(M1, M2) -> np.ndarray:
    """Symmetric C with T C T^T = C for both transfer matrices (unit norm)."""
    rows = []
    for T in (M1, M2):
        a, b, c, d = T[0, 0], T[0, 1], T[1, 0], T[1, 1]
        # T C T^T - C with C = [[u, v], [v, w]]
        rows.append([a * a - 1, 2 * a * b, b * b])
        rows.append([a * c, a * d + b * c - 1, b * d])
        rows.append([c * c, 2 * c * d, d * d - 1])
    A = np.array(rows, dtype=complex)
    scale = np.linalg.norm(A, axis=1, keepdims=True)
    A = A / np.maximum(scale, 1e-300)
    U, S, Vh = np.linalg.svd(A)
    return S, Vh[-1].conj()


@dataclass
class EvenProduct:
    n: IndexTuple
    B: complex
    tau: complex
    C: np.ndarray          # symmetric 2x2, normalized
    P: np.ndarray          # monic, highest degree first, degree N
    scale: complex         # raw leading coefficient divided out
    base_point: complex
    fit_residual: float
    singular_values: np.ndarray
    C_raw: np.ndarray | None = None
    P_raw: np.ndarray | None = None

    def _R(self, x):
        H = H_poly(self.n, self.tau)
        return np.polyval(self.P, x) / H(x)

    def __call__(self, z):
        L = lattice(self.tau)
        v = self._R(L.wp(z))
        return complex(v) if np.ndim(v) == 0 else v

    def derivatives(self, z):
        """(Phi, Phi', Phi'') from the reduced form."""
        L = lattice(self.tau)
        x = L.wp(z)
        d1 = L.wp_prime(z)
        d2 = L.wp_second(z)
        P = np.poly1d(self.P)
        H = H_poly(self.n, self.tau)
        p, p1, p2 = P(x), P.deriv()(x), P.deriv(2)(x)
        h, h1, h2 = H(x), H.deriv()(x), H.deriv(2)(x)
        r = p / h
        r1 = (p1 - r * h1) / h
        r2 = (p2 - 2 * r1 * h1 - r * h2) / h
        return r, r1 * d1, r2 * d1 * d1 + r1 * d2

    def eval_ode(self, zs, cfg: Config = DEFAULT):
        """Phi_e through numerical continuation of the basis (y C y^T)."""
        Y = mono.solution_basis_at(self.n, self.B, self.tau, list(np.atleast_1d(zs)), cfg)
        y1, y2 = Y[:, 0], Y[:, 2]
        C = self.C
        return C[0, 0] * y1 * y1 + 2 * C[0, 1] * y1 * y2 + C[1, 1] * y2 * y2

    def q_value(self) -> complex:
        """-4 det C: the z-independent combination in this normalization."""
        return complex(-4 * np.linalg.det(self.C))

    def q_combination(self, z, scale: bool = False):
        """Phi'^2 - 2 Phi Phi'' + 4 I Phi^2 (constant in z); with scale=True
        also return the size of the largest term."""
        r, r1, r2 = self.derivatives(z)
        I = potential(self.n, self.B, self.tau, z)
        terms = (r1 * r1, -2 * r * r2, 4 * I * r * r)
        v = sum(terms)
        if scale:
            return v, max(abs(t) for t in terms)
        return v

    def constant_term(self) -> complex:
        """Coefficient C0 of the constant in the basis {1, wp(z + w_k/2)^j}."""
        return constant_term(self.P, self.n, self.tau)


def constant_term(P, n, tau, cfg: Config = DEFAULT) -> complex:
    """Constant term C0 of P(x)/H(x) written in powers of wp(z + w_k/2).

    Partial fractions give P/H = sum alpha_j x^j + sum beta_km (x - e_k)^-m;
    with u_k = wp(z + w_k/2) = e_k + mu_k/(x - e_k) one has
    (x - e_k)^-m = ((u_k - e_k)/mu_k)^m whose constant part is (-e_k/mu_k)^m.
    """
    inv = lattice(tau, cfg).inv
    e = inv.e
    P = np.poly1d(P)
    const = 0j
    # polynomial part: divide P by H
    H = H_poly(n, tau, cfg)
    quo, rem = np.polydiv(P.coeffs, H.coeffs)
    const += np.poly1d(quo)(0.0)
    rem = np.poly1d(rem)
    for k in (1, 2, 3):
        nk = n[k]
        if nk == 0:
            continue
        ek = e[k - 1]
        mu = (ek - e[k % 3]) * (ek - e[(k + 1) % 3])
        # G(x) = rem(x) / prod_{j != k} (x - e_j)^{n_j}; Taylor at e_k
        other = np.poly1d([1.0 + 0j])
        for j in (1, 2, 3):
            if j != k:
                for _ in range(n[j]):
                    other = other * np.poly1d([1.0, -e[j - 1]])
        # Taylor coefficients of G at e_k up to order nk - 1
        t = [0j] * nk
        # series division in powers of (x - e_k)
        num_c = [np.polyder(rem, i)(ek) / math.factorial(i) if i else rem(ek) for i in range(nk)]
        den_c = [np.polyder(other, i)(ek) / math.factorial(i) if i else other(ek) for i in range(nk)]
        for i in range(nk):
            acc = num_c[i] - sum(t[j] * den_c[i - j] for j in range(i))
            t[i] = acc / den_c[0]
        # rem/H = sum_i t_i (x - e_k)^{i - nk} + regular at e_k; beta_{k,m} = t_{nk - m}
        for m in range(1, nk + 1):
            const += t[nk - m] * (-ek / mu) ** m
    return complex(const)


def even_product_solution(n, B, tau, cfg: Config = DEFAULT, monodromy_result=None) -> EvenProduct:
    """Phi_e from the fixed vector of the symmetric squares of M1, M2."""
    n = as_tuple(n)
    tau = complex(tau)
    B = complex(B)
    res = monodromy_result or mono.monodromy_pair(n, B, tau, cfg, local_check=False)
    S, v = invariant_form(res.M1, res.M2)
    smax = max(S[0], 1e-300)
    if S[-1] > 1e-6 * smax or S[-2] < 1e-6 * smax:
        raise DegeneracyError(f"fixed-vector space is not one dimensional (singular values {S})")
    C = np.array([[v[0], v[1]], [v[1], v[2]]])
    pts = _sample_path(tau)
    Y = mono.sample_along(n, B, tau, pts, cfg)
    y1, y2 = Y[:, 0], Y[:, 2]
    phi = C[0, 0] * y1 * y1 + 2 * C[0, 1] * y1 * y2 + C[1, 1] * y2 * y2
    L = lattice(tau, cfg)
    keep = np.arange(1, len(pts))  # skip the base point duplicate
    x = L.wp(pts[keep])
    rhs = phi[keep] * H_poly(n, tau, cfg)(x)
    N = n.N
    xs = max(1.0, float(np.max(np.abs(x))))
    V = np.vander(x / xs, N + 1)
    w = 1.0 / np.maximum(np.abs(rhs), 1e-300)
    w = 1.0 / (np.abs(V).sum(axis=1) * np.max(np.abs(rhs)) / np.max(np.abs(V).sum(axis=1)) + np.abs(rhs))
    coef, *_ = np.linalg.lstsq(V * w[:, None], rhs * w, rcond=None)
    fit = V @ coef
    resid = float(np.max(np.abs(fit - rhs)) / np.max(np.abs(rhs)))
    P_raw = coef / xs ** np.arange(N, -1, -1)
    lead = P_raw[0]
    if abs(lead) < 1e-12 * np.max(np.abs(P_raw)):
        raise DegeneracyError("leading Laurent coefficient of Phi_e vanishes")
    return EvenProduct(n=n, B=B, tau=tau, C=C / lead, P=P_raw / lead, scale=complex(lead),
                       base_point=mono.base_point(tau, cfg), fit_residual=resid,
                       singular_values=S, C_raw=C, P_raw=P_raw)


# ---------------------------------------------------------------------------
# spectral polynomial

@dataclass
class SpectralPoly:
    n: IndexTuple
    tau: complex
    coeffs: np.ndarray     # monic, highest degree first
    residual: float
    nodes: int
    fitted_roots: np.ndarray | None = None   # before polishing
    polished: np.ndarray | None = None       # per root: Newton accepted

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, B):
        return np.polyval(self.coeffs, B)

    def roots(self) -> np.ndarray:
        return np.roots(self.coeffs)


def _ratio_samples(n, tau, Bs, cfg: Config, check_z: bool = True):
    """Per node: (q, C0) with q = -4 det C and C0 the constant term."""
    out = []
    probes = [mono._coords(0.21, 0.17, complex(tau)), mono._coords(-0.33, 0.29, complex(tau)),
              mono._coords(0.12, 0.38, complex(tau))]
    for B in Bs:
        E = even_product_solution(n, B, tau, cfg)
        q = E.q_value()
        if check_z:
            pairs = [E.q_combination(z, scale=True) for z in probes]
            vals = np.array([p[0] for p in pairs])
            sc = max(abs(q), max(p[1] for p in pairs), 1e-300)
            spread = float(np.max(np.abs(vals - q))) / sc
            if spread > 1e-8:
                raise ConsistencyError(f"Q combination depends on z (relative spread {spread:.2e})")
        out.append((q, E.constant_term()))
    return out


def spectral_polynomial(n, tau, cfg: Config = DEFAULT, max_half_degree: int | None = None,
                        nodes: int | None = None, radius: float | None = None,
                        polish: bool = True) -> SpectralPoly:
    """Monic odd-degree Q_n(B) such that W^2 = Q_n.

    For any normalization of Phi_e the ratio R(B) = Q/C0^2 is the same; in the
    normalization with polynomial coefficients and C0 = B^d/2 + ...,
    R = 4 Q / D with D = (2 C0)^2 monic of degree 2d and Q monic of degree
    2d + 1.  We sample R on a circle of B values and solve the linear
    problem 4 Q(B_j) C0_j^2 - q_j D(B_j) = 0 for increasing d.
    """
    n = as_tuple(n)
    tau = complex(tau)
    inv = lattice(tau, cfg).inv
    w = n.weight
    dmax = max_half_degree if max_half_degree is not None else w + 1
    M = nodes or (4 * dmax + 12)
    rho = radius if radius is not None else 0.5 * (1 + w) * max(1.0, max(abs(e) for e in inv.e))
    ang = 2 * np.pi * (np.arange(M) + 0.5) / M
    Bs = rho * np.exp(1j * ang)
    samples = _ratio_samples(n, tau, Bs, cfg)
    S = _fit_direct(n, tau, Bs, rho, samples, 2 * dmax + 1)
    if S is None:
        # q is rational in B when the leading Laurent coefficient at 0
        # depends on B; the ratio with C0 removes that factor
        S = _fit_ratio(n, tau, Bs, rho, samples, dmax)
    if polish:
        _polish_roots(S, cfg)
    return S


def _polish_roots(S: SpectralPoly, cfg: Config, iters: int = 12) -> None:
    """Refine roots of the fitted Q by Newton on tr M - (+-2).

    Roots far outside the node circle inherit the fit noise amplified by
    the extrapolation; at a root both traces are +-2, so a Newton step on
    the trace with dM/dB from the variational equation sharpens them.
    A refined root is kept only if the other trace is also +-2 and it did
    not wander towards a neighbouring root.
    """
    roots = np.roots(S.coeffs)
    S.fitted_roots = roots.copy()
    ok = np.zeros(len(roots), dtype=bool)
    out = roots.copy()
    for i, b0 in enumerate(roots):
        others = np.delete(roots, i)
        gap = np.min(np.abs(others - b0)) if len(others) else 1.0
        b = complex(b0)
        fbest, bbest = math.inf, b
        for _ in range(iters):
            M = mono.monodromy_pair(S.n, b, S.tau, cfg, variational=True, local_check=False)
            t = np.array([np.trace(M.M1), np.trace(M.M2)])
            dt = np.array([np.trace(M.dM1), np.trace(M.dM2)])
            dev = float(np.max(np.abs(t - 2 * np.sign(t.real))))
            if dev < fbest:
                fbest, bbest = dev, b
            elif dev > 10 * fbest:
                break
            j = int(np.argmax(np.abs(dt)))
            if abs(dt[j]) < 1e-300 or abs(b - b0) > 0.5 * gap:
                break
            step = (t[j] - 2 * np.sign(t[j].real)) / dt[j]
            if abs(step) < 1e-11 * (1 + abs(b)):
                break
            b -= step
        if fbest < 1e-8 * (1 + abs(bbest)) and abs(bbest - b0) <= 0.5 * gap:
            out[i] = bbest
            ok[i] = True
    S.coeffs = np.poly(out).astype(complex)
    S.polished = ok


def _fit_direct(n, tau, Bs, rho, samples, maxdeg, thr: float = 1e-7):
    """Interpolate q(B) as a polynomial; None if no odd degree stabilizes.

    Degree D is accepted when the coefficients of degree D+1 and D+2
    (stabilization window 2) vanish relative to the largest one.
    """
    q = np.array([s[0] for s in samples])
    beta = Bs / rho
    top = min(maxdeg + 2, len(Bs) - 4)
    V = np.vander(beta, top + 1, increasing=True)
    c, *_ = np.linalg.lstsq(V, q, rcond=None)
    a = np.abs(c) / np.max(np.abs(c))
    for D in range(1, top - 1, 2):
        if a[D] > thr and a[D + 1] < thr and a[D + 2] < thr:
            if np.any(a[D + 1:] > thr):
                return None
            cD = c[:D + 1] / c[D]
            coeffs = (cD * rho ** (D - np.arange(D + 1)))[::-1]
            res = float(np.linalg.norm(V[:, :D + 1] @ c[:D + 1] - q) / np.linalg.norm(q))
            return SpectralPoly(n, tau, coeffs.astype(complex), res, len(Bs))
    return None


def _fit_ratio(n, tau, Bs, rho, samples, dmax) -> SpectralPoly:
    q = np.array([s[0] for s in samples])
    c0 = np.array([s[1] for s in samples])
    beta = Bs / rho
    M = len(Bs)
    best = None
    prev = math.inf
    for d in range(0, dmax + 1):
        dq, dd = 2 * d + 1, 2 * d
        cols = [4 * rho * c0 ** 2 * beta ** i for i in range(dq)]
        cols += [-q * beta ** i for i in range(dd)]
        rhs = -4 * rho * c0 ** 2 * beta ** dq + q * beta ** dd
        wgt = 1.0 / (np.abs(4 * rho * c0 ** 2) + np.abs(q))
        A = np.array(cols).T * wgt[:, None]
        b = rhs * wgt
        sol, *_ = np.linalg.lstsq(A, b, rcond=None)
        rel = float(np.linalg.norm(A @ sol - b) / np.linalg.norm(b))
        # accept on a clear drop into the noise floor
        if rel < 1e-5 and rel < 1e-2 * prev:
            qt = np.concatenate([[1.0], sol[:dq][::-1]])  # in beta, highest first
            coeffs = qt * rho ** np.arange(0, dq + 1)  # Q(B) = rho^dq qt(B / rho)
            best = SpectralPoly(n, tau, coeffs.astype(complex), rel, M)
            break
        prev = rel
    if best is None:
        raise ConsistencyError(f"no odd degree up to {2 * dmax + 1} fits (last residual {prev:.2e})")
    return best


# ---------------------------------------------------------------------------
# zero sets from Phi_e

def _poly_roots(P) -> np.ndarray:
    r = np.roots(P)
    dP = np.polyder(P)
    for _ in range(5):
        r = r - np.polyval(P, r) / np.where(np.polyval(dP, r) == 0, 1, np.polyval(dP, r))
    return r


def _winding(f, center, radius, m: int = 64) -> int:
    ang = 2 * np.pi * np.arange(m + 1) / m
    vals = np.array([f(center + radius * np.exp(1j * t)) for t in ang])
    ph = np.unwrap(np.angle(vals))
    return int(round((ph[-1] - ph[0]) / (2 * np.pi)))


def _polish_zero_set(zs: ZeroSet, B, cfg: Config, iters: int = 6):
    """Gauss-Newton on (transcendental residual, B(a) - B) in the points."""
    n, tau = zs.n, zs.tau
    pts = np.array(zs.points, dtype=complex)

    def F(p):
        r = ansatz_residual(tuple(p), n, tau, "transcendental", cfg)
        return np.concatenate([r, [B_of(p, n, tau, cfg) - B]])

    try:
        f = F(pts)
        for _ in range(iters):
            h = 1e-7 * (1 + np.abs(pts))
            J = np.empty((len(f), len(pts)), complex)
            for k in range(len(pts)):
                q = pts.copy()
                q[k] += h[k]
                J[:, k] = (F(q) - f) / h[k]
            d, *_ = np.linalg.lstsq(J, -f, rcond=None)
            pts = pts + d
            f = F(pts)
            if np.max(np.abs(d)) < 1e-14:
                break
    except (PreconditionError, PoleError):
        return None
    return ZeroSet(n, tau, tuple(complex(p) for p in pts), B_input=zs.B_input, translated=zs.translated)


def _branch_set(n, tau, xr, B, j, qrel, cfg) -> ZeroSet:
    """Self-paired set from the roots of P: points on E[2] and +- pairs."""
    inv = lattice(tau, cfg).inv
    hp = half_periods(tau)
    scale = 1.0 + max(abs(e) for e in inv.e)
    xr = list(xr)
    pts = []
    while xr:
        x = xr.pop(0)
        if abs(x) > 1e8 * scale:
            pts.append(0j)
            continue
        k = int(np.argmin([abs(x - e) for e in inv.e]))
        if abs(x - inv.e[k]) < 1e-5 * scale:
            pts.append(hp[k + 1])
            continue
        # a double root x of P is a pair a, -a
        if xr:
            m = int(np.argmin([abs(x - y) for y in xr]))
            if abs(x - xr[m]) < 1e-3 * scale:
                xm = 0.5 * (x + xr.pop(m))
                u = wp_inverse(xm, tau, cfg)
                pts += [u, -u]
                continue
        pts.append(wp_inverse(x, tau, cfg))
    zs = ZeroSet(n, tau, tuple(pts), branch_point=True, B_input=B, translated=j)
    zs.notes["q_relative"] = qrel
    return zs


def extract_zero_set(n, B, tau, cfg: Config = DEFAULT, even_product: EvenProduct | None = None,
                     probe_tol: float = 1e-7, branch_tol: float = 1e-7) -> ZeroSet:
    """Zero set a with Phi_e = y_a(z) y_a(-z) (up to a constant).

    For n0 = 0 the work is done for the translated tuple; ``translated``
    records the half period used.  At branch points (Q_n(B) = 0) the set is
    self-paired and is returned with ``branch_point`` set, without sign
    resolution.
    """
    n0 = as_tuple(n)
    j, n = translate_tuple(n0)
    tau = complex(tau)
    B = complex(B)
    L = lattice(tau, cfg)
    inv = L.inv
    hp = half_periods(tau)
    E = even_product if even_product is not None else even_product_solution(n, B, tau, cfg)
    xr = _poly_roots(E.P)
    N = n.N
    scale = 1.0 + max(abs(e) for e in inv.e)
    # branch point: Q(B) = 0, i.e. the Wronskian of y_a, y_-a vanishes
    qv, qsc = E.q_combination(mono._coords(0.21, 0.17, tau), scale=True)
    qrel = abs(qv) / max(qsc, 1e-300)
    branch = qrel < branch_tol or any(abs(x) > 1e8 * scale for x in xr)
    if branch:
        return _branch_set(n, tau, xr, B, j, qrel, cfg)
    u = [wp_inverse(x, tau, cfg) for x in xr]
    # Newton polish on Phi_e and argument-principle confirmation
    pol = []
    for ui in u:
        z = ui
        for _ in range(8):
            r, r1, _r2 = E.derivatives(z)
            if r1 == 0:
                break
            dz = r / r1
            z = z - dz
            if abs(dz) < 1e-15:
                break
        pol.append(complex(L.reduce(z)[0]))
    cand = pol + [complex(L.reduce(-p)[0]) for p in pol]
    total = 0
    for i, p in enumerate(cand):
        dmin = min([abs(p - q - m - k * tau) for q in cand for m in (-1, 0, 1) for k in (-1, 0, 1)
                    if abs(p - q - m - k * tau) > 1e-12]
                   + [abs(p - h - m - k * tau) for h in hp for m in (-1, 0, 1) for k in (-1, 0, 1)])
        rad = 0.3 * dmin
        total += _winding(E, p, rad)
    if total != 2 * N:
        raise ZeroLocalizationError(f"found {total} zeros of Phi_e around the candidates, expected {2 * N}")
    # sign resolution: eps_1 = +1, search the rest
    probes = [mono._coords(0.21, 0.17, tau), mono._coords(-0.33, 0.29, tau),
              mono._coords(0.12, 0.38, tau), mono._coords(0.41, 0.07, tau)]
    sc = np.abs(potential(n, B, tau, np.array(probes), cfg)) + abs(B) + 1

    def probe(zs):
        try:
            res = np.abs(AnsatzSolution(zs, cfg).ode_residual(np.array(probes)))
        except PoleError:
            return math.inf
        return float(np.max(res / sc))

    best = None
    for signs in itertools.product((1, -1), repeat=N - 1):
        pts = (pol[0],) + tuple(s * p for s, p in zip(signs, pol[1:]))
        zs = ZeroSet(n, tau, pts, B_input=B, translated=j)
        worst = probe(zs)
        if best is None or worst < best[0]:
            best = (worst, zs)
        if worst < 1e-3 * probe_tol:
            break
    if best is not None and best[0] < 1e-2:
        # the zeros of the fitted P carry the fit error; sharpen them on the
        # ansatz system itself
        zs2 = _polish_zero_set(best[1], B, cfg)
        if zs2 is not None:
            w2 = probe(zs2)
            if w2 < best[0]:
                best = (w2, zs2)
    if best is None or best[0] > probe_tol:
        raise SignResolutionError(f"no sign assignment solves the equation (best {best and best[0]:.2e})")
    zs = best[1]
    zs.notes["probe_residual"] = best[0]
    Bz = zs.B
    if abs(Bz - B) > 1e-7 * (1 + abs(B)):
        raise ConsistencyError(f"B from the zero set ({Bz}) does not match input {B}")
    return zs


# ---------------------------------------------------------------------------
# addition map degree

@dataclass
class DegreeEstimate:
    degree: int
    B: list
    reliable: bool
    seeds: int
    failures: int
    notes: dict = field(default_factory=dict)

    def __int__(self):
        return self.degree


def sigma_n(a: ZeroSet, cfg: Config = DEFAULT) -> complex:
    """sum a_i - sum n_k w_k / 2 as a point of the torus."""
    hp = half_periods(a.tau)
    v = complex(np.sum(a.points)) - sum(a.n[k] * hp[k] for k in range(4))
    return complex(lattice(a.tau, cfg).reduce(v)[0])


def addition_degree_estimate(n, tau, sigma0, cfg: Config = DEFAULT, radius: float | None = None,
                             grid: int = 9, exclusion: float | None = None) -> DegreeEstimate:
    """Number of B with sigma_n(a(B)) = +-sigma0.

    Newton on F(B) = wp(r(B) + s(B) tau) - wp(sigma0) where (r, s) come from
    the monodromy (so that dF/dB follows from the variational equation);
    seeds on a polar grid in a disk.  Every converged B is cross-checked
    through extract_zero_set and the sum of its zero set.
    """
    n = as_tuple(n)
    tau = complex(tau)
    L = lattice(tau, cfg)
    sigma0 = complex(getattr(sigma0, "z", sigma0))
    exclusion = cfg.exclusion_radius if exclusion is None else exclusion
    if min(lattice_distance(sigma0 - h, tau) for h in half_periods(tau)) < exclusion:
        raise PreconditionError("sigma0 is too close to E[2]")
    target = complex(L.wp(sigma0))
    emax = max(abs(e) for e in L.inv.e)
    R = radius if radius is not None else 3.0 * (1 + n.weight) * max(1.0, emax)
    seeds = [0j]
    for rho in np.linspace(R / grid, R, grid):
        m = max(6, int(round(2 * np.pi * rho / (R / grid))))
        seeds += [rho * np.exp(2j * np.pi * (k + 0.5 * (rho > 0)) / m) for k in range(m)]
    # sigma_n is ramified over the roots of Q, and preimages can sit
    # exponentially close to them (wp(sigma) is analytic in B there)
    try:
        for b in spectral_polynomial(n, tau, cfg).roots():
            seeds += [b + 1e-4 * (1 + abs(b)) * np.exp(1j * (0.3 + 2.1 * k)) for k in range(3)]
    except HeunmonError:
        pass
    found, fails = [], 0
    for B in seeds:
        B = complex(B)
        best, best_B = np.inf, B
        try:
            for _ in range(40):
                r, s, dr, ds, _res = mono.rs_with_derivative(n, B, tau, cfg)
                sig = r + s * tau
                F = complex(L.wp(sig)) - target
                if abs(F) < best:
                    best, best_B = abs(F), B
                dF = complex(L.wp_prime(sig)) * (dr + ds * tau)
                if dF == 0 or not np.isfinite(dF):
                    break
                step = F / dF
                lim = 0.2 * (1 + abs(B))
                if abs(step) > lim:
                    step *= lim / abs(step)
                B -= step
                # large monodromy eigenvalues put a noise floor on F well above
                # machine precision, so stop on a small relative step
                if abs(step) < 1e-9 * (1 + abs(B)):
                    break
        except HeunmonError:
            fails += 1
            continue
        B = best_B
        ok = best < 1e-7 * (1 + abs(target))
        if ok and abs(B) < 2 * R and not any(abs(B - b) < 1e-6 * (1 + abs(B)) for b in found):
            found.append(B)
    found.sort(key=lambda b: (round(b.real, 8), round(b.imag, 8)))
    verified, reliable = [], True
    for B in found:
        try:
            a = extract_zero_set(n, B, tau, cfg)
        except HeunmonError:
            reliable = False
            continue
        if a.branch_point:
            reliable = False
            continue
        # for n0 = 0 the set belongs to the translated tuple, whose monodromy
        # (hence r + s tau) is the same
        sig = sigma_n(a, cfg)
        if abs(complex(L.wp(sig)) - target) > 1e-6 * (1 + abs(target)):
            reliable = False
            continue
        verified.append(B)
    if any(abs(b) > 0.8 * R for b in verified):
        reliable = False
    return DegreeEstimate(len(verified), verified, reliable, len(seeds), fails,
                          {"radius": R, "newton_roots": len(found)})
