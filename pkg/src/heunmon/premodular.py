"""Pre-modular forms Z^n_{r,s}(tau) built from the Hecke form Z_{r,s}.

Forms are stored as data: a list of terms, each a rational coefficient
times a monomial in the symbols below.  Weighted homogeneity is checked
when a form is loaded.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import monodromy as mono
from .config import DEFAULT, Config
from .elliptic import lattice
from .errors import (DomainError, InvalidInputError, PoleError, PreconditionError,
                     UnsupportedFormError)
from .tuples import IndexTuple, as_tuple

SYMBOLS = ("Z", "wp", "wpp", "e1", "e2", "e3", "g2", "g3")
WEIGHTS = (1, 2, 3, 2, 2, 2, 4, 6)
FORMS_VERSION = "1"

# one row per term: [num, den, {symbol: exponent}]
_FORM_TABLE = r"""
{
 "version": "1",
 "forms": {
  "1,0,0,0": [[1, 1, {"Z": 1}]],
  "2,0,0,0": [[1, 1, {"Z": 3}], [-3, 1, {"wp": 1, "Z": 1}], [-1, 1, {"wpp": 1}]],
  "3,0,0,0": [
    [1, 1, {"Z": 6}], [-15, 1, {"wp": 1, "Z": 4}], [-20, 1, {"wpp": 1, "Z": 3}],
    [27, 4, {"g2": 1, "Z": 2}], [-45, 1, {"wp": 2, "Z": 2}],
    [-12, 1, {"wp": 1, "wpp": 1, "Z": 1}], [-5, 4, {"wpp": 2}]],
  "4,0,0,0": [
    [1, 1, {"Z": 10}], [-45, 1, {"wp": 1, "Z": 8}], [-120, 1, {"wpp": 1, "Z": 7}],
    [399, 4, {"g2": 1, "Z": 6}], [-630, 1, {"wp": 2, "Z": 6}],
    [-504, 1, {"wp": 1, "wpp": 1, "Z": 5}],
    [-1050, 1, {"wp": 3, "Z": 4}], [735, 4, {"g2": 1, "wp": 1, "Z": 4}],
    [1725, 4, {"g3": 1, "Z": 4}],
    [165, 1, {"g2": 1, "wpp": 1, "Z": 3}], [-360, 1, {"wp": 2, "wpp": 1, "Z": 3}],
    [-315, 1, {"wp": 4, "Z": 2}], [2205, 4, {"g2": 1, "wp": 2, "Z": 2}],
    [-855, 2, {"g3": 1, "wp": 1, "Z": 2}], [-189, 4, {"g2": 2, "Z": 2}],
    [-40, 1, {"wp": 3, "wpp": 1, "Z": 1}], [163, 1, {"g2": 1, "wp": 1, "wpp": 1, "Z": 1}],
    [-125, 1, {"g3": 1, "wpp": 1, "Z": 1}],
    [75, 4, {"g2": 1, "wpp": 2}], [-9, 4, {"wp": 2, "wpp": 2}]],
  "1,1,0,0": [[1, 1, {"Z": 2}], [-1, 1, {"wp": 1}], [1, 1, {"e1": 1}]],
  "1,0,1,0": [[1, 1, {"Z": 2}], [-1, 1, {"wp": 1}], [1, 1, {"e2": 1}]],
  "1,0,0,1": [[1, 1, {"Z": 2}], [-1, 1, {"wp": 1}], [1, 1, {"e3": 1}]],
  "2,1,0,0": [
    [1, 1, {"Z": 4}], [3, 1, {"e1": 1, "Z": 2}], [-6, 1, {"wp": 1, "Z": 2}],
    [-4, 1, {"wpp": 1, "Z": 1}], [-3, 1, {"wp": 2}], [-3, 1, {"e1": 1, "wp": 1}],
    [-3, 1, {"e1": 2}], [3, 4, {"g2": 1}]],
  "2,0,1,0": [
    [1, 1, {"Z": 4}], [3, 1, {"e2": 1, "Z": 2}], [-6, 1, {"wp": 1, "Z": 2}],
    [-4, 1, {"wpp": 1, "Z": 1}], [-3, 1, {"wp": 2}], [-3, 1, {"e2": 1, "wp": 1}],
    [-3, 1, {"e2": 2}], [3, 4, {"g2": 1}]],
  "2,0,0,1": [
    [1, 1, {"Z": 4}], [3, 1, {"e3": 1, "Z": 2}], [-6, 1, {"wp": 1, "Z": 2}],
    [-4, 1, {"wpp": 1, "Z": 1}], [-3, 1, {"wp": 2}], [-3, 1, {"e3": 1, "wp": 1}],
    [-3, 1, {"e3": 2}], [3, 4, {"g2": 1}]]
 }
}
"""


@dataclass(frozen=True)
class MonodromyParam:
    r: complex
    s: complex
    torsion: tuple | None = None   # (k1, k2, m) with gcd(k1, k2, m) = 1
    excluded: bool = False         # (r, s) in (1/2) Z^2

    @classmethod
    def from_rs(cls, r, s, max_den: int = 64, tol: float = 1e-10) -> "MonodromyParam":
        r, s = complex(r), complex(s)
        excl = abs(r.imag) < tol and abs(s.imag) < tol and \
            abs(2 * r.real - round(2 * r.real)) < tol and abs(2 * s.real - round(2 * s.real)) < tol
        tors = None
        if abs(r.imag) < tol and abs(s.imag) < tol:
            fr = Fraction(r.real).limit_denominator(max_den)
            fs = Fraction(s.real).limit_denominator(max_den)
            if abs(float(fr) - r.real) < tol and abs(float(fs) - s.real) < tol:
                m = fr.denominator * fs.denominator // math.gcd(fr.denominator, fs.denominator)
                k1, k2 = int(fr * m), int(fs * m)
                g = math.gcd(math.gcd(k1, k2), m)
                tors = (k1 // g, k2 // g, m // g)
        return cls(r, s, tors, excl)


@dataclass(frozen=True)
class PreModularPoly:
    n: IndexTuple
    terms: tuple          # ((Fraction, exponent tuple in SYMBOLS order), ...)

    def __post_init__(self):
        object.__setattr__(self, "n", as_tuple(self.n))
        w = self.weight
        for c, ex in self.terms:
            tw = sum(e * k for e, k in zip(ex, WEIGHTS))
            if tw != w:
                raise InvalidInputError(f"term {c}*{_mono_str(ex)} has weight {tw}, form weight is {w}")

    @property
    def weight(self) -> int:
        return self.n.weight

    @property
    def z_degree(self) -> int:
        return max(ex[0] for _, ex in self.terms)

    def evaluate(self, vals: dict) -> complex:
        v = [complex(vals[k]) for k in SYMBOLS]
        out = 0j
        for c, ex in self.terms:
            t = complex(c.numerator) / c.denominator
            for x, e in zip(v, ex):
                if e:
                    t *= x ** e
            out += t
        return out

    def as_json(self) -> dict:
        return {"tuple": list(self.n), "weight": self.weight,
                "terms": [{"coeff_num": c.numerator, "coeff_den": c.denominator,
                           "exponents": dict(zip(SYMBOLS, ex))} for c, ex in self.terms]}

    @classmethod
    def from_json(cls, doc: dict) -> "PreModularPoly":
        n = as_tuple(doc["tuple"])
        terms = []
        for t in doc["terms"]:
            ex = t["exponents"]
            bad = set(ex) - set(SYMBOLS)
            if bad:
                raise InvalidInputError(f"unknown symbols {sorted(bad)}")
            terms.append((Fraction(int(t["coeff_num"]), int(t["coeff_den"])),
                          tuple(int(ex.get(k, 0)) for k in SYMBOLS)))
        form = cls(n, tuple(terms))
        if "weight" in doc and int(doc["weight"]) != form.weight:
            raise InvalidInputError("declared weight does not match the tuple")
        return form

    def __str__(self):
        parts = []
        for c, ex in self.terms:
            parts.append(f"{c}*{_mono_str(ex)}" if any(ex) else str(c))
        return " + ".join(parts)


def _mono_str(ex) -> str:
    return "*".join(f"{s}^{e}" if e > 1 else s for s, e in zip(SYMBOLS, ex) if e) or "1"


def _load_table() -> dict:
    doc = json.loads(_FORM_TABLE)
    out = {}
    for key, rows in doc["forms"].items():
        n = as_tuple(key)
        terms = tuple((Fraction(num, den), tuple(ex.get(k, 0) for k in SYMBOLS))
                      for num, den, ex in rows)
        out[tuple(n)] = PreModularPoly(n, terms)
    return out


_FORMS = _load_table()
_EXTRA: dict = {}


def supported_tuples() -> list:
    return sorted(set(_FORMS) | set(_EXTRA))


def builtin_form(n) -> PreModularPoly:
    key = tuple(as_tuple(n))
    if key in _EXTRA:
        return _EXTRA[key]
    if key not in _FORMS:
        raise UnsupportedFormError(
            f"no explicit pre-modular form for n={key}; the closed form is only known "
            f"for {', '.join(','.join(map(str, t)) for t in sorted(_FORMS))}")
    return _FORMS[key]


def register_form(form: PreModularPoly) -> None:
    """Add a form (e.g. loaded from JSON) to the lookup table."""
    _EXTRA[tuple(form.n)] = form


def export_forms(path=None) -> dict:
    doc = {"version": FORMS_VERSION,
           "forms": [builtin_form(t).as_json() for t in supported_tuples()]}
    if path is not None:
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
    return doc


def import_forms(src) -> list:
    """Load forms from a JSON document or file path and register them."""
    if isinstance(src, os.PathLike) or (isinstance(src, str) and not src.lstrip().startswith("{")):
        with open(src) as fh:
            doc = json.load(fh)
    elif isinstance(src, dict):
        doc = src
    else:
        doc = json.loads(src)
    forms = [PreModularPoly.from_json(d) for d in doc["forms"]]
    for f in forms:
        register_form(f)
    return forms


# ---------------------------------------------------------------------------
# evaluation

def _reduce_rs(r, s):
    # Z_{r,s} depends on (r, s) only modulo Z^2
    r, s = complex(r), complex(s)
    return r - round(r.real), s - round(s.real)


def hecke_Z(r, s, tau, cfg: Config = DEFAULT) -> complex:
    """Z_{r,s}(tau) = zeta(r + s tau) - r eta1 - s eta2."""
    r, s = _reduce_rs(r, s)
    if abs(r) < 1e-14 and abs(s) < 1e-14:
        raise PoleError("Z_{r,s} has a pole for (r, s) in Z^2", location=(r, s))
    L = lattice(tau, cfg)
    inv = L.inv
    z = r + s * inv.tau
    return complex(L.zeta(z)) - r * inv.eta1 - s * inv.eta2


def symbol_values(r, s, tau, cfg: Config = DEFAULT) -> dict:
    r, s = _reduce_rs(r, s)
    L = lattice(tau, cfg)
    inv = L.inv
    z = r + s * inv.tau
    if abs(r) < 1e-14 and abs(s) < 1e-14:
        raise DomainError("r + s tau lies on the lattice")
    return {"Z": hecke_Z(r, s, tau, cfg), "wp": complex(L.wp(z)), "wpp": complex(L.wp_prime(z)),
            "e1": inv.e1, "e2": inv.e2, "e3": inv.e3, "g2": inv.g2, "g3": inv.g3}


def eval_premodular(n, r, s, tau, cfg: Config = DEFAULT) -> complex:
    form = builtin_form(n)
    try:
        vals = symbol_values(r, s, tau, cfg)
    except PoleError as exc:
        raise DomainError("r + s tau lies on the lattice") from exc
    return form.evaluate(vals)


def _mobius(g, tau):
    (a, b), (c, d) = g
    return (a * tau + b) / (c * tau + d), c * tau + d


def in_gamma(g, m: int) -> bool:
    (a, b), (c, d) = g
    return a * d - b * c == 1 and (a - 1) % m == 0 and (d - 1) % m == 0 and b % m == 0 and c % m == 0


def transform_check(n, r, s, gamma, tau, m: int | None = None, cfg: Config = DEFAULT,
                    relative: bool = False) -> float:
    """|Z(gamma tau) - (c tau + d)^w Z(tau)| for gamma in Gamma(m).

    m defaults to the torsion order of (r, s).
    """
    g = tuple(tuple(int(x) for x in row) for row in gamma)
    if m is None:
        p = MonodromyParam.from_rs(r, s)
        if p.torsion is None:
            raise PreconditionError("(r, s) is not a torsion point; pass m explicitly")
        m = p.torsion[2]
    if not in_gamma(g, m):
        raise PreconditionError(f"gamma={g} is not in Gamma({m})")
    w = as_tuple(n).weight
    tau = complex(tau)
    t2, j = _mobius(g, tau)
    lhs = eval_premodular(n, r, s, t2, cfg)
    rhs = j ** w * eval_premodular(n, r, s, tau, cfg)
    res = abs(lhs - rhs)
    if relative:
        return res / max(abs(lhs), abs(rhs), 1e-300)
    return res


def factorization_check_1100(r, s, tau, cfg: Config = DEFAULT, relative: bool = False) -> float:
    """|Z^{(1,1,0,0)}_{r,s}(tau) - 4 Z_{r,s/2}(2 tau) Z_{r,(s+1)/2}(2 tau)|."""
    tau = complex(tau)
    lhs = eval_premodular((1, 1, 0, 0), r, s, tau, cfg)
    rhs = 4 * hecke_Z(r, s / 2, 2 * tau, cfg) * hecke_Z(r, (s + 1) / 2, 2 * tau, cfg)
    res = abs(lhs - rhs)
    if relative:
        return res / max(abs(lhs), abs(rhs), 1e-300)
    return res


# ---------------------------------------------------------------------------
# zero search

def _winding_closed(vals) -> int:
    v = np.asarray(vals, dtype=complex)
    if np.any(v == 0):
        return 0
    ph = np.angle(np.concatenate([v, v[:1]]))
    d = np.diff(ph)
    d = (d + np.pi) % (2 * np.pi) - np.pi
    return int(round(d.sum() / (2 * np.pi)))


def _newton_tau(f, t, tol=1e-12, iters=40, h=1e-6):
    for _ in range(iters):
        v = f(t)
        dv = (f(t + h) - f(t - h)) / (2 * h)
        if dv == 0:
            break
        step = v / dv
        t = t - step
        if t.imag <= 0:
            raise DomainError("Newton left the upper half plane")
        if abs(step) < tol * (1 + abs(t)):
            break
    return t


def _zeros_on_segment(n, r, s, t0, t1, samples, cfg):
    f = lambda t: eval_premodular(n, r, s, t, cfg)  # noqa: E731
    ts = t0 + (t1 - t0) * np.linspace(0.0, 1.0, samples)
    vals = np.array([f(t) for t in ts])
    normal = 1j * (t1 - t0) / abs(t1 - t0)
    step = abs(t1 - t0) / (samples - 1)
    found = []
    for i in range(samples - 1):
        a, b = vals[i], vals[i + 1]
        if not (np.sign(a.real) != np.sign(b.real) or np.sign(a.imag) != np.sign(b.imag)):
            continue
        # rectangle around the sub-segment, argument principle
        corners = [ts[i] - 0.5 * step * normal, ts[i + 1] - 0.5 * step * normal,
                   ts[i + 1] + 0.5 * step * normal, ts[i] + 0.5 * step * normal]
        contour = []
        for k in range(4):
            p, q = corners[k], corners[(k + 1) % 4]
            contour += [f(p + (q - p) * u) for u in np.linspace(0, 1, 16, endpoint=False)]
        if _winding_closed(contour) == 0:
            continue
        t = _newton_tau(f, 0.5 * (ts[i] + ts[i + 1]))
        res = abs(f(t))
        u = ((t - t0) / (t1 - t0)).real
        found.append({"tau": complex(t), "residual": float(res),
                      "offset": float(abs(t - (t0 + u * (t1 - t0)))),
                      "boundary": bool(i == 0 or i == samples - 2)})
    return found


def _rs_jac(F, r, s, h=1e-6):
    fr = (F(r + h, s) - F(r - h, s)) / (2 * h)
    fs = (F(r, s + h) - F(r, s - h)) / (2 * h)
    return np.array([[fr.real, fs.real], [fr.imag, fs.imag]])


def _newton_rs(F, r, s, tol=1e-13, iters=40):
    for _ in range(iters):
        v = F(r, s)
        J = _rs_jac(F, r, s)
        try:
            d = np.linalg.solve(J, [-v.real, -v.imag])
        except np.linalg.LinAlgError:
            break
        r, s = r + d[0], s + d[1]
        if abs(d[0]) + abs(d[1]) < tol:
            break
    return r, s


def _zeros_rs_grid(n, tau, grid, delta, threshold, cfg):
    F = lambda r, s: eval_premodular(n, r, s, tau, cfg)  # noqa: E731
    # fundamental region of +-(r, s) mod Z^2: [0, 1) x [0, 1/2]
    rs = np.linspace(0.0, 1.0, 2 * grid + 1)
    ss = np.linspace(0.0, 0.5, grid + 1)
    V = np.full((len(rs), len(ss)), np.nan + 0j)
    for i, r in enumerate(rs):
        for j, s in enumerate(ss):
            dr = abs(2 * r - round(2 * r)) / 2
            ds = abs(2 * s - round(2 * s)) / 2
            if math.hypot(dr, ds) < 0.5 * delta:
                continue
            try:
                V[i, j] = F(r, s)
            except (DomainError, PoleError):
                pass
    zeros = []
    low_cells = []
    for i in range(len(rs) - 1):
        for j in range(len(ss) - 1):
            c = [V[i, j], V[i + 1, j], V[i + 1, j + 1], V[i, j + 1]]
            if any(np.isnan(x) for x in c):
                continue
            if min(abs(x) for x in c) < threshold:
                low_cells.append((rs[i], ss[j]))
            # topological degree of (r, s) -> Z^n around the cell, refined edges
            pts = []
            corners = [(rs[i], ss[j]), (rs[i + 1], ss[j]), (rs[i + 1], ss[j + 1]), (rs[i], ss[j + 1])]
            for k in range(4):
                (ra, sa), (rb, sb) = corners[k], corners[(k + 1) % 4]
                pts += [F(ra + (rb - ra) * u, sa + (sb - sa) * u) for u in np.linspace(0, 1, 4, endpoint=False)]
            if _winding_closed(pts) == 0:
                continue
            r0, s0 = _newton_rs(F, 0.5 * (rs[i] + rs[i + 1]), 0.5 * (ss[j] + ss[j + 1]))
            res = abs(F(r0, s0))
            r0, s0 = mono.canonical_rs(float(r0), float(s0))
            dr = abs(2 * r0 - round(2 * r0)) / 2
            ds = abs(2 * s0 - round(2 * s0)) / 2
            if math.hypot(dr, ds) < delta:
                continue
            if any(math.hypot(r0 - z["r"], s0 - z["s"]) < 1e-7 for z in zeros):
                continue
            zeros.append({"r": float(r0), "s": float(s0), "residual": float(res)})
    zeros.sort(key=lambda z: (z["r"], z["s"]))
    return zeros, low_cells


def zero_search(n, mode: str, cfg: Config = DEFAULT, **params) -> list:
    """Zeros of Z^n_{r,s}(tau) in tau (fixed real r, s) or in (r, s) (fixed tau).

    mode ``tau_segment``: params r, s, tau0, tau1, samples (default 200).
    mode ``rs_grid``: params tau, grid (cells per 1/2, default 24),
    delta (exclusion radius around (1/2) Z^2, default cfg.exclusion_radius),
    threshold (default 1e-2).  Zeros are isolated points in (r, s) since
    the equation is two real conditions.
    """
    n = as_tuple(n)
    builtin_form(n)
    if mode == "tau_segment":
        r, s = float(params["r"]), float(params["s"])
        if MonodromyParam.from_rs(r, s).excluded:
            raise PreconditionError("(r, s) lies in (1/2) Z^2")
        t0, t1 = complex(params["tau0"]), complex(params["tau1"])
        if t0.imag <= 0 or t1.imag <= 0:
            raise DomainError("segment must lie in the upper half plane")
        out = _zeros_on_segment(n, r, s, t0, t1, int(params.get("samples", 200)), cfg)
        out.sort(key=lambda z: (z["tau"].real, z["tau"].imag))
        return out
    if mode == "rs_grid":
        tau = complex(params["tau"])
        zeros, _ = _zeros_rs_grid(n, tau, int(params.get("grid", 24)),
                                  float(params.get("delta", cfg.exclusion_radius)),
                                  float(params.get("threshold", 1e-2)), cfg)
        return zeros
    raise InvalidInputError(f"unknown zero_search mode {mode!r}")


def low_cells(n, tau, grid: int = 24, delta: float | None = None, threshold: float = 1e-2,
              cfg: Config = DEFAULT) -> list:
    """Grid cells of the rs_grid scan with a corner value below threshold."""
    _, cells = _zeros_rs_grid(as_tuple(n), complex(tau), grid,
                              cfg.exclusion_radius if delta is None else delta, threshold, cfg)
    return cells


def z_n_from_monodromy(n, B, tau, cfg: Config = DEFAULT) -> complex:
    """Z^n at the (complex) (r, s) read off from the monodromy of H(n, B, tau).

    Vanishes for every B with completely reducible monodromy.
    """
    r, s, *_ = mono.rs_with_derivative(n, B, tau, cfg)
    return eval_premodular(n, r, s, tau, cfg)


def rs_scale(n, r, s, tau, cfg: Config = DEFAULT) -> float:
    """Size of the largest term of Z^n at (r, s), for relative residuals."""
    form = builtin_form(n)
    v = symbol_values(r, s, tau, cfg)
    vals = [abs(v[k]) for k in SYMBOLS]
    # Z itself is a difference; measure it by the size of its parts
    rr, ss = _reduce_rs(r, s)
    L = lattice(tau, cfg)
    vals[0] = max(vals[0], abs(complex(L.zeta(rr + ss * L.inv.tau))) + abs(rr * L.inv.eta1)
                  + abs(ss * L.inv.eta2))
    big = 0.0
    for c, ex in form.terms:
        t = abs(float(c)) * float(np.prod([x ** e for x, e in zip(vals, ex)]))
        big = max(big, t)
    return float(big)


__all__ = ["MonodromyParam", "PreModularPoly", "SYMBOLS", "WEIGHTS", "builtin_form", "eval_premodular",
           "export_forms", "factorization_check_1100", "hecke_Z", "import_forms", "in_gamma",
           "register_form", "supported_tuples", "symbol_values", "transform_check", "zero_search",
           "z_n_from_monodromy", "rs_scale", "low_cells"]

