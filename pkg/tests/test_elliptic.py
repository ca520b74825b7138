import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from heunmon import elliptic as E
from heunmon.errors import DomainError, PoleError

# Reference values from an independent theta-function evaluation (mpmath,
# 30 digits): wp = (pi th2 th3 th4(pi z)/th1(pi z))^2 - pi^2/3 (th2^4 + th3^4),
# zeta = eta1 z + pi th1'/th1, sigma = exp(eta1 z^2/2) th1(pi z)/(pi th1'(0)).
ORACLE = [
    (0.5 + 1.2j, 0.3 + 0.2j, dict(
        wp=3.068107962477335 - 6.28080074935284j,
        wp_prime=10.693990303998737 + 46.46446215941673j,
        zeta=2.3405748325449713 - 1.6273451620947226j,
        sigma=0.30300643710186165 + 0.1997111674228543j,
        eta1=3.331766197077326,
        e=(6.495850924457457, -3.2479254622287286 - 1.8164128510177704j,
           -3.2479254622287286 + 1.8164128510177704j))),
    (1j, 0.17 + 0.41j, dict(
        wp=-4.732804700085875 - 2.1229965215329427j,
        wp_prime=27.067038234385027 - 2.419402655328935j,
        zeta=1.1226247476896825 - 1.9895830506626782j,
        sigma=0.15752912034609365 + 0.41535235220454475j,
        eta1=math.pi,
        e=(6.875185818020372, -6.875185818020372, 0.0))),
    (-0.2 + 0.9j, 0.25 - 0.1j, dict(
        wp=10.23105190507969 + 8.80682721429588j,
        wp_prime=-38.45448056531673 - 97.32177626845859j,
        zeta=3.4538797972874167 + 1.4443097030255276j,
        sigma=0.25088930732136194 - 0.0992429539532387j,
        eta1=3.2068199171076275 + 0.264554381782768j,
        e=(6.748963436205116 - 0.5268342543331603j, -7.133201909895995 + 3.0714277371844365j,
           0.38423847369087893 - 2.5445934828512766j))),
]


@pytest.mark.parametrize("tau,z,ref", ORACLE)
def test_against_theta_oracle(tau, z, ref):
    for kind in ("wp", "wp_prime", "zeta", "sigma"):
        v = E.eval_weierstrass(kind, z, tau)
        assert abs(v - ref[kind]) < 1e-11 * max(1.0, abs(ref[kind])), kind
    inv = E.invariants(tau)
    assert abs(inv.eta1 - ref["eta1"]) < 1e-12
    for a, b in zip(inv.e, ref["e"]):
        assert abs(a - b) < 1e-11 * max(1.0, abs(b))


def test_square_lattice_e3_vanishes():
    inv = E.invariants(1j)
    assert abs(inv.e3) < 1e-12
    assert abs(inv.g3) < 1e-10


def test_half_period_values():
    tau = 0.5 + 1.2j
    inv = E.invariants(tau)
    for k in (1, 2, 3):
        assert abs(E.wp(inv.half_period(k), tau) - inv.e[k - 1]) < 1e-10
        assert abs(E.wp_prime(inv.half_period(k), tau)) < 1e-9


def test_vectorized_matches_scalar():
    tau = 0.3 + 1.1j
    zs = np.array([0.1 + 0.2j, -0.3 + 0.4j, 0.45 - 0.1j])
    vec = E.wp(zs, tau)
    assert vec.shape == (3,)
    assert np.allclose(vec, [E.wp(z, tau) for z in zs], rtol=1e-14)


def test_pole_is_reported():
    with pytest.raises(PoleError):
        E.wp(2.0, 1j)


def test_tau_must_be_in_upper_half_plane():
    with pytest.raises((DomainError, ValueError)):
        E.invariants(0.5 - 1j)


taus = st.builds(complex, st.floats(-0.5, 0.5), st.floats(0.7, 2.0))
coords = st.floats(0.06, 0.94)


def _pt(x, y, tau):
    return x + y * tau


@given(taus, coords, coords)
def test_differential_identity(tau, x, y):
    z = _pt(x, y, tau)
    inv = E.invariants(tau)
    w, p = E.wp(z, tau), E.wp_prime(z, tau)
    rhs = 4 * w ** 3 - inv.g2 * w - inv.g3
    assert abs(p * p - rhs) <= 1e-9 * max(abs(p) ** 2, abs(inv.g2 * w), abs(inv.g3), 1)


@given(taus, coords, coords)
def test_periodicity_and_parity(tau, x, y):
    z = _pt(x, y, tau)
    inv = E.invariants(tau)
    w = E.wp(z, tau)
    s = max(1.0, abs(w))
    assert abs(E.wp(z + 1, tau) - w) < 1e-9 * s
    assert abs(E.wp(z + tau, tau) - w) < 1e-9 * s
    assert abs(E.wp(-z, tau) - w) < 1e-9 * s
    zt = E.zeta(z, tau)
    assert abs(E.zeta(z + tau, tau) - zt - inv.eta2) < 1e-9 * max(1, abs(zt))
    sg = E.sigma(z, tau)
    lhs = E.sigma(z + 1, tau)
    assert abs(lhs + np.exp(inv.eta1 * (z + 0.5)) * sg) < 1e-9 * max(abs(lhs), 1e-300)


@given(taus, coords, coords, coords, coords)
def test_addition_formulas(tau, x1, y1, x2, y2):
    u, v = _pt(x1, y1, tau), _pt(x2, y2, tau)
    L = E.lattice(tau)
    from heunmon.heun import lattice_distance
    if min(lattice_distance(u + v, tau), lattice_distance(u - v, tau)) < 0.05:
        return
    wu, wv = complex(L.wp(u)), complex(L.wp(v))
    if abs(wu - wv) < 1e-3 * max(1, abs(wu)):
        return
    zu, zv = complex(L.zeta(u)), complex(L.zeta(v))
    pu, pv = complex(L.wp_prime(u)), complex(L.wp_prime(v))
    lhs = complex(L.zeta(u + v)) + complex(L.zeta(u - v)) - 2 * zu
    rhs = pu / (wu - wv)
    assert abs(lhs - rhs) < 1e-9 * max(abs(lhs), abs(rhs), abs(zu), 1)
    lhs = complex(L.zeta(u + v)) - zu - zv
    rhs = 0.5 * (pu - pv) / (wu - wv)
    assert abs(lhs - rhs) < 1e-9 * max(abs(lhs), abs(rhs), abs(zu), abs(zv), 1)


@given(taus)
def test_legendre_relation(tau):
    inv = E.invariants(tau)
    assert abs(inv.eta1 * tau - inv.eta2 - 2j * math.pi) < 1e-10


@given(taus)
def test_e_sum_and_invariants(tau):
    inv = E.invariants(tau)
    e1, e2, e3 = inv.e
    sc = max(abs(e1), 1)
    assert abs(e1 + e2 + e3) < 1e-10 * sc
    assert abs(inv.g2 - 2 * (e1 ** 2 + e2 ** 2 + e3 ** 2)) < 1e-10 * sc ** 2
    assert abs(inv.g3 - 4 * e1 * e2 * e3) < 1e-10 * sc ** 3


@given(taus, coords, coords)
def test_wp_inverse_round_trip(tau, x, y):
    z = _pt(x, y, tau)
    w = E.wp(z, tau)
    u = E.wp_inverse(w, tau)
    assert abs(E.wp(u, tau) - w) < 1e-8 * max(1, abs(w))


def test_reduce_point_lands_in_cell():
    tau = 0.4 + 1.3j
    p = E.reduce_point(2.7 + 3.1 * tau + 0.01j, tau)
    assert abs(p.z0 + p.m + p.n * tau - p.z) < 1e-12
    x = p.z0.real - p.z0.imag / tau.imag * tau.real
    y = p.z0.imag / tau.imag
    assert -0.5 <= x <= 0.5 and -0.5 <= y <= 0.5
