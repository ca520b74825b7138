import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heunmon import heun, monodromy as mono, premodular as pm
from heunmon.elliptic import lattice
from heunmon.errors import DomainError, InvalidInputError, PreconditionError, UnsupportedFormError

TAU = 0.5 + 1.2j


def test_supported_tuples_and_weights():
    tuples = pm.supported_tuples()
    assert len(tuples) == 10
    for n in tuples:
        f = pm.builtin_form(n)
        assert f.weight == sum(k * (k + 1) for k in n) // 2
        assert f.z_degree == f.weight


def test_unsupported_form():
    with pytest.raises(UnsupportedFormError):
        pm.builtin_form((5, 0, 0, 0))


def test_form_json_round_trip(tmp_path):
    f = pm.builtin_form((3, 0, 0, 0))
    g = pm.PreModularPoly.from_json(json.loads(json.dumps(f.as_json())))
    assert g == f
    p = tmp_path / "forms.json"
    pm.export_forms(p)
    assert sorted(tuple(f.n) for f in pm.import_forms(p)) == sorted(pm.supported_tuples())


def test_inhomogeneous_form_rejected():
    with pytest.raises(InvalidInputError):
        pm.PreModularPoly((1, 0, 0, 0), ((Fraction(1), (1, 0, 0, 0, 0, 0, 0, 0)),
                                         (Fraction(1), (0, 1, 0, 0, 0, 0, 0, 0))))


def test_hecke_Z_oracle():
    # z = 0.3 + 0.2 i at tau = 1/2 + 1.2 i, i.e. (r, s) = (0.3 - 0.5/6, 1/6)
    tau = 0.5 + 1.2j
    s = 0.2 / 1.2
    r = 0.3 - s * 0.5
    eta1 = 3.331766197077326
    eta2 = eta1 * tau - 2j * math.pi
    ref = (2.3405748325449713 - 1.6273451620947226j) - r * eta1 - s * eta2
    assert abs(pm.hecke_Z(r, s, tau) - ref) < 1e-11


def test_half_period_vanishing():
    for n in [(1, 0, 0, 0), (2, 0, 0, 0), (3, 0, 0, 0)]:
        assert abs(pm.eval_premodular(n, 0.5, 0.0, TAU)) < 1e-10
        assert abs(pm.eval_premodular(n, 0.0, 0.5, TAU)) < 1e-10


def test_lattice_point_is_domain_error():
    with pytest.raises(DomainError):
        pm.eval_premodular((1, 0, 0, 0), 1.0, 0.0, TAU)


def test_lame_two_form_closed():
    # Z^3 - 3 wp Z - wp'
    r, s = 0.17, 0.29
    L = lattice(TAU)
    z = r + s * TAU
    Z = pm.hecke_Z(r, s, TAU)
    ref = Z ** 3 - 3 * complex(L.wp(z)) * Z - complex(L.wp_prime(z))
    assert abs(pm.eval_premodular((2, 0, 0, 0), r, s, TAU) - ref) < 1e-10 * abs(ref)


@pytest.mark.parametrize("n", pm.supported_tuples())
def test_forms_vanish_on_monodromy_data(n):
    # second route: (r, s) read off the ODE monodromy at an arbitrary B
    B = 1.3 - 0.8j
    r, s, *_ = mono.rs_with_derivative(n, B, TAU)
    v = pm.eval_premodular(n, r, s, TAU)
    assert abs(v) < 1e-8 * pm.rs_scale(n, r, s, TAU)


@pytest.mark.parametrize("n", [(1, 1, 0, 0), (3, 0, 0, 0), (2, 0, 1, 0)])
@pytest.mark.parametrize("gamma", [[[1, 4], [0, 1]], [[1, 0], [4, 1]], [[1, -4], [0, 1]]])
def test_modularity(n, gamma):
    assert pm.transform_check(n, 0.25, 0.25, gamma, 0.2 + 1.3j, m=4, relative=True) < 1e-7


def test_tau_near_real_axis_is_refused():
    # gamma tau for gamma = [[9, 4], [20, 9]] has Im ~ 1.5e-3
    with pytest.raises(DomainError):
        pm.transform_check((1, 1, 0, 0), 0.25, 0.25, [[9, 4], [20, 9]], 0.2 + 1.3j, m=4)


def test_transform_requires_congruence():
    with pytest.raises(PreconditionError):
        pm.transform_check((1, 0, 0, 0), 0.25, 0.25, [[1, 1], [0, 1]], TAU, m=4)


@settings(max_examples=30)
@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.floats(-0.5, 0.5), st.floats(0.8, 1.6))
def test_factorization_identity(r, s, x, y):
    assert pm.factorization_check_1100(r, s, complex(x, y), relative=True) < 1e-9


@settings(max_examples=20)
@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.sampled_from(pm.supported_tuples()))
def test_parity_and_translation(r, s, n):
    v = pm.eval_premodular(n, r, s, TAU)
    w = pm.eval_premodular(n, r + 1, s - 1, TAU)
    u = pm.eval_premodular(n, -r, -s, TAU)
    sc = pm.rs_scale(n, r, s, TAU)
    f = pm.builtin_form(n)
    assert abs(v - w) < 1e-9 * sc
    assert abs(u - (-1) ** f.weight * v) < 1e-9 * sc


def test_zero_search_rs_grid_regression():
    zs = pm.zero_search((2, 0, 0, 0), "rs_grid", tau=0.5 + 1.25j)
    assert len(zs) == 1
    assert abs(zs[0]["r"] - 0.179826) < 1e-5 and abs(zs[0]["s"] - 0.640348) < 1e-5
    assert zs[0]["residual"] < 1e-10


def test_zero_search_hexagonal_empty():
    assert pm.zero_search((2, 0, 0, 0), "rs_grid", tau=0.5 + math.sqrt(3) / 2 * 1j) == []


def test_zero_search_tau_segment():
    # r = 1/2 half periods sit on the excluded set, so pick a generic line
    out = pm.zero_search((1, 0, 0, 0), "tau_segment", r=0.3, s=0.2, tau0=0.5j, tau1=2j)
    for z in out:
        assert abs(pm.hecke_Z(0.3, 0.2, z["tau"])) < 1e-8


def test_z_roots_match_addition_preimages():
    # the form, read as a polynomial in Z at fixed sigma0, has one root per
    # preimage of the addition map: compare with the B found by Newton
    n, tau = (2, 1, 0, 0), 0.5 + 1.2j
    s0 = 0.31 + 0.17 * tau
    L = lattice(tau)
    inv = L.inv
    wp, wpp = complex(L.wp(s0)), complex(L.wp_prime(s0))
    W = [1, 0, 3 * inv.e1 - 6 * wp, -4 * wpp, -3 * wp ** 2 - 3 * wp * inv.e1 - 3 * inv.e1 ** 2 + 0.75 * inv.g2]
    roots = np.roots(W)
    d = heun.addition_degree_estimate(n, tau, s0)
    assert int(d) == 4
    ze = complex(L.zeta(s0))
    for B in d.B:
        r, s, *_ = mono.rs_with_derivative(n, B, tau)
        sig = r + s * tau
        # bring sigma onto +s0 exactly (mod lattice, up to sign) before reading Z
        sign = 1 if heun.lattice_distance(sig - s0, tau) < heun.lattice_distance(sig + s0, tau) else -1
        r, s = sign * r, sign * s
        m = np.rint(np.linalg.solve([[1, tau.real], [0, tau.imag]], [(r + s * tau - s0).real, (r + s * tau - s0).imag]))
        r, s = r - m[0], s - m[1]
        z = ze - r * inv.eta1 - s * inv.eta2
        assert np.min(np.abs(roots - z)) < 1e-6 * (1 + abs(z))
