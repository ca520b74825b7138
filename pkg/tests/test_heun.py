import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heunmon import heun
from heunmon.elliptic import invariants, lattice
from heunmon.errors import PreconditionError

TAU = 0.5 + 1.2j


def test_potential_lame_one():
    z, B = 0.31 + 0.22j, 0.7 - 0.1j
    assert abs(heun.potential((1, 0, 0, 0), B, TAU, z) - (2 * lattice(TAU).wp(z) + B)) < 1e-12


def test_potential_shifted_terms():
    L = lattice(TAU)
    z, B = 0.13 + 0.4j, 0.0
    v = heun.potential((1, 1, 0, 1), B, TAU, z)
    ref = 2 * L.wp(z) + 2 * L.wp(z + 0.5) + 2 * L.wp(z + (1 + TAU) / 2)
    assert abs(v - ref) < 1e-10 * abs(ref)


def test_spectral_lame_one_matches_branch_points():
    # y'' = (2 wp + B) y has band edges exactly at B = e_k
    S = heun.spectral_polynomial((1, 0, 0, 0), TAU)
    assert S.degree == 3
    assert np.abs(S.coeffs - np.poly(invariants(TAU).e)).max() < 1e-9


def test_spectral_lame_two_classical():
    # classical n = 2 Lame band polynomial (B^2 - 3 g2) prod (B + 3 e_k)
    inv = invariants(TAU)
    S = heun.spectral_polynomial((2, 0, 0, 0), TAU)
    ref = np.polymul([1, 0, -3 * inv.g2], np.poly([-3 * e for e in inv.e]))
    assert S.degree == 5
    assert np.abs(S.coeffs - ref).max() < 1e-8 * np.abs(ref).max()


@pytest.mark.parametrize("n,deg", [((1, 1, 0, 0), 3), ((2, 1, 0, 0), 5), ((1, 1, 1, 1), 3),
                                   ((0, 1, 1, 1), 5)])
def test_spectral_degree_and_roots(n, deg):
    from heunmon import monodromy as mono
    S = heun.spectral_polynomial(n, TAU)
    assert S.degree == deg
    assert abs(S.coeffs[0] - 1) < 1e-12
    for b in S.roots():
        M = mono.monodromy(n, complex(b), TAU)
        assert abs(abs(np.trace(M.M1)) - 2) < 1e-6
        assert abs(abs(np.trace(M.M2)) - 2) < 1e-6


def test_spectral_translation_invariance():
    # shifting z by w_3/2 swaps the exponents pairwise, so the two tuples share B and Q
    a = np.sort_complex(np.asarray(heun.spectral_polynomial((1, 1, 1, 0), TAU).roots(), complex))
    b = np.sort_complex(np.asarray(heun.spectral_polynomial((0, 1, 1, 1), TAU).roots(), complex))
    assert len(a) == len(b)
    for x in a:
        assert np.min(np.abs(b - x)) < 1e-6 * (1 + abs(x))


ZS_TUPLES = [(1, 0, 0, 0), (1, 1, 0, 0), (2, 0, 0, 0), (2, 1, 0, 0), (3, 0, 0, 0), (0, 1, 1, 1)]


@pytest.mark.parametrize("n", ZS_TUPLES)
def test_extract_zero_set_solves_both_forms(n):
    B = 1.7 - 2.3j
    a = heun.extract_zero_set(n, B, TAU)
    assert abs(a.B - B) < 1e-8 * (1 + abs(B))
    assert heun.residual_norm(a, a.n, TAU, "transcendental") < 1e-9
    assert heun.residual_norm(a, a.n, TAU, "algebraic") < 1e-9
    assert heun.order_check(a, [0.13 + 0.21j, 0.27 + 0.33 * TAU]) < 1e-8


@pytest.mark.parametrize("n", [(1, 1, 0, 0), (2, 1, 0, 0)])
def test_perturbed_zero_set_fails_both_forms(n):
    a = heun.extract_zero_set(n, 0.9 + 0.4j, TAU)
    pts = list(a.points)
    pts[-1] += 2e-3
    b = heun._make_zero_set(pts, a.n, TAU)
    assert heun.residual_norm(b, b.n, TAU, "transcendental") > 1e-6
    assert heun.residual_norm(b, b.n, TAU, "algebraic") > 1e-6


def test_ansatz_solves_ode_by_finite_differences():
    # second route: y''/y from a 5-point stencil on y itself
    a = heun.extract_zero_set((2, 1, 0, 0), -0.8 + 1.1j, TAU)
    c, B, y = heun.hermite_ansatz(a, a.n, TAU)
    assert abs(B - a.B) < 1e-12 * (1 + abs(B))
    for z in (0.21 + 0.17j, -0.3 + 0.35 * TAU):
        h = 1e-3
        v = [y(z + k * h) for k in (-2, -1, 0, 1, 2)]
        d2 = (-v[0] + 16 * v[1] - 30 * v[2] + 16 * v[3] - v[4]) / (12 * h * h)
        I = heun.potential(a.n, a.B, TAU, z)
        assert abs(d2 / v[2] - I) < 1e-5 * max(1, abs(I))
        assert abs(y.ode_residual(z)) < 1e-8 * max(1, abs(I))


def test_ansatz_rejects_half_period_points():
    with pytest.raises(PreconditionError):
        heun.hermite_ansatz([0.5], (1, 0, 0, 0), TAU)


def test_branch_point_detection():
    e = invariants(1j).e
    a = heun.extract_zero_set((1, 0, 0, 0), e[0], 1j)
    assert a.branch_point
    assert abs(a.points[0] - 0.5) < 1e-6


def test_q_roots_give_self_paired_sets():
    S = heun.spectral_polynomial((1, 1, 0, 0), TAU)
    for b in S.roots():
        assert heun.extract_zero_set((1, 1, 0, 0), complex(b), TAU).branch_point


@settings(max_examples=10)
@given(st.builds(complex, st.floats(-8, 8), st.floats(-8, 8)))
def test_zero_set_round_trip_property(B):
    a = heun.extract_zero_set((2, 0, 0, 0), B, TAU)
    assert abs(heun.B_of(a.points, a.n, TAU) - B) < 1e-7 * (1 + abs(B))


def test_addition_degree_lame_one():
    d = heun.addition_degree_estimate((1, 0, 0, 0), TAU, 0.31 + 0.17 * TAU)
    assert int(d) == 1 and d.reliable


def test_addition_degree_closed_form_1100():
    # wp(z) + wp(z + 1/2) - e1 is the wp of <1/2, tau>, so the equation is
    # Lame n = 1 on that lattice and sigma_n = 2a'; the two preimages are
    # B = 4 wp(sigma0 + j tau | 1, 2 tau) - 2 e1, j = 0, 1
    tau = 0.5 + 1.2j
    s0 = 0.31 + 0.17 * tau
    d = heun.addition_degree_estimate((1, 1, 0, 0), tau, s0)
    L, L2 = lattice(tau), lattice(2 * tau)
    ref = [4 * complex(L2.wp(s0 + j * tau)) - 2 * L.inv.e1 for j in (0, 1)]
    assert int(d) == 2
    for b in ref:
        assert min(abs(b - x) for x in d.B) < 1e-7 * (1 + abs(b))
