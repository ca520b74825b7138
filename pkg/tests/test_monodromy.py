import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heunmon import heun, monodromy as mono
from heunmon.config import DEFAULT
from heunmon.errors import InvalidInputError, NotCompletelyReducibleError

TAU = 0.5 + 1.2j


@pytest.mark.parametrize("n", [(1, 0, 0, 0), (1, 1, 0, 0), (2, 0, 0, 0), (2, 1, 0, 0), (0, 1, 1, 1)])
def test_hygiene(n):
    M = mono.monodromy_pair(n, 1.3 - 0.7j, TAU, local_check=True)
    assert abs(np.linalg.det(M.M1) - 1) < 1e-9
    assert abs(np.linalg.det(M.M2) - 1) < 1e-9
    assert np.abs(M.M1 @ M.M2 - M.M2 @ M.M1).max() < 1e-8
    assert set(M.local_loops) == {k for k in range(4) if n[k]}
    assert max(M.local_loops.values()) < 1e-8


def test_traces_independent_of_base_point():
    n, B = (2, 1, 0, 0), 0.4 + 2.1j
    a = mono.monodromy_pair(n, B, TAU, local_check=False)
    cfg = dataclasses.replace(DEFAULT, base_point=(0.19, 0.36))
    b = mono.monodromy_pair(n, B, TAU, cfg, local_check=False)
    assert not np.allclose(a.M1, b.M1, atol=1e-6)
    assert abs(np.trace(a.M1) - np.trace(b.M1)) < 1e-9
    assert abs(np.trace(a.M2) - np.trace(b.M2)) < 1e-9


def test_variational_derivative_matches_finite_difference():
    n, B, h = (1, 1, 0, 0), 0.7 + 0.3j, 1e-5
    M = mono.monodromy_pair(n, B, TAU, variational=True, local_check=False)
    Mp = mono.monodromy_pair(n, B + h, TAU, local_check=False)
    Mm = mono.monodromy_pair(n, B - h, TAU, local_check=False)
    assert np.abs(M.dM1 - (Mp.M1 - Mm.M1) / (2 * h)).max() < 1e-6 * max(1, np.abs(M.dM1).max())


def test_spectral_roots_are_not_completely_reducible():
    S = heun.spectral_polynomial((1, 1, 0, 0), TAU)
    for b in S.roots():
        M = mono.monodromy((1, 1, 0, 0), complex(b), TAU)
        assert M.kind == "NCR"


def test_lame_one_at_e1_is_ncr_and_generic_is_cr():
    from heunmon.elliptic import invariants
    e1 = invariants(TAU).e1
    assert mono.monodromy((1, 0, 0, 0), e1, TAU).kind == "NCR"
    assert mono.monodromy((1, 0, 0, 0), e1 + 0.5, TAU).kind == "CR"


def test_classify_rejects_noncommuting():
    with pytest.raises(InvalidInputError):
        mono.classify([[1, 1], [0, 1]], [[1, 0], [1, 1]])


def test_classify_identity_pair_is_degenerate_ncr():
    M = mono.classify(np.eye(2), -np.eye(2))
    assert M.kind == "NCR" and M.degenerate


def test_classify_diagonal():
    r, s = 0.21, 0.13
    M1 = np.diag([np.exp(-2j * np.pi * s), np.exp(2j * np.pi * s)])
    M2 = np.diag([np.exp(2j * np.pi * r), np.exp(-2j * np.pi * r)])
    M = mono.classify(M1, M2)
    assert M.kind == "CR" and M.unitary
    assert mono.rs_distance((M.r, M.s), (r, s)) < 1e-12


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_canonical_rs_invariance(r, s, m, k):
    m, k = round(m), round(k)
    a = mono.canonical_rs(r, s)
    b = mono.canonical_rs(-r + m, -s + k)
    assert mono.rs_distance(a, b) < 1e-9
    assert 0 <= np.real(a[0]) < 1 + 1e-12


Bs = st.builds(complex, st.floats(-6, 6), st.floats(-6, 6))


@settings(max_examples=12)
@given(Bs, st.sampled_from([(1, 0, 0, 0), (1, 1, 0, 0), (2, 0, 0, 0), (2, 1, 0, 0)]))
def test_rs_routes_and_traces(B, n):
    M = mono.monodromy(n, B, TAU)
    if M.kind != "CR":
        return
    a = heun.extract_zero_set(n, B, TAU)
    r, s = mono.rs_from_zero_set(a, TAU, canonical=False)
    assert mono.rs_distance((M.r, M.s), (r, s)) < 1e-6
    assert abs(np.trace(M.M1) - 2 * np.cos(2 * np.pi * s)) < 1e-7
    assert abs(np.trace(M.M2) - 2 * np.cos(2 * np.pi * r)) < 1e-7


def test_rs_with_derivative_matches_fd():
    n, B, h = (2, 0, 0, 0), 1.1 - 0.4j, 1e-5
    r, s, dr, ds, _ = mono.rs_with_derivative(n, B, TAU)
    rp, sp, *_ = mono.rs_with_derivative(n, B + h, TAU)
    rm, sm, *_ = mono.rs_with_derivative(n, B - h, TAU)
    assert abs((rp - rm) / (2 * h) - dr) < 1e-5
    assert abs((sp - sm) / (2 * h) - ds) < 1e-5


def test_branch_zero_set_has_no_rs():
    from heunmon.elliptic import invariants
    a = heun.extract_zero_set((1, 0, 0, 0), invariants(1j).e1, 1j)
    assert a.branch_point
    with pytest.raises(NotCompletelyReducibleError):
        mono.rs_from_zero_set(a, 1j)
