import math

import numpy as np
import pytest

from heunmon import mfe, monodromy as mono, premodular as pm
from heunmon.errors import UnitarityError
from heunmon.tuples import IndexTuple

TAU0 = 0.25 + math.sqrt(3) / 4 * 1j
B0 = -11.79668793896225 - 20.43246287134857j   # regression value, cross-checked below


@pytest.fixture(scope="module")
def dm():
    return mfe.even_solution((1, 1, 0, 0), B0, TAU0)


def test_instance_is_unitary_with_torsion_data():
    cert = mfe.unitary_certificate((1, 1, 0, 0), B0, TAU0)
    assert cert is not None
    assert mono.rs_distance((cert["r"], cert["s"]), (1 / 3, 2 / 3)) < 1e-8


def test_instance_is_a_zero_of_the_form():
    # independent route to the same point: Z^{(1,1,0,0)} vanishes at (1/3, 2/3)
    assert abs(pm.eval_premodular((1, 1, 0, 0), 1 / 3, 2 / 3, TAU0)) < 1e-9
    Bs = mfe.B_from_rs((1, 1, 0, 0), 1 / 3, 2 / 3, TAU0)
    assert any(abs(b - B0) < 1e-7 * abs(B0) for b in Bs)


def test_invariants_of_developing_map(dm):
    res = mfe.invariant_residuals(dm, [0.13 + 0.21j, 0.3 + 0.1j, -0.2 + 0.3j])
    assert max(res.values()) < 1e-8


def test_residual_suite(dm):
    res = mfe.residual_suite(dm)
    assert res["schwarzian_residual"] < 1e-6
    assert res["schwarzian_residual_exact"] < 1e-8
    assert 3.5 <= res["pde_ratio"] <= 4.5
    for k, v in res["cone_orders"].items():
        assert abs(v - (1, 1, 0, 0)[k]) < 0.02


def test_u_is_doubly_periodic(dm):
    z = 0.17 + 0.09j
    for w in (1.0, TAU0):
        assert abs(dm.u(z + w) - dm.u(z)) < 1e-8 * max(1, abs(dm.u(z)))


def test_count_at_rhombic_point():
    c = mfe.count_even_solutions((1, 1, 0, 0), TAU0)
    assert c.count == 1 and c.reliable
    assert abs(c.B[0] - B0) < 1e-7 * abs(B0)


def test_count_rectangular_lame_one():
    assert mfe.count_even_solutions((1, 0, 0, 0), 1j).count == 0


def test_non_unitary_developing_map_rejected():
    from heunmon import heun
    a = heun.extract_zero_set((1, 1, 0, 0), 1.0 + 2.0j, TAU0)
    with pytest.raises(UnitarityError):
        mfe.developing_map(a, TAU0)


@pytest.mark.parametrize("n,comp", [(2, (0, 1, 1, 1)), (3, (2, 1, 1, 1)), (4, (1, 2, 2, 2))])
def test_isomonodromy_companion(n, comp):
    assert mfe.isomonodromy_companion(n) == IndexTuple(*comp)


@pytest.mark.parametrize("n", [2, 3])
def test_isomonodromy_traces(n):
    rng = np.random.default_rng(11)
    for _ in range(3):
        B = complex(*rng.normal(0, 3, 2))
        tau = complex(rng.uniform(-0.4, 0.4), rng.uniform(0.9, 1.4))
        assert max(mfe.isomonodromy_check(n, B, tau)) < 1e-8
