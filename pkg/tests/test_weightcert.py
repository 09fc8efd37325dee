import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlsbirkhoff.seqspace import Weight
from nlsbirkhoff.weightcert import (
    certify_case,
    ff_kernel,
    ff_values,
    gg_exchange,
    gg_kernel,
    gg_values,
    weight_case,
    rstar,
    sup_bruteforce,
    verify_w_condition,
    weighted_sums,
    weighted_sums_bruteforce,
)


def test_ff_kernel_small_case():
    # n = 3, k = (1, 0, 0), j = 1: factors <k1 - j> <k1 + k2> = 1 * 2
    assert ff_kernel((1, 0, 0), 1) == 0.5
    assert ff_kernel((1, 0, 0), 2) == 0.0


def test_even_order_rejected():
    with pytest.raises(ValueError):
        ff_kernel((1, 2), 3)


idx = st.integers(-15, 15)


@settings(max_examples=300, deadline=None)
@given(st.sampled_from([3, 5, 7]).flatmap(lambda n: st.tuples(st.lists(idx, min_size=n, max_size=n),
                                                               st.integers(1, n))))
def test_closed_forms_match_exchange_definition(data):
    k, r = data
    j = -(sum(k) - 2 * k[r - 1])
    assert gg_kernel(k, j, r) == gg_exchange(k, j, r)


def test_vectorized_kernels_match_scalar(rng):
    karr = rng.integers(-6, 7, size=(200, 5))
    for j in (-3, 0, 4):
        f = ff_values(karr, j)
        assert np.array_equal(f, [ff_kernel(k, j) for k in karr])
        g = gg_values(karr, j, 2)
        assert np.array_equal(g, [gg_exchange(k, j, 2) for k in karr])


def test_rstar_closed_form():
    assert rstar(2.0) == pytest.approx(math.sqrt(math.pi ** 2 / 3 - 1), abs=1e-8)
    assert rstar(1.0) == 1.0


@pytest.mark.parametrize("u,v", [
    (Weight.unit(), Weight.unit()),
    (Weight.unit(), Weight.polynomial(1)),
    (Weight.polynomial(1), Weight.polynomial(2)),
])
def test_laplace_chain_matches_enumeration(u, v):
    js, f, g = weighted_sums(u, v, 2.0, 3, 6, 4, all_r=True)
    _, fb, gb = weighted_sums_bruteforce(u, v, 2.0, 3, 6, 4)
    assert np.allclose(f, fb, rtol=1e-9, atol=0)
    for a, b in zip(g, gb):
        assert np.allclose(a, b, rtol=1e-9, atol=0)


def test_reversal_symmetry_of_g_sums():
    _, _, g = weighted_sums(Weight.unit(), Weight.polynomial(1), 2.0, 5, 5, 3, all_r=True)
    assert np.allclose(g[0], g[4]) and np.allclose(g[1], g[3])


def test_p1_bruteforce_is_the_sup():
    u = v = w = Weight.unit()
    f, g = sup_bruteforce(u, v, w, 3, 4, 3)
    best = 0.0
    for k in itertools.product(range(-4, 5), repeat=3):
        j = sum(k)
        if abs(j) <= 3:
            best = max(best, ff_kernel(k, j) / 3.0)
    assert f == pytest.approx(best)


def test_case_iii_needs_s_at_least_one():
    with pytest.raises(ValueError):
        weight_case("iii", 0)


@pytest.mark.parametrize("case,s,a", [("i", 0, 0.0), ("i", 1, 0.5), ("ii", 2, 0.0), ("iii", 1, 0.0)])
def test_certification_passes(case, s, a):
    rep = certify_case(case, s, a, p=2.0, n_set=(3,), K_max=30, j_max=15)
    assert rep.passed
    assert all(m > 0 for m in rep.margin.values())


def test_certification_fails_with_too_small_constant():
    u = v = w = Weight.unit()
    rep = verify_w_condition(u, v, w, 2.0, (3,), K_max=20, j_max=10, R1_factor=0.1)
    assert not rep.passed
