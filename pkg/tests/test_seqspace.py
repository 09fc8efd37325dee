import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlsbirkhoff.seqspace import (
    NormSpec,
    TruncState,
    Weight,
    bilinear_pairing,
    e0_matrix,
    modes,
    norm,
    omega0,
    real_scalar_product,
    slot_index,
    slot_label,
    swap_matrix,
)


def test_weight_families():
    assert Weight.unit()(5) == 1.0
    assert Weight.polynomial(2)(3) == pytest.approx(16.0)
    assert Weight.analytic(1, 0.5)(2) == pytest.approx(3 * math.exp(1.0))
    assert Weight.shifted(1.0, s=1.0)(1) == pytest.approx(4.0)


def test_weight_rejects_negative_exponents():
    with pytest.raises(ValueError):
        Weight.polynomial(-1)
    with pytest.raises(ValueError):
        Weight.analytic(0, -0.1)


def test_submultiplicativity():
    assert Weight.analytic(1, 0.5, 1.0).is_submultiplicative()
    assert Weight.polynomial(3).is_submultiplicative()
    # super-linear exponent breaks it
    assert not Weight.analytic(0, 0.5, 2.0).is_submultiplicative()


def test_weight_config_round_trip():
    w = Weight.shifted(1.0, s=2.0, a=0.3, b=0.5)
    assert Weight.from_config(w.to_config()) == w


def test_slot_layout():
    J = 3
    for idx in range(2 * (2 * J + 1)):
        j, ch = slot_label(J, idx)
        assert slot_index(J, j, ch) == idx
    with pytest.raises(IndexError):
        slot_index(J, 4, "xi")


def test_norm_of_unit_vector():
    st_ = TruncState.from_modes(2, {1: 1.0}, real=True)
    assert norm(st_) == pytest.approx(2.0)
    assert norm(st_, NormSpec(2.0, Weight.polynomial(1))) == pytest.approx(4.0)


def test_random_real_has_requested_norm(rng):
    s = TruncState.random_real(4, 0.03, rng)
    assert s.is_real()
    assert norm(s) == pytest.approx(0.03)


def test_state_validation():
    with pytest.raises(ValueError):
        TruncState(2, np.zeros(3), np.zeros(5))
    with pytest.raises(ValueError):
        TruncState(1, [np.nan, 0, 0], np.zeros(3))


def test_json_round_trip(rng):
    s = TruncState.random_real(3, 0.1, rng)
    t = TruncState.from_json(s.to_json())
    assert np.array_equal(s.xi, t.xi) and np.array_equal(s.eta, t.eta)


def test_embed_pads_with_zeros(rng):
    s = TruncState.random_real(2, 0.1, rng)
    e = s.embed(4)
    assert e.J == 4 and norm(e) == pytest.approx(norm(s))
    with pytest.raises(ValueError):
        e.embed(3)


vec = st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
               min_size=5, max_size=5)


@settings(max_examples=50, deadline=None)
@given(vec, vec)
def test_bilinear_pairing_is_real_pairing_on_real_states(a, b):
    za = TruncState.real(2, a)
    zb = TruncState.real(2, b)
    g = bilinear_pairing(za.vector, zb.vector)
    assert abs(g - real_scalar_product(za, zb)) <= 1e-9 * (1 + abs(g))
    assert np.allclose(za.vector @ swap_matrix(2) @ zb.vector, g)


@settings(max_examples=50, deadline=None)
@given(vec, vec)
def test_omega0_is_antisymmetric_and_uses_E0(a, b):
    za = TruncState.real(2, a)
    zb = TruncState.real(2, b)
    assert omega0(za, zb) == pytest.approx(-omega0(zb, za), abs=1e-9)
    g = bilinear_pairing(e0_matrix(2) @ za.vector, zb.vector)
    assert g.real == pytest.approx(omega0(za, zb), abs=1e-9)


def test_modes():
    assert list(modes(2)) == [-2, -1, 0, 1, 2]
