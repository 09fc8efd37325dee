import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlsbirkhoff.polymap import (
    CALIBRATION,
    OperatorPoly,
    PolyMap,
    Ring,
    ScalarPoly,
    action_poly,
    average_M,
    average_Ml,
    compose,
    flow,
    flow_linear_diagonal,
    gradient,
    hamiltonian_field,
    invert_near_identity,
    op_Lj,
    phase_derivative,
    poisson_bracket,
    rotate,
    tame_norm_sample,
    tame_norm_upper,
)
from nlsbirkhoff.seqspace import Weight, bilinear_pairing


def real_point(ring, rng, scale=0.3):
    x = (rng.normal(size=ring.nmodes) + 1j * rng.normal(size=ring.nmodes)) * scale
    return np.concatenate([x, np.conj(x)])


def random_poly(ring, rng, nterms=6, degrees=(2, 3), scale=0.2):
    out = ScalarPoly.zero(ring)
    for _ in range(nterms):
        E = np.zeros(ring.nvar, dtype=np.int64)
        np.add.at(E, rng.integers(0, ring.nvar, size=int(rng.choice(degrees))), 1)
        c = complex(*rng.normal(size=2)) * scale
        out = out + ScalarPoly.from_exponents(ring, E[None, :], [c])
    return out


def random_real_map(ring, rng, degrees=(3,)):
    """Near-identity map that sends real states to real states."""
    xs = [random_poly(ring, rng, degrees=degrees) for _ in range(ring.nmodes)]
    slots = [ScalarPoly.var(ring, j, "xi") + p for j, p in zip(range(-ring.J, ring.J + 1), xs)]
    return PolyMap(ring, slots + [s.mirror() for s in slots])


def test_ring_overflow_guard():
    Ring(3, 10)
    with pytest.raises(OverflowError):
        Ring(4, 10)


def test_encode_decode_round_trip(rng):
    r = Ring(2, 6)
    E = rng.integers(0, 3, size=(20, r.nvar))
    Ed, et = r.decode(r.encode(E, np.arange(20) % 3))
    assert np.array_equal(Ed, E) and np.array_equal(et, np.arange(20) % 3)


def test_series_reversion_cubic():
    r = Ring(0, 5)
    c = 0.3
    x, e = ScalarPoly.var(r, 0, "xi"), ScalarPoly.var(r, 0, "eta")
    F = PolyMap(r, [x + x.pow(3).scale(c), e + e.pow(3).scale(c)])
    G = invert_near_identity(F, 5)
    assert G[0].coef({0: 3}) == pytest.approx(-c, abs=1e-15)
    assert G[0].coef({0: 5}) == pytest.approx(3 * c * c, abs=1e-15)


def test_picard_flow_of_cubic_field():
    # u' = u^3 gives u(1) = u + u^3 + 3/2 u^5 + ...
    r = Ring(0, 5)
    x, e = ScalarPoly.var(r, 0, "xi"), ScalarPoly.var(r, 0, "eta")
    u = flow(PolyMap(r, [x.pow(3), e.pow(3)]), 5)
    assert u[0].coef({0: 3}) == pytest.approx(1.0)
    assert u[0].coef({0: 5}) == pytest.approx(1.5)


def test_composition_of_cubic_maps():
    r = Ring(0, 5)
    x, e = ScalarPoly.var(r, 0, "xi"), ScalarPoly.var(r, 0, "eta")
    F = PolyMap(r, [x + x.pow(3), e + e.pow(3)])
    FF = compose(F, F, 5)
    assert FF[0].coef({0: 3}) == pytest.approx(2.0)
    assert FF[0].coef({0: 5}) == pytest.approx(3.0)


def test_flow_requires_nonlinear_field():
    r = Ring(1, 4)
    with pytest.raises(ValueError):
        flow(PolyMap.identity(r), 4)


def test_inverse_composes_to_identity(rng):
    r = Ring(1, 6)
    F = random_real_map(r, rng, degrees=(2, 3))
    G = invert_near_identity(F, 6)
    ident = PolyMap.identity(r)
    assert (compose(F, G, 6) - ident).max_abs() < 1e-12
    assert (compose(G, F, 6) - ident).max_abs() < 1e-12


def test_composition_matches_pointwise_evaluation(rng):
    r = Ring(1, 9)
    F = random_real_map(r, rng)
    G = random_real_map(r, rng)
    z = real_point(r, rng, 0.05)
    FG = compose(F, G, 9)
    assert np.allclose(FG.eval(z), F.eval(G.eval(z)), rtol=0, atol=1e-13)


def test_reality_preserved(rng):
    r = Ring(1, 6)
    F = random_real_map(r, rng)
    assert F.is_real()
    assert invert_near_identity(F, 6).is_real()


def test_Lj_factors_against_quadrature(rng):
    r = Ring(1, 5)
    z = real_point(r, rng)
    x, w = np.polynomial.legendre.leggauss(60)
    t = np.pi * (x + 1.0)
    for K, L in (({1: 1}, {}), ({1: 2}, {0: 1}), ({0: 1}, {0: 1}), ({-1: 1}, {1: 2})):
        g = ScalarPoly.monomial(r, K, L)
        for j in (-1, 0, 1):
            th = np.zeros((t.size, r.nmodes))
            th[:, j + 1] = t
            vals = g.eval(np.stack([rotate(z, r, a) for a in th]))
            quad = np.sum(w * np.pi * t * vals) / (2 * np.pi)
            assert abs(op_Lj(g, j).eval(z) - quad) < 1e-12


def test_Lj_diagonal_factor():
    r = Ring(1, 3)
    g = ScalarPoly.monomial(r, {1: 1}, {}, 2.0)
    assert op_Lj(g, 1).coef({1: 1}) == pytest.approx(2.0 / 1j)
    assert op_Lj(g, 0).coef({1: 1}) == pytest.approx(2.0 * np.pi)


def test_Lj_inverts_phase_derivative_off_resonance(rng):
    r = Ring(1, 5)
    g = random_poly(r, rng)
    for j in (-1, 0, 1):
        h = g - average_Ml(g, j)
        assert (phase_derivative(op_Lj(h, j), j) - h).max_abs() < 1e-13


def test_average_is_projection_and_rotation_invariant(rng):
    r = Ring(1, 5)
    g = random_poly(r, rng, nterms=20, degrees=(2, 4))
    Mg = average_M(g)
    assert (average_M(Mg) - Mg).max_abs() == 0.0
    z = real_point(r, rng)
    theta = rng.uniform(0, 2 * np.pi, size=r.nmodes)
    assert abs(Mg.eval(rotate(z, r, theta)) - Mg.eval(z)) < 1e-13


def test_bracket_of_real_and_imaginary_parts():
    r = Ring(0, 2)
    x, e = ScalarPoly.var(r, 0, "xi"), ScalarPoly.var(r, 0, "eta")
    re = (x + e).scale(0.5)
    im = (x - e).scale(1 / 2j)
    br = poisson_bracket(re, im)
    assert br.coef() == pytest.approx(1.0)


def test_rotation_flow_is_2pi_periodic():
    r = Ring(1, 3)
    X = hamiltonian_field(action_poly(r, 1).scale(-1))
    assert X.slot(1, "xi").coef({1: 1}) == pytest.approx(1j)
    ph = flow_linear_diagonal(X, 2 * np.pi)
    assert np.allclose(ph.linear_part(), np.eye(r.nvar), atol=1e-14)
    assert CALIBRATION == 2.0


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_jacobi_identity(seed):
    rng = np.random.default_rng(seed)
    r = Ring(1, 8)
    F, G, H = (random_poly(r, rng, nterms=3, degrees=(2, 3)) for _ in range(3))
    jac = (poisson_bracket(F, poisson_bracket(G, H)) + poisson_bracket(G, poisson_bracket(H, F))
           + poisson_bracket(H, poisson_bracket(F, G)))
    assert jac.max_abs() < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_bracket_is_antisymmetric_leibniz(seed):
    rng = np.random.default_rng(seed)
    r = Ring(1, 8)
    F, G, H = (random_poly(r, rng, nterms=3, degrees=(2, 3)) for _ in range(3))
    assert (poisson_bracket(F, G) + poisson_bracket(G, F)).max_abs() < 1e-13
    lhs = poisson_bracket(F, G * H)
    rhs = poisson_bracket(F, G) * H + G * poisson_bracket(F, H)
    assert (lhs - rhs).max_abs() < 1e-12


def test_differential_of_monomial():
    r = Ring(1, 4)
    F = ScalarPoly.monomial(r, {0: 2}, {1: 1})
    P = PolyMap(r, [F] + [ScalarPoly.zero(r)] * (r.nvar - 1))
    D = P.differential()
    assert D[0, r.index(0, "xi")].coef({0: 1}, {1: 1}) == pytest.approx(2.0)
    assert D[0, r.index(1, "eta")].coef({0: 2}) == pytest.approx(1.0)


def test_differential_matches_finite_difference(rng):
    r = Ring(1, 6)
    F = random_real_map(r, rng)
    z = real_point(r, rng, 0.1)
    v = real_point(r, rng, 1.0)
    h = 1e-6
    fd = (F.eval(z + h * v) - F.eval(z - h * v)) / (2 * h)
    assert np.allclose(F.differential().eval(z) @ v, fd, atol=1e-9)


def test_adjoint_for_the_real_pairing(rng):
    r = Ring(1, 6)
    D = random_real_map(r, rng).differential()
    A = D.adjoint()
    for _ in range(5):
        z, a, b = (real_point(r, rng) for _ in range(3))
        lhs = bilinear_pairing(D.eval(z) @ a, b)
        rhs = bilinear_pairing(a, A.eval(z) @ b)
        assert abs(lhs - rhs) < 1e-12
        assert abs(lhs.imag) < 1e-12


def test_gradient_convention(rng):
    r = Ring(1, 6)
    F = random_poly(r, rng)
    z = real_point(r, rng)
    v = real_point(r, rng)
    h = 1e-6
    fd = (F.eval(z + h * v) - F.eval(z - h * v)) / (2 * h)
    assert abs(bilinear_pairing(gradient(F).eval(z), v) - fd) < 1e-8


def test_operator_matmul_and_apply(rng):
    r = Ring(1, 6)
    A = random_real_map(r, rng).differential()
    B = random_real_map(r, rng).differential()
    z = real_point(r, rng, 0.1)
    assert np.allclose(A.matmul(B).eval(z), A.eval(z) @ B.eval(z), atol=1e-12)
    X = random_real_map(r, rng)
    assert np.allclose(A.apply(X).eval(z), A.eval(z) @ X.eval(z), atol=1e-12)
    assert OperatorPoly.identity(r).matmul(A).max_abs() == A.max_abs()


def test_json_round_trip_is_exact(rng):
    r = Ring(1, 6)
    F = random_real_map(r, rng, degrees=(3, 5))
    G = PolyMap.from_json(json.loads(json.dumps(F.to_json())), 6)
    assert (F - G).max_abs() == 0.0


def test_time_variable_integration():
    r = Ring(0, 3)
    p = ScalarPoly.var(r, 0, "xi").times_t(2)
    assert p.t_integrate().t_eval(1.0).coef({0: 1}) == pytest.approx(1 / 3)


def test_tame_norm_upper_dominates_samples(rng):
    r = Ring(1, 6)
    F = random_real_map(r, rng) - PolyMap.identity(r)
    u, v, w = Weight.unit(), Weight.polynomial(1), Weight.shifted(1.0, s=1.0)
    up = tame_norm_upper(F, 0.1, u, v, w)
    lo = tame_norm_sample(F, 0.1, u, v, w, samples=50, rng=rng)
    assert 0 < lo <= up * (1 + 1e-12)
