import math

import numpy as np
import pytest

from nlsbirkhoff.kpnormalize import (
    KPConstants,
    SolvabilityError,
    antisymmetry_defect,
    assemble_f,
    averaged_form_defect,
    basel_sum,
    birkhoff_map,
    darboux_step1,
    e0_operator,
    form_value,
    h_functions,
    homological_residual,
    involution_defect,
    nonresonant_mass,
    potential_W,
    pullback_form,
    solvability_defect,
    solve_homological_f,
    symplectic_defect,
    upsilon,
)
from nlsbirkhoff.polymap import (
    OperatorPoly,
    PolyMap,
    Ring,
    ScalarPoly,
    average_M,
    flow,
    hamiltonian_field,
    invert_near_identity,
    phase_derivative,
)
from nlsbirkhoff.psitaylor import assemble_psi


def _random_poly(ring, rng, degs, nterms=6):
    E = rng.integers(0, 2, size=(nterms, ring.nvar))
    E = E[np.isin(E.sum(axis=1), degs)]
    c = rng.normal(size=len(E)) + 1j * rng.normal(size=len(E))
    return ScalarPoly.from_exponents(ring, E, c)


def _near_identity(ring, rng, scale=0.1):
    slots = []
    for v in range(ring.nvar):
        slots.append(ScalarPoly.var(ring, *ring.label(v)) + _random_poly(ring, rng, [3]).scale(scale))
    return PolyMap(ring, slots)


def test_basel_sum_and_mu():
    assert basel_sum() == pytest.approx(math.pi ** 2 / 6, rel=1e-15)
    assert basel_sum(2000) == pytest.approx(math.pi ** 2 / 6, abs=1e-10)
    mu = KPConstants().mu
    assert mu == pytest.approx(1 / (math.e ** 2 * 32 * math.pi ** 2 / 6), rel=1e-15)
    assert mu > 2.0 ** -10


def test_pullback_form_matches_jacobian_oracle(rng):
    # (Psi^{-1})^* omega_0 at z equals g(E_0 DPhi a, DPhi b) with DPhi by central differences
    ring = Ring(1, 6)
    Psi = _near_identity(ring, rng)
    E1 = pullback_form(Psi, 5)
    Phi = invert_near_identity(Psi, 5)
    z = 0.05 * (rng.normal(size=ring.nvar) + 1j * rng.normal(size=ring.nvar))
    a = rng.normal(size=ring.nvar) + 0j
    b = rng.normal(size=ring.nvar) + 0j
    h = 1e-6
    Da = (Phi.eval(z + h * a) - Phi.eval(z - h * a)) / (2 * h)
    Db = (Phi.eval(z + h * b) - Phi.eval(z - h * b)) / (2 * h)
    nm = ring.nmodes
    Ea = np.concatenate([1j * Da[:nm], -1j * Da[nm:]])
    oracle = np.dot(Ea[:nm], Db[nm:]) + np.dot(Ea[nm:], Db[:nm])
    # E1 is exact through degree 4, so the mismatch is O(|z|^5)
    assert abs(form_value(E1, z, a, b) - oracle) < 1e-6


def test_upsilon_antisymmetric(rng):
    ring = Ring(1, 6)
    E1 = pullback_form(_near_identity(ring, rng), 5)
    assert antisymmetry_defect(upsilon(E1)) < 1e-13


def test_hamiltonian_flow_is_symplectic(rng):
    ring = Ring(1, 6)
    F = _random_poly(ring, rng, [4], nterms=12).scale(0.1)
    F = F + F.mirror().map_coefs(np.conj)
    phi = flow(hamiltonian_field(F), 5)
    assert phi.max_abs(2, 5) > 0
    assert symplectic_defect(phi, 4) < 1e-12


def test_potential_of_constant_form():
    ring = Ring(1, 4)
    A = np.zeros((ring.nvar, ring.nvar), complex)
    A[0, 1], A[1, 0] = 0.3, -0.3
    U = OperatorPoly.constant(ring, A)
    W = potential_W(U)
    z = np.arange(1, ring.nvar + 1) * (0.1 + 0.2j)
    assert np.allclose(W.eval(z), A @ z / 2, atol=1e-15)


def test_homological_chain_recovers_phase_dependent_part(rng):
    ring = Ring(2, 6)
    f = _random_poly(ring, rng, [2, 4], nterms=40)
    f = f - average_M(f)
    h = {j: phase_derivative(f, j) for j in range(-2, 3)}
    assert solvability_defect(h) < 1e-14
    g = assemble_f(h, 2)
    assert (g - f).max_abs() < 1e-13
    assert homological_residual(g, h) < 1e-13


def test_single_monomial_homological_solution():
    ring = Ring(1, 4)
    # h_1 for f = xi_1 eta_0: d/dtheta_1 xi_1 = i xi_1
    mono = ScalarPoly.monomial(ring, K={1: 1}, L={0: 1})
    h = {j: phase_derivative(mono, j) for j in (-1, 0, 1)}
    assert h[1].coef(K={1: 1}, L={0: 1}) == pytest.approx(1j)
    assert (assemble_f(h, 1) - mono).max_abs() < 1e-15


def test_identity_map_is_its_own_normal_form():
    ring = Ring(1, 4)
    res = birkhoff_map(PolyMap.identity(ring), 3, tame=False)
    assert all(v == 0.0 for v in res.defects.values())
    assert (res.Psi_tilde - PolyMap.identity(ring)).max_abs() == 0.0


def test_only_one_darboux_sign_averages_the_form():
    Psi = assemble_psi(1, 3, cap=6)
    E1 = pullback_form(Psi.truncate(3), 3)
    from nlsbirkhoff.kpnormalize import pullback_operator
    for sign, ok in ((-1, True), (1, False)):
        psi_hat = darboux_step1(E1, 3, sign)
        assert (averaged_form_defect(E1, psi_hat, 3) < 1e-12) == ok
        Eh = pullback_operator(E1, psi_hat, 2)
        W = potential_W(upsilon(Eh), 3)
        d = solvability_defect(h_functions(W, 4))
        assert (d < 1e-12) == ok
    with pytest.raises(SolvabilityError):
        birkhoff_map(Psi, 3, sign=1, tame=False)


def test_normal_form_defects_through_degree_five(normal_form):
    d = normal_form.defects
    for key in ("upsilon_antisymmetry", "psi_hat_resonance", "averaged_form", "solvability",
                "homological_residual_below_top", "Psi_tilde_symplectic", "Psi_tilde_involution"):
        assert d[key] < 1e-10, key
    prof = normal_form.degree_profile["psi_action"]
    assert all(v < 1e-10 for deg, v in prof.items() if int(deg) <= 5)


def test_normal_form_is_nontrivial(normal_form):
    ring = normal_form.Psi_tilde.ring
    ident = PolyMap.identity(ring)
    assert (normal_form.psi_hat - ident).max_abs() > 1e-3
    assert (normal_form.psi - ident).max_abs() > 1e-4


def test_top_degree_defect_is_mode_truncation(normal_form):
    # the degree-6 bracket needs cubic derivatives in modes |l| > J that the ring drops;
    # it is present in the input map and inherited, never created by the pipeline
    d = normal_form.defects
    assert d["Psi_involution"] > 1e-4
    assert d["homological_residual"] == pytest.approx(
        normal_form.degree_profile["homological_residual"]["6"])


def test_normal_form_is_real(normal_form):
    assert normal_form.Psi_tilde.reality_defect() < 1e-12
    assert involution_defect(normal_form.Psi_tilde, 4) < 1e-12


def test_nonresonant_mass():
    ring = Ring(1, 4)
    act = ScalarPoly.monomial(ring, K={-1: 1}, L={-1: 1})
    res = ScalarPoly.monomial(ring, K={-1: 1, 1: 1}, L={0: 2}, c=0.5)
    non = ScalarPoly.monomial(ring, K={1: 1}, L={0: 1}, c=-2j)
    assert nonresonant_mass(act + res + non, 0, 4) == pytest.approx(2.5)
    assert nonresonant_mass(act + non, 0, 1) == 0.0


def test_e0_constant():
    ring = Ring(2, 3)
    E0 = e0_operator(ring)
    assert upsilon(E0).max_abs() == 0.0
