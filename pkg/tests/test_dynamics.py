import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlsbirkhoff.dynamics import (
    IntegrationError,
    Trajectory,
    conserved_quantities,
    cubic_term,
    cubic_term_direct,
    energy,
    integrate,
    mass_poly,
    momentum_poly,
    nls_hamiltonian_poly,
    nls_vector_field,
    norm_bound_check,
    propagate,
)
from nlsbirkhoff.polymap import Ring, hamiltonian_field, poisson_bracket
from nlsbirkhoff.seqspace import TruncState


def _random_xi(rng, J, scale=0.1):
    return scale * (rng.normal(size=2 * J + 1) + 1j * rng.normal(size=2 * J + 1))


@pytest.mark.parametrize("J", [1, 3, 6])
def test_cubic_fft_matches_enumeration(rng, J):
    xi = _random_xi(rng, J, 1.0)
    assert np.max(np.abs(cubic_term(xi, J) - cubic_term_direct(xi, J))) < 1e-12


def test_cubic_batched(rng):
    xs = np.stack([_random_xi(rng, 2) for _ in range(4)])
    out = cubic_term(xs, 2)
    for x, o in zip(xs, out):
        assert np.allclose(o, cubic_term_direct(x, 2), atol=1e-15)


def test_energy_matches_polynomial(rng):
    J = 2
    ring = Ring(J, 4)
    xi = _random_xi(rng, J)
    st_ = TruncState.real(J, xi)
    H = nls_hamiltonian_poly(ring)
    assert H.eval(st_.vector) == pytest.approx(energy(xi, J), rel=1e-13)


def test_vector_field_is_half_the_calibrated_hamiltonian_field(rng):
    J = 2
    ring = Ring(J, 4)
    st_ = TruncState.real(J, _random_xi(rng, J))
    X = hamiltonian_field(nls_hamiltonian_poly(ring)).eval(st_.vector)
    v = nls_vector_field(st_).vector
    assert np.max(np.abs(X - 2 * v)) < 1e-12


def test_mass_and_momentum_commute_with_hamiltonian():
    ring = Ring(2, 4)
    H = nls_hamiltonian_poly(ring)
    for F in (mass_poly(ring), momentum_poly(ring)):
        assert poisson_bracket(F, H).max_abs() < 1e-12


def test_single_mode_quantities():
    st_ = TruncState.from_modes(2, {1: 1.0}, real=True)
    H, m, P = conserved_quantities(st_)
    assert H == pytest.approx(4 * np.pi ** 2 + 1)
    assert m == 1.0
    assert P == pytest.approx(2 * np.pi)


@settings(max_examples=6, deadline=None)
@given(k=st.integers(-2, 2), r=st.floats(0.01, 0.3), scheme=st.sampled_from(["lawson", "rk4", "strang"]))
def test_single_mode_exact_solution(k, r, scheme):
    # a single mode stays single: xi_k(t) = a exp(-i((2 pi k)^2 + 2|a|^2) t)
    J = 2
    xi0 = np.zeros(2 * J + 1, complex)
    xi0[k + J] = r
    T, dt = 0.5, 1e-3 if scheme == "lawson" else 2e-4
    out = propagate(xi0, J, T, dt, scheme)
    exact = r * np.exp(-1j * ((2 * np.pi * k) ** 2 + 2 * r ** 2) * T)
    tol = 1e-12 if scheme != "rk4" or k == 0 else 1e-6
    assert abs(out[k + J] - exact) < tol
    assert np.max(np.abs(np.delete(out, k + J))) < 1e-14


def test_schemes_agree(rng):
    J = 2
    xi0 = _random_xi(rng, J)
    ref = propagate(xi0, J, 0.5, 1e-4, "lawson")
    for scheme in ("rk4", "strang"):
        assert np.max(np.abs(propagate(xi0, J, 0.5, 1e-4, scheme) - ref)) < 1e-7


def test_reversibility(rng):
    # the scheme is not symmetric; the h^5 local error flips sign with h, so the
    # round trip leaves a fifth-order remainder
    J = 3
    xi0 = _random_xi(rng, J)
    errs = []
    for dt in (1e-3, 5e-4):
        back = propagate(propagate(xi0, J, 1.0, dt), J, -1.0, dt)
        errs.append(np.max(np.abs(back - xi0)))
    assert errs[1] < 1e-9
    assert 24 < errs[0] / errs[1] < 40


def test_conservation_along_trajectory(rng):
    st_ = TruncState.random_real(4, 0.1, rng)
    tr = integrate(st_, 2.0, 1e-3, stride=50)
    assert tr.energy_drift() < 1e-8
    assert tr.mass_drift() < 1e-10
    assert tr.momentum_drift() < 1e-10


def test_energy_guard_raises(rng):
    # classical RK4 damps the fastest modes at J = 8, dt = 1e-3
    st_ = TruncState.random_real(8, 0.1, rng)
    with pytest.raises(IntegrationError):
        integrate(st_, 1.0, 1e-3, scheme="rk4")


def test_integrate_rejects_bad_input(rng):
    with pytest.raises(ValueError):
        integrate(TruncState(1, [0.1, 0, 0], [0, 0, 0.1]), 1.0)
    with pytest.raises(ValueError):
        integrate(TruncState.zeros(1), -1.0)
    with pytest.raises(ValueError):
        integrate(TruncState.zeros(1), 1.0, scheme="euler")


def test_trajectory_time_grid_validated():
    z = np.zeros(2)
    with pytest.raises(ValueError):
        Trajectory(0, np.array([0.0, 0.0]), np.zeros((2, 1)), z, z, z)


def test_trajectory_csv(tmp_path, rng):
    tr = integrate(TruncState.random_real(1, 0.05, rng), 0.2, 1e-3, stride=20, gaps=True)
    p = tmp_path / "traj.csv"
    tr.to_csv(p)
    rows = list(csv.reader(open(p)))
    assert rows[0][:4] == ["t", "H", "mass", "momentum"]
    assert "gamma_0" in rows[0]
    assert len(rows) == 1 + len(tr.t)
    assert float(rows[-1][0]) == pytest.approx(0.2)


def test_l2_norm_bound_is_mass_conservation(rng):
    tr = integrate(TruncState.random_real(2, 0.05, rng), 1.0, 1e-3, stride=50)
    rep = norm_bound_check(tr)
    assert abs(rep["relative_excess"]) < 1e-10
    rep1 = norm_bound_check(tr, s=1.0)
    assert rep1["sup"] >= rep1["rho"]
