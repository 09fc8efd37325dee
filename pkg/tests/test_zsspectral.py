import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlsbirkhoff.seqspace import TruncState
from nlsbirkhoff.zsspectral import (
    build_zs_matrix,
    gap_coordinate_ratio,
    gaps,
    involution,
    pairing,
    projector,
    projector0,
    projector_checks,
    resolvent_bound,
    spectral_data,
    spectrum,
    eigvecs_fj,
    zw_coords,
)


def test_zero_state_has_closed_gaps():
    sd = spectrum(build_zs_matrix(TruncState.zeros(3)))
    assert np.max(np.abs(sd.gaps)) == 0.0
    assert np.allclose(sd.lam_minus, np.pi * np.arange(-3, 4))


def test_constant_potential_opens_only_ground_gap():
    # the 2x2 block on f_0^{-/+} has eigenvalues +-a, every other block is a mirrored pair
    a = 0.01
    st_ = TruncState.from_modes(2, {0: a}, real=True)
    g = gaps(st_)
    assert g[2] == pytest.approx(2 * a, abs=1e-15)
    assert np.max(np.abs(np.delete(g, 2))) < 1e-14


@settings(max_examples=20, deadline=None)
@given(k=st.integers(-2, 2), r=st.floats(1e-4, 0.05), phase=st.floats(0, 2 * np.pi))
def test_single_mode_gap_is_twice_amplitude(k, r, phase):
    st_ = TruncState.from_modes(2, {k: r * np.exp(1j * phase)}, real=True)
    g = gaps(st_)
    assert g[k + 2] == pytest.approx(2 * r, rel=1e-10)
    assert np.max(np.abs(np.delete(g, k + 2))) < 1e-13


def test_real_state_gives_hermitian_matrix(rng):
    st_ = TruncState.random_real(3, 0.05, rng)
    m = build_zs_matrix(st_)
    assert m.hermitian_defect() == 0.0
    assert np.all(np.real(spectrum(m).gaps) >= 0)


def test_non_real_state_is_not_hermitian(rng):
    st_ = TruncState(2, rng.normal(size=5) * 0.01, rng.normal(size=5) * 0.01 + 0j)
    assert not build_zs_matrix(st_).is_hermitian()


def test_jop_below_state_cutoff_rejected():
    with pytest.raises(ValueError):
        build_zs_matrix(TruncState.zeros(4), J_op=2)


def test_large_state_reported():
    st_ = TruncState.from_modes(1, {0: 3.0}, real=True)
    with pytest.raises(ValueError):
        spectrum(build_zs_matrix(st_))


@pytest.mark.parametrize("j", [-2, 0, 1])
def test_projector_properties(rng, j):
    st_ = TruncState.random_real(3, 0.04, rng)
    m = build_zs_matrix(st_)
    chk = projector_checks(m, j)
    assert chk["idempotency"] < 1e-13
    assert chk["trace"] == pytest.approx(2.0, abs=1e-12)
    assert chk["distance_ok"]
    Pc = projector(m, j, method="contour")
    Pe = projector(m, j, method="eig")
    assert np.max(np.abs(Pc - Pe)) < 1e-12
    assert np.max(np.abs(m.L @ Pc - Pc @ m.L)) < 1e-12


def test_projector_at_zero_state_is_unperturbed():
    m = build_zs_matrix(TruncState.zeros(2))
    assert np.max(np.abs(projector(m, 1) - projector0(m.J_op, 1))) < 1e-14


def test_resolvent_bound(rng):
    st_ = TruncState.random_real(3, 0.05, rng)
    m = build_zs_matrix(st_)
    for j in range(-3, 4):
        assert resolvent_bound(m, j) <= 4 * 0.05


def test_eigvecs_normalized_and_swapped_by_involution(rng):
    st_ = TruncState.random_real(2, 0.03, rng)
    m = build_zs_matrix(st_)
    for j in range(-2, 3):
        fm, fp = eigvecs_fj(m, j)
        P = projector(m, j)
        assert np.max(np.abs(P @ fm - fm)) < 1e-13
        assert np.linalg.norm(fm) == pytest.approx(1.0, abs=1e-13)
        assert np.max(np.abs(involution(fm) - fp)) < 1e-13
        assert pairing(fm, fm) == pytest.approx(0.0, abs=1e-13)
        assert pairing(fm, fp) == pytest.approx(1.0, abs=1e-13)


def test_eig_and_contour_coordinates_agree(rng):
    m = build_zs_matrix(TruncState.random_real(2, 0.03, rng))
    for j in range(-2, 3):
        zc, wc = zw_coords(m, j)
        ze, we = zw_coords(m, j, method="eig")
        assert abs(zc - ze) < 1e-14 and abs(wc - we) < 1e-14


def test_coordinates_real_symmetry(rng):
    sd = spectral_data(TruncState.random_real(2, 0.03, rng))
    for j in sd.js:
        assert abs(sd.w[int(j)] - np.conj(sd.z[int(j)])) < 1e-14


@pytest.mark.parametrize("k", [-1, 0, 2])
def test_single_mode_coordinate_is_the_mode(k):
    a = 1e-3 * np.exp(0.7j)
    sd = spectral_data(TruncState.from_modes(2, {k: a}, real=True))
    assert abs(sd.z[k] - a) < 1e-15
    for j in sd.js:
        if j != k:
            assert abs(sd.z[int(j)]) < 1e-15


def test_gap_coordinate_ratio_is_four(rng):
    ratio = gap_coordinate_ratio(TruncState.random_real(2, 0.02, rng))
    # eigenvalue round-off ~1e-14 on gaps ~1e-2
    assert np.all(np.abs(ratio - 4.0) < 1e-10)


def test_spectral_data_serialization(rng):
    sd = spectral_data(TruncState.random_real(1, 0.01, rng))
    d = sd.to_json()
    assert d["J_op"] == sd.J_op
    lines = sd.to_csv().strip().splitlines()
    assert len(lines) == 1 + 3
