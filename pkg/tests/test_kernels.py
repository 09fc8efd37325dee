import numpy as np
import pytest

from nlsbirkhoff import kernels
from nlsbirkhoff._accel import ENV_FLAG, numba_requested


def table(rng, n, nvar_degs=4):
    degs = rng.integers(0, nvar_degs, size=n)
    keys = degs * 10000 + rng.integers(0, 50, size=n)
    coefs = rng.normal(size=n) + 1j * rng.normal(size=n)
    return keys.astype(np.int64), coefs, degs.astype(np.int64)


@pytest.mark.parametrize("seed", range(5))
def test_backends_agree_on_products(seed):
    rng = np.random.default_rng(seed)
    a = table(rng, 60)
    b = table(rng, 80)
    out_nb = kernels.mul_terms(*a, *b, 4, 1e-14, use_numba=True)
    out_np = kernels.mul_terms(*a, *b, 4, 1e-14, use_numba=False)
    assert np.array_equal(out_nb[0], out_np[0])
    assert np.allclose(out_nb[1], out_np[1], rtol=1e-14, atol=1e-14)
    assert np.array_equal(out_nb[2], out_np[2])
    assert np.all(out_nb[2] <= 4)


def test_reduce_sums_duplicates_and_prunes():
    keys = np.array([5, 3, 5, 7], dtype=np.int64)
    coefs = np.array([1.0, 2.0, -1.0, 1e-20], dtype=complex)
    degs = np.array([1, 1, 1, 1], dtype=np.int64)
    for flag in (True, False):
        k, c, d = kernels.reduce_terms(keys, coefs, degs, 1e-14, use_numba=flag)
        assert list(k) == [3] and c[0] == 2.0


def test_empty_tables():
    e = (np.empty(0, np.int64), np.empty(0, complex), np.empty(0, np.int64))
    for flag in (True, False):
        k, _, _ = kernels.mul_terms(*e, *e, 3, 1e-14, use_numba=flag)
        assert k.size == 0


def test_env_flag_disables_numba(monkeypatch):
    monkeypatch.setenv(ENV_FLAG, "1")
    assert not numba_requested()
    monkeypatch.delenv(ENV_FLAG)
    assert numba_requested()
