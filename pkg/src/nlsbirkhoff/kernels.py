"""Hot loops of the sparse polynomial algebra.

Terms are stored as three parallel arrays: packed monomial keys (int64),
complex coefficients and total degrees.  Both the numba kernels and the numpy
fallbacks return keys sorted ascending, summed over duplicates and with
coefficients of modulus below ``tol`` removed.
"""

from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# numba kernels


@njit
def _reduce_nb(keys, coefs, degs, tol):
    n = keys.shape[0]
    out_k = np.empty(n, np.int64)
    out_c = np.empty(n, np.complex128)
    out_d = np.empty(n, np.int64)
    if n == 0:
        return out_k, out_c, out_d
    order = np.argsort(keys)
    cnt = 0
    cur = keys[order[0]]
    acc = coefs[order[0]]
    dcur = degs[order[0]]
    for t in range(1, n):
        i = order[t]
        k = keys[i]
        if k == cur:
            acc += coefs[i]
        else:
            if abs(acc) >= tol:
                out_k[cnt] = cur
                out_c[cnt] = acc
                out_d[cnt] = dcur
                cnt += 1
            cur = k
            acc = coefs[i]
            dcur = degs[i]
    if abs(acc) >= tol:
        out_k[cnt] = cur
        out_c[cnt] = acc
        out_d[cnt] = dcur
        cnt += 1
    return out_k[:cnt], out_c[:cnt], out_d[:cnt]


@njit
def _mul_nb(ka, ca, da, kb, cb, db, maxdeg, tol):
    # b is sorted by degree so the admissible partners form a prefix
    na = ka.shape[0]
    nb = kb.shape[0]
    lim = np.empty(na, np.int64)
    total = 0
    for i in range(na):
        lim[i] = np.searchsorted(db, maxdeg - da[i], side="right")
        total += lim[i]
    keys = np.empty(total, np.int64)
    coefs = np.empty(total, np.complex128)
    degs = np.empty(total, np.int64)
    pos = 0
    for i in range(na):
        ki = ka[i]
        ci = ca[i]
        di = da[i]
        for t in range(lim[i]):
            keys[pos] = ki + kb[t]
            coefs[pos] = ci * cb[t]
            degs[pos] = di + db[t]
            pos += 1
    return _reduce_nb(keys, coefs, degs, tol)


# ---------------------------------------------------------------------------
# numpy fallbacks


def _reduce_np(keys, coefs, degs, tol):
    if keys.size == 0:
        return keys.astype(np.int64), coefs.astype(np.complex128), degs.astype(np.int64)
    uk, first, inv = np.unique(keys, return_index=True, return_inverse=True)
    re = np.bincount(inv, weights=coefs.real, minlength=uk.size)
    im = np.bincount(inv, weights=coefs.imag, minlength=uk.size)
    c = re + 1j * im
    keep = np.abs(c) >= tol
    return uk[keep], c[keep], degs[first][keep]


def _mul_np(ka, ca, da, kb, cb, db, maxdeg, tol):
    parts_k, parts_c, parts_d = [], [], []
    for d in np.unique(da):
        sel = da == d
        stop = np.searchsorted(db, maxdeg - d, side="right")
        if stop == 0:
            continue
        parts_k.append((ka[sel][:, None] + kb[None, :stop]).ravel())
        parts_c.append((ca[sel][:, None] * cb[None, :stop]).ravel())
        parts_d.append((d + db[None, :stop]).repeat(sel.sum(), axis=0).ravel())
    if not parts_k:
        return (np.empty(0, np.int64), np.empty(0, np.complex128), np.empty(0, np.int64))
    return _reduce_np(np.concatenate(parts_k), np.concatenate(parts_c),
                      np.concatenate(parts_d), tol)


# ---------------------------------------------------------------------------
# dispatch


def reduce_terms(keys, coefs, degs, tol, use_numba: bool | None = None):
    """Sort by key, sum duplicates and drop coefficients below ``tol``."""
    keys = np.ascontiguousarray(keys, dtype=np.int64)
    coefs = np.ascontiguousarray(coefs, dtype=np.complex128)
    degs = np.ascontiguousarray(degs, dtype=np.int64)
    if USE_NUMBA if use_numba is None else use_numba:
        return _reduce_nb(keys, coefs, degs, tol)
    return _reduce_np(keys, coefs, degs, tol)


def mul_terms(ka, ca, da, kb, cb, db, maxdeg: int, tol: float, use_numba: bool | None = None):
    """Product of two term tables truncated at total degree ``maxdeg``."""
    order = np.argsort(db, kind="stable")
    kb = np.ascontiguousarray(kb[order])
    cb = np.ascontiguousarray(cb[order])
    db = np.ascontiguousarray(db[order])
    if USE_NUMBA if use_numba is None else use_numba:
        return _mul_nb(ka, ca, da, kb, cb, db, maxdeg, tol)
    return _mul_np(ka, ca, da, kb, cb, db, maxdeg, tol)
