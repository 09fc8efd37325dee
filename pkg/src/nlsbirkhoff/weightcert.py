"""Arithmetic kernels ``f_n``, ``g_{n,r}`` and certification of condition (W)_p.

The kernel values are exact reciprocals of integer products, so two routes
that multiply the same brackets in a different order agree bit for bit.

Truncated sums
--------------
Condition (W)_p asks for

    w_j || f_n(.; j) / D(k) ||_{l^{p'}},   D(k) = sum_l v_{k_l} prod_{m != l} u_{k_m}

and the same with ``g_{n,r}``.  Writing ``D = prod_l u_{k_l} * sum_l rho(k_l)``
with ``rho = v / u`` the only non-factorizable piece is ``(sum_l rho)^{-p'}``.
It is removed with the Laplace representation

    x^{-p'} = Gamma(p')^{-1} int_R exp(p' s - e^s x) ds,

discretized by the trapezoid rule (geometric convergence for analytic
integrands).  For every quadrature node the summand then factorizes over the
slots and the constrained n-fold sum becomes a chain of one-dimensional
convolutions over the partial sums ``k_1 + ... + k_m``.  When ``rho`` is
constant a single node with the exact prefactor is used.  A vectorized brute
force enumeration is kept as the independent oracle for small truncations.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .seqspace import Weight

LAPLACE_STEP = 0.25
LAST_SHELL_LIMIT = 0.01


def _check_n(n: int):
    if n < 3 or n % 2 == 0:
        raise ValueError(f"kernel order must be odd and >= 3, got {n}")


def _br(x: int) -> int:
    return 1 + abs(int(x))


def ff_kernel(k, j: int) -> float:
    """``f_n(k; j)``: product over odd ``m <= n-1`` of ``1/(<P_m - j> <P_{m+1}>)``.

    Parameters
    ----------
    k : sequence of int
        Index vector of odd length ``n >= 3``.
    j : int
        Output mode.
    """
    k = [int(x) for x in k]
    n = len(k)
    _check_n(n)
    if sum(k) != j:
        return 0.0
    prefix = list(itertools.accumulate(k))
    denom = 1
    for m in range(1, n, 2):
        denom *= _br(prefix[m - 1] - j) * _br(prefix[m])
    return 1.0 / denom


def gg_exchange(k, j: int, r: int) -> float:
    """``g_{n,r}`` by its definition: ``f_n`` with ``k_r`` and ``j`` exchanged."""
    k = [int(x) for x in k]
    n = len(k)
    _check_n(n)
    if not 1 <= r <= n:
        raise ValueError(f"slot r={r} outside [1, {n}]")
    swapped = list(k)
    swapped[r - 1] = int(j)
    return ff_kernel(swapped, k[r - 1])


def gg_kernel(k, j: int, r: int) -> float:
    """``g_{n,r}(k; j)`` from the explicit closed forms.

    For odd ``r`` the factors are a prefix product over odd ``m <= r-2``, a
    middle pair ``<S + j - k_r> <S + j + k_{r+1}>`` (``S`` the sum of the
    first ``r-1`` entries, absent when ``r = n``) and a suffix product over
    odd ``m >= r+1``.  For even ``r`` the prefix runs over odd ``m <= r-3``
    and the middle pair is ``<S - k_r> <S + j>``.  The support is
    ``sum_{i != r} k_i - k_r = -j``.
    """
    k = [int(x) for x in k]
    n = len(k)
    _check_n(n)
    if not 1 <= r <= n:
        raise ValueError(f"slot r={r} outside [1, {n}]")
    kr = k[r - 1]
    if sum(k) - 2 * kr != -j:
        return 0.0

    def psum(m):  # sum_{l <= m} k_l
        return sum(k[:m])

    def psum_skip(m):  # sum_{l <= m, l != r} k_l
        return sum(k[:m]) - (kr if m >= r else 0)

    denom = 1
    top = r - 2 if r % 2 else r - 3
    for m in range(1, top + 1, 2):
        denom *= _br(psum(m) - kr) * _br(psum(m + 1))
    S = psum(r - 1)
    if r % 2:
        if r <= n - 1:
            denom *= _br(S + j - kr) * _br(S + j + k[r])
    else:
        denom *= _br(S - kr) * _br(S + j)
    first = r + 1 if (r + 1) % 2 else r + 2
    for m in range(first, n, 2):
        denom *= _br(psum_skip(m) + j - kr) * _br(psum_skip(m + 1) + j)
    return 1.0 / denom


def ff_values(karr: np.ndarray, j) -> np.ndarray:
    """Vectorized ``f_n`` on the rows of ``karr`` (shape ``(N, n)``)."""
    karr = np.asarray(karr, dtype=np.int64)
    n = karr.shape[1]
    _check_n(n)
    j = np.asarray(j, dtype=np.int64)
    prefix = np.cumsum(karr, axis=1)
    denom = np.ones(karr.shape[0], dtype=np.float64)
    for m in range(1, n, 2):
        denom *= (1 + np.abs(prefix[:, m - 1] - j)) * (1 + np.abs(prefix[:, m]))
    return np.where(prefix[:, -1] == j, 1.0 / denom, 0.0)


def gg_values(karr: np.ndarray, j, r: int) -> np.ndarray:
    """Vectorized ``g_{n,r}`` through the exchange definition."""
    karr = np.asarray(karr, dtype=np.int64)
    kr = karr[:, r - 1].copy()
    swapped = karr.copy()
    swapped[:, r - 1] = j
    return ff_values(swapped, kr)


def rstar(p: float, terms: int = 200_000) -> float:
    """``R_* = (sum_k <k>^{-p'})^{1/p'}``; ``1`` for ``p = 1``.

    The sum over ``|k| <= terms`` is computed directly and the two tails are
    added via the midpoint integral ``2 int_{terms+1/2}^inf (1+x)^{-p'} dx``.
    """
    if not 1.0 <= p <= 2.0:
        raise ValueError("p must lie in [1, 2]")
    if p == 1.0:
        return 1.0
    q = p / (p - 1.0)
    k = np.arange(1, terms + 1, dtype=np.float64)
    total = 1.0 + 2.0 * math.fsum((1.0 + k[::-1]) ** (-q))
    total += 2.0 * (terms + 1.5) ** (1.0 - q) / (q - 1.0)
    return total ** (1.0 / q)


def weight_case(case: str, s: float = 0.0, a: float = 0.0, b: float = 1.0):
    """Weight triple ``(u, v, w)`` of a standard case and its ``R_1 / R_*``.

    Parameters
    ----------
    case : {"i", "ii", "iii"}
        ``i``: ``u = v = w = <j>^s e^{a|j|^b}``; ``ii``: ``u = 1``,
        ``v = w = <j>^s``; ``iii``: ``u = <j>``, ``v = <j>^s``,
        ``w = <j>^{s+1}``.
    """
    if case == "i":
        wt = Weight.analytic(s, a, b) if a else (Weight.polynomial(s) if s else Weight.unit())
        return (wt, wt, wt), 1.0
    if case == "ii":
        vw = Weight.polynomial(s) if s else Weight.unit()
        return (Weight.unit(), vw, vw), 2.0 ** s
    if case == "iii":
        if s < 1:
            raise ValueError("item (iii) needs s >= 1 (u <= v fails otherwise)")
        return (Weight.polynomial(1), Weight.polynomial(s), Weight.polynomial(s + 1)), 2.0 ** (s + 2)
    raise ValueError(f"unknown case {case!r}")


# ---------------------------------------------------------------------------
# Laplace quadrature for (sum_l rho(k_l))^{-p'}


def laplace_nodes(q: float, xmin: float, xmax: float, h: float = LAPLACE_STEP):
    """Nodes ``tau`` and weights ``c`` with ``sum c e^{-tau x} ~ x^{-q}`` on ``[xmin, xmax]``."""
    smin = math.log(1e-7 / xmax)
    smax = math.log((2.0 * q + 45.0) / xmin)
    sig = np.arange(smin, smax + h, h)
    c = h * np.exp(q * sig) / math.gamma(q)
    return np.exp(sig), c


def _quadrature(u: Weight, v: Weight, q: float, n: int, kk: np.ndarray, h: float = LAPLACE_STEP):
    """Per-node slot weights ``phi[node, k]`` and node prefactors."""
    lu = u.log_values(kk)
    lrho = v.log_values(kk) - lu
    if np.ptp(lrho) < 1e-14:
        rho0 = math.exp(lrho[0])
        return np.exp(-q * lu)[None, :], np.array([(n * rho0) ** (-q)])
    rho = np.exp(lrho)
    tau, c = laplace_nodes(q, n * rho.min(), n * rho.max(), h)
    phi = np.exp(-q * lu[None, :] - tau[:, None] * rho[None, :])
    return phi, c


def _toeplitz(phi: np.ndarray, K: int, src: tuple[int, int], dst: tuple[int, int]) -> np.ndarray:
    """``T[y, x] = phi(y - x)`` for ``x`` in ``src`` and ``y`` in ``dst`` (inclusive ranges)."""
    x = np.arange(src[0], src[1] + 1)
    y = np.arange(dst[0], dst[1] + 1)
    d = y[:, None] - x[None, :]
    inside = np.abs(d) <= K
    return np.where(inside, phi[np.clip(d + K, 0, 2 * K)], 0.0)


def _bq(x, q):
    return (1.0 + np.abs(x)) ** (-q)


def _f_chain(phi: np.ndarray, K: int, n: int, js: np.ndarray, q: float) -> np.ndarray:
    """``sum_k f_n(k; j)^q prod_l phi(k_l)`` for every ``j`` in ``js``."""
    jmax = int(np.max(np.abs(js)))
    # state after m steps: |P_m| <= m K and |P_m - j| <= (n - m) K
    rng = [(max(-m * K, -(n - m) * K - jmax), min(m * K, (n - m) * K + jmax)) for m in range(n + 1)]
    v = np.zeros((1, js.size))
    v[0, :] = 1.0
    for m in range(1, n):
        T = _toeplitz(phi, K, rng[m - 1], rng[m])
        v = T @ v
        P = np.arange(rng[m][0], rng[m][1] + 1)
        if m % 2:
            v *= _bq(P[:, None] - js[None, :], q)
        else:
            v *= _bq(P, q)[:, None]
    P = np.arange(rng[n - 1][0], rng[n - 1][1] + 1)
    d = js[None, :] - P[:, None]
    last = np.where(np.abs(d) <= K, phi[np.clip(d + K, 0, 2 * K)], 0.0)
    return np.sum(v * last, axis=0)


def _g_chain(phi: np.ndarray, K: int, n: int, r: int, js: np.ndarray, q: float) -> np.ndarray:
    """``sum_k g_{n,r}(k; j)^q prod_l phi(k_l)`` for every ``j`` in ``js``."""
    Ts = np.arange(-K, K + 1)

    def factor(m, P):  # factor attached to the state after step m of the exchanged chain
        if m >= n:
            return np.ones((P.size, Ts.size))
        if m % 2:
            return _bq(P[:, None] - Ts[None, :], q)
        return np.broadcast_to(_bq(P, q)[:, None], (P.size, Ts.size))

    # forward from P_0 = 0 through steps 1..r-1
    frng = (0, 0)
    alpha = np.ones((1, Ts.size))
    for m in range(1, r):
        new = (-m * K, m * K)
        alpha = _toeplitz(phi, K, frng, new) @ alpha
        frng = new
        alpha = alpha * factor(m, np.arange(new[0], new[1] + 1))
    # backward from P_n = T down to the state after step r
    brng = (-K, K)
    beta = np.eye(Ts.size)
    for m in range(n, r, -1):
        P = np.arange(brng[0], brng[1] + 1)
        gamma = beta * factor(m, P)
        span = (n - m + 2) * K
        new = (-span, span)
        beta = _toeplitz(phi, K, new, brng).T @ gamma
        brng = new
    Pb = np.arange(brng[0], brng[1] + 1)
    gamma = beta * factor(r, Pb)
    out = np.zeros(js.size)
    wT = phi[Ts + K]
    for idx, j in enumerate(js):
        lo = max(frng[0], brng[0] - j)
        hi = min(frng[1], brng[1] - j)
        if lo > hi:
            continue
        a = alpha[lo - frng[0]:hi - frng[0] + 1]
        g = gamma[lo + j - brng[0]:hi + j - brng[0] + 1]
        out[idx] = np.sum(np.sum(a * g, axis=0) * wT)
    return out


def weighted_sums(u: Weight, v: Weight, p: float, n: int, K: int, jmax: int,
                  h: float = LAPLACE_STEP, all_r: bool = False):
    """Truncated ``||kernel(.; j) / D||_{p'}^{p'}`` for ``f_n`` and each ``g_{n,r}``.

    Returns
    -------
    (js, sf, sg) with ``sf[j]`` the f-sum and ``sg[r-1][j]`` the g-sums.
    By reversal symmetry ``g_{n,r}`` and ``g_{n,n+1-r}`` have equal sums, so
    only ``r <= (n+1)/2`` is computed unless ``all_r`` is set.
    """
    _check_n(n)
    if p <= 1.0:
        raise ValueError("the convolution route needs p > 1; use sup_bruteforce for p = 1")
    q = p / (p - 1.0)
    kk = np.arange(-K, K + 1)
    js = np.arange(-jmax, jmax + 1)
    phis, cs = _quadrature(u, v, q, n, kk, h)
    rs = range(1, n + 1) if all_r else range(1, (n + 1) // 2 + 1)
    sf = np.zeros(js.size)
    sg = {r: np.zeros(js.size) for r in rs}
    for phi, c in zip(phis, cs):
        sf += c * _f_chain(phi, K, n, js, q)
        for r in rs:
            sg[r] += c * _g_chain(phi, K, n, r, js, q)
    full = [sg[r] if r in sg else sg[n + 1 - r] for r in range(1, n + 1)]
    return js, sf, full


def _tuples(n: int, K: int) -> np.ndarray:
    grids = np.meshgrid(*([np.arange(-K, K + 1)] * n), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _denominator(u: Weight, v: Weight, karr: np.ndarray) -> np.ndarray:
    uu = u.values(karr)
    vv = v.values(karr)
    prod_u = np.prod(uu, axis=1)
    return prod_u * np.sum(vv / uu, axis=1)


def weighted_sums_bruteforce(u: Weight, v: Weight, p: float, n: int, K: int, jmax: int):
    """Oracle for :func:`weighted_sums` by full enumeration of ``[-K, K]^n``."""
    q = p / (p - 1.0)
    karr = _tuples(n, K)
    D = _denominator(u, v, karr)
    js = np.arange(-jmax, jmax + 1)
    sf = np.array([np.sum((ff_values(karr, j) / D) ** q) for j in js])
    sg = [np.array([np.sum((gg_values(karr, j, r) / D) ** q) for j in js]) for r in range(1, n + 1)]
    return js, sf, sg


def sup_bruteforce(u: Weight, v: Weight, w: Weight, n: int, K: int, jmax: int):
    """The ``p = 1`` (sup-norm) variant: ``sup_j w_j sup_k kernel / D``."""
    karr = _tuples(n, K)
    D = _denominator(u, v, karr)
    js = np.arange(-jmax, jmax + 1)
    wj = w.values(js)
    f = max(wj[i] * np.max(ff_values(karr, j) / D) for i, j in enumerate(js))
    g = [max(wj[i] * np.max(gg_values(karr, j, r) / D) for i, j in enumerate(js))
         for r in range(1, n + 1)]
    return float(f), [float(x) for x in g]


@dataclass
class WCertReport:
    """Outcome of a (W)_p certification run."""

    weights: dict
    p: float
    n: list
    K_max: int
    j_max: int
    R0: float
    R1: float
    sup_w1: dict = field(default_factory=dict)
    sup_w2_by_r: dict = field(default_factory=dict)
    bound: dict = field(default_factory=dict)
    margin: dict = field(default_factory=dict)
    last_shell_ratio: dict = field(default_factory=dict)
    truncation_flag: dict = field(default_factory=dict)
    pass_: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.pass_.values())

    def to_json(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("pass_")
        d["passed"] = self.passed
        return d


def verify_w_condition(u: Weight, v: Weight, w: Weight, p: float = 2.0, n_set=(3, 5),
                       K_max: int = 50, j_max: int = 30, R1_factor: float = 1.0,
                       R0: float = 1.0, p1_K: int | None = None) -> WCertReport:
    """Certify the truncated (W)_p sups against ``R0 * R1^(n-1)``.

    Parameters
    ----------
    u, v, w : Weight
        The weight triple.
    p : float
        Exponent in ``[1, 2]``.
    n_set : iterable of odd int
        Kernel orders to check.
    K_max, j_max : int
        Truncation ``|k_i| <= K_max`` and range ``|j| <= j_max``.
    R1_factor : float
        ``R_1 = R1_factor * R_*``; see :func:`weight_case`.
    p1_K : int, optional
        Truncation used by the brute-force ``p = 1`` path.
    """
    Rs = rstar(p)
    R1 = R1_factor * Rs
    rep = WCertReport(
        weights={"u": u.to_config(), "v": v.to_config(), "w": w.to_config()},
        p=p, n=list(n_set), K_max=K_max, j_max=j_max, R0=R0, R1=R1,
    )
    for n in n_set:
        bound = R0 * R1 ** (n - 1)
        if p == 1.0:
            Kp = p1_K if p1_K is not None else min(K_max, 8 if n >= 5 else 25)
            sf, sg = sup_bruteforce(u, v, w, n, Kp, min(j_max, Kp))
            shell = 0.0
        else:
            q = p / (p - 1.0)
            js, f_hi, g_hi = weighted_sums(u, v, p, n, K_max, j_max)
            _, f_lo, g_lo = weighted_sums(u, v, p, n, K_max - 1, j_max)
            wq = w.values(js) ** q
            sf = float(np.max(wq * f_hi) ** (1.0 / q))
            sg = [float(np.max(wq * g) ** (1.0 / q)) for g in g_hi]
            ratios = [np.max((f_hi - f_lo) / np.maximum(f_hi, 1e-300))]
            ratios += [np.max((a - b) / np.maximum(a, 1e-300)) for a, b in zip(g_hi, g_lo)]
            shell = float(max(ratios))
        top = max([sf] + sg)
        rep.sup_w1[n] = sf
        rep.sup_w2_by_r[n] = sg
        rep.bound[n] = bound
        rep.margin[n] = bound - top
        rep.last_shell_ratio[n] = shell
        rep.truncation_flag[n] = shell > LAST_SHELL_LIMIT
        rep.pass_[n] = bool(top <= bound)
    return rep


def certify_case(case: str, s: float = 0.0, a: float = 0.0, b: float = 1.0, **kw) -> WCertReport:
    """Run :func:`verify_w_condition` for one standard weight case."""
    (u, v, w), factor = weight_case(case, s, a, b)
    return verify_w_condition(u, v, w, R1_factor=factor, **kw)
