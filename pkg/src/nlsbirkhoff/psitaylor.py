"""Taylor kernels of the coordinates ``z_j`` and the polynomial map ``Psi``.

``z_j`` has, in degree ``n`` (odd), the form
``sum_{k_1+...+k_n=j} K_j^n(k) xi_{k_1} eta_{-k_2} xi_{k_3} ... xi_{k_n}``.
Only the symmetric part of ``K`` is determined by ``z_j``; the tensor stored
here is the symmetrization over odd positions and over even positions,

    K_sym(k) = D(k) / (((n+1)/2)! ((n-1)/2)!),

where ``D(k)`` is the polarized derivative of ``z_j`` along the slots
``xi_{k_1}, eta_{-k_2}, ...``.  Two independent routes compute ``D``:

* :func:`polarized_contour` expands projector, transformation operator and
  coordinate in the perturbation ``V``.  Every slot carries its own
  nilpotent parameter (``e_a^2 = 0``), so the coefficient of ``e_1 ... e_n``
  is exactly ``D``.  Contour integrals use the trapezoid rule on
  ``|lambda - pi j| = pi/2``.
* :func:`polarized_extract` evaluates the numerical ``z_j`` on probe states
  ``sum_a eps e^{i theta_a} e_{slot_a}``, isolates the multilinear term by a
  discrete Fourier transform over a 4-point phase grid per slot, and removes
  the ``eps^4``, ``eps^8`` contamination by Richardson extrapolation.

With ``J_op >= |j| + (n+1) max|k|`` the truncated operator reproduces the
degree-``n`` coefficient exactly, since every chain of ``n`` couplings that
returns to the pairing stays inside the basis.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .polymap import PolyMap, Ring, ScalarPoly, poisson_bracket
from .seqspace import NormSpec, TruncState, norm
from .weightcert import ff_kernel
from .zsspectral import DEFAULT_Q, build_zs_matrix, contour_nodes, spectrum

EXTRACT_EPS = (1e-2, 5e-3, 2.5e-3)
EXTRACT_EPS_QUINTIC = (4e-2, 2e-2, 1e-2)
EXTRACT_RESIDUAL_LIMIT = 1e-5
PHASES = 4
RELATIVE_FLOOR = 1e-10
# probe noise ~1e-12 divided by the residual limit; nonzero kernels are >= 1e-4
RESIDUAL_FLOOR = 1e-7
KERNEL_BOUND_K0 = 2.0
KERNEL_BOUND_K1 = 16.0


# ---------------------------------------------------------------------------
# slot tuples


def kernel_slots(k) -> list[tuple[str, int]]:
    """Slots ``xi_{k_1}, eta_{-k_2}, xi_{k_3}, ...`` of a kernel index vector."""
    return [("xi", int(x)) if a % 2 == 0 else ("eta", -int(x)) for a, x in enumerate(k)]


def mirror_slots(slots):
    return [("eta" if ch == "xi" else "xi", m) for ch, m in slots]


def canonical(k) -> tuple[int, ...]:
    """Representative with sorted odd positions and sorted even positions."""
    k = list(k)
    odd = sorted(k[0::2])
    even = sorted(k[1::2])
    out = []
    for a in range(len(k)):
        out.append(odd[a // 2] if a % 2 == 0 else even[a // 2])
    return tuple(out)


def orbit(k) -> list[tuple[int, ...]]:
    """All distinct tuples with the same multisets of odd and even entries."""
    k = list(k)
    res = set()
    for po in set(itertools.permutations(k[0::2])):
        for pe in set(itertools.permutations(k[1::2])):
            res.add(tuple(po[a // 2] if a % 2 == 0 else pe[a // 2] for a in range(len(k))))
    return sorted(res)


def sym_factor(n: int) -> int:
    return math.factorial((n + 1) // 2) * math.factorial((n - 1) // 2)


def multiplicity_factor(slots) -> int:
    return math.prod(math.factorial(c) for c in Counter(slots).values())


def canonical_entries(n: int, J: int) -> list[tuple[int, tuple[int, ...]]]:
    """Canonical ``(j, k)`` with ``|j|, |k_a| <= J`` on the support ``sum k = j``."""
    if n % 2 == 0 or n < 1:
        return []
    modes = range(-J, J + 1)
    out = []
    for odd in itertools.combinations_with_replacement(modes, (n + 1) // 2):
        for even in itertools.combinations_with_replacement(modes, (n - 1) // 2):
            j = sum(odd) + sum(even)
            if abs(j) > J:
                continue
            k = tuple(odd[a // 2] if a % 2 == 0 else even[a // 2] for a in range(n))
            out.append((j, k))
    return sorted(out)


def required_jop(j: int, slots, n: int | None = None) -> int:
    n = len(slots) if n is None else n
    kmax = max((abs(m) for _, m in slots), default=0)
    return abs(j) + (n + 1) * kmax + 1


# ---------------------------------------------------------------------------
# contour route with nilpotent polarization variables


def _slot_gather(J_op: int, ch: str, mode: int):
    """Index arrays ``(rows, cols)`` of the coupling matrix of one slot."""
    half = 2 * J_op + 1
    i1 = np.arange(-J_op, J_op + 1)
    i2 = 2 * mode - i1
    ok = np.abs(i2) <= J_op
    cols = i1[ok] + J_op
    rows = i2[ok] + J_op
    if ch == "xi":
        return half + rows, cols
    return rows, half + cols


class _Nilpotent:
    """Vectors with coefficients in the exterior-free algebra ``C[e_1..e_n]/(e_a^2)``.

    Arrays carry the subset mask in the last axis.
    """

    def __init__(self, J_op: int, slots):
        self.J_op = J_op
        self.n = len(slots)
        self.M = 1 << self.n
        self.gathers = [_slot_gather(J_op, ch, m) for ch, m in slots]
        # (mask, bit) pairs to apply V_a to the part without slot a
        self.pairs = [(mask, a) for mask in range(self.M) for a in range(self.n) if mask >> a & 1]

    def apply_v(self, x: np.ndarray) -> np.ndarray:
        out = np.zeros_like(x)
        for mask, a in self.pairs:
            rows, cols = self.gathers[a]
            out[..., rows, mask] += x[..., cols, mask ^ (1 << a)]
        return out

    def pair_full(self, u: np.ndarray, v: np.ndarray) -> complex:
        """Full-mask coefficient of ``u^T S v``."""
        half = u.shape[0] // 2
        sv = np.concatenate([v[half:], v[:half]])
        full = self.M - 1
        return complex(sum(np.dot(u[:, s], sv[:, full ^ s]) for s in range(self.M)))


def polarized_contour(j: int, slots, J_op: int | None = None, Q: int = DEFAULT_Q,
                      side: str = "z") -> complex:
    """Polarized derivative of ``z_j`` (or ``w_j``) along ``slots`` by the contour series.

    Parameters
    ----------
    j : int
        Coordinate index.
    slots : sequence of (channel, mode)
        One entry per polarization variable.
    J_op : int, optional
        Operator cutoff; defaults to the exactness bound.
    Q : int
        Trapezoid nodes on the contour.
    side : {"z", "w"}
        Start from ``f_j0^-`` (``z``) or ``f_j0^+`` (``w``).
    """
    slots = list(slots)
    n = len(slots)
    J_op = required_jop(j, slots) if J_op is None else J_op
    alg = _Nilpotent(J_op, slots)
    half = 2 * J_op + 1
    i = np.arange(-J_op, J_op + 1)
    diag0 = np.pi * np.concatenate([i, i]).astype(complex)
    lam, wts = contour_nodes(j, Q)
    R0 = 1.0 / (diag0[None, :] - lam[:, None])

    def apply_x(v):
        # X v = sum_{a >= 1} (-1)^a oint R0 (V R0)^a v; the a = 0 term is P_j0 v
        x = R0[:, :, None] * v[None]
        acc = np.zeros_like(x)
        for _ in range(n):
            x = -R0[:, :, None] * alg.apply_v(x)
            acc += x
        return np.tensordot(wts, acc, axes=1)

    f0 = np.zeros((2 * half, alg.M), dtype=complex)
    f0[j + J_op + (0 if side == "z" else half), 0] = 1.0
    f = f0.copy()
    term = f0
    c = 1.0
    for m in range(1, n + 1):
        term = apply_x(term)
        if m % 2 == 0:
            c *= (m - 1) / m
        f = f + c * term
    d = (diag0 - np.pi * j)[:, None] * f
    return alg.pair_full(d, f) + alg.pair_full(alg.apply_v(f), f)


def kernel_contour(j: int, k, J_op: int | None = None, Q: int = DEFAULT_Q) -> complex:
    """Symmetrized kernel ``K_j^n(k)`` from the contour construction (0 off the support)."""
    k = tuple(int(x) for x in k)
    n = len(k)
    if n % 2 == 0 or sum(k) != j:
        return 0j
    return polarized_contour(j, kernel_slots(k), J_op, Q) / sym_factor(n)


# ---------------------------------------------------------------------------
# extraction route


def _invariant_projectors(L: np.ndarray, diag0: np.ndarray, p: np.ndarray, j: int,
                          tol: float = 1e-17, maxit: int = 200) -> np.ndarray:
    """Riesz projectors onto the invariant subspaces near ``pi j`` for a batch of matrices.

    With the coordinates split as ``p`` (the two unperturbed eigenvectors)
    and ``q`` (the rest), the right subspace is ``Ran [1; X]`` and the left
    one ``Ran [1, Y]``, with ``X``, ``Y`` the fixed points of

        X = (D0 - pi j)^{-1} (X (A + B X - pi j) - C - W X),
        Y = ((A + Y C - pi j) Y - B - Y W) (D0 - pi j)^{-1},

    where ``L = [[A, B], [C, D0 + W]]`` and ``D0`` is the diagonal of ``L0``
    on ``q``.  The projector is ``[1; X] ([1, Y][1; X])^{-1} [1, Y]``, the
    same operator as the contour integral.
    """
    nb = L.shape[-1]
    q = np.setdiff1d(np.arange(nb), p)
    A = L[:, p][:, :, p]
    Bm = L[:, p][:, :, q]
    C = L[:, q][:, :, p]
    W = L[:, q][:, :, q] - np.diag(diag0[q])[None]
    dinv = 1.0 / (diag0[q] - np.pi * j)
    I2 = np.eye(2)[None]
    X = np.zeros_like(C)
    Y = np.zeros_like(Bm)
    for _ in range(maxit):
        Xn = dinv[None, :, None] * (X @ (A + Bm @ X - np.pi * j * I2) - C - W @ X)
        Yn = ((A + Y @ C - np.pi * j * I2) @ Y - Bm - Y @ W) * dinv[None, None, :]
        delta = max(np.max(np.abs(Xn - X)), np.max(np.abs(Yn - Y)))
        X, Y = Xn, Yn
        if delta < tol:
            break
    else:
        raise ValueError("invariant-subspace iteration did not converge; probe too large")
    Rr = np.concatenate([np.broadcast_to(I2, A.shape), X], axis=1)
    Rl = np.concatenate([np.broadcast_to(I2, A.shape), Y], axis=2)
    Pp = Rr @ np.linalg.solve(Rl @ Rr, Rl)
    perm = np.concatenate([p, q])
    P = np.empty_like(Pp)
    P[:, perm[:, None], perm[None, :]] = Pp
    return P


def _batched_z(j: int, J_op: int, slots, amps: np.ndarray, side: str = "z") -> np.ndarray:
    """``z_j`` (or ``w_j``) for a batch of probe states ``sum_a amps[:, a] e_{slot_a}``."""
    half = 2 * J_op + 1
    nb = 2 * half
    i = np.arange(-J_op, J_op + 1)
    diag0 = np.pi * np.concatenate([i, i]).astype(complex)
    B = amps.shape[0]
    V = np.zeros((B, nb, nb), dtype=complex)
    for a, (ch, m) in enumerate(slots):
        rows, cols = _slot_gather(J_op, ch, m)
        V[:, rows, cols] += amps[:, a][:, None]
    L = V + np.diag(diag0)[None]
    p = np.array([j + J_op, half + j + J_op])
    P = _invariant_projectors(L, diag0, p, j)
    X = P.copy()
    X[:, p, p] -= 1.0
    f0 = np.zeros((B, nb), dtype=complex)
    f0[:, p[0] if side == "z" else p[1]] = 1.0
    f = f0.copy()
    term = f0
    c = 1.0
    m = 0
    while True:
        m += 1
        term = np.einsum("bik,bk->bi", X, term)
        if m % 2 == 0:
            c *= (m - 1) / m
        f = f + c * term
        if np.max(np.abs(term)) * c < 1e-18 or m > 200:
            break
    d = (diag0 - np.pi * j)[None] * f
    sf = np.concatenate([f[:, half:], f[:, :half]], axis=1)
    vf = np.einsum("bik,bk->bi", V, f)
    return np.sum(d * sf, axis=1) + np.sum(vf * sf, axis=1)


@dataclass
class ExtractResult:
    value: complex
    residual: float
    per_eps: list
    flagged: bool


def richardson(eps, vals) -> tuple[complex, float]:
    """Extrapolate ``D(eps) = D + A eps^4 + B eps^8 + ...`` to ``eps = 0``.

    Returns the three-point estimate and its distance to the two-point one
    (relative to the estimate, floored at ``RESIDUAL_FLOOR``) as a residual.
    """
    e4 = np.asarray(eps, float) ** 4
    V3 = np.vander(e4, len(e4), increasing=True)
    d3 = np.linalg.solve(V3, np.asarray(vals, complex))[0]
    V2 = np.vander(e4[-2:], 2, increasing=True)
    d2 = np.linalg.solve(V2, np.asarray(vals[-2:], complex))[0]
    scale = max(abs(d3), RESIDUAL_FLOOR)
    return complex(d3), float(abs(d3 - d2) / scale)


def polarized_extract(j: int, slots, J_op: int | None = None, eps=None, side: str = "z",
                      phases: int = PHASES) -> ExtractResult:
    """Polarized derivative of ``z_j`` along ``slots`` by phase probing.

    Parameters
    ----------
    eps : sequence of float, optional
        Probe amplitudes; default ``EXTRACT_EPS`` (``EXTRACT_EPS_QUINTIC`` for
        five slots).
    phases : int
        Grid points per slot phase; with 4 the aliasing terms are of relative
        order ``eps^4``.
    """
    slots = list(slots)
    n = len(slots)
    if eps is None:
        eps = EXTRACT_EPS_QUINTIC if n >= 5 else EXTRACT_EPS
    J_op = required_jop(j, slots) if J_op is None else J_op
    grid = np.array(list(itertools.product(range(phases), repeat=n)), dtype=float)
    theta = 2 * np.pi * grid / phases
    ph = np.exp(1j * theta)
    back = np.exp(-1j * theta.sum(axis=1))
    per = []
    for e in eps:
        z = _batched_z(j, J_op, slots, e * ph, side)
        per.append(complex(np.mean(z * back) / e ** n))
    val, res = richardson(eps, per)
    if n <= 2:
        # lower orders have no eps^4 companion of comparable size; report the raw spread
        res = float(abs(per[0] - per[-1]))
    return ExtractResult(val, res, per, res > EXTRACT_RESIDUAL_LIMIT)


def kernel_extract(j: int, k, J_op: int | None = None, eps=None, side: str = "z") -> ExtractResult:
    """Symmetrized kernel ``K_j^n(k)`` by phase probing (``side="w"`` uses mirrored slots on ``w_j``)."""
    k = tuple(int(x) for x in k)
    n = len(k)
    slots = kernel_slots(k)
    if side == "w":
        slots = mirror_slots(slots)
    if n % 2 == 0 or sum(k) != j:
        return ExtractResult(0j, 0.0, [], False)
    r = polarized_extract(j, slots, J_op, eps, side)
    f = sym_factor(n)
    return ExtractResult(r.value / f, r.residual, [v / f for v in r.per_eps], r.flagged)


# ---------------------------------------------------------------------------
# kernel tensors


@dataclass
class KernelTensor:
    """Symmetrized kernel values on canonical representatives."""

    n: int
    J: int
    entries: dict = field(default_factory=dict)
    route: str = "contour"

    def __call__(self, j: int, k) -> complex:
        k = tuple(int(x) for x in k)
        if len(k) != self.n or sum(k) != j:
            return 0j
        return complex(self.entries.get((int(j), canonical(k)), 0j))

    def items(self):
        return sorted(self.entries.items())

    def full_entries(self):
        """All ordered tuples of the support with their (symmetrized) value."""
        for (j, k), v in self.items():
            for kk in orbit(k):
                yield j, kk, v

    def max_imag(self) -> float:
        return max((abs(np.imag(v)) for v in self.entries.values()), default=0.0)

    def to_json(self) -> dict:
        return {
            "n": self.n, "J": self.J, "route": self.route, "symmetrized": True,
            "entries": [{"j": j, "k": list(k), "re": float(np.real(v)), "im": float(np.imag(v))}
                        for (j, k), v in self.items()],
        }

    @classmethod
    def from_json(cls, data: dict) -> "KernelTensor":
        ent = {(int(e["j"]), canonical(e["k"])): complex(e["re"], e["im"]) for e in data["entries"]}
        return cls(int(data["n"]), int(data.get("J", 0)), ent, data.get("route", "contour"))


def compute_kernels(n: int, J: int, route: str = "contour", Q: int = DEFAULT_Q,
                    J_op: int | None = None, entries=None, jobs: int = 1) -> KernelTensor:
    """Kernel tensor of order ``n`` on ``|j|, |k_a| <= J`` by the chosen route."""
    todo = canonical_entries(n, J) if entries is None else [(j, canonical(k)) for j, k in entries]
    if route == "contour":
        def fn(e):
            return kernel_contour(e[0], e[1], J_op, Q)
    elif route == "extract":
        def fn(e):
            return kernel_extract(e[0], e[1], J_op).value
    else:
        raise ValueError(f"unknown kernel route {route!r}")
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(jobs) as ex:
            vals = list(ex.map(fn, todo))
    else:
        vals = [fn(e) for e in todo]
    return KernelTensor(n, J, {e: complex(v) for e, v in zip(todo, vals)}, route)


def relative_error(a: complex, b: complex, floor: float = RELATIVE_FLOOR) -> float:
    """``|a - b| / max(|a|, |b|)``; two values below ``floor`` count as agreeing."""
    scale = max(abs(a), abs(b))
    if scale < floor:
        return 0.0
    return abs(a - b) / scale


def cross_check(n: int, J: int, Q: int = DEFAULT_Q, entries=None, contour: KernelTensor | None = None,
                side: str = "z") -> dict:
    """Compare contour and extraction kernels entry by entry."""
    todo = canonical_entries(n, J) if entries is None else [(j, canonical(k)) for j, k in entries]
    rows = []
    for j, k in todo:
        c = contour(j, k) if contour is not None else kernel_contour(j, k, Q=Q)
        r = kernel_extract(j, k, side=side)
        rows.append({"j": j, "k": list(k), "contour": c, "extract": r.value,
                     "rel": relative_error(c, r.value), "residual": r.residual, "flagged": r.flagged})
    worst = max((row["rel"] for row in rows), default=0.0)
    return {"n": n, "J": J, "side": side, "entries": len(rows), "max_rel": worst, "rows": rows}


def low_order_check(J: int, eps=None) -> dict:
    """Degree-1 and degree-2 extraction on ``z_j``: expect ``delta`` and ``0``."""
    modes = range(-J, J + 1)
    lin_err = 0.0
    quad_max = 0.0
    for j in modes:
        for ch in ("xi", "eta"):
            for m in modes:
                r = polarized_extract(j, [(ch, m)], eps=eps)
                target = 1.0 if (ch == "xi" and m == j) else 0.0
                lin_err = max(lin_err, abs(r.value - target))
        for s1, s2 in itertools.combinations_with_replacement(
                [(ch, m) for ch in ("xi", "eta") for m in modes], 2):
            r = polarized_extract(j, [s1, s2], eps=eps)
            quad_max = max(quad_max, abs(r.value))
    return {"linear_max_err": lin_err, "quadratic_max": quad_max}


# ---------------------------------------------------------------------------
# bound


def check_kernel_bound(kt: KernelTensor, K1: float = KERNEL_BOUND_K1,
                       K0_claimed: float = KERNEL_BOUND_K0) -> dict:
    """Minimal ``K0`` with ``|K_sym(k)| <= K0 K1^(n-1) avg f_n``.

    The symmetrized kernel is the average of the ordered kernel over the
    orbit, so the ordered bound transfers with ``f_n`` averaged over the same
    orbit.  ``K0_single`` uses ``f_n`` of the canonical tuple alone.
    """
    n = kt.n
    k0_avg = 0.0
    k0_single = 0.0
    for (j, k), v in kt.items():
        if abs(v) == 0:
            continue
        orb = orbit(k)
        favg = sum(ff_kernel(kk, j) for kk in orb) / len(orb)
        k0_avg = max(k0_avg, abs(v) / (K1 ** (n - 1) * favg))
        k0_single = max(k0_single, abs(v) / (K1 ** (n - 1) * ff_kernel(k, j)))
    return {"n": n, "J": kt.J, "K1": K1, "K0_emp": k0_avg, "K0_single": k0_single,
            "K0_claimed": K0_claimed, "pass": k0_avg <= K0_claimed}


# ---------------------------------------------------------------------------
# assembling Psi


def assemble_psi(J: int, N: int = 3, kernels: dict | None = None, cap: int | None = None,
                 Q: int = DEFAULT_Q) -> PolyMap:
    """Near-identity polynomial map ``Psi = (Z, W)`` through degree ``N``.

    Parameters
    ----------
    kernels : dict, optional
        ``{n: KernelTensor}`` for odd ``3 <= n <= N``; missing orders are
        computed by the contour route.
    cap : int, optional
        Degree cap of the ring; default ``2N`` so products of two components
        stay representable.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    ring = Ring(J, cap if cap is not None else max(2 * N, 2))
    kernels = dict(kernels or {})
    slots = [ScalarPoly.var(ring, j, "xi") for j in range(-J, J + 1)]
    for n in range(3, N + 1, 2):
        kt = kernels.get(n)
        if kt is None:
            kt = compute_kernels(n, J, Q=Q)
            kernels[n] = kt
        if kt.J < J:
            raise ValueError(f"kernel tensor of order {n} only covers J = {kt.J}")
        terms: dict[int, tuple[list, list]] = {}
        for (j, k), v in kt.items():
            if abs(j) > J or max(abs(x) for x in k) > J or v == 0:
                continue
            sl = kernel_slots(k)
            E = np.zeros(ring.nvar, dtype=np.int64)
            for ch, m in sl:
                E[ring.index(m, ch)] += 1
            coef = v * sym_factor(n) / multiplicity_factor(sl)
            Es, cs = terms.setdefault(j, ([], []))
            Es.append(E)
            cs.append(coef)
        for j, (Es, cs) in terms.items():
            slots[j + J] = slots[j + J] + ScalarPoly.from_exponents(ring, np.array(Es), cs)
    return PolyMap(ring, slots + [s.mirror() for s in slots])


def psi_action(psi: PolyMap, j: int, maxdeg: int | None = None) -> ScalarPoly:
    """``|Psi_j|^2`` as the polynomial ``Z_j W_j``."""
    return psi.slot(j, "xi").mul(psi.slot(j, "eta"), maxdeg)


def verify_involution(psi: PolyMap, maxdeg: int = 4) -> dict:
    """Largest bracket coefficient of ``{|Psi_j|^2, |Psi_k|^2}`` per degree."""
    ring = psi.ring
    J = ring.J
    top = ring.cap
    acts = {j: psi_action(psi, j, top) for j in range(-J, J + 1)}
    per_deg: dict[int, float] = {}
    for j, k in itertools.combinations(range(-J, J + 1), 2):
        br = poisson_bracket(acts[j], acts[k], top)
        for d in range(0, top + 1):
            per_deg[d] = max(per_deg.get(d, 0.0), br.homogeneous(d).max_abs())
    filt = max((v for d, v in per_deg.items() if d <= maxdeg), default=0.0)
    return {"max_through_degree": filt, "maxdeg": maxdeg,
            "per_degree": {d: v for d, v in sorted(per_deg.items()) if v > 0}}


def verify_gap_identity(psi: PolyMap, rho: float, samples: int = 20,
                        rng: np.random.Generator | None = None, J_op: int | None = None) -> dict:
    """Fit ``gamma_j^2 = c |Psi_j|^2`` on random real states of radius ``rho``.

    The per-sample ``c`` is ``sum_j gamma_j^2 / sum_j |Psi_j|^2``.
    """
    rng = rng or np.random.default_rng(0)
    J = psi.ring.J
    cs = []
    for _ in range(samples):
        st = TruncState.random_real(J, rho, rng)
        g = np.real(spectrum(build_zs_matrix(st, J_op)).gaps)
        v = psi.eval(st.vector)
        nm = 2 * J + 1
        p2 = np.real(v[:nm] * v[nm:])
        cs.append(float(np.sum(g ** 2) / np.sum(p2)))
    cs = np.array(cs)
    mean = float(cs.mean())
    dev = float(np.max(np.abs(cs - mean)))
    return {"rho": rho, "samples": samples, "c_mean": mean, "max_dev": dev,
            "tolerance": 20 * rho ** 2, "pass": dev < 20 * rho ** 2, "c_values": cs.tolist()}


def zero_state_gap_check(J: int, psi: PolyMap) -> tuple[float, float]:
    st = TruncState.zeros(J)
    g = np.real(spectrum(build_zs_matrix(st)).gaps)
    v = psi.eval(st.vector)
    return float(np.max(np.abs(g))), float(np.max(np.abs(v)))


def state_radius(st: TruncState) -> float:
    return norm(st, NormSpec(2.0))
