"""Sparse multivariate complex polynomials on the truncated phase space.

A :class:`Ring` fixes the mode cutoff ``J`` and a total-degree cap.  Monomials
``xi^K eta^L t^e`` are packed into one int64 key with mixed radix: base
``cap + 1`` digits for the ``2(2J+1)`` phase-space variables (slot order of
:mod:`nlsbirkhoff.seqspace`) and a top digit for the optional time variable
``t`` used by time-dependent vector fields.  The ``t`` exponent does not count
towards the degree; all truncation is on the phase-space degree.

Every operation is exact through the requested degree ``maxdeg`` and silently
drops higher-degree terms.  Coefficients of modulus below ``PRUNE_TOL`` are
removed.

Conventions
-----------
Gradient: ``dF(z) v = g(grad F, v)``, hence ``grad F = (dF/deta, dF/dxi)``.
Hamiltonian field: ``X_F = c J grad F`` with ``J = E^{-1} = diag(-i, i)``
and calibration ``c = 2``, i.e. ``X_F = (-2i dF/deta, 2i dF/dxi)``.  The
factor is fixed by requiring the flow of ``X_{-I_l}``, ``I_l = xi_l eta_l/2``,
to be the 2 pi-periodic rotation ``xi_l -> e^{it} xi_l``.  The matching
Poisson bracket is ``{F, G} = dF(X_G) = 2i sum_j (F_eta G_xi - F_xi G_eta)``.
"""

from __future__ import annotations

import numpy as np

from .kernels import mul_terms, reduce_terms
from .seqspace import Weight

PRUNE_TOL = 1e-14
T_DIGITS = 64
CALIBRATION = 2.0


class Ring:
    """Monomial encoding for modes ``|j| <= J`` and total degree ``<= cap``."""

    def __init__(self, J: int, cap: int = 5):
        if J < 0 or cap < 1:
            raise ValueError("need J >= 0 and cap >= 1")
        self.J = int(J)
        self.cap = int(cap)
        self.nmodes = 2 * self.J + 1
        self.nvar = 2 * self.nmodes
        self.base = self.cap + 1
        span = self.base ** self.nvar
        if span * T_DIGITS >= 2 ** 63:
            raise OverflowError(
                f"(cap+1)^nvar = {span} too large for int64 keys; lower J or the degree cap")
        self.strides = np.array([self.base ** v for v in range(self.nvar)], dtype=np.int64)
        self.tstride = np.int64(span)

    def __eq__(self, other):
        return isinstance(other, Ring) and (self.J, self.cap) == (other.J, other.cap)

    def __hash__(self):
        return hash((self.J, self.cap))

    def __repr__(self):
        return f"Ring(J={self.J}, cap={self.cap})"

    def index(self, j: int, channel: str) -> int:
        if abs(j) > self.J:
            raise IndexError(f"mode {j} outside |j| <= {self.J}")
        return j + self.J + (0 if channel == "xi" else self.nmodes)

    def label(self, v: int) -> tuple[int, str]:
        return (v % self.nmodes - self.J, "xi" if v < self.nmodes else "eta")

    def swap(self, v: int) -> int:
        return (v + self.nmodes) % self.nvar

    def sign(self, v: int) -> int:
        return 1 if v < self.nmodes else -1

    def encode(self, E, et=None) -> np.ndarray:
        E = np.asarray(E, dtype=np.int64).reshape(-1, self.nvar)
        if E.size and (E.min() < 0 or E.max() > self.cap):
            raise ValueError("exponent outside [0, cap]")
        keys = E @ self.strides
        if et is not None:
            keys = keys + np.asarray(et, dtype=np.int64) * self.tstride
        return keys

    def decode(self, keys) -> tuple[np.ndarray, np.ndarray]:
        keys = np.asarray(keys, dtype=np.int64)
        E = (keys[:, None] // self.strides[None, :]) % self.base
        return E, keys // self.tstride

    def with_cap(self, cap: int) -> "Ring":
        return Ring(self.J, cap)


def _empty():
    return np.empty(0, np.int64), np.empty(0, np.complex128), np.empty(0, np.int64)


class ScalarPoly:
    """Immutable sparse polynomial ``sum c_K,L,e xi^K eta^L t^e``."""

    __slots__ = ("ring", "keys", "coefs", "degs")

    def __init__(self, ring: Ring, keys, coefs, degs, normalized: bool = False):
        self.ring = ring
        if not normalized:
            keys, coefs, degs = reduce_terms(keys, coefs, degs, PRUNE_TOL)
        self.keys = keys
        self.coefs = coefs
        self.degs = degs
        for a in (self.keys, self.coefs, self.degs):
            a.setflags(write=False)

    # -- constructors -------------------------------------------------------
    @classmethod
    def zero(cls, ring: Ring) -> "ScalarPoly":
        return cls(ring, *_empty(), normalized=True)

    @classmethod
    def const(cls, ring: Ring, c: complex) -> "ScalarPoly":
        return cls(ring, np.zeros(1, np.int64), np.array([c], complex), np.zeros(1, np.int64))

    @classmethod
    def var(cls, ring: Ring, j: int, channel: str = "xi", c: complex = 1.0) -> "ScalarPoly":
        v = ring.index(j, channel)
        return cls(ring, ring.strides[v:v + 1].copy(), np.array([c], complex), np.ones(1, np.int64))

    @classmethod
    def from_exponents(cls, ring: Ring, E, coefs, et=None) -> "ScalarPoly":
        E = np.asarray(E, dtype=np.int64).reshape(-1, ring.nvar)
        coefs = np.asarray(coefs, dtype=complex).reshape(-1)
        return cls(ring, ring.encode(E, et), coefs, E.sum(axis=1))

    @classmethod
    def monomial(cls, ring: Ring, K=None, L=None, c: complex = 1.0, t: int = 0) -> "ScalarPoly":
        """``c xi^K eta^L t^t`` with ``K``, ``L`` dicts ``{mode: exponent}``."""
        E = np.zeros(ring.nvar, dtype=np.int64)
        for j, e in (K or {}).items():
            E[ring.index(j, "xi")] += e
        for j, e in (L or {}).items():
            E[ring.index(j, "eta")] += e
        return cls.from_exponents(ring, E[None, :], [c], [t])

    @classmethod
    def from_dict(cls, ring: Ring, terms: dict) -> "ScalarPoly":
        """From ``{exponent tuple of length nvar (optionally + t): coef}``."""
        if not terms:
            return cls.zero(ring)
        rows = [tuple(k) for k in terms]
        E = np.array([r[:ring.nvar] for r in rows], dtype=np.int64)
        et = np.array([r[ring.nvar] if len(r) > ring.nvar else 0 for r in rows], dtype=np.int64)
        return cls.from_exponents(ring, E, list(terms.values()), et)

    def _new(self, keys, coefs, degs, normalized=False) -> "ScalarPoly":
        return ScalarPoly(self.ring, keys, coefs, degs, normalized)

    # -- inspection ---------------------------------------------------------
    @property
    def nterms(self) -> int:
        return int(self.keys.size)

    def is_zero(self) -> bool:
        return self.keys.size == 0

    @property
    def maxdeg(self) -> int:
        return int(self.degs.max()) if self.keys.size else -1

    @property
    def mindeg(self) -> int:
        return int(self.degs.min()) if self.keys.size else 10 ** 6

    def exponents(self) -> tuple[np.ndarray, np.ndarray]:
        return self.ring.decode(self.keys)

    def phase_counts(self) -> np.ndarray:
        """``K_l - L_l`` for every term (shape ``(nterms, 2J+1)``)."""
        E, _ = self.exponents()
        nm = self.ring.nmodes
        return E[:, :nm] - E[:, nm:]

    def to_dict(self) -> dict:
        E, et = self.exponents()
        out = {}
        for row, e, c in zip(E, et, self.coefs):
            key = tuple(int(x) for x in row) + ((int(e),) if e else ())
            out[key] = complex(c)
        return out

    def coef(self, K=None, L=None, t: int = 0) -> complex:
        key = ScalarPoly.monomial(self.ring, K, L, 1.0, t).keys[0]
        i = np.searchsorted(self.keys, key)
        if i < self.keys.size and self.keys[i] == key:
            return complex(self.coefs[i])
        return 0j

    def max_abs(self, mindeg: int = 0, maxdeg: int | None = None) -> float:
        sel = self.degs >= mindeg
        if maxdeg is not None:
            sel &= self.degs <= maxdeg
        return float(np.max(np.abs(self.coefs[sel]), initial=0.0))

    def has_time(self) -> bool:
        return bool(np.any(self.keys >= self.ring.tstride))

    # -- arithmetic ---------------------------------------------------------
    def _check(self, other):
        if other.ring != self.ring:
            raise ValueError(f"ring mismatch: {self.ring} vs {other.ring}")

    def __add__(self, other):
        if not isinstance(other, ScalarPoly):
            return self + ScalarPoly.const(self.ring, other)
        self._check(other)
        return self._new(np.concatenate([self.keys, other.keys]),
                         np.concatenate([self.coefs, other.coefs]),
                         np.concatenate([self.degs, other.degs]))

    __radd__ = __add__

    def __neg__(self):
        return self._new(self.keys, -self.coefs, self.degs, True)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c: complex) -> "ScalarPoly":
        if c == 0:
            return ScalarPoly.zero(self.ring)
        return self._new(self.keys, self.coefs * c, self.degs)

    def mul(self, other: "ScalarPoly", maxdeg: int | None = None) -> "ScalarPoly":
        self._check(other)
        maxdeg = self.ring.cap if maxdeg is None else min(maxdeg, self.ring.cap)
        if self.is_zero() or other.is_zero():
            return ScalarPoly.zero(self.ring)
        k, c, d = mul_terms(self.keys, self.coefs, self.degs, other.keys, other.coefs,
                            other.degs, maxdeg, PRUNE_TOL)
        return self._new(k, c, d, True)

    def __mul__(self, other):
        if isinstance(other, ScalarPoly):
            return self.mul(other)
        return self.scale(other)

    __rmul__ = __mul__

    def pow(self, n: int, maxdeg: int | None = None) -> "ScalarPoly":
        out = ScalarPoly.const(self.ring, 1.0)
        for _ in range(n):
            out = out.mul(self, maxdeg)
        return out

    def select(self, mask) -> "ScalarPoly":
        return self._new(self.keys[mask], self.coefs[mask], self.degs[mask], True)

    def truncate(self, maxdeg: int) -> "ScalarPoly":
        return self.select(self.degs <= maxdeg)

    def homogeneous(self, d: int) -> "ScalarPoly":
        return self.select(self.degs == d)

    def degree_range(self, lo: int, hi: int) -> "ScalarPoly":
        return self.select((self.degs >= lo) & (self.degs <= hi))

    def map_coefs(self, fn) -> "ScalarPoly":
        return self._new(self.keys, fn(self.coefs), self.degs)

    def majorant(self) -> "ScalarPoly":
        return self._new(self.keys, np.abs(self.coefs).astype(complex), self.degs, True)

    def mirror(self) -> "ScalarPoly":
        """Conjugate-mirror: swap ``K <-> L`` and conjugate the coefficients."""
        E, et = self.exponents()
        nm = self.ring.nmodes
        E2 = np.concatenate([E[:, nm:], E[:, :nm]], axis=1)
        return self._new(self.ring.encode(E2, et), np.conj(self.coefs), self.degs)

    def deriv(self, v: int) -> "ScalarPoly":
        """Partial derivative with respect to slot variable ``v``."""
        e = (self.keys // self.ring.strides[v]) % self.ring.base
        sel = e > 0
        return self._new(self.keys[sel] - self.ring.strides[v], self.coefs[sel] * e[sel],
                         self.degs[sel] - 1, True)

    def times_var(self, v: int, maxdeg: int | None = None) -> "ScalarPoly":
        """Multiply by the slot variable ``v`` (a key shift)."""
        maxdeg = self.ring.cap if maxdeg is None else min(maxdeg, self.ring.cap)
        sel = self.degs + 1 <= maxdeg
        return self._new(self.keys[sel] + self.ring.strides[v], self.coefs[sel],
                         self.degs[sel] + 1, True)

    # -- time variable ------------------------------------------------------
    def t_power(self) -> np.ndarray:
        return self.keys // self.ring.tstride

    def times_t(self, power: int = 1) -> "ScalarPoly":
        if np.any(self.t_power() + power >= T_DIGITS):
            raise OverflowError("time exponent overflow")
        return self._new(self.keys + power * self.ring.tstride, self.coefs, self.degs, True)

    def t_integrate(self) -> "ScalarPoly":
        """``int_0^t`` in the time variable."""
        e = self.t_power()
        if np.any(e + 1 >= T_DIGITS):
            raise OverflowError("time exponent overflow")
        return self._new(self.keys + self.ring.tstride, self.coefs / (e + 1), self.degs, True)

    def t_eval(self, t: float = 1.0) -> "ScalarPoly":
        e = self.t_power()
        return self._new(self.keys - e * self.ring.tstride, self.coefs * (t ** e), self.degs)

    # -- evaluation ---------------------------------------------------------
    def eval(self, z, t: float | None = None):
        """Evaluate at slot vector(s) ``z`` of shape ``(..., nvar)``."""
        z = np.asarray(z, dtype=complex)
        E, et = self.exponents()
        if self.is_zero():
            return np.zeros(z.shape[:-1], dtype=complex) if z.ndim > 1 else 0j
        mon = np.prod(z[..., None, :] ** E, axis=-1)
        c = self.coefs if t is None else self.coefs * (t ** et)
        out = mon @ c
        return out if z.ndim > 1 else complex(out)

    def allclose(self, other: "ScalarPoly", tol: float = 1e-12) -> bool:
        return (self - other).max_abs() <= tol

    def __repr__(self):
        return f"ScalarPoly({self.nterms} terms, deg<={self.maxdeg}, {self.ring})"


def _zeros(ring, n):
    return [ScalarPoly.zero(ring) for _ in range(n)]


def action_poly(ring: Ring, j: int) -> ScalarPoly:
    """``I_j = xi_j eta_j / 2``."""
    return ScalarPoly.monomial(ring, {j: 1}, {j: 1}, 0.5)


class PolyMap:
    """Map of the phase space: one :class:`ScalarPoly` per output slot."""

    __slots__ = ("ring", "slots")

    def __init__(self, ring: Ring, slots):
        slots = tuple(slots)
        if len(slots) != ring.nvar:
            raise ValueError(f"expected {ring.nvar} slots, got {len(slots)}")
        for s in slots:
            if s.ring != ring:
                raise ValueError("slot polynomial from a different ring")
        self.ring = ring
        self.slots = slots

    @classmethod
    def zero(cls, ring: Ring) -> "PolyMap":
        return cls(ring, _zeros(ring, ring.nvar))

    @classmethod
    def identity(cls, ring: Ring) -> "PolyMap":
        return cls(ring, [ScalarPoly(ring, ring.strides[v:v + 1].copy(), np.ones(1, complex),
                                     np.ones(1, np.int64)) for v in range(ring.nvar)])

    @classmethod
    def linear(cls, ring: Ring, M) -> "PolyMap":
        M = np.asarray(M, dtype=complex)
        slots = []
        for a in range(ring.nvar):
            nz = np.nonzero(M[a])[0]
            slots.append(ScalarPoly(ring, ring.strides[nz].copy(), M[a, nz],
                                    np.ones(nz.size, np.int64)))
        return cls(ring, slots)

    def __getitem__(self, v: int) -> ScalarPoly:
        return self.slots[v]

    def slot(self, j: int, channel: str) -> ScalarPoly:
        return self.slots[self.ring.index(j, channel)]

    def _zip(self, other, fn):
        if other.ring != self.ring:
            raise ValueError("ring mismatch")
        return PolyMap(self.ring, [fn(a, b) for a, b in zip(self.slots, other.slots)])

    def __add__(self, other):
        return self._zip(other, lambda a, b: a + b)

    def __sub__(self, other):
        return self._zip(other, lambda a, b: a - b)

    def __neg__(self):
        return PolyMap(self.ring, [-a for a in self.slots])

    def scale(self, c) -> "PolyMap":
        return PolyMap(self.ring, [a.scale(c) for a in self.slots])

    def apply(self, fn) -> "PolyMap":
        return PolyMap(self.ring, [fn(a) for a in self.slots])

    def truncate(self, maxdeg: int) -> "PolyMap":
        return self.apply(lambda a: a.truncate(maxdeg))

    def homogeneous(self, d: int) -> "PolyMap":
        return self.apply(lambda a: a.homogeneous(d))

    def degree_range(self, lo: int, hi: int) -> "PolyMap":
        return self.apply(lambda a: a.degree_range(lo, hi))

    def majorant(self) -> "PolyMap":
        return self.apply(ScalarPoly.majorant)

    def t_integrate(self) -> "PolyMap":
        return self.apply(ScalarPoly.t_integrate)

    def t_eval(self, t: float = 1.0) -> "PolyMap":
        return self.apply(lambda a: a.t_eval(t))

    def times_t(self, power: int = 1) -> "PolyMap":
        return self.apply(lambda a: a.times_t(power))

    @property
    def maxdeg(self) -> int:
        return max(s.maxdeg for s in self.slots)

    @property
    def mindeg(self) -> int:
        return min(s.mindeg for s in self.slots)

    def max_abs(self, mindeg: int = 0, maxdeg: int | None = None) -> float:
        return max(s.max_abs(mindeg, maxdeg) for s in self.slots)

    def linear_part(self) -> np.ndarray:
        M = np.zeros((self.ring.nvar, self.ring.nvar), dtype=complex)
        for a, s in enumerate(self.slots):
            lin = s.homogeneous(1)
            if lin.nterms:
                E, _ = lin.exponents()
                M[a, np.argmax(E, axis=1)] = lin.coefs
        return M

    def is_near_identity(self, tol: float = 1e-12) -> bool:
        const = max(s.homogeneous(0).max_abs() for s in self.slots)
        return const <= tol and np.max(np.abs(self.linear_part() - np.eye(self.ring.nvar))) <= tol

    def nonlinear_part(self) -> "PolyMap":
        return self.apply(lambda a: a.degree_range(2, 10 ** 6))

    def reality_defect(self) -> float:
        """``max |coef|`` of ``slot(j, eta) - mirror(slot(j, xi))``."""
        nm = self.ring.nmodes
        return max((self.slots[nm + i] - self.slots[i].mirror()).max_abs() for i in range(nm))

    def is_real(self, tol: float = 1e-12) -> bool:
        return self.reality_defect() <= tol

    def eval(self, z, t: float | None = None) -> np.ndarray:
        return np.stack([s.eval(z, t) for s in self.slots], axis=-1)

    def differential(self) -> "OperatorPoly":
        return OperatorPoly(self.ring, [[s.deriv(v) for v in range(self.ring.nvar)]
                                        for s in self.slots])

    def compose(self, G: "PolyMap", maxdeg: int | None = None) -> "PolyMap":
        return compose(self, G, maxdeg)

    def allclose(self, other: "PolyMap", tol: float = 1e-12) -> bool:
        return (self - other).max_abs() <= tol

    # -- serialization ------------------------------------------------------
    def to_json(self) -> list:
        nm = self.ring.nmodes
        out = []
        for v, s in enumerate(self.slots):
            j, ch = self.ring.label(v)
            E, et = s.exponents()
            mons = []
            for row, e, c in zip(E, et, s.coefs):
                m = {"K": [int(x) for x in row[:nm]], "L": [int(x) for x in row[nm:]],
                     "re": float(c.real), "im": float(c.imag)}
                if e:
                    m["t"] = int(e)
                mons.append(m)
            out.append({"slot": [j, ch], "monomials": mons})
        return out

    @classmethod
    def from_json(cls, data: list, cap: int | None = None) -> "PolyMap":
        nm = None
        maxd = 1
        for entry in data:
            for m in entry["monomials"]:
                nm = len(m["K"])
                maxd = max(maxd, sum(m["K"]) + sum(m["L"]))
        if nm is None:
            nm = len(data) // 2
        J = (nm - 1) // 2
        ring = Ring(J, cap if cap is not None else maxd)
        slots = _zeros(ring, ring.nvar)
        for entry in data:
            j, ch = entry["slot"]
            v = ring.index(int(j), ch)
            mons = entry["monomials"]
            if not mons:
                continue
            E = np.array([m["K"] + m["L"] for m in mons], dtype=np.int64)
            c = np.array([complex(m["re"], m["im"]) for m in mons])
            et = np.array([m.get("t", 0) for m in mons], dtype=np.int64)
            slots[v] = ScalarPoly.from_exponents(ring, E, c, et)
        return cls(ring, slots)

    def __repr__(self):
        return f"PolyMap({self.ring}, deg<={self.maxdeg})"


class OperatorPoly:
    """Matrix of polynomials; entry ``(a, b)`` maps input slot ``b`` to output slot ``a``."""

    __slots__ = ("ring", "entries")

    def __init__(self, ring: Ring, entries):
        self.ring = ring
        self.entries = [list(row) for row in entries]
        if len(self.entries) != ring.nvar or any(len(r) != ring.nvar for r in self.entries):
            raise ValueError("operator must be nvar x nvar")

    @classmethod
    def zero(cls, ring: Ring) -> "OperatorPoly":
        return cls(ring, [_zeros(ring, ring.nvar) for _ in range(ring.nvar)])

    @classmethod
    def constant(cls, ring: Ring, M) -> "OperatorPoly":
        M = np.asarray(M, dtype=complex)
        z = ScalarPoly.zero(ring)
        return cls(ring, [[ScalarPoly.const(ring, M[a, b]) if M[a, b] != 0 else z
                           for b in range(ring.nvar)] for a in range(ring.nvar)])

    @classmethod
    def identity(cls, ring: Ring) -> "OperatorPoly":
        return cls.constant(ring, np.eye(ring.nvar))

    def __getitem__(self, ab):
        a, b = ab
        return self.entries[a][b]

    def _map(self, fn) -> "OperatorPoly":
        return OperatorPoly(self.ring, [[fn(e) for e in row] for row in self.entries])

    def _zip(self, other, fn) -> "OperatorPoly":
        return OperatorPoly(self.ring, [[fn(x, y) for x, y in zip(r1, r2)]
                                        for r1, r2 in zip(self.entries, other.entries)])

    def __add__(self, other):
        return self._zip(other, lambda x, y: x + y)

    def __sub__(self, other):
        return self._zip(other, lambda x, y: x - y)

    def __neg__(self):
        return self._map(lambda x: -x)

    def scale(self, c) -> "OperatorPoly":
        return self._map(lambda x: x.scale(c))

    def truncate(self, maxdeg: int) -> "OperatorPoly":
        return self._map(lambda x: x.truncate(maxdeg))

    def homogeneous(self, d: int) -> "OperatorPoly":
        return self._map(lambda x: x.homogeneous(d))

    def majorant(self) -> "OperatorPoly":
        return self._map(ScalarPoly.majorant)

    def times_t(self, power: int = 1) -> "OperatorPoly":
        return self._map(lambda x: x.times_t(power))

    def max_abs(self, mindeg: int = 0, maxdeg: int | None = None) -> float:
        return max(e.max_abs(mindeg, maxdeg) for row in self.entries for e in row)

    def is_zero(self) -> bool:
        return all(e.is_zero() for row in self.entries for e in row)

    def adjoint(self) -> "OperatorPoly":
        """Adjoint for the bilinear pairing: ``A* = G A^T G``.

        On maps that send real states to real states this is the conjugate
        transpose, i.e. the adjoint for the real pairing ``2 Re sum``.
        """
        r = self.ring
        return OperatorPoly(r, [[self.entries[r.swap(b)][r.swap(a)] for b in range(r.nvar)]
                                for a in range(r.nvar)])

    def matmul(self, other: "OperatorPoly", maxdeg: int | None = None) -> "OperatorPoly":
        n = self.ring.nvar
        out = []
        for a in range(n):
            row = []
            for b in range(n):
                acc = ScalarPoly.zero(self.ring)
                for c in range(n):
                    x = self.entries[a][c]
                    y = other.entries[c][b]
                    if x.nterms and y.nterms:
                        acc = acc + x.mul(y, maxdeg)
                row.append(acc)
            out.append(row)
        return OperatorPoly(self.ring, out)

    def __matmul__(self, other):
        if isinstance(other, OperatorPoly):
            return self.matmul(other)
        return self.apply(other)

    def apply(self, X: PolyMap, maxdeg: int | None = None) -> PolyMap:
        slots = []
        for row in self.entries:
            acc = ScalarPoly.zero(self.ring)
            for e, x in zip(row, X.slots):
                if e.nterms and x.nterms:
                    acc = acc + e.mul(x, maxdeg)
            slots.append(acc)
        return PolyMap(self.ring, slots)

    def left_diag(self, d) -> "OperatorPoly":
        """``diag(d) @ self`` for a constant diagonal ``d``."""
        return OperatorPoly(self.ring, [[e.scale(d[a]) for e in row]
                                        for a, row in enumerate(self.entries)])

    def compose_inner(self, G: PolyMap, maxdeg: int | None = None) -> "OperatorPoly":
        """Entries evaluated along ``G``: ``A(G(z))``."""
        cache = _PowerCache(G, maxdeg)
        return OperatorPoly(self.ring, [[cache.substitute(e) for e in row]
                                        for row in self.entries])

    def eval(self, z, t: float | None = None) -> np.ndarray:
        return np.array([[e.eval(z, t) for e in row] for row in self.entries])

    def __repr__(self):
        return f"OperatorPoly({self.ring})"


# ---------------------------------------------------------------------------
# composition, inversion, flows


class _PowerCache:
    """Memoized monomial powers ``G^K`` truncated at ``maxdeg``."""

    def __init__(self, G: PolyMap, maxdeg: int | None = None):
        self.G = G
        self.ring = G.ring
        self.maxdeg = self.ring.cap if maxdeg is None else min(maxdeg, self.ring.cap)
        self.mindeg = max(0, min(s.mindeg for s in G.slots))
        self.cache = {0: ScalarPoly.const(self.ring, 1.0)}

    def power(self, key: int, E: np.ndarray) -> ScalarPoly:
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        v = int(np.nonzero(E)[0][0])
        E2 = E.copy()
        E2[v] -= 1
        parent = self.power(key - int(self.ring.strides[v]), E2)
        out = parent.mul(self.G.slots[v], self.maxdeg)
        self.cache[key] = out
        return out

    def substitute(self, F: ScalarPoly) -> ScalarPoly:
        if F.is_zero():
            return F
        r = self.ring
        E, et = F.exponents()
        zkeys = F.keys - et * r.tstride
        keep = F.degs * self.mindeg <= self.maxdeg
        ks, cs, ds = [], [], []
        for zk, row, e, c in zip(zkeys[keep], E[keep], et[keep], F.coefs[keep]):
            P = self.power(int(zk), row)
            if P.is_zero():
                continue
            ks.append(P.keys + e * r.tstride)
            cs.append(P.coefs * c)
            ds.append(P.degs)
        if not ks:
            return ScalarPoly.zero(r)
        return ScalarPoly(r, np.concatenate(ks), np.concatenate(cs), np.concatenate(ds))


def compose(F, G: PolyMap, maxdeg: int | None = None):
    """``F o G`` exact through degree ``maxdeg``; the time variable is kept as is.

    Parameters
    ----------
    F : PolyMap or ScalarPoly
    G : PolyMap
        Substituted for the phase-space variables.
    """
    cache = _PowerCache(G, maxdeg)
    if isinstance(F, ScalarPoly):
        return cache.substitute(F)
    return PolyMap(F.ring, [cache.substitute(s) for s in F.slots])


def _nonlinear(Phi: PolyMap, tol: float = 1e-12) -> PolyMap:
    if not Phi.is_near_identity(tol):
        raise ValueError("map is not near-identity (constant or linear part differs from identity)")
    return Phi - PolyMap.identity(Phi.ring)


def invert_near_identity(Phi: PolyMap, maxdeg: int | None = None) -> PolyMap:
    """Inverse of ``Phi = 1 + F`` as ``1 - G`` with ``G = F o (1 - G)``.

    Degree by degree this is ``G^n = sum_r sum_{k_1+..+k_r=n}
    F^r(H^{k_1}, ..., H^{k_r})`` with ``H^1 = z`` and ``H^k = -G^k``; the
    fixed point iteration below produces one more correct degree per sweep.
    """
    maxdeg = Phi.ring.cap if maxdeg is None else maxdeg
    F = _nonlinear(Phi).truncate(maxdeg)
    ident = PolyMap.identity(Phi.ring)
    G = PolyMap.zero(Phi.ring)
    for _ in range(maxdeg + 1):
        G_new = compose(F, ident - G, maxdeg)
        if (G_new - G).max_abs() == 0.0:
            break
        G = G_new
    return ident - G


def flow(Y: PolyMap, maxdeg: int | None = None, t_final: float = 1.0) -> PolyMap:
    """Time-``t_final`` flow of ``du/dt = Y(t, u)`` by Picard iteration.

    ``u^{k+1}(t) = z + int_0^t Y(s, u^k(s)) ds`` is carried out with ``t`` as
    a ring variable, so every ``t``-integral is exact.  ``Y`` must have no
    constant or linear part; a purely linear constant diagonal field is
    handled separately by :func:`flow_linear_diagonal`.
    """
    ring = Y.ring
    maxdeg = ring.cap if maxdeg is None else maxdeg
    if Y.mindeg < 2:
        raise ValueError("vector field must vanish to second order; "
                         "use flow_linear_diagonal for linear fields")
    ident = PolyMap.identity(ring)
    u = ident
    for _ in range(maxdeg + 1):
        u_new = ident + compose(Y, u, maxdeg).t_integrate()
        if (u_new - u).max_abs() == 0.0:
            break
        u = u_new
    return u.t_eval(t_final)


def flow_linear_diagonal(Y: PolyMap, t_final: float = 1.0) -> PolyMap:
    """Exact flow of a constant diagonal linear field ``Y(u) = diag(lam) u``."""
    M = Y.linear_part()
    if any(s.degree_range(2, 10 ** 6).nterms or s.homogeneous(0).nterms or s.has_time()
           for s in Y.slots):
        raise ValueError("only constant linear fields are supported on this path")
    if np.max(np.abs(M - np.diag(np.diag(M)))) > 0:
        raise ValueError("linear field must be diagonal")
    return PolyMap.linear(Y.ring, np.diag(np.exp(np.diag(M) * t_final)))


# ---------------------------------------------------------------------------
# averaging and the L_j operator


def _slot_shift(ring: Ring, v: int) -> np.ndarray:
    d = np.zeros(ring.nmodes, dtype=np.int64)
    d[v % ring.nmodes] = ring.sign(v)
    return d


def _resonance_filter(poly: ScalarPoly, shift: np.ndarray, l: int | None) -> ScalarPoly:
    if poly.is_zero():
        return poly
    m = poly.phase_counts() - shift[None, :]
    if l is None:
        keep = np.all(m == 0, axis=1)
    else:
        keep = m[:, l + poly.ring.J] == 0
    return poly.select(keep)


def average(obj, l: int | None = None):
    """Torus average ``M`` (``l is None``) or the single-angle average ``M_l``.

    The phase count of a term is ``K - L`` minus the output slot's own
    contribution (``+e_a`` for an xi slot, ``-e_a`` for an eta slot) and plus
    the input slot's contribution for operator entries.  Averaging keeps the
    terms whose count vanishes.
    """
    if isinstance(obj, ScalarPoly):
        return _resonance_filter(obj, np.zeros(obj.ring.nmodes, np.int64), l)
    ring = obj.ring
    if isinstance(obj, PolyMap):
        return PolyMap(ring, [_resonance_filter(s, _slot_shift(ring, a), l)
                              for a, s in enumerate(obj.slots)])
    if isinstance(obj, OperatorPoly):
        return OperatorPoly(ring, [[_resonance_filter(e, _slot_shift(ring, a) - _slot_shift(ring, b), l)
                                    for b, e in enumerate(row)] for a, row in enumerate(obj.entries)])
    raise TypeError(type(obj))


def average_M(obj):
    return average(obj, None)


def average_Ml(obj, l: int):
    return average(obj, l)


def op_Lj(g: ScalarPoly, j: int) -> ScalarPoly:
    """``L_j g = (1/2pi) int_0^{2pi} t g(phi_j^t z) dt`` on monomials.

    A monomial with phase count ``m = K_j - L_j`` picks up ``pi`` when
    ``m = 0`` and ``1/(i m)`` otherwise.
    """
    if g.is_zero():
        return g
    m = g.phase_counts()[:, j + g.ring.J]
    fac = np.where(m == 0, np.pi + 0j, 1.0 / (1j * np.where(m == 0, 1, m)))
    return g.map_coefs(lambda c: c * fac)


def phase_derivative(g: ScalarPoly, j: int) -> ScalarPoly:
    """``d/dtheta_j`` along the rotation of mode ``j``: multiplies by ``i m``."""
    if g.is_zero():
        return g
    m = g.phase_counts()[:, j + g.ring.J]
    return g.map_coefs(lambda c: c * (1j * m))


def rotate(z, ring: Ring, theta) -> np.ndarray:
    """Apply the torus rotation ``xi_l -> e^{i theta_l} xi_l`` to slot vectors."""
    theta = np.broadcast_to(np.asarray(theta, dtype=float), (ring.nmodes,))
    ph = np.exp(1j * np.concatenate([theta, -theta]))
    return np.asarray(z) * ph


# ---------------------------------------------------------------------------
# gradients, brackets


def gradient(F: ScalarPoly) -> PolyMap:
    """``grad F`` with ``dF(z) v = g(grad F, v)``: slots ``(dF/deta, dF/dxi)``."""
    r = F.ring
    return PolyMap(r, [F.deriv(r.swap(v)) for v in range(r.nvar)])


def hamiltonian_field(F: ScalarPoly) -> PolyMap:
    """Calibrated ``X_F``: xi slot ``-2i dF/deta_j``, eta slot ``2i dF/dxi_j``."""
    r = F.ring
    nm = r.nmodes
    slots = []
    for v in range(r.nvar):
        fac = -1j if v < nm else 1j
        slots.append(F.deriv(r.swap(v)).scale(CALIBRATION * fac))
    return PolyMap(r, slots)


def poisson_bracket(F: ScalarPoly, G: ScalarPoly, maxdeg: int | None = None) -> ScalarPoly:
    """``{F, G} = dF(X_G) = 2i sum_j (F_eta G_xi - F_xi G_eta)``."""
    r = F.ring
    out = ScalarPoly.zero(r)
    for j in range(-r.J, r.J + 1):
        x = r.index(j, "xi")
        e = r.index(j, "eta")
        out = out + F.deriv(e).mul(G.deriv(x), maxdeg) - F.deriv(x).mul(G.deriv(e), maxdeg)
    return out.scale(1j * CALIBRATION)


# ---------------------------------------------------------------------------
# tame norms of majorants


def _weights(ring: Ring, w: Weight) -> np.ndarray:
    vals = w.values(np.arange(-ring.J, ring.J + 1))
    return np.concatenate([vals, vals])


def _slot_norm(vals: np.ndarray, wv: np.ndarray, p: float, nm: int) -> float:
    a = (wv * np.abs(vals)) ** p
    return float(np.sum(a[..., :nm], axis=-1) ** (1 / p) + np.sum(a[..., nm:], axis=-1) ** (1 / p))


def tame_norm_upper(F: PolyMap, rho: float, u: Weight, v: Weight, w: Weight, p: float = 2.0) -> float:
    """Upper bound for ``|F|_rho + rho |F|^T_rho`` of the majorant of ``F``.

    On the ball ``||z||_{p,u} <= rho`` every coordinate obeys
    ``|z_a| <= rho / u_a``.  Each monomial is bounded by that product, and
    for the tame part one factor ``z_b`` is instead bounded by
    ``||z||_{p,v} / v_b`` (the best choice of ``b`` is taken).  Per-slot
    bounds are then summed in the output norms (``u`` and ``w``).
    """
    ring = F.ring
    nm = ring.nmodes
    wu = _weights(ring, u)
    wv = _weights(ring, v)
    ww = _weights(ring, w)
    B = np.zeros(ring.nvar)
    T = np.zeros(ring.nvar)
    for a, s in enumerate(F.slots):
        if s.is_zero():
            continue
        E, _ = s.exponents()
        c = np.abs(s.coefs)
        logb = E @ np.log(rho / wu)
        B[a] = np.sum(c * np.exp(logb))
        # swap one factor rho/u_b for 1/v_b; only variables present qualify
        swap = np.where(E > 0, -np.log(rho / wu) - np.log(wv), np.inf)
        best = np.min(swap, axis=1)
        T[a] = np.sum(np.where(np.isfinite(best), c * np.exp(logb + best), 0.0))
    return _slot_norm(B, wu, p, nm) + rho * _slot_norm(T, ww, p, nm)


def tame_norm_sample(F: PolyMap, rho: float, u: Weight, v: Weight, w: Weight, p: float = 2.0,
                     samples: int = 200, rng: np.random.Generator | None = None) -> float:
    """Lower estimate of the same quantity from random and concentrated states.

    The majorant is maximized on non-negative real coordinates, so samples are
    drawn there: random directions on the sphere ``||z||_{p,u} = rho``, every
    single-coordinate state and every xi/eta pair of one mode.
    """
    ring = F.ring
    nm = ring.nmodes
    rng = rng or np.random.default_rng(0)
    wu = _weights(ring, u)
    wv = _weights(ring, v)
    ww = _weights(ring, w)
    Fm = F.majorant()
    cands = [np.abs(rng.normal(size=(samples, ring.nvar)))]
    cands.append(np.eye(ring.nvar))
    pair = np.zeros((nm, ring.nvar))
    pair[np.arange(nm), np.arange(nm)] = 1.0
    pair[np.arange(nm), nm + np.arange(nm)] = 1.0
    cands.append(pair)
    Z = np.concatenate(cands)
    norms = np.array([_slot_norm(zz, wu, p, nm) for zz in Z])
    Z = Z * (rho / norms)[:, None]
    vals = Fm.eval(Z.astype(complex))
    best_abs = 0.0
    best_tame = 0.0
    for zz, fz in zip(Z, vals):
        best_abs = max(best_abs, _slot_norm(fz, wu, p, nm))
        denom = _slot_norm(zz, wv, p, nm)
        if denom > 0:
            best_tame = max(best_tame, _slot_norm(fz, ww, p, nm) / denom)
    return best_abs + rho * best_tame


__all__ = [
    "Ring", "ScalarPoly", "PolyMap", "OperatorPoly", "compose", "invert_near_identity", "flow",
    "flow_linear_diagonal", "average", "average_M", "average_Ml", "op_Lj", "phase_derivative",
    "rotate", "gradient", "hamiltonian_field", "poisson_bracket", "action_poly",
    "tame_norm_upper", "tame_norm_sample", "PRUNE_TOL", "CALIBRATION",
]
