"""Truncated weighted Fourier-Lebesgue phase space.

A state is a pair of sequences ``(xi, eta)`` indexed by the modes
``|j| <= J``.  Coordinates of the whole phase space are stored densely as a
vector of length ``2 (2J + 1)`` ordered as ``xi_{-J}, ..., xi_J, eta_{-J},
..., eta_J``; every other module uses this slot ordering.

Conventions
-----------
* ``<j> = 1 + |j|``.
* The real pairing is ``<a, b> = 2 Re sum_j a_j conj(b_j)`` on the xi
  components of real states.  Its complex-bilinear extension to arbitrary
  states is ``g(a, b) = a^T G b`` with ``G`` the block swap of the xi and eta
  channels, so that ``g`` reproduces the real pairing when
  ``eta = conj(xi)``.
* The symplectic form is ``omega_0(a, b) = <E a, b>`` with ``E = i`` on the
  xi channel, i.e. ``E = diag(i, -i)`` in slot coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

REAL_TOL = 1e-12
FAMILIES = ("unit", "polynomial", "analytic", "shifted")


def bracket(j):
    """Japanese bracket ``<j> = 1 + |j|`` (works on arrays)."""
    return 1.0 + np.abs(j)


@dataclass(frozen=True)
class Weight:
    """Positive symmetric weight ``w_j``.

    Families
    --------
    unit        : ``w_j = 1``
    polynomial  : ``w_j = <j>^s``
    analytic    : ``w_j = <j>^s exp(a |j|^b)``
    shifted     : ``w_j = <j>^(s + offset) exp(a |j|^b)``, the analytic
                  family with the polynomial exponent raised by ``offset``.
    """

    family: str = "unit"
    s: float = 0.0
    a: float = 0.0
    b: float = 1.0
    offset: float = 0.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown weight family {self.family!r}")
        if self.s < 0 or self.a < 0 or self.s + self.offset < 0:
            raise ValueError("weight exponents must be non-negative")
        if self.b <= 0:
            raise ValueError("analytic exponent b must be positive")

    @classmethod
    def unit(cls) -> "Weight":
        return cls("unit")

    @classmethod
    def polynomial(cls, s: float) -> "Weight":
        return cls("polynomial", s=float(s))

    @classmethod
    def analytic(cls, s: float, a: float, b: float = 1.0) -> "Weight":
        return cls("analytic", s=float(s), a=float(a), b=float(b))

    @classmethod
    def shifted(cls, offset: float, s: float = 0.0, a: float = 0.0, b: float = 1.0) -> "Weight":
        return cls("shifted", s=float(s), a=float(a), b=float(b), offset=float(offset))

    @property
    def power(self) -> float:
        if self.family == "unit":
            return 0.0
        if self.family == "shifted":
            return self.s + self.offset
        return self.s

    @property
    def rate(self) -> float:
        return self.a if self.family in ("analytic", "shifted") else 0.0

    def log_values(self, j) -> np.ndarray:
        j = np.asarray(j, dtype=float)
        out = self.power * np.log(bracket(j))
        if self.rate:
            out = out + self.rate * np.abs(j) ** self.b
        return out

    def values(self, j) -> np.ndarray:
        return np.exp(self.log_values(j))

    def __call__(self, j):
        v = self.values(j)
        return float(v) if np.ndim(v) == 0 else v

    def is_submultiplicative(self, jmax: int = 50, rtol: float = 1e-12) -> bool:
        j = np.arange(-jmax, jmax + 1)
        lw = self.log_values(j)
        lhs = self.log_values(j[:, None] + j[None, :])
        return bool(np.all(lhs <= lw[:, None] + lw[None, :] + rtol))

    def to_config(self) -> dict:
        cfg = {"family": self.family, "s": self.s, "a": self.a, "b": self.b}
        if self.family == "shifted":
            cfg["offset"] = self.offset
        return cfg

    @classmethod
    def from_config(cls, cfg: dict) -> "Weight":
        return cls(
            cfg.get("family", "unit"),
            s=float(cfg.get("s", 0.0)),
            a=float(cfg.get("a", 0.0)),
            b=float(cfg.get("b", 1.0)),
            offset=float(cfg.get("offset", 0.0)),
        )

    def label(self) -> str:
        if self.family == "unit":
            return "1"
        txt = f"<j>^{self.power:g}"
        if self.rate:
            txt += f" e^({self.rate:g}|j|^{self.b:g})"
        return txt


def weight_eval(w: Weight, j) -> float:
    """Evaluate ``w_j``; see :class:`Weight` for the family formulas."""
    return w(j)


@dataclass(frozen=True)
class NormSpec:
    """Exponent ``p`` in ``[1, 2]`` together with a weight."""

    p: float = 2.0
    weight: Weight = field(default_factory=Weight)

    def __post_init__(self):
        if not 1.0 <= self.p <= 2.0:
            raise ValueError("p must lie in [1, 2]")

    @property
    def conjugate(self) -> float:
        return math.inf if self.p == 1.0 else self.p / (self.p - 1.0)

    def to_config(self) -> dict:
        cfg = self.weight.to_config()
        cfg["p"] = self.p
        return cfg

    @classmethod
    def from_config(cls, cfg: dict) -> "NormSpec":
        return cls(float(cfg.get("p", 2.0)), Weight.from_config(cfg))


def modes(J: int) -> np.ndarray:
    return np.arange(-J, J + 1)


def slot_index(J: int, j: int, channel: str) -> int:
    """Dense index of the coordinate ``xi_j`` or ``eta_j``."""
    if abs(j) > J:
        raise IndexError(f"mode {j} outside |j| <= {J}")
    if channel == "xi":
        return j + J
    if channel == "eta":
        return 2 * J + 1 + j + J
    raise ValueError(f"unknown channel {channel!r}")


def slot_label(J: int, idx: int) -> tuple[int, str]:
    n = 2 * J + 1
    return (idx % n - J, "xi" if idx < n else "eta")


def swap_matrix(J: int) -> np.ndarray:
    """Matrix ``G`` of the bilinear pairing ``g(a, b) = a^T G b``."""
    n = 2 * J + 1
    G = np.zeros((2 * n, 2 * n))
    G[:n, n:] = np.eye(n)
    G[n:, :n] = np.eye(n)
    return G


def e0_matrix(J: int) -> np.ndarray:
    """Operator of ``omega_0``: ``i`` on xi slots and ``-i`` on eta slots."""
    n = 2 * J + 1
    return np.diag(np.concatenate([np.full(n, 1j), np.full(n, -1j)]))


@dataclass(frozen=True)
class TruncState:
    """State ``(xi_j, eta_j)`` for ``|j| <= J``."""

    J: int
    xi: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        n = 2 * self.J + 1
        xi = np.array(self.xi, dtype=complex).reshape(-1)
        eta = np.array(self.eta, dtype=complex).reshape(-1)
        if self.J < 0 or xi.shape != (n,) or eta.shape != (n,):
            raise ValueError(f"state arrays must have length {n}")
        if not (np.all(np.isfinite(xi)) and np.all(np.isfinite(eta))):
            raise ValueError("state entries must be finite")
        xi.setflags(write=False)
        eta.setflags(write=False)
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "eta", eta)

    @classmethod
    def zeros(cls, J: int = 4) -> "TruncState":
        n = 2 * J + 1
        return cls(J, np.zeros(n), np.zeros(n))

    @classmethod
    def real(cls, J: int, xi) -> "TruncState":
        xi = np.asarray(xi, dtype=complex)
        return cls(J, xi, np.conj(xi))

    @classmethod
    def from_modes(cls, J: int, xi: dict | None = None, eta: dict | None = None,
                   real: bool = False) -> "TruncState":
        n = 2 * J + 1
        x = np.zeros(n, dtype=complex)
        e = np.zeros(n, dtype=complex)
        for j, v in (xi or {}).items():
            x[j + J] = v
        for j, v in (eta or {}).items():
            e[j + J] = v
        if real:
            e = np.conj(x)
        return cls(J, x, e)

    @classmethod
    def from_vector(cls, J: int, vec) -> "TruncState":
        vec = np.asarray(vec, dtype=complex)
        n = 2 * J + 1
        return cls(J, vec[:n], vec[n:])

    @classmethod
    def random_real(cls, J: int, rho: float, rng: np.random.Generator,
                    spec: "NormSpec | None" = None, support: int | None = None) -> "TruncState":
        """Random real state with ``norm(state, spec) == rho``.

        ``support`` restricts the excited modes to ``|j| <= support``.
        """
        n = 2 * J + 1
        xi = rng.normal(size=n) + 1j * rng.normal(size=n)
        if support is not None:
            xi[np.abs(modes(J)) > support] = 0
        st = cls.real(J, xi)
        nrm = norm(st, spec or NormSpec())
        return cls.real(J, xi * (rho / nrm))

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.xi, self.eta])

    def is_real(self, tol: float = REAL_TOL) -> bool:
        return bool(np.max(np.abs(self.eta - np.conj(self.xi)), initial=0.0) <= tol)

    def scaled(self, c: complex) -> "TruncState":
        return TruncState(self.J, self.xi * c, self.eta * c)

    def embed(self, J: int) -> "TruncState":
        """Zero-pad (or check) to a larger cutoff ``J``."""
        if J < self.J:
            raise ValueError("cannot embed into a smaller cutoff")
        pad = J - self.J
        return TruncState(J, np.pad(self.xi, pad), np.pad(self.eta, pad))

    def to_json(self) -> dict:
        return {
            "J": self.J,
            "xi": [[float(z.real), float(z.imag)] for z in self.xi],
            "eta": [[float(z.real), float(z.imag)] for z in self.eta],
        }

    @classmethod
    def from_json(cls, data: dict) -> "TruncState":
        J = int(data["J"])
        xi = np.array([complex(re, im) for re, im in data["xi"]])
        if "eta" in data and data["eta"] is not None:
            eta = np.array([complex(re, im) for re, im in data["eta"]])
        else:
            eta = np.conj(xi)
        return cls(J, xi, eta)


def norm(state: TruncState, spec: NormSpec | None = None) -> float:
    """``(sum w^p |xi|^p)^(1/p) + (sum w^p |eta|^p)^(1/p)``."""
    spec = spec or NormSpec()
    w = spec.weight.values(modes(state.J))
    p = spec.p

    def part(x):
        return float(np.sum((w * np.abs(x)) ** p) ** (1.0 / p))

    return part(state.xi) + part(state.eta)


def _check_pair(z1: TruncState, z2: TruncState):
    if z1.J != z2.J:
        raise ValueError(f"cutoff mismatch: {z1.J} != {z2.J}")


def real_scalar_product(z1: TruncState, z2: TruncState) -> float:
    """``<z1, z2> = 2 Re sum_j xi1_j conj(xi2_j)``."""
    _check_pair(z1, z2)
    return float(2.0 * np.real(np.sum(z1.xi * np.conj(z2.xi))))


def omega0(z1: TruncState, z2: TruncState) -> float:
    """``omega_0(z1, z2) = <i z1, z2> = -2 Im sum_j xi1_j conj(xi2_j)``."""
    _check_pair(z1, z2)
    return float(-2.0 * np.imag(np.sum(z1.xi * np.conj(z2.xi))))


def bilinear_pairing(a, b) -> complex:
    """Complex-bilinear extension ``g(a, b) = a^T G b`` on slot vectors."""
    a = np.asarray(a)
    b = np.asarray(b)
    n = a.shape[-1] // 2
    return np.sum(a[..., :n] * b[..., n:] + a[..., n:] * b[..., :n], axis=-1)
