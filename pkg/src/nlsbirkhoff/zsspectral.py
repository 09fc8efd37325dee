"""Zakharov-Shabat operator on a finite Fourier basis.

Basis ordering: ``f_i^-`` for ``|i| <= J_op`` (block 0), then ``f_i^+`` (block
1).  Both are eigenvectors of ``L0`` with eigenvalue ``pi i`` and are
orthonormal, so the matrix of ``L = L0 + V(zeta)`` has entries
``(L f_col, f_row)``:

* ``(V f_{i1}^-, f_{i2}^+) = xi_k`` when ``i1 + i2 = 2k``,
* ``(V f_{i1}^+, f_{i2}^-) = eta_k`` when ``i1 + i2 = 2k``.

The antilinear involution swaps ``f_i^- <-> f_i^+`` and conjugates
coordinates; the bilinear form ``(u, iota v)`` is ``u^T S v`` with ``S`` the
block swap.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .seqspace import NormSpec, TruncState, norm

DEFAULT_MARGIN = 8
DEFAULT_Q = 64
SERIES_TOL = 1e-17


def _l2(state: TruncState) -> float:
    return norm(state, NormSpec(2.0))


@dataclass
class ZSMatrix:
    """Dense matrix of ``L(zeta)`` in the ``f_{i0}^{-/+}`` basis."""

    J_op: int
    state: TruncState
    L: np.ndarray
    V: np.ndarray
    diag0: np.ndarray

    @property
    def size(self) -> int:
        return self.L.shape[0]

    @property
    def half(self) -> int:
        return 2 * self.J_op + 1

    def index(self, i: int, sign: str) -> int:
        if abs(i) > self.J_op:
            raise IndexError(f"basis index {i} outside |i| <= {self.J_op}")
        return i + self.J_op + (0 if sign == "-" else self.half)

    def basis_vector(self, i: int, sign: str) -> np.ndarray:
        e = np.zeros(self.size, dtype=complex)
        e[self.index(i, sign)] = 1.0
        return e

    def hermitian_defect(self) -> float:
        return float(np.max(np.abs(self.L - self.L.conj().T)))

    def is_hermitian(self, tol: float = 1e-14) -> bool:
        return self.hermitian_defect() <= tol


def coupling_matrix(J_op: int, state: TruncState) -> np.ndarray:
    """Matrix of ``V(zeta)`` (entries dropped when a partner index leaves the basis)."""
    half = 2 * J_op + 1
    V = np.zeros((2 * half, 2 * half), dtype=complex)
    i1 = np.arange(-J_op, J_op + 1)
    for k in range(-state.J, state.J + 1):
        i2 = 2 * k - i1
        ok = np.abs(i2) <= J_op
        cols = i1[ok] + J_op
        rows = i2[ok] + J_op
        V[half + rows, cols] = state.xi[k + state.J]
        V[rows, half + cols] = state.eta[k + state.J]
    return V


def build_zs_matrix(state: TruncState, J_op: int | None = None,
                    margin: int = DEFAULT_MARGIN) -> ZSMatrix:
    """Assemble ``L0 + V(zeta)`` with operator cutoff ``J_op`` (default ``J + margin``)."""
    if J_op is None:
        J_op = state.J + margin
    if J_op < state.J:
        raise ValueError(f"J_op = {J_op} is smaller than the state cutoff J = {state.J}")
    i = np.arange(-J_op, J_op + 1)
    diag0 = np.pi * np.concatenate([i, i]).astype(complex)
    V = coupling_matrix(J_op, state)
    return ZSMatrix(J_op, state, np.diag(diag0) + V, V, diag0)


def block_swap(x: np.ndarray) -> np.ndarray:
    """``S x``: exchange the minus and plus blocks (along the first axis)."""
    h = x.shape[0] // 2
    return np.concatenate([x[h:], x[:h]])


def involution(x: np.ndarray) -> np.ndarray:
    """Antilinear ``iota``: swap ``f^- <-> f^+`` and conjugate."""
    return np.conj(block_swap(x))


def pairing(u: np.ndarray, v: np.ndarray) -> complex:
    """``(u, iota v) = u^T S v``."""
    return complex(np.dot(u, block_swap(v)))


# ---------------------------------------------------------------------------
# spectrum


@dataclass
class SpectralData:
    J_op: int
    js: np.ndarray
    lam_minus: np.ndarray
    lam_plus: np.ndarray
    z: dict = field(default_factory=dict)
    w: dict = field(default_factory=dict)

    @property
    def gaps(self) -> np.ndarray:
        return self.lam_plus - self.lam_minus

    def gap(self, j: int) -> complex:
        return complex(self.gaps[list(self.js).index(j)])

    def to_json(self) -> dict:
        def cpx(x):
            return [float(np.real(x)), float(np.imag(x))]

        return {
            "J_op": self.J_op,
            "modes": [
                {"j": int(j), "lambda_minus": cpx(lm), "lambda_plus": cpx(lp), "gamma": cpx(lp - lm),
                 **({"z": cpx(self.z[j]), "w": cpx(self.w[j])} if j in self.z else {})}
                for j, lm, lp in zip(self.js, self.lam_minus, self.lam_plus)
            ],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["j", "lambda_minus", "lambda_plus", "gamma"])
        for j, lm, lp in zip(self.js, self.lam_minus, self.lam_plus):
            wr.writerow([int(j), repr(float(np.real(lm))), repr(float(np.real(lp))),
                         repr(float(np.real(lp - lm)))])
        return buf.getvalue()


def _lex_sorted(vals: np.ndarray) -> np.ndarray:
    return vals[np.lexsort((vals.imag, vals.real))]


def spectrum(m: ZSMatrix, J_report: int | None = None, hermitian: bool | None = None) -> SpectralData:
    """Eigenvalue pairs ``lambda_j^{-/+}`` in the disks ``|lambda - pi j| < pi/2``.

    Raises
    ------
    ValueError
        If a disk does not contain exactly two eigenvalues (state too large or
        ``J_op`` too small).
    """
    J_report = m.state.J if J_report is None else J_report
    if hermitian is None:
        hermitian = m.is_hermitian()
    ev = np.linalg.eigvalsh(m.L).astype(complex) if hermitian else np.linalg.eigvals(m.L)
    js = np.arange(-J_report, J_report + 1)
    lm = np.empty(js.size, complex)
    lp = np.empty(js.size, complex)
    for n, j in enumerate(js):
        inside = _lex_sorted(ev[np.abs(ev - np.pi * j) < np.pi / 2])
        if inside.size != 2:
            raise ValueError(f"disk around pi*{j} holds {inside.size} eigenvalues; "
                             "state too large or J_op too small")
        lm[n], lp[n] = inside
    return SpectralData(m.J_op, js, lm, lp)


def gaps(state: TruncState, J_op: int | None = None, J_report: int | None = None) -> np.ndarray:
    sd = spectrum(build_zs_matrix(state, J_op), J_report)
    return np.real(sd.gaps) if state.is_real() else sd.gaps


# ---------------------------------------------------------------------------
# projectors and coordinates


def contour_nodes(j: int, Q: int = DEFAULT_Q) -> tuple[np.ndarray, np.ndarray]:
    """Nodes on ``|lambda - pi j| = pi/2`` and trapezoid weights for ``-(1/2 pi i) oint``."""
    phi = 2 * np.pi * np.arange(Q) / Q
    e = np.exp(1j * phi)
    return np.pi * j + 0.5 * np.pi * e, -0.5 * np.pi * e / Q


def projector0(J_op: int, j: int) -> np.ndarray:
    half = 2 * J_op + 1
    P = np.zeros((2 * half, 2 * half), dtype=complex)
    P[j + J_op, j + J_op] = 1.0
    P[half + j + J_op, half + j + J_op] = 1.0
    return P


def projector(m: ZSMatrix, j: int, Q: int = DEFAULT_Q, method: str = "contour") -> np.ndarray:
    """Riesz projector ``P_j = -(1/2 pi i) oint (L - lambda)^{-1} dlambda``.

    ``method="contour"`` uses the ``Q``-node trapezoid rule; ``method="eig"``
    evaluates the same integral by residues from an eigen-decomposition.
    """
    n = m.size
    if method == "eig":
        vals, R = np.linalg.eig(m.L)
        inside = np.abs(vals - np.pi * j) < np.pi / 2
        if inside.sum() != 2:
            raise ValueError(f"disk around pi*{j} holds {inside.sum()} eigenvalues")
        Linv = np.linalg.inv(R)
        return R[:, inside] @ Linv[inside, :]
    lam, wts = contour_nodes(j, Q)
    A = m.L[None, :, :] - lam[:, None, None] * np.eye(n)[None]
    try:
        inv = np.linalg.inv(A)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"resolvent singular on the contour around pi*{j}") from exc
    return np.tensordot(wts, inv, axes=1)


def _phi_series(X: np.ndarray, f0: np.ndarray, even_only: bool = False) -> np.ndarray:
    """``sum_m c_m X^m f0`` with ``c_{2k} = c_{2k+1} = C(2k, k)/4^k``.

    For ``P f0 = f0 + X f0`` this equals ``(1 - X^2)^{-1/2} P f0``.
    """
    out = np.array(f0, dtype=complex)
    term = np.array(f0, dtype=complex)
    c = 1.0
    m = 0
    while True:
        m += 1
        term = X @ term
        if m % 2 == 0:
            k = m // 2
            c *= (2 * k - 1) / (2 * k)
        if not (even_only and m % 2):
            out = out + c * term
        if np.max(np.abs(term), initial=0.0) * c < SERIES_TOL or m > 400:
            break
    return out


def transform_u(m: ZSMatrix, j: int, Q: int = DEFAULT_Q, method: str = "contour",
                P: np.ndarray | None = None) -> np.ndarray:
    """``U_j = (1 - (P_j - P_j0)^2)^{-1/2} P_j`` by its binomial series."""
    P = projector(m, j, Q, method) if P is None else P
    X = P - projector0(m.J_op, j)
    if np.linalg.norm(X, 2) >= 1:
        raise ValueError("||P_j - P_j0|| >= 1: state too large for the transformation operator")
    return _phi_series(X, P, even_only=True)


def eigvecs_fj(m: ZSMatrix, j: int, Q: int = DEFAULT_Q, method: str = "contour",
               P: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """``f_j^{-/+} = U_j f_{j0}^{-/+}``."""
    P = projector(m, j, Q, method) if P is None else P
    X = P - projector0(m.J_op, j)
    if np.linalg.norm(X, 2) >= 1:
        raise ValueError("||P_j - P_j0|| >= 1: state too large for the transformation operator")
    F0 = np.stack([m.basis_vector(j, "-"), m.basis_vector(j, "+")], axis=1)
    F = _phi_series(X, F0)
    return F[:, 0], F[:, 1]


def _z_from_f(m: ZSMatrix, j: int, f: np.ndarray) -> complex:
    # splitting off L0 keeps the pairing free of large cancellations
    d = (m.diag0 - np.pi * j) * f
    return pairing(d, f) + pairing(m.V @ f, f)


def zw_coords(m: ZSMatrix, j: int, Q: int = DEFAULT_Q, method: str = "contour") -> tuple[complex, complex]:
    """``z_j = ((L - pi j) f_j^-, iota f_j^-)`` and ``w_j`` likewise with ``f_j^+``."""
    fm, fp = eigvecs_fj(m, j, Q, method)
    return _z_from_f(m, j, fm), _z_from_f(m, j, fp)


def spectral_data(state: TruncState, J_op: int | None = None, J_report: int | None = None,
                  Q: int = DEFAULT_Q) -> SpectralData:
    """Eigenvalue pairs plus the coordinates ``z_j, w_j`` for ``|j| <= J_report``."""
    m = build_zs_matrix(state, J_op)
    sd = spectrum(m, J_report)
    for j in sd.js:
        sd.z[int(j)], sd.w[int(j)] = zw_coords(m, int(j), Q)
    return sd


def resolvent_bound(m: ZSMatrix, j: int, Q: int = DEFAULT_Q) -> float:
    """``sup`` over contour nodes of ``||V (L0 - lambda)^{-1}||``."""
    lam, _ = contour_nodes(j, Q)
    return max(float(np.linalg.norm(m.V / (m.diag0 - l)[None, :], 2)) for l in lam)


def projector_checks(m: ZSMatrix, j: int, Q: int = DEFAULT_Q) -> dict:
    """Idempotency, trace, and ``||P_j - P_j0|| <= 8 ||zeta||_2``."""
    P = projector(m, j, Q)
    dist = float(np.linalg.norm(P - projector0(m.J_op, j), 2))
    rho = _l2(m.state)
    return {
        "idempotency": float(np.max(np.abs(P @ P - P))),
        "trace": complex(np.trace(P)),
        "distance": dist,
        "distance_bound": 8 * rho,
        "distance_ok": dist <= 8 * rho + 1e-14,
    }


def gap_coordinate_ratio(state: TruncState, J_op: int | None = None, J_report: int | None = None,
                         Q: int = DEFAULT_Q) -> np.ndarray:
    """Per-mode ``gamma_j^2 / |z_j|^2`` (NaN where ``z_j`` vanishes)."""
    sd = spectral_data(state, J_op, J_report, Q)
    z = np.array([sd.z[int(j)] for j in sd.js])
    g2 = np.abs(sd.gaps) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(np.abs(z) > 0, g2 / np.abs(z) ** 2, math.nan)
