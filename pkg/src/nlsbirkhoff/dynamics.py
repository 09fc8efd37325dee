"""Galerkin-truncated cubic NLS in Fourier modes and its conservation diagnostics.

Modes ``|j| <= J`` evolve by

    i d xi_j/dt = (2 pi j)^2 xi_j + 2 sum_{a - b + c = j} xi_a conj(xi_b) xi_c

with every index restricted to ``|.| <= J``.  The truncated system is
Hamiltonian, so mass, momentum and energy are exact invariants and any drift
is integrator error.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .polymap import PolyMap, Ring, ScalarPoly
from .seqspace import NormSpec, TruncState, Weight, modes, norm

ENERGY_DRIFT_LIMIT = 1e-6
SCHEMES = ("lawson", "rk4", "strang")


class IntegrationError(RuntimeError):
    pass


def _fft_size(J: int) -> int:
    # cubic products reach |j| <= 3J; a grid of 4J + 2 points avoids aliasing into |j| <= J
    n = 8
    while n < 4 * J + 2:
        n *= 2
    return n


def dispersion(J: int) -> np.ndarray:
    return (2 * np.pi * modes(J)) ** 2


def cubic_term(xi: np.ndarray, J: int) -> np.ndarray:
    """``sum_{a - b + c = j} xi_a conj(xi_b) xi_c`` for ``|j| <= J`` (batched over leading axes)."""
    n = _fft_size(J)
    idx = modes(J) % n
    u_hat = np.zeros(xi.shape[:-1] + (n,), dtype=complex)
    u_hat[..., idx] = xi
    u = np.fft.ifft(u_hat, axis=-1) * n
    w = np.fft.fft(np.abs(u) ** 2 * u, axis=-1) / n
    return w[..., idx]


def cubic_term_direct(xi: np.ndarray, J: int) -> np.ndarray:
    """Same sum by explicit enumeration of index triples."""
    m = modes(J)
    out = np.zeros(len(m), dtype=complex)
    for a in m:
        for b in m:
            for c in m:
                j = a - b + c
                if abs(j) <= J:
                    out[j + J] += xi[a + J] * np.conj(xi[b + J]) * xi[c + J]
    return out


def _rhs(xi: np.ndarray, J: int) -> np.ndarray:
    return -1j * (dispersion(J) * xi + 2.0 * cubic_term(xi, J))


def _rhs_nonlinear(xi: np.ndarray, J: int) -> np.ndarray:
    return -2j * cubic_term(xi, J)


def nls_vector_field(state: TruncState) -> TruncState:
    """Time derivative of a real state; the eta channel is the conjugate equation."""
    if not state.is_real():
        raise ValueError("the NLS vector field is defined on real states")
    d = _rhs(np.asarray(state.xi), state.J)
    return TruncState(state.J, d, np.conj(d))


# ---------------------------------------------------------------------------
# conserved quantities


def mass(xi: np.ndarray) -> np.ndarray:
    return np.sum(np.abs(xi) ** 2, axis=-1)


def momentum(xi: np.ndarray, J: int) -> np.ndarray:
    return 2 * np.pi * np.sum(modes(J) * np.abs(xi) ** 2, axis=-1)


def energy(xi: np.ndarray, J: int) -> np.ndarray:
    """``sum (2 pi j)^2 |xi_j|^2 + sum_{a-b+c-d=0} xi_a eta_b xi_c eta_d``."""
    quad = np.sum(dispersion(J) * np.abs(xi) ** 2, axis=-1)
    quart = np.sum(np.conj(xi) * cubic_term(xi, J), axis=-1)
    return quad + np.real(quart)


def conserved_quantities(state: TruncState) -> tuple[float, float, float]:
    """``(H, mass, momentum)`` of a real state."""
    if not state.is_real():
        raise ValueError("conserved quantities are defined on real states")
    xi = np.asarray(state.xi)
    return float(energy(xi, state.J)), float(mass(xi)), float(momentum(xi, state.J))


def _pairs_poly(ring: Ring, weights) -> ScalarPoly:
    out = ScalarPoly.zero(ring)
    for j, c in zip(range(-ring.J, ring.J + 1), weights):
        if c != 0:
            out = out + ScalarPoly.var(ring, j, "xi", c).mul(ScalarPoly.var(ring, j, "eta"))
    return out


def mass_poly(ring: Ring) -> ScalarPoly:
    return _pairs_poly(ring, np.ones(ring.nmodes))


def momentum_poly(ring: Ring) -> ScalarPoly:
    return _pairs_poly(ring, 2 * np.pi * modes(ring.J))


def nls_hamiltonian_poly(ring: Ring) -> ScalarPoly:
    """Truncated NLS energy as a polynomial in ``(xi, eta)``.

    Its calibrated Hamiltonian field is twice the NLS field above, since the
    calibrated bracket carries the factor 2; the flows agree after rescaling
    time by 2.
    """
    J = ring.J
    quad = _pairs_poly(ring, dispersion(J))
    E = []
    for a in range(-J, J + 1):
        for b in range(-J, J + 1):
            for c in range(-J, J + 1):
                d = a - b + c
                if abs(d) > J:
                    continue
                e = np.zeros(ring.nvar, dtype=np.int64)
                e[ring.index(a, "xi")] += 1
                e[ring.index(c, "xi")] += 1
                e[ring.index(b, "eta")] += 1
                e[ring.index(d, "eta")] += 1
                E.append(e)
    quart = ScalarPoly.from_exponents(ring, np.array(E), np.ones(len(E)))
    return quad + quart


# ---------------------------------------------------------------------------
# integrators


def _rk4(f, y, h):
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _step_lawson(v, t, h, J, lam):
    """RK4 on the interaction-picture variable ``v = e^{i lam t} xi``.

    Phases are evaluated from the absolute time, never accumulated, so the
    modulus error of the computed exponentials does not build up in ``|xi|``.
    """
    def F(tt, y):
        return np.exp(1j * lam * tt) * _rhs_nonlinear(np.exp(-1j * lam * tt) * y, J)
    k1 = F(t, v)
    k2 = F(t + 0.5 * h, v + 0.5 * h * k1)
    k3 = F(t + 0.5 * h, v + 0.5 * h * k2)
    k4 = F(t + h, v + h * k3)
    return v + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _step_rk4(xi, t, h, J, lam):
    return _rk4(lambda y: _rhs(y, J), xi, h)


def _step_strang(xi, t, h, J, lam):
    half = np.exp(-1j * lam * h / 2)
    y = half * xi
    y = _rk4(lambda v: _rhs_nonlinear(v, J), y, h)
    return half * y


_STEPPERS = {"lawson": _step_lawson, "rk4": _step_rk4, "strang": _step_strang}


def propagate(xi0, J: int, T: float, dt: float, scheme: str = "lawson") -> np.ndarray:
    """Final xi after ``round(|T| / dt)`` fixed steps; negative ``T`` runs backward."""
    if scheme not in _STEPPERS:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    steps = int(round(abs(T) / dt))
    h = math.copysign(dt, T) if T != 0 else dt
    lam = dispersion(J)
    step = _STEPPERS[scheme]
    y = np.array(xi0, dtype=complex)
    for k in range(steps):
        y = step(y, k * h, h, J, lam)
    return _to_xi(y, steps * h, lam, scheme)


def _to_xi(y, t, lam, scheme):
    return np.exp(-1j * lam * t) * y if scheme == "lawson" else y


@dataclass
class Trajectory:
    """Sampled solution with its diagnostics.

    ``states`` holds the xi channel (``eta = conj(xi)``); ``gaps`` and
    ``actions`` are empty arrays when not requested.
    """

    J: int
    t: np.ndarray
    states: np.ndarray
    H: np.ndarray
    mass: np.ndarray
    momentum: np.ndarray
    gaps: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    actions: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    norms: np.ndarray = field(default_factory=lambda: np.zeros(0))
    norm_spec: NormSpec = field(default_factory=NormSpec)
    scheme: str = "lawson"
    dt: float = 1e-3

    def __post_init__(self):
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("time grid must be strictly increasing")

    def energy_drift(self) -> float:
        return float(np.max(np.abs(self.H - self.H[0])) / max(abs(self.H[0]), 1e-300))

    def mass_drift(self) -> float:
        return float(np.max(np.abs(self.mass - self.mass[0])))

    def momentum_drift(self) -> float:
        return float(np.max(np.abs(self.momentum - self.momentum[0])))

    def columns(self) -> tuple[list[str], np.ndarray]:
        names = ["t", "H", "mass", "momentum"]
        cols = [self.t, self.H, self.mass, self.momentum]
        js = list(modes(self.J))
        if self.gaps.size:
            names += [f"gamma_{j}" for j in js[: self.gaps.shape[1]]]
            cols += list(self.gaps.T)
        if self.actions.size:
            names += [f"I_{j}" for j in js]
            cols += list(self.actions.T)
        if self.norms.size:
            names.append("norm")
            cols.append(self.norms)
        return names, np.column_stack(cols)

    def to_csv(self, path) -> None:
        names, data = self.columns()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names)
            for row in data:
                w.writerow([repr(float(x)) for x in row])

    def drift_table(self) -> np.ndarray:
        """Columns ``t, |H - H0|, |mass - mass0|, |P - P0|`` for plotting."""
        return np.column_stack([self.t, np.abs(self.H - self.H[0]),
                                np.abs(self.mass - self.mass[0]),
                                np.abs(self.momentum - self.momentum[0])])


def evaluate_actions(Psi_tilde: PolyMap, xi: np.ndarray) -> np.ndarray:
    """``I_j = |Psi~_j(zeta)|^2 / 2`` for xi samples of shape ``(..., 2J + 1)``."""
    z = np.concatenate([xi, np.conj(xi)], axis=-1)
    nm = Psi_tilde.ring.nmodes
    vals = np.stack([Psi_tilde[a].eval(z) for a in range(nm)], axis=-1)
    return np.abs(vals) ** 2 / 2


def integrate(state: TruncState, T: float, dt: float = 1e-3, scheme: str = "lawson",
              stride: int = 100, Psi_tilde: PolyMap | None = None, gaps: bool = False,
              J_op: int | None = None, spec: NormSpec | None = None,
              energy_limit: float = ENERGY_DRIFT_LIMIT) -> Trajectory:
    """Fixed-step integration from a real state, sampling every ``stride`` steps.

    Parameters
    ----------
    scheme : str
        ``"lawson"`` (RK4 on the interaction-picture equation, default),
        ``"rk4"`` (classical RK4) or ``"strang"`` (symmetric linear/nonlinear
        splitting).
    Psi_tilde : PolyMap, optional
        Records the actions ``|Psi~_j|^2 / 2`` when given.
    gaps : bool
        Records the spectral gaps, computed with operator cutoff ``J_op``.

    Raises
    ------
    IntegrationError
        When the relative energy drift exceeds ``energy_limit``.
    """
    if not state.is_real():
        raise ValueError("integrate expects a real state")
    if T <= 0 or dt <= 0:
        raise ValueError("T and dt must be positive")
    if scheme not in _STEPPERS:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    J = state.J
    lam = dispersion(J)
    step = _STEPPERS[scheme]
    steps = int(round(T / dt))
    stride = max(1, min(stride, steps))
    y = np.array(state.xi, dtype=complex)
    H0 = float(energy(y, J))
    scale = max(abs(H0), 1e-300)
    ts, xs = [0.0], [y.copy()]
    for k in range(1, steps + 1):
        y = step(y, (k - 1) * dt, dt, J, lam)
        if k % stride == 0 or k == steps:
            xi = _to_xi(y, k * dt, lam, scheme)
            drift = abs(float(energy(xi, J)) - H0) / scale
            if drift > energy_limit and H0 != 0.0:
                raise IntegrationError(f"energy drift {drift:.2e} at t = {k * dt:.4g} "
                                       f"exceeds {energy_limit:.0e}; reduce dt")
            ts.append(k * dt)
            xs.append(xi.copy())
    X = np.array(xs)
    spec = spec or NormSpec()
    traj = Trajectory(J, np.array(ts), X, energy(X, J), mass(X), momentum(X, J),
                      norm_spec=spec, scheme=scheme, dt=dt)
    traj.norms = np.array([norm(TruncState.real(J, x), spec) for x in X])
    if Psi_tilde is not None:
        traj.actions = evaluate_actions(Psi_tilde, X)
    if gaps:
        from .zsspectral import gaps as zs_gaps
        traj.gaps = np.array([zs_gaps(TruncState.real(J, x), J_op, J) for x in X])
    return traj


# ---------------------------------------------------------------------------
# diagnostics


def action_drift(traj: Trajectory, Psi_tilde: PolyMap | None = None) -> np.ndarray:
    """``max_t |I_j(t) - I_j(0)|`` per mode."""
    I = traj.actions if Psi_tilde is None else evaluate_actions(Psi_tilde, traj.states)
    if I.size == 0:
        raise ValueError("trajectory has no actions; pass Psi_tilde")
    return np.max(np.abs(I - I[0]), axis=0)


def action_drift_scaling(direction: TruncState, Psi_tilde: PolyMap, rhos=(1e-2, 5e-3),
                         T: float = 20.0, dt: float = 1e-3, scheme: str = "lawson",
                         stride: int = 100) -> dict:
    """Action drift at two radii along one direction and the fitted exponent.

    The state at radius ``rho`` is ``direction`` rescaled to ``||.||_2 = rho``.
    """
    base = norm(direction)
    out = {"rhos": list(rhos), "drift": [], "per_mode": []}
    for rho in rhos:
        st = direction.scaled(rho / base)
        traj = integrate(st, T, dt, scheme, stride, Psi_tilde)
        d = action_drift(traj)
        out["per_mode"].append(d.tolist())
        out["drift"].append(float(np.max(d)))
    d1, d2 = out["drift"]
    out["ratio"] = d1 / d2 if d2 > 0 else math.inf
    out["exponent"] = math.log(out["ratio"]) / math.log(rhos[0] / rhos[1]) if d2 > 0 else math.inf
    return out


def norm_bound_check(traj: Trajectory, p: float = 2.0, s: float = 0.0, a: float = 0.0) -> dict:
    """``sup_t ||zeta(t)||`` against ``rho (1 + C rho^2)`` with ``C`` fitted from this run."""
    w = Weight.analytic(s, a) if a > 0 else (Weight.polynomial(s) if s > 0 else Weight.unit())
    spec = NormSpec(p, w)
    vals = np.array([norm(TruncState.real(traj.J, x), spec) for x in traj.states])
    rho = float(vals[0])
    sup = float(np.max(vals))
    C = (sup / rho - 1.0) / rho ** 2 if rho > 0 else 0.0
    return {"p": p, "s": s, "a": a, "rho": rho, "sup": sup,
            "relative_excess": sup / rho - 1.0 if rho > 0 else 0.0, "C_fit": C}


__all__ = [
    "nls_vector_field", "cubic_term", "cubic_term_direct", "energy", "mass", "momentum",
    "conserved_quantities", "mass_poly", "momentum_poly", "nls_hamiltonian_poly", "propagate",
    "integrate", "Trajectory", "IntegrationError", "evaluate_actions", "action_drift",
    "action_drift_scaling", "norm_bound_check", "SCHEMES", "ENERGY_DRIFT_LIMIT",
]
