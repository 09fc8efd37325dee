"""Symplectic normalization of a near-identity map at finite degree.

Starting from ``Psi`` whose actions ``|Psi_j|^2`` commute, two Darboux steps
produce a symplectic ``Psi~ = psi^{-1} o psi_hat^{-1} o Psi`` with the same
foliation.  Two-forms are stored through their operators:
``omega(a, b) = g(E a, b)`` with ``E_0 = diag(i, -i)`` and ``g`` the
bilinear pairing of :mod:`polymap`.

Degree bookkeeping, for ``Psi`` exact through degree ``N``: operators are
exact through ``N - 1``, vector fields and maps through ``N``, scalar
functions (``h_j``, ``f``, actions) through ``N + 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .polymap import (
    OperatorPoly,
    PolyMap,
    Ring,
    ScalarPoly,
    average_M,
    average_Ml,
    compose,
    flow,
    gradient,
    invert_near_identity,
    op_Lj,
    phase_derivative,
    poisson_bracket,
    tame_norm_sample,
    tame_norm_upper,
)
from .seqspace import Weight

# ---------------------------------------------------------------------------
# constants


def basel_sum(terms: int | None = None) -> float:
    """``S = sum_{n >= 1} n^{-2}``; closed form unless ``terms`` is given."""
    if terms is None:
        return math.pi ** 2 / 6
    n = np.arange(1, terms + 1, dtype=float)
    # tail beyond `terms` by the Euler-Maclaurin leading terms
    return float(np.sum(1.0 / n[::-1] ** 2) + 1.0 / terms - 0.5 / terms ** 2)


@dataclass(frozen=True)
class KPConstants:
    """Constants of the normalization estimates.

    ``mu`` is computed from its definition ``1 / (e^2 32 S)``; the thresholds
    are reported diagnostics, not gates.
    """

    S: float = field(default_factory=basel_sum)
    theta_a: float = 2.0 ** -120
    theta_a_tilde: float = 2.0 ** -130
    smallness: float = 2.0 ** -60
    contraction: float = 2.0 ** 17
    contraction_inverse: float = 2.0 ** 18
    eps1: float | None = None

    @property
    def mu(self) -> float:
        return 1.0 / (math.e ** 2 * 32 * self.S)

    def to_json(self) -> dict:
        return {"mu": self.mu, "S": self.S, "theta_a": self.theta_a,
                "theta_a_tilde": self.theta_a_tilde, "smallness": self.smallness,
                "contraction": self.contraction,
                "contraction_inverse": self.contraction_inverse, "eps1": self.eps1}


# ---------------------------------------------------------------------------
# forms


def e0_diag(ring: Ring) -> np.ndarray:
    nm = ring.nmodes
    return np.concatenate([np.full(nm, 1j), np.full(nm, -1j)])


def e0_operator(ring: Ring) -> OperatorPoly:
    return OperatorPoly.constant(ring, np.diag(e0_diag(ring)))


def pullback_operator(E: OperatorPoly, phi: PolyMap, maxdeg: int) -> OperatorPoly:
    """Operator of ``phi^* omega``: ``dphi^* E(phi) dphi`` through ``maxdeg``."""
    dphi = phi.differential().truncate(maxdeg)
    inner = E.compose_inner(phi, maxdeg).matmul(dphi, maxdeg)
    return dphi.adjoint().matmul(inner, maxdeg)


def pullback_e0(phi: PolyMap, maxdeg: int) -> OperatorPoly:
    """``dphi^* E_0 dphi``; ``E_0`` is constant so no composition is needed."""
    dphi = phi.differential().truncate(maxdeg)
    return dphi.adjoint().matmul(dphi.left_diag(e0_diag(phi.ring)), maxdeg)


def pullback_form(Psi: PolyMap, N: int) -> OperatorPoly:
    """``E_{omega_1}`` for ``omega_1 = (Psi^{-1})^* omega_0``, exact through ``N - 1``."""
    Phi = invert_near_identity(Psi, N)
    return pullback_e0(Phi, N - 1)


def upsilon(E: OperatorPoly) -> OperatorPoly:
    """``Upsilon = E - E_0``."""
    return E - e0_operator(E.ring)


def antisymmetry_defect(U: OperatorPoly) -> float:
    return (U + U.adjoint()).max_abs()


def potential_W(U: OperatorPoly, maxdeg: int | None = None) -> PolyMap:
    """``W(xi) = int_0^1 Upsilon(t xi) t xi dt``.

    The degree-``m`` part of ``Upsilon`` contributes ``Upsilon^(m)(xi) xi / (m + 2)``.
    """
    ring = U.ring
    maxdeg = ring.cap if maxdeg is None else maxdeg
    ident = PolyMap.identity(ring)
    W = PolyMap.zero(ring)
    for m in range(0, maxdeg):
        Um = U.homogeneous(m)
        if Um.is_zero():
            continue
        W = W + Um.apply(ident, maxdeg).scale(1.0 / (m + 2))
    return W


def form_value(E: OperatorPoly, z, a, b) -> complex:
    """``omega(z)(a, b) = g(E(z) a, b)`` at a point."""
    ring = E.ring
    Ez = E.eval(np.asarray(z, dtype=complex))
    Ea = Ez @ np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    nm = ring.nmodes
    return complex(np.dot(Ea[:nm], b[nm:]) + np.dot(Ea[nm:], b[:nm]))


# ---------------------------------------------------------------------------
# Darboux step 1: averaging


def _inverse_apply(U: OperatorPoly, X: PolyMap, maxdeg: int, with_t: bool) -> PolyMap:
    """``(E_0 + t U)^{-1} X`` by the Neumann series in degree.

    ``U`` vanishes at the origin so each term raises the degree; the series
    therefore stops after at most ``maxdeg`` terms.
    """
    ring = U.ring
    inv0 = 1.0 / e0_diag(ring)
    Ut = U.times_t() if with_t else U
    term = PolyMap(ring, [s.scale(c) for s, c in zip(X.slots, inv0)])
    out = term
    for _ in range(maxdeg + 1):
        nxt = Ut.apply(term, maxdeg)
        term = PolyMap(ring, [s.scale(-c) for s, c in zip(nxt.slots, inv0)])
        if term.max_abs() == 0.0:
            return out
        out = out + term
    if U.homogeneous(0).max_abs() > 0:
        raise ArithmeticError("Neumann series does not terminate: perturbation has a constant part")
    return out


def darboux_field1(E1: OperatorPoly, N: int, sign: int = -1) -> PolyMap:
    """``Y_hat^t = sign (i + t M Upsilon)^{-1} M W`` (time kept as a ring variable)."""
    U = average_M(upsilon(E1))
    MW = potential_W(U, N)
    Y = _inverse_apply(U, MW, N, with_t=True)
    return Y.scale(sign)


def darboux_step1(E1: OperatorPoly, N: int, sign: int = -1) -> PolyMap:
    """Averaging map ``psi_hat`` with ``M(psi_hat^* omega_1) = omega_0``."""
    Y = darboux_field1(E1, N, sign)
    if Y.max_abs() == 0.0:
        return PolyMap.identity(E1.ring)
    return flow(Y, N)


def resonance_defect(phi: PolyMap) -> float:
    """Largest coefficient of ``phi`` that is non-resonant for its output slot."""
    return (phi - average_M(phi)).max_abs()


def averaged_form_defect(E1: OperatorPoly, psi_hat: PolyMap, N: int) -> float:
    """``M(psi_hat^* omega_1) - omega_0`` through degree ``N - 1``."""
    Eh = pullback_operator(E1, psi_hat, N - 1)
    return upsilon(average_M(Eh)).max_abs(0, N - 1)


# ---------------------------------------------------------------------------
# homological equation


def rotation_field(ring: Ring, j: int) -> PolyMap:
    """``X^0_{-I_j}``: ``i xi_j`` in the xi slot, ``-i eta_j`` in the eta slot."""
    slots = [ScalarPoly.zero(ring) for _ in range(ring.nvar)]
    slots[ring.index(j, "xi")] = ScalarPoly.var(ring, j, "xi", 1j)
    slots[ring.index(j, "eta")] = ScalarPoly.var(ring, j, "eta", -1j)
    return PolyMap(ring, slots)


def h_functions(W: PolyMap, maxdeg: int) -> dict[int, ScalarPoly]:
    """``h_j = g(W, X^0_{-I_j}) = i (xi_j W_eta_j - eta_j W_xi_j)``.

    On real states this is ``2 Re(-i W_j conj(xi_j))``, the real pairing of
    ``W`` with the rotation field.
    """
    ring = W.ring
    out = {}
    for j in range(-ring.J, ring.J + 1):
        x = ring.index(j, "xi")
        e = ring.index(j, "eta")
        out[j] = (W[e].times_var(x, maxdeg) - W[x].times_var(e, maxdeg)).scale(1j)
    return out


def solvability_defect(h: dict[int, ScalarPoly]) -> float:
    """``max_j |M h_j|`` over coefficients."""
    return max((average_M(hj).max_abs() for hj in h.values()), default=0.0)


def closedness_defect(h: dict[int, ScalarPoly]) -> float:
    """``max |d_k h_j - d_j h_k|``: the one-form restricted to tori is closed."""
    best = 0.0
    keys = sorted(h)
    for a, j in enumerate(keys):
        for k in keys[a + 1:]:
            best = max(best, (phase_derivative(h[j], k) - phase_derivative(h[k], j)).max_abs())
    return best


def _M_chain(g: ScalarPoly, i: int) -> ScalarPoly:
    """``M_0 prod_{l=1}^{i-1} (M_l M_{-l}) g``."""
    g = average_Ml(g, 0)
    for l in range(1, i):
        g = average_Ml(average_Ml(g, -l), l)
    return g


def assemble_f(h: dict[int, ScalarPoly], J: int) -> ScalarPoly:
    """``f`` from the ordered chain of averages and ``L`` operators over ``|l| <= J``."""
    f = op_Lj(h[0], 0)
    for i in range(1, J + 1):
        f = f + _M_chain(op_Lj(h[i], i), i)
        f = f + _M_chain(average_Ml(op_Lj(h[-i], -i), i), i)
    return f


def homological_residual(f: ScalarPoly, h: dict[int, ScalarPoly],
                         per_degree: bool = False):
    """``max_j |d f / d theta_j - h_j|`` (optionally split by degree)."""
    res = {j: phase_derivative(f, j) - hj for j, hj in h.items()}
    if not per_degree:
        return max((r.max_abs() for r in res.values()), default=0.0)
    out: dict[int, float] = {}
    for r in res.values():
        for d in range(r.maxdeg + 1 if r.nterms else 0):
            v = r.homogeneous(d).max_abs()
            if v > 0:
                out[d] = max(out.get(d, 0.0), v)
    return out


class SolvabilityError(ArithmeticError):
    pass


def solve_homological_f(W: PolyMap, maxdeg: int, tol: float | None = 1e-9):
    """Solve ``d f / d theta_j = h_j`` for all ``|j| <= J``.

    Parameters
    ----------
    W : PolyMap
        Potential of the averaged form.
    maxdeg : int
        Degree through which ``h_j`` and ``f`` are kept.
    tol : float or None
        Abort when ``M h_j`` exceeds this; ``None`` skips the guard.

    Returns
    -------
    f, h : ScalarPoly, dict
    """
    h = h_functions(W, maxdeg)
    if tol is not None:
        d = solvability_defect(h)
        if d > tol:
            raise SolvabilityError(f"M h_j = {d:.3e} exceeds {tol:.1e}; "
                                   "the actions of the input map do not commute")
    return assemble_f(h, W.ring.J), h


# ---------------------------------------------------------------------------
# Darboux step 2: action-preserving correction


def darboux_field2(Eh: OperatorPoly, f: ScalarPoly, W: PolyMap, N: int) -> PolyMap:
    """``Y^t = (i + t Upsilon_hat)^{-1} (grad f - W)``."""
    rhs = gradient(f).truncate(N) - W.truncate(N)
    return _inverse_apply(upsilon(Eh), rhs, N, with_t=True)


def darboux_step2(Eh: OperatorPoly, f: ScalarPoly, W: PolyMap, N: int) -> PolyMap:
    Y = darboux_field2(Eh, f, W, N)
    if Y.max_abs() == 0.0:
        return PolyMap.identity(Eh.ring)
    return flow(Y, N)


def action_defect(psi: PolyMap, maxdeg: int, per_degree: bool = False):
    """``|psi_l|^2 - |xi_l|^2`` through ``maxdeg`` for every mode."""
    ring = psi.ring
    out: dict[int, float] = {}
    for l in range(-ring.J, ring.J + 1):
        a = psi.slot(l, "xi").mul(psi.slot(l, "eta"), maxdeg)
        r = a - ScalarPoly.var(ring, l, "xi").mul(ScalarPoly.var(ring, l, "eta"))
        for d in range(maxdeg + 1):
            v = r.homogeneous(d).max_abs()
            if v > 0:
                out[d] = max(out.get(d, 0.0), v)
    if per_degree:
        return out
    return max(out.values(), default=0.0)


def symplectic_defect(phi: PolyMap, maxdeg: int, E: OperatorPoly | None = None) -> float:
    """``phi^* omega - omega_0`` through ``maxdeg`` (``omega = omega_0`` by default)."""
    P = pullback_e0(phi, maxdeg) if E is None else pullback_operator(E, phi, maxdeg)
    return upsilon(P).max_abs(0, maxdeg)


# ---------------------------------------------------------------------------
# full pipeline


@dataclass
class NormalFormResult:
    """Output of :func:`birkhoff_map`; ``defects`` maps names to measured values."""

    Psi_tilde: PolyMap
    psi_hat: PolyMap
    psi: PolyMap
    Psi_check: PolyMap
    f: ScalarPoly
    defects: dict
    degree_profile: dict
    tame_norm_report: dict
    constants: KPConstants
    timings: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"defects": self.defects, "degree_profile": self.degree_profile,
                "tame_norm_report": self.tame_norm_report,
                "constants": self.constants.to_json(), "timings": self.timings}


def involution_defect(phi: PolyMap, maxdeg: int) -> float:
    """Largest coefficient of ``{|phi_j|^2, |phi_k|^2}`` through ``maxdeg``."""
    ring = phi.ring
    J = ring.J
    acts = {j: phi.slot(j, "xi").mul(phi.slot(j, "eta"), maxdeg) for j in range(-J, J + 1)}
    best = 0.0
    for j in range(-J, J + 1):
        for k in range(j + 1, J + 1):
            best = max(best, poisson_bracket(acts[j], acts[k], maxdeg).max_abs(0, maxdeg))
    return best


def foliation_defect(Psi_tilde: PolyMap, Psi_check: PolyMap, maxdeg: int) -> float:
    """``|Psi~_j|^2 - |Psi_check_j|^2`` through ``maxdeg``."""
    ring = Psi_tilde.ring
    best = 0.0
    for j in range(-ring.J, ring.J + 1):
        a = Psi_tilde.slot(j, "xi").mul(Psi_tilde.slot(j, "eta"), maxdeg)
        b = Psi_check.slot(j, "xi").mul(Psi_check.slot(j, "eta"), maxdeg)
        best = max(best, (a - b).max_abs())
    return best


def tame_report(Psi: PolyMap, Psi_tilde: PolyMap, Psi_tilde_inv: PolyMap, rho: float,
                consts: KPConstants, u: Weight | None = None, v: Weight | None = None,
                w: Weight | None = None, p: float = 2.0) -> dict:
    """Tame-norm estimates of ``Psi - 1``, ``Psi~ - 1`` and ``Psi~^{-1} - 1``.

    Upper values bound the majorant norm from coefficients, sampled values
    bound it from below.  The comparison with ``2^17 eps_1`` and
    ``2^18 eps_1`` is informative only.
    """
    u = u or Weight.unit()
    v = v or Weight.polynomial(1.0)
    w = w or Weight("shifted", s=1.0, offset=1.0)
    ident = PolyMap.identity(Psi.ring)
    rep = {"rho": rho, "p": p}
    for name, F in (("Psi", Psi), ("Psi_tilde", Psi_tilde), ("Psi_tilde_inv", Psi_tilde_inv)):
        G = F - ident
        rep[name] = {"upper": tame_norm_upper(G, rho, u, v, w, p),
                     "sampled": tame_norm_sample(G, rho, u, v, w, p, samples=100)}
    eps1 = rep["Psi"]["upper"]
    rep["eps1"] = eps1
    rep["eps1_over_rho"] = eps1 / rho
    rep["smallness_met"] = bool(eps1 < consts.smallness * rho)
    rep["bound_Psi_tilde"] = consts.contraction * eps1
    rep["bound_Psi_tilde_inv"] = consts.contraction_inverse * eps1
    rep["within_bound_Psi_tilde"] = bool(rep["Psi_tilde"]["upper"] <= rep["bound_Psi_tilde"])
    rep["within_bound_Psi_tilde_inv"] = bool(rep["Psi_tilde_inv"]["upper"] <= rep["bound_Psi_tilde_inv"])
    return rep


def birkhoff_map(Psi: PolyMap, N: int, sign: int = -1, rho: float = 1e-2,
                 solvability_tol: float | None = 1e-9, tame: bool = True) -> NormalFormResult:
    """Run both Darboux steps and collect every defect.

    Parameters
    ----------
    Psi : PolyMap
        Near-identity map exact through degree ``N``, ring cap at least ``N + 1``.
    N : int
        Degree through which ``Psi`` is trusted.
    sign : int
        Sign of the averaging field; ``-1`` follows the Darboux equation
        ``Y_t -| Omega_t + alpha_1 - alpha_0 = df``.
    """
    import time

    ring = Psi.ring
    if ring.cap < N + 1:
        raise ValueError("ring cap must be at least N + 1 for the scalar checks")
    t0 = time.perf_counter()
    timings = {}

    def lap(name):
        nonlocal t0
        t1 = time.perf_counter()
        timings[name] = t1 - t0
        t0 = t1

    Psi = Psi.truncate(N)
    E1 = pullback_form(Psi, N)
    lap("pullback_form")
    psi_hat = darboux_step1(E1, N, sign)
    lap("darboux_step1")
    Eh = pullback_operator(E1, psi_hat, N - 1)
    Uh = upsilon(Eh)
    Wh = potential_W(Uh, N)
    lap("averaged_form")
    f, h = solve_homological_f(Wh, N + 1, solvability_tol)
    lap("homological")
    psi = darboux_step2(Eh, f, Wh, N)
    lap("darboux_step2")
    psi_hat_inv = invert_near_identity(psi_hat, N)
    psi_inv = invert_near_identity(psi, N)
    Psi_check = compose(psi_hat_inv, Psi, N)
    Psi_tilde = compose(psi_inv, Psi_check, N)
    Psi_tilde_inv = invert_near_identity(Psi_tilde, N)
    lap("compose")

    res_deg = homological_residual(f, h, per_degree=True)
    act_deg = action_defect(psi, N + 1, per_degree=True)
    defects = {
        "upsilon_antisymmetry": antisymmetry_defect(upsilon(E1)),
        "psi_hat_resonance": resonance_defect(psi_hat),
        "averaged_form": upsilon(average_M(Eh)).max_abs(0, N - 1),
        "solvability": solvability_defect(h),
        "closedness": closedness_defect(h),
        "homological_residual": max(res_deg.values(), default=0.0),
        "homological_residual_below_top": max((v for d, v in res_deg.items() if d <= N), default=0.0),
        "psi_symplectic": symplectic_defect(psi, N - 1, Eh),
        "psi_action": max(act_deg.values(), default=0.0),
        "Psi_tilde_symplectic": symplectic_defect(Psi_tilde, N - 1),
        "Psi_involution": involution_defect(Psi, N + 1),
        "Psi_tilde_involution": involution_defect(Psi_tilde, N + 1),
        "foliation": foliation_defect(Psi_tilde, Psi_check, N + 1),
    }
    lap("defects")
    profile = {"homological_residual": {str(d): v for d, v in sorted(res_deg.items())},
               "psi_action": {str(d): v for d, v in sorted(act_deg.items())}}
    consts = KPConstants()
    report = {}
    if tame:
        report = tame_report(Psi, Psi_tilde, Psi_tilde_inv, rho, consts)
        consts = KPConstants(eps1=report["eps1"])
        lap("tame")
    return NormalFormResult(Psi_tilde, psi_hat, psi, Psi_check, f, defects, profile,
                            report, consts, timings)


# ---------------------------------------------------------------------------
# normal form of a Hamiltonian


def nonresonant_mass(F: ScalarPoly, lo: int, hi: int) -> float:
    """Sum of ``|c|`` over monomials ``xi^K eta^L`` with ``K != L`` and degree in ``[lo, hi]``."""
    G = F.degree_range(lo, hi)
    if G.is_zero():
        return 0.0
    return float(np.sum(np.abs(G.coefs[np.any(G.phase_counts() != 0, axis=1)])))


def action_form_defect(F: ScalarPoly, weights, maxdeg: int) -> float:
    """``F - sum_j c_j xi_j eta_j`` through ``maxdeg``."""
    ring = F.ring
    target = ScalarPoly.zero(ring)
    for j, c in zip(range(-ring.J, ring.J + 1), weights):
        if c != 0:
            target = target + ScalarPoly.var(ring, j, "xi", c).mul(ScalarPoly.var(ring, j, "eta"))
    return (F.truncate(maxdeg) - target).max_abs(0, maxdeg)


def normal_form_hamiltonian(H: ScalarPoly, Psi_tilde: PolyMap, N: int | None = None) -> dict:
    """Compose ``H`` with ``Psi~^{-1}`` and measure its non-resonant part.

    Returns
    -------
    dict
        ``H_normal`` (ScalarPoly), non-resonant mass through degree 4 and at
        degree 6.
    """
    ring = Psi_tilde.ring
    N = ring.cap if N is None else N
    inv = invert_near_identity(Psi_tilde.truncate(N), N)
    top = min(ring.cap, N + 1)
    Hn = compose(H, inv, top)
    return {"H_normal": Hn, "nonresonant_through_4": nonresonant_mass(Hn, 0, 4),
            "nonresonant_degree_6": nonresonant_mass(Hn, 6, 6) if top >= 6 else None,
            "inverse": inv}


__all__ = [
    "KPConstants", "basel_sum", "pullback_form", "pullback_operator", "pullback_e0", "upsilon",
    "antisymmetry_defect", "potential_W", "form_value", "darboux_field1", "darboux_step1",
    "resonance_defect", "averaged_form_defect", "rotation_field", "h_functions",
    "solvability_defect", "closedness_defect", "assemble_f", "homological_residual",
    "solve_homological_f", "SolvabilityError", "darboux_field2", "darboux_step2",
    "action_defect", "symplectic_defect", "NormalFormResult", "involution_defect",
    "foliation_defect", "tame_report", "birkhoff_map", "nonresonant_mass",
    "action_form_defect", "normal_form_hamiltonian", "e0_operator",
]
