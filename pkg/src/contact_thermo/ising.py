"""Mean-field Ising thermodynamics as contact dynamics.

Original coordinates are (p, q, z) = (magnetization, field, minus the free
energy). Two coordinate systems are used throughout:

* primary:   P = p, Q = q + b p, Z = z + b p^2 / 2
* stability: Q = q + b p, P = p - tanh(beta Q), Z = z - phi_beta(Q) + b p^2 / 2

In stability coordinates the equilibrium Legendrian of (b, beta) is the zero
section, and the relaxation Hamiltonian becomes -cZ.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import ContactHamiltonian, make_contactomorphism, phi_beta, phi_beta_prime
from .io import write_csv
from .legendrian import IsingEquilibrium, Legendrian, solve_self_consistency

__all__ = [
    "IsingParams",
    "phi",
    "phi_prime",
    "free_energy",
    "self_consistency_residual",
    "EquilibriumBranches",
    "equilibrium_branches",
    "fold_point",
    "fold_by_root_count",
    "scenario_I_limit",
    "kubo_limit",
    "scenario_II_limit",
    "compare_scenarios",
    "relaxation_hamiltonian",
    "relaxation_hamiltonian_primary",
    "explicit_solution",
    "lambda_a_alpha",
    "dPdQ_at_chord",
    "dPdQ_finite_difference",
    "PoleError",
    "AdmissibleHamiltonian",
    "NotAdmissibleError",
    "make_admissible",
    "bump",
    "blocking_hamiltonian",
]

MARGINAL_TOL = 1e-12

phi = phi_beta
phi_prime = phi_beta_prime


@dataclass(frozen=True)
class IsingParams:
    """Mean-field Ising parameters.

    Attributes
    ----------
    b : float
        Interaction strength (b >= 0).
    beta : float
        Inverse temperature (> 0).
    c : float
        Relaxation rate (> 0).
    q_window : tuple
        Bounds of the field window used for tables and plots.
    """

    b: float
    beta: float
    c: float = 1.0
    q_window: tuple[float, float] = (-5.0, 5.0)

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if self.b < 0:
            raise ValueError(f"b must be non-negative, got {self.b}")
        if not self.q_window[1] > self.q_window[0]:
            raise ValueError("q_window must be an increasing pair")

    @property
    def case(self) -> str:
        bb = self.b * self.beta
        if abs(bb - 1.0) <= MARGINAL_TOL:
            return "marginal"
        return "A" if bb < 1.0 else "B"


def free_energy(params: IsingParams, p, q):
    """F(p, q) = -phi_beta(q + b p) + b p^2 / 2 (and z = -F)."""
    p = np.asarray(p, dtype=float)
    return -phi_beta(params.beta, q + params.b * p) + 0.5 * params.b * p * p


def self_consistency_residual(params: IsingParams, p, q):
    return np.abs(np.asarray(p) - np.tanh(params.beta * (np.asarray(q) + params.b * np.asarray(p))))


def fold_point(b: float, beta: float) -> float:
    """a_{b,beta} from the tangency system; requires b*beta > 1.

    Tangency of p -> tanh(beta (q + b p)) with the diagonal gives
    p* = sqrt(1 - 1/(b beta)) and a = b p* - artanh(p*) / beta.
    """
    if not b * beta > 1.0 + MARGINAL_TOL:
        raise ValueError("the fold exists only in Case B (b*beta > 1)")
    ps = math.sqrt(1.0 - 1.0 / (b * beta))
    return b * ps - math.atanh(ps) / beta


def _count_roots(b, beta, q, pgrid):
    g = pgrid - np.tanh(beta * (q + b * pgrid))
    return int(np.count_nonzero(g[:-1] * g[1:] < 0) + np.count_nonzero(g == 0))


def fold_by_root_count(b: float, beta: float, q_hi: float | None = None, n_grid: int = 2_000_001,
                       tol: float = 1e-11) -> float:
    """Independent oracle for a_{b,beta}: the field at which the root count drops.

    Counts sign changes of p - tanh(beta (q + b p)) on a fine p-grid and
    bisects in q between a three-root and a one-root field. No tangency
    formula is used.
    """
    pgrid = np.linspace(-1.0, 1.0, n_grid)
    lo = 0.0
    hi = q_hi if q_hi is not None else b + 1.0
    if _count_roots(b, beta, lo, pgrid) < 3:
        raise ValueError("no multiple roots at q = 0; not Case B")
    if _count_roots(b, beta, hi, pgrid) != 1:
        raise ValueError("upper bracket still has several roots")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _count_roots(b, beta, mid, pgrid) >= 3:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass
class EquilibriumBranches:
    """Equilibrium magnetizations as functions of the field q.

    Case A (and the marginal case) has a single branch ``r``. Case B has
    ``r_minus`` on (-inf, fold], ``s`` on (-fold, fold) and ``r_plus`` on
    [-fold, inf). Arrays hold values on ``q`` with NaN where a branch is
    undefined; the callables evaluate anywhere, with the s = -inf / +inf
    convention outside (-fold, fold).
    """

    params: IsingParams
    case: str
    fold: float | None
    q: np.ndarray
    r: np.ndarray | None = None
    r_minus: np.ndarray | None = None
    s: np.ndarray | None = None
    r_plus: np.ndarray | None = None

    def _branch(self, k, q):
        p = self.params
        return solve_self_consistency(np.asarray(q, dtype=float), p.b, p.beta, k, 3)

    def r_of(self, q):
        if self.case == "B":
            raise ValueError("Case B has two stable branches; use r_plus_of / r_minus_of")
        p = self.params
        return solve_self_consistency(np.asarray(q, dtype=float), p.b, p.beta, 0, 1)

    def r_plus_of(self, q):
        q = np.asarray(q, dtype=float)
        if self.case != "B":
            return self.r_of(q)
        return np.where(q >= -self.fold, self._branch(2, q), np.nan)

    def r_minus_of(self, q):
        q = np.asarray(q, dtype=float)
        if self.case != "B":
            return self.r_of(q)
        return np.where(q <= self.fold, self._branch(0, q), np.nan)

    def s_of(self, q):
        q = np.asarray(q, dtype=float)
        if self.case != "B":
            return np.where(q >= 0, -np.inf, np.inf)  # no repelling root
        inside = np.abs(q) < self.fold
        return np.where(inside, self._branch(1, q), np.where(q > 0, -np.inf, np.inf))

    def all_points(self):
        """(p, q) pairs of every emitted branch value."""
        out = []
        for arr in (self.r, self.r_minus, self.s, self.r_plus):
            if arr is not None:
                ok = np.isfinite(arr)
                out.append(np.stack([arr[ok], self.q[ok]], axis=-1))
        return np.concatenate(out)

    def to_csv(self, path):
        """Branch table ``q,r_minus,s,r_plus`` with empty fields where undefined."""
        if self.case == "B":
            cols = (self.r_minus, self.s, self.r_plus)
        else:
            cols = (self.r, np.full_like(self.q, np.nan), self.r)
        rows = zip(self.q, *cols)
        return write_csv(path, ["q", "r_minus", "s", "r_plus"], rows)


def equilibrium_branches(params: IsingParams, q_window: tuple[float, float] | None = None,
                         m: int = 1024) -> EquilibriumBranches:
    """Classify the case and trace all equilibrium branches on an m-point grid."""
    lo, hi = q_window or params.q_window
    if not (np.isfinite(lo) and np.isfinite(hi) and hi > lo):
        raise ValueError("q_window must be bounded and increasing")
    q = np.linspace(lo, hi, m)
    case = params.case
    out = EquilibriumBranches(params, case, None, q)
    if case != "B":
        out.r = out.r_of(q)
        return out
    out.fold = fold_point(params.b, params.beta)
    out.r_minus = out.r_minus_of(q)
    s = out.s_of(q)
    out.s = np.where(np.isfinite(s), s, np.nan)
    out.r_plus = out.r_plus_of(q)
    return out


# ---------------------------------------------------------------------------
# scenario I: field q held fixed (mean-field Glauber)


def scenario_I_limit(params: IsingParams, p0: float, q: float) -> tuple[float, str]:
    """Limit of p' = -c p + c tanh(beta (q + b p)) with q fixed.

    Returns the limit and a tag: 'stable', or 'unstable' when p0 sits
    exactly on the repelling branch s(q).
    """
    br = EquilibriumBranches(params, params.case, None, np.array([q]))
    if params.case != "B":
        return float(br.r_of(q)), "stable"
    br.fold = fold_point(params.b, params.beta)
    s = float(br.s_of(q))
    if p0 == s:
        return s, "unstable"
    if p0 > s:
        return float(br.r_plus_of(q)), "stable"
    return float(br.r_minus_of(q)), "stable"


def kubo_limit(params: IsingParams, p0: float, q: float, t_end: float | None = None) -> float:
    """Integrate the scalar relaxation ODE to t = 200/c (cross-check of scenario I)."""
    from .flow import IntegratorConfig, solve_ode

    c, b, beta = params.c, params.b, params.beta
    t_end = t_end if t_end is not None else 200.0 / c
    res = solve_ode(lambda t, y: -c * y + c * np.tanh(beta * (q + b * y)), np.array([p0]), t_end,
                    IntegratorConfig(max_time=t_end, box=None))
    return float(res.y[-1, 0])


# ---------------------------------------------------------------------------
# scenario II: contact relaxation, effective field q + b p conserved


def relaxation_hamiltonian(params: IsingParams) -> ContactHamiltonian:
    """h_{b,beta}(p, q, z) = c (-z + phi_beta(q + b p) - b p^2 / 2)."""
    b, beta, c = params.b, params.beta, params.c

    def value(x):
        p, q, z = x[..., 0], x[..., 1], x[..., 2]
        return c * (-z + phi_beta(beta, q + b * p) - 0.5 * b * p * p)

    def grad(x):
        p, q = x[..., 0], x[..., 1]
        t = np.tanh(beta * (q + b * p))
        return np.stack(np.broadcast_arrays(c * (b * t - b * p), c * t, np.full_like(p, -c)), axis=-1)

    return ContactHamiltonian(value, grad, name="h_ising", meta={"b": b, "beta": beta, "c": c})


def relaxation_hamiltonian_primary(params: IsingParams) -> ContactHamiltonian:
    """The same Hamiltonian in primary coordinates: c (-Z + phi_beta(Q))."""
    beta, c = params.beta, params.c

    def value(X):
        return c * (-X[..., 2] + phi_beta(beta, X[..., 1]))

    def grad(X):
        Q = X[..., 1]
        return np.stack(np.broadcast_arrays(np.zeros_like(Q), c * np.tanh(beta * Q), np.full_like(Q, -c)), axis=-1)

    return ContactHamiltonian(value, grad, name="h_ising_PQZ", meta={"beta": beta, "c": c})


def explicit_solution(params: IsingParams, X0, t):
    """Closed-form flow of c(-Z + phi(Q)) in primary coordinates.

    P(t) = e^{-ct} (P0 - phi'(Q0)) + phi'(Q0), Q(t) = Q0,
    Z(t) = e^{-ct} (Z0 - phi(Q0)) + phi(Q0). Broadcasts over t and X0.
    """
    X0 = np.asarray(X0, dtype=float)
    t = np.asarray(t, dtype=float)
    P0, Q0, Z0 = X0[..., 0], X0[..., 1], X0[..., 2]
    e = np.exp(-params.c * t)
    f, df = phi_beta(params.beta, Q0), np.tanh(params.beta * Q0)
    return np.stack(np.broadcast_arrays(e * (P0 - df) + df, Q0 + 0 * e, e * (Z0 - f) + f), axis=-1)


@dataclass(frozen=True)
class ScenarioIILimit:
    p_inf: float
    q_inf: float
    z_inf: float
    evaluate: Callable = field(repr=False, compare=False)


def scenario_II_limit(params: IsingParams, p0: float, q0: float, z0: float | None = None) -> ScenarioIILimit:
    """Limit of the contact relaxation in original coordinates.

    p_inf = tanh(beta (q0 + b p0)), q_inf = q0 + b (p0 - p_inf),
    z_inf = phi_beta(q0 + b p0) - b p_inf^2 / 2. ``evaluate(t)`` returns the
    closed-form trajectory in (p, q, z) (z0 defaults to the equilibrium value).
    """
    b, beta = params.b, params.beta
    Q0 = q0 + b * p0
    p_inf = math.tanh(beta * Q0)
    q_inf = q0 + b * (p0 - p_inf)
    z_inf = phi_beta(beta, Q0) - 0.5 * b * p_inf * p_inf
    if z0 is None:
        z0 = phi_beta(beta, Q0) - 0.5 * b * p0 * p0
    prim = make_contactomorphism("ising_primary", b=b)
    X0 = prim(np.array([p0, q0, z0]))

    def evaluate(t):
        return prim.inverse(explicit_solution(params, X0, t))

    return ScenarioIILimit(p_inf, q_inf, z_inf, evaluate)


def compare_scenarios(params: IsingParams, delta: float, K: float, n_q: int = 41, n_e: int = 11,
                      span: float = 5.0) -> dict:
    """Largest |p_I - p_II| over starts near equilibrium and far from the fold.

    Initial conditions have |q0| in [K, K + span] and p0 chosen so that
    p0 - tanh(beta (q0 + b p0)) = e for e in [-delta, delta]. Returns the
    maximum discrepancy and a continuity diagnostic for p_II.
    """
    b, beta = params.b, params.beta
    if params.case == "B" and not K > fold_point(b, beta):
        raise ValueError("Case B comparison needs K beyond the fold")
    qs = np.concatenate([-np.linspace(K + span, K, n_q), np.linspace(K, K + span, n_q)])
    es = np.linspace(-delta, delta, n_e) if delta > 0 else np.array([0.0])
    worst = 0.0
    for q0 in qs:
        for e in es:
            # y = p0 - e solves y = tanh(beta (q0 + b e + b y))
            k = 2 if q0 > 0 else 0
            y = float(solve_self_consistency(np.array(q0 + b * e), b, beta, k))
            p0 = y + e
            pI, _ = scenario_I_limit(params, p0, q0)
            pII = math.tanh(beta * (q0 + b * p0))
            worst = max(worst, abs(pI - pII))
    return {"max_discrepancy": worst, "delta": delta, "K": K, "samples": len(qs) * len(es)}


def continuity_modulus_II(params: IsingParams, p0: float, q_lo: float, q_hi: float, m: int = 2001) -> tuple[float, float]:
    """(largest jump of q0 -> p_II on the grid, the bound beta (1 + b) h)."""
    q = np.linspace(q_lo, q_hi, m)
    pII = np.tanh(params.beta * (q + params.b * p0))
    h = q[1] - q[0]
    return float(np.max(np.abs(np.diff(pII)))), params.beta * (1.0 + params.b) * h


# ---------------------------------------------------------------------------
# stability coordinates


def lambda_a_alpha(a: float, alpha: float, b: float, beta: float,
                   window: tuple[float, float] = (-20.0, 20.0)) -> Legendrian:
    """Lambda_{a,alpha} in the (b, beta) stability coordinates."""
    return IsingEquilibrium(a, alpha, b, beta, window)


def lambda_asymptotes(a, alpha, b, beta, Q: float = 60.0) -> tuple[np.ndarray, np.ndarray]:
    """Points of Lambda_{a,alpha} at Q = -Q and Q = +Q (they approach P = 0, Z = (a-b)/2)."""
    L = IsingEquilibrium(a, alpha, b, beta, (-Q, Q))
    left = L.pieces[0].point(np.array(-Q))
    right = L.pieces[-1].point(np.array(Q))
    return left, right


class PoleError(ZeroDivisionError):
    """1 - alpha (a - b) = 0: the front projection changes type."""


def dPdQ_at_chord(a: float, alpha: float, b: float, beta: float) -> float:
    """dP/dQ at the chord point Q = 0: (alpha - beta + alpha beta (a-b)) / (1 - alpha (a-b))."""
    den = 1.0 - alpha * (a - b)
    if den == 0.0:
        raise PoleError("1 - alpha (a - b) = 0")
    return (alpha - beta + alpha * beta * (a - b)) / den


def _chord_piece(L: Legendrian):
    """The piece of Lambda_{a,alpha} through P = Q = 0."""
    for pc in L.pieces:
        if pc.lo < 0.0 < pc.hi and abs(pc.point(np.array(0.0))[0]) < 1e-12:
            return pc
    raise ValueError("no piece passes through P = Q = 0")


def dPdQ_finite_difference(a, alpha, b, beta, h: float = 1e-4) -> float:
    pc = _chord_piece(lambda_a_alpha(a, alpha, b, beta))
    return float((pc.point(np.array(h))[0] - pc.point(np.array(-h))[0]) / (2 * h))


def front_curvature_sign(a, alpha, b, beta, h: float = 1e-3) -> int:
    """Sign of Z''(0) of the front projection by a second difference."""
    pc = _chord_piece(lambda_a_alpha(a, alpha, b, beta))
    Z = pc.point(np.array([-h, 0.0, h]))[:, 2]
    return int(np.sign(Z[0] - 2 * Z[1] + Z[2]))


# ---------------------------------------------------------------------------
# admissible Hamiltonians


class NotAdmissibleError(ValueError):
    pass


def bump(P, rho: float):
    """Smooth g(P) vanishing for |P| <= rho and |P| >= 4 rho; max 1 at |P| = 2.5 rho.

    Returns (g, g').
    """
    P = np.asarray(P, dtype=float)
    s = (np.abs(P) - rho) / (3.0 * rho)
    x = 2.0 * s - 1.0
    inside = np.abs(x) < 1.0
    xs = np.where(inside, x, 0.0)
    w = 1.0 - xs * xs
    g = np.where(inside, np.e * np.exp(-1.0 / w), 0.0)
    dgdx = np.where(inside, g * (-2.0 * xs / (w * w)), 0.0)
    dg = dgdx * (2.0 / (3.0 * rho)) * np.sign(P)
    return g, dg


@dataclass(frozen=True)
class AdmissibleHamiltonian:
    """H(P, Q, Z) = -c Z + F(P, Q, Z), periodic in Q with period tau."""

    H: ContactHamiltonian
    c: float
    tau: float
    eps: float
    rho: float
    F: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]] = field(repr=False)
    report: object = field(default=None, compare=False)

    def F_parts(self, X):
        """(F, dF/dP, dF/dQ, dF/dZ) at X."""
        val, grad = self.F(np.asarray(X, dtype=float))
        return val, grad[..., 0], grad[..., 1], grad[..., 2]

    def negative_near(self, a: float, b: float, Q0: float = 0.0, r: float = 0.05) -> bool:
        """Is H < 0 on a small box around (0, Q0, (a - b)/2)?"""
        g = np.linspace(-r, r, 5)
        P, Q, Z = np.meshgrid(g, Q0 + g, 0.5 * (a - b) + g, indexing="ij")
        return bool(np.all(self.H(np.stack([P, Q, Z], axis=-1)) < 0))


def _default_F(eps, tau, rho):
    k = 2.0 * np.pi / tau

    def F(X):
        P, Q = X[..., 0], X[..., 1]
        g, dg = bump(P, rho)
        sn, cs = np.sin(k * Q), np.cos(k * Q)
        val = eps * sn * g
        grad = np.stack([eps * sn * dg, eps * k * cs * g, np.zeros_like(P)], axis=-1)
        return val, grad

    return F


def make_admissible(c: float = 1.0, tau: float = 2 * np.pi, eps: float = 0.1, rho: float = 0.1,
                    shape: Callable | ContactHamiltonian | None = None, check: bool = True,
                    region: dict | None = None) -> AdmissibleHamiltonian:
    """Build H = -c Z + F and run the admissibility sampler.

    The default F is eps sin(2 pi Q / tau) g(P) with the bump ``g``; it does
    not depend on Z so dH/dZ = -c everywhere. A user ``shape`` may be a
    ContactHamiltonian or a callable F(X) (finite-difference gradient); it
    must be tau-periodic in Q, which is assumed, not checked.
    """
    if eps < 0:
        raise ValueError("eps must be non-negative")
    if rho <= 0:
        raise ValueError("rho must be positive")
    if c <= 0:
        raise ValueError("c must be positive")
    if shape is None:
        F = _default_F(eps, tau, rho)
        name = f"-{c:g}Z+{eps:g}sin*g"
    else:
        Fh = shape if isinstance(shape, ContactHamiltonian) else ContactHamiltonian(shape, name="F")

        def F(X):
            return Fh.value(X), Fh.gradient(X)

        name = f"-{c:g}Z+{Fh.name}"

    def value(X):
        return -c * X[..., 2] + F(X)[0]

    def grad(X):
        g = np.array(F(X)[1], dtype=float, copy=True)
        g[..., 2] -= c
        return g

    H = ContactHamiltonian(value, grad, period=tau, name=name,
                           meta={"c": c, "tau": tau, "eps": eps, "rho": rho})
    adm = AdmissibleHamiltonian(H, c, tau, eps, rho, F)
    if check:
        from .relaxation import check_admissibility

        rep = check_admissibility(adm, **(region or {}))
        object.__setattr__(adm, "report", rep)
        if not rep.admissible:
            raise NotAdmissibleError(f"admissibility condition(s) {', '.join(rep.failed)} violated")
    return adm


def blocking_hamiltonian(c: float, delta: float) -> ContactHamiltonian:
    """H = -c Z (1 - Z / delta), vanishing on {Z = 0} and on {Z = delta}.

    With delta > 0 below Lambda_{a,alpha} the level {Z = delta} is an
    invariant wall between the source and the zero section.
    """
    def value(X):
        Z = X[..., 2]
        return -c * Z * (1.0 - Z / delta)

    def grad(X):
        Z = X[..., 2]
        zero = np.zeros_like(Z)
        return np.stack([zero, zero, -c + 2.0 * c * Z / delta], axis=-1)

    return ContactHamiltonian(value, grad, name=f"block({delta:g})", meta={"c": c, "delta": delta})
