"""Legendrian curves in (R^3, dz - p dq): distances, Reeb chords, rates.

A curve is a list of :class:`Piece` objects. Each piece is a smooth map
``u -> (p, q, z)`` on an interval together with its tangent. Pieces that are
graphs over q use ``u = q`` which lets chord finding and distance queries
work directly in q. Multi-valued curves such as the folded Ising
equilibria are split into graph pieces at their folds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import ContactHamiltonian, as_state, contact_form, phi_beta
from .io import write_csv

__all__ = [
    "Piece",
    "Legendrian",
    "JetGraph",
    "Parametric",
    "IsingEquilibrium",
    "zero_section",
    "ReebChord",
    "distance_to",
    "find_reeb_chords",
    "verify_legendrian",
    "HyperbolicityEstimate",
    "estimate_hyperbolicity",
    "NotInvariantError",
    "solve_self_consistency",
    "constant_section",
    "ising_equilibrium_explicit",
]

_INVGOLD = (math.sqrt(5.0) - 1.0) / 2.0


class NotInvariantError(RuntimeError):
    pass


@dataclass(frozen=True)
class Piece:
    """One smooth chart of a Legendrian curve.

    ``point(u)`` and ``tangent(u)`` accept arrays of any shape and return an
    extra trailing axis of length 3. When ``graph`` is true the parameter is
    q itself, so ``point(u)[..., 1] == u``.
    """

    lo: float
    hi: float
    point: Callable[[np.ndarray], np.ndarray]
    tangent: Callable[[np.ndarray], np.ndarray]
    graph: bool = False
    label: str = ""


@dataclass(frozen=True)
class Legendrian:
    """A Legendrian curve given as a union of pieces.

    ``period`` declares q-periodicity (the curve is invariant under
    q -> q + period); ``frame`` names the coordinates ('pqz' or 'PQZ').
    """

    pieces: tuple[Piece, ...]
    period: float | None = None
    frame: str = "pqz"
    name: str = "Lambda"
    meta: dict = field(default_factory=dict, compare=False)

    def sample(self, m: int = 512):
        """Parameter values and points, ``m`` per piece, as a list of (u, X)."""
        out = []
        for pc in self.pieces:
            u = np.linspace(pc.lo, pc.hi, m)
            out.append((u, pc.point(u)))
        return out

    def points(self, m: int = 512) -> np.ndarray:
        return np.concatenate([X for _, X in self.sample(m)])

    def shifted(self, s: float) -> "Legendrian":
        """Image under the Reeb flow z -> z + s."""
        def mk(pc):
            f = pc.point
            return Piece(pc.lo, pc.hi, lambda u: f(u) + np.array([0.0, 0.0, s]), pc.tangent, pc.graph, pc.label)
        return Legendrian(tuple(mk(pc) for pc in self.pieces), self.period, self.frame, f"{self.name}+{s:g}", self.meta)

    def to_csv(self, path, m: int = 512):
        cols = ["u", "P", "Q", "Z"] if self.frame == "PQZ" else ["u", "p", "q", "z"]
        rows = [(ui, *xi) for u, X in self.sample(m) for ui, xi in zip(u, X)]
        return write_csv(path, cols, rows)


def _stack3(a, b, c):
    return np.stack(np.broadcast_arrays(a, b, c), axis=-1).astype(float)


def JetGraph(phi: Callable, dphi: Callable, window: tuple[float, float] = (-20.0, 20.0),
             period: float | None = None, ddphi: Callable | None = None, name: str = "j1phi",
             frame: str = "pqz") -> Legendrian:
    """The 1-jet {z = phi(q), p = phi'(q)}.

    For periodic graphs the sampling window is one period [0, period].
    ``ddphi`` gives exact tangents; otherwise phi'' is differenced.
    """
    if period is not None:
        window = (0.0, float(period))

    def point(u):
        u = np.asarray(u, dtype=float)
        return _stack3(dphi(u), u, phi(u))

    def tangent(u):
        u = np.asarray(u, dtype=float)
        if ddphi is not None:
            d2 = ddphi(u)
        else:
            h = 1e-5 * np.maximum(1.0, np.abs(u))
            d2 = (dphi(u + h) - dphi(u - h)) / (2 * h)
        return _stack3(d2, np.ones_like(u), dphi(u))

    pc = Piece(float(window[0]), float(window[1]), point, tangent, graph=True, label="graph")
    return Legendrian((pc,), period, frame, name)


def zero_section(window=(-20.0, 20.0), period: float | None = None, frame: str = "pqz") -> Legendrian:
    zero = lambda u: np.zeros_like(np.asarray(u, dtype=float))  # noqa: E731
    return JetGraph(zero, zero, window, period, ddphi=zero, name="zero_section", frame=frame)


def constant_section(c: float, window=(-20.0, 20.0), period: float | None = None, frame: str = "pqz") -> Legendrian:
    """{p = 0, z = c}: the 1-jet of the constant function c."""
    zero = lambda u: np.zeros_like(np.asarray(u, dtype=float))  # noqa: E731
    const = lambda u: np.full_like(np.asarray(u, dtype=float), c)  # noqa: E731
    return JetGraph(const, zero, window, period, ddphi=zero, name=f"const({c:g})", frame=frame)


def Parametric(func: Callable, lo: float, hi: float, dfunc: Callable | None = None,
               period: float | None = None, name: str = "curve", frame: str = "pqz") -> Legendrian:
    """A parametric curve u -> (p(u), q(u), z(u)) on [lo, hi]."""

    def point(u):
        return np.asarray(func(np.asarray(u, dtype=float)), dtype=float)

    def tangent(u):
        u = np.asarray(u, dtype=float)
        if dfunc is not None:
            return np.asarray(dfunc(u), dtype=float)
        h = 1e-6 * max(1.0, abs(hi - lo))
        return (point(u + h) - point(u - h)) / (2 * h)

    return Legendrian((Piece(float(lo), float(hi), point, tangent, graph=False, label="param"),), period, frame, name)


# ---------------------------------------------------------------------------
# Ising equilibrium curves in stability coordinates


def solve_self_consistency(Q, d, alpha, k=0, nfold=None):
    """Root y of y = tanh(alpha (Q + d y)) on branch k, vectorized over Q.

    ``nfold`` is 1 when the map is monotone (single branch) and 3 when
    alpha*d > 1 (inferred when omitted). Branches are bracketed between the
    critical points of g(y) = y - tanh(alpha (Q + d y)), so each bracket
    holds exactly one root; k = 0, 1, 2 is the lower, middle, upper root.
    Where branch k does not exist the bracket is empty and the returned
    value is meaningless; callers mask by the branch's Q-interval.
    """
    if nfold is None:
        nfold = 3 if alpha * d > 1.0 else 1
    Q = np.asarray(Q, dtype=float)
    if d == 0.0:
        return np.tanh(alpha * Q)

    def g(y):
        return y - np.tanh(alpha * (Q + d * y))

    lo = np.full_like(Q, -1.0)
    hi = np.full_like(Q, 1.0)
    sign = 1.0
    if nfold == 3:
        s = math.sqrt(1.0 - 1.0 / (alpha * d))
        uc = math.atanh(s) / alpha
        y1 = (-uc - Q) / d
        y2 = (uc - Q) / d
        if k == 0:
            hi = np.minimum(y1, 1.0)
        elif k == 1:
            lo, hi, sign = y1, y2, -1.0
        else:
            lo = np.maximum(y2, -1.0)
    glo = sign * g(lo)
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        gm = sign * g(mid)
        left = (gm > 0) == (glo > 0)
        lo = np.where(left, mid, lo)
        glo = np.where(left, gm, glo)
        hi = np.where(left, hi, mid)
        if np.all(hi - lo <= 4e-16 * np.maximum(1.0, np.abs(lo))):
            break
    y = 0.5 * (lo + hi)
    # one Newton polish, kept only if it stays inside the bracket
    t = np.tanh(alpha * (Q + d * y))
    dg = 1.0 - alpha * d * (1.0 - t * t)
    with np.errstate(divide="ignore", invalid="ignore"):
        yn = y - (y - t) / dg
    ok = np.isfinite(yn) & (yn >= lo - 1e-15) & (yn <= hi + 1e-15)
    return np.where(ok, yn, y)


def IsingEquilibrium(a: float, alpha: float, b: float, beta: float,
                     window: tuple[float, float] = (-20.0, 20.0)) -> Legendrian:
    """The curve Lambda_{a,alpha} written in the (b, beta) stability coordinates.

    With y = P + tanh(beta Q) and d = a - b the curve is
    ``y = tanh(alpha (Q + d y))`` and
    ``Z = phi_alpha(Q + d y) - phi_beta(Q) - d y^2 / 2``.
    When alpha*d > 1 the projection to Q folds at Q = +/- Q_f and the curve
    is split into three graph pieces (lower, middle, upper).
    """
    if alpha <= 0 or beta <= 0:
        raise ValueError("alpha and beta must be positive")
    d = float(a - b)
    qlo, qhi = map(float, window)
    nfold = 3 if alpha * d > 1.0 else 1

    def make(k):
        def point(Q):
            Q = np.asarray(Q, dtype=float)
            y = solve_self_consistency(Q, d, alpha, k, nfold)
            u = Q + d * y
            P = y - np.tanh(beta * Q)
            Z = phi_beta(alpha, u) - phi_beta(beta, Q) - 0.5 * d * y * y
            return _stack3(P, Q, Z)

        def tangent(Q):
            # scaled by (1 - alpha d S) so it stays finite at the folds
            Q = np.asarray(Q, dtype=float)
            y = solve_self_consistency(Q, d, alpha, k, nfold)
            u = Q + d * y
            ta = np.tanh(alpha * u)
            S = 1.0 - ta * ta
            tb = np.tanh(beta * Q)
            den = 1.0 - alpha * d * S
            dy = alpha * S  # = den * y'
            dP = dy - den * beta * (1.0 - tb * tb)
            dZ = ta * (den + d * dy) - tb * den - d * y * dy
            v = _stack3(dP, den, dZ)
            # orient along increasing Q on every piece
            return v * np.where(den < 0, -1.0, 1.0)[..., None]

        return point, tangent

    pieces = []
    if nfold == 1:
        pt, tg = make(0)
        pieces.append(Piece(qlo, qhi, pt, tg, graph=True, label="branch0"))
    else:
        s = math.sqrt(1.0 - 1.0 / (alpha * d))
        qf = d * s - math.atanh(s) / alpha
        spans = [(qlo, min(qhi, qf)), (max(qlo, -qf), min(qhi, qf)), (max(qlo, -qf), qhi)]
        for k, (lo, hi) in enumerate(spans):
            if hi > lo:
                pt, tg = make(k)
                pieces.append(Piece(lo, hi, pt, tg, graph=True, label=f"branch{k}"))
    meta = {"a": a, "alpha": alpha, "b": b, "beta": beta, "fold_Q": None}
    if nfold == 3:
        s = math.sqrt(1.0 - 1.0 / (alpha * d))
        meta["fold_Q"] = d * s - math.atanh(s) / alpha
    return Legendrian(tuple(pieces), None, "PQZ", f"Lambda[{a:g},{alpha:g}]", meta)


def ising_equilibrium_explicit(a, alpha, b, beta, u):
    """Independent parameterization of Lambda_{a,alpha} by u = q + a p.

    p = tanh(alpha u), q = u - a p, z = phi_alpha(u) - a p^2 / 2, then mapped
    to the (b, beta) stability coordinates.
    """
    from .core import make_contactomorphism

    u = np.asarray(u, dtype=float)
    p = np.tanh(alpha * u)
    x = _stack3(p, u - a * p, phi_beta(alpha, u) - 0.5 * a * p * p)
    return make_contactomorphism("ising_stability", b=b, beta=beta)(x)


# ---------------------------------------------------------------------------
# distance


def _wrap_candidates(X, period):
    if period is None:
        return X[None]
    Xw = X.copy()
    Xw[..., 1] = np.mod(Xw[..., 1], period)
    shifts = np.array([-period, 0.0, period])
    out = np.repeat(Xw[None], 3, axis=0)
    out[..., 1] += shifts[:, None]
    return out


def _piece_distance(pc: Piece, X: np.ndarray, lo: np.ndarray, hi: np.ndarray, m: int, tol: float):
    """Vectorized scan + golden-section minimum of |point(u) - x| on [lo, hi]."""
    K = X.shape[0]
    s = np.linspace(0.0, 1.0, m)
    U = lo[:, None] + (hi - lo)[:, None] * s[None, :]
    D = np.sum((pc.point(U) - X[:, None, :]) ** 2, axis=-1)
    j = np.argmin(D, axis=1)
    rows = np.arange(K)
    best_u = U[rows, j]
    best_d = D[rows, j]
    a = U[rows, np.maximum(j - 1, 0)]
    b = U[rows, np.minimum(j + 1, m - 1)]

    def f(u):
        return np.sum((pc.point(u) - X) ** 2, axis=-1)

    c = b - _INVGOLD * (b - a)
    e = a + _INVGOLD * (b - a)
    fc, fe = f(c), f(e)
    for _ in range(200):
        if np.all(b - a <= tol * np.maximum(1.0, np.abs(a))):
            break
        left = fc < fe
        # left: keep [a, e], old c becomes the new e; right: keep [c, b], old e becomes c
        a, b = np.where(left, a, c), np.where(left, e, b)
        c_old, fc_old = c, fc
        c = np.where(left, b - _INVGOLD * (b - a), e)
        e = np.where(left, c_old, a + _INVGOLD * (b - a))
        fnew = f(np.where(left, c, e))
        fc, fe = np.where(left, fnew, fe), np.where(left, fc_old, fnew)
    u_ref = 0.5 * (a + b)
    d_ref = f(u_ref)
    better = d_ref < best_d
    return np.sqrt(np.where(better, d_ref, best_d)), np.where(better, u_ref, best_u)


def distance_to(L: Legendrian, x, m: int = 512, tol: float = 1e-10, return_param: bool = False):
    """Euclidean distance from point(s) ``x`` to the curve.

    For graph pieces the search window is narrowed to |u - q| <= d0 where d0
    is the distance to the curve point directly above x (any closer curve
    point must have |dq| <= d0). Periodic curves are queried with q wrapped
    into one period and its two neighbours.
    """
    X = as_state(x)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[-1] != 3:
        raise ValueError("distance_to supports n = 1 points")
    cands = _wrap_candidates(X, L.period)
    best = np.full(X.shape[0], np.inf)
    best_u = np.full(X.shape[0], np.nan)
    best_piece = np.full(X.shape[0], -1)
    if not L.pieces:
        raise ValueError("empty curve")
    for Xc in cands:
        q = Xc[:, 1]
        # upper bound from graph pieces containing q
        d0 = np.full(X.shape[0], np.inf)
        for pc in L.pieces:
            if pc.graph:
                inside = (q >= pc.lo) & (q <= pc.hi) if L.period is None else np.ones_like(q, dtype=bool)
                if inside.any():
                    dd = np.linalg.norm(pc.point(q) - Xc, axis=-1)
                    d0 = np.where(inside, np.minimum(d0, dd), d0)
        for ip, pc in enumerate(L.pieces):
            lo = np.full(X.shape[0], pc.lo)
            hi = np.full(X.shape[0], pc.hi)
            if pc.graph:
                fin = np.isfinite(d0)
                if L.period is not None:
                    lo = np.where(fin, q - d0, lo)
                    hi = np.where(fin, q + d0, hi)
                else:
                    lo = np.where(fin, np.maximum(lo, q - d0), lo)
                    hi = np.where(fin, np.minimum(hi, q + d0), hi)
            valid = hi >= lo
            if not valid.any():
                continue
            dist, u = _piece_distance(pc, Xc[valid], lo[valid], hi[valid], m, tol)
            idx = np.flatnonzero(valid)
            upd = dist < best[idx]
            best[idx[upd]] = dist[upd]
            best_u[idx[upd]] = u[upd]
            best_piece[idx[upd]] = ip
    if return_param:
        return (best[0], best_u[0], best_piece[0]) if single else (best, best_u, best_piece)
    return float(best[0]) if single else best


# ---------------------------------------------------------------------------
# Reeb chords


@dataclass(frozen=True)
class ReebChord:
    start: np.ndarray
    end: np.ndarray
    length: float
    nondegenerate: bool
    slope: float  # d/dq (p0 - p1) at the chord

    @property
    def q(self) -> float:
        return float(self.start[1])

    def as_row(self):
        return (self.q, float(self.start[2]), self.length, self.nondegenerate)


def _as_graph(pc: Piece):
    """Return (qlo, qhi, point-of-q) for a piece, inverting monotone q(u)."""
    if pc.graph:
        return pc.lo, pc.hi, pc.point
    u = np.linspace(pc.lo, pc.hi, 2049)
    qs = pc.point(u)[:, 1]
    dq = np.diff(qs)
    if not (np.all(dq > 0) or np.all(dq < 0)):
        raise ValueError("parametric piece is not monotone in q; chords need graphs over q")
    inc = dq[0] > 0

    def point(Q):
        Q = np.asarray(Q, dtype=float)
        lo = np.full_like(Q, pc.lo)
        hi = np.full_like(Q, pc.hi)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            qm = pc.point(mid)[..., 1]
            go_right = (qm < Q) if inc else (qm > Q)
            lo = np.where(go_right, mid, lo)
            hi = np.where(go_right, hi, mid)
        return pc.point(0.5 * (lo + hi))

    return float(min(qs[0], qs[-1])), float(max(qs[0], qs[-1])), point


def find_reeb_chords(L0: Legendrian, L1: Legendrian, window: tuple[float, float] | None = None,
                     m: int = 2048, tol: float = 1e-12, nondeg_tol: float = 1e-8) -> list[ReebChord]:
    """Reeb chords from L0 up to L1 over q in ``window``.

    Chords sit where the (p, q) projections meet; a sign change of
    p0(q) - p1(q) on an ``m``-point grid is bisected to ``tol`` and kept
    when z0 < z1. The nondegeneracy flag tests |d/dq (p0 - p1)| > nondeg_tol.
    """
    chords: list[ReebChord] = []
    for pc0 in L0.pieces:
        a0, b0, f0 = _as_graph(pc0)
        for pc1 in L1.pieces:
            a1, b1, f1 = _as_graph(pc1)
            lo, hi = max(a0, a1), min(b0, b1)
            if window is not None:
                lo, hi = max(lo, window[0]), min(hi, window[1])
            if not hi > lo:
                continue
            qs = np.linspace(lo, hi, m)

            def gap(Q):
                return f0(Q)[..., 0] - f1(Q)[..., 0]

            g = gap(qs)
            roots = list(qs[g == 0.0])
            idx = np.flatnonzero((g[:-1] * g[1:] < 0))
            if idx.size:
                L, R = qs[idx], qs[idx + 1]
                gL = g[idx]
                while np.any(R - L > tol * np.maximum(1.0, np.abs(L))):
                    M = 0.5 * (L + R)
                    gM = gap(M)
                    same = np.sign(gM) == np.sign(gL)
                    L = np.where(same, M, L)
                    gL = np.where(same, gM, gL)
                    R = np.where(same, R, M)
                    if np.all(M == L) and np.all(M == R):
                        break
                # prefer the endpoint with the smaller residual
                gl, gr = np.abs(gap(L)), np.abs(gap(R))
                roots.extend(np.where(gl <= gr, L, R))
            for r in sorted(roots):
                x0, x1 = f0(np.array(r)), f1(np.array(r))
                length = float(x1[2] - x0[2])
                if not length > 0:
                    continue
                h = 1e-6 * max(1.0, abs(r))
                rl, rr = max(lo, r - h), min(hi, r + h)
                slope = float((gap(np.array(rr)) - gap(np.array(rl))) / (rr - rl))
                chords.append(ReebChord(np.asarray(x0), np.asarray(x1), length, abs(slope) > nondeg_tol, slope))
    chords.sort(key=lambda c: c.q)
    return chords


# ---------------------------------------------------------------------------
# Legendrian residual


def verify_legendrian(L: Legendrian, m: int = 512) -> float:
    """max |lambda(t)| / |t| over ``m`` tangents per piece."""
    worst = 0.0
    for pc in L.pieces:
        u = np.linspace(pc.lo, pc.hi, m)
        X = pc.point(u)
        T = pc.tangent(u)
        nrm = np.linalg.norm(T, axis=-1)
        lam = np.abs(contact_form(X, T))
        ok = nrm > 0
        if ok.any():
            worst = max(worst, float(np.max(lam[ok] / nrm[ok])))
    return worst


# ---------------------------------------------------------------------------
# normal hyperbolicity


@dataclass(frozen=True)
class HyperbolicityEstimate:
    a_est: float
    b_est: float
    c_est: float
    normally_hyperbolic: bool
    samples: int
    times: tuple[float, ...]


def _slope(ts, ys):
    ts = np.asarray(ts, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if ts.size == 1:
        return float(ys[0] / ts[0])
    A = np.vstack([ts, np.ones_like(ts)]).T
    return float(np.linalg.lstsq(A, ys, rcond=None)[0][0])


def estimate_hyperbolicity(H: ContactHamiltonian, L: Legendrian, t_max: float = 8.0,
                           samples: int = 32, invariance_tol: float = 1e-6) -> HyperbolicityEstimate:
    """Normal contraction and tangential growth rates of an invariant Legendrian.

    ``L`` must lie in M = {H = 0}. At each sample x the tangent t of L and
    the unit normal n = grad H x t (orthogonal to t inside T_x M) are pushed
    by D phi^s for s in {1, 2, 4, 8} up to ``t_max``, composed from unit
    steps with QR re-orthonormalization. The rates are least-squares slopes
    of log|pi D n| and log|D t| against s, which removes the constant
    prefactor; a_est is the smallest normal rate, b_est
    the largest tangential one, c_est = min(-dH(R)).
    """
    from .flow import IntegratorConfig, flow_map, flow_map_differential

    times = tuple(s for s in (1.0, 2.0, 4.0, 8.0) if s <= t_max)
    if not times:
        raise ValueError("t_max must be at least 1")
    per_piece = max(1, samples // len(L.pieces))
    X, T = [], []
    for pc in L.pieces:
        span = pc.hi - pc.lo
        u = np.linspace(pc.lo + 0.05 * span, pc.hi - 0.05 * span, per_piece)
        X.append(pc.point(u))
        T.append(pc.tangent(u))
    X = np.concatenate(X)[:samples]
    T = np.concatenate(T)[:samples]
    T = T / np.linalg.norm(T, axis=-1, keepdims=True)

    hval = np.abs(H(X))
    if np.max(hval) > 1e-8:
        raise NotInvariantError(f"curve is not inside {{H = 0}} (max |H| = {np.max(hval):.3g})")
    cfg = IntegratorConfig(max_time=1.0, rel_tol=1e-11, abs_tol=1e-13, box=None)
    drift = distance_to(L, flow_map(H, X, 1.0, cfg))
    if np.max(drift) > invariance_tol:
        raise NotInvariantError(f"curve is not invariant under the flow (drift {np.max(drift):.3g})")

    hz = H.reeb_derivative(X)
    if np.min(np.abs(hz)) < 1e-10:
        raise ValueError("M is not transverse to the Reeb field near the curve")
    G = H.gradient(X)
    N = np.cross(G, T)
    N /= np.linalg.norm(N, axis=-1, keepdims=True)

    # Unit-time steps with re-orthonormalization of the (t, n) frame: the
    # diagonal of R accumulates log|D t| and log|pi D n| without the normal
    # part sinking below the finite-difference noise of D phi^s.
    normal_rates, tangent_rates = [], []
    step_cfg = cfg.replace(max_time=1.0)
    for x, t, n in zip(X, T, N):
        frame = np.column_stack([t, n])
        y = x.copy()
        log_t = log_n = 0.0
        ln_n, ln_t = [], []
        for k in range(1, int(times[-1]) + 1):
            frame, R = np.linalg.qr(flow_map_differential(H, y, 1.0) @ frame)
            log_t += math.log(abs(R[0, 0]))
            log_n += math.log(abs(R[1, 1]))
            y = flow_map(H, y, 1.0, step_cfg)
            if float(k) in times:
                ln_t.append(log_t)
                ln_n.append(log_n)
        normal_rates.append(-_slope(times, ln_n))
        tangent_rates.append(_slope(times, ln_t))
    a_est = float(np.min(normal_rates))
    b_est = float(np.max(tangent_rates))
    c_est = float(np.min(-hz))
    return HyperbolicityEstimate(a_est, b_est, c_est, bool(a_est > 0 and a_est > b_est), len(X), times)
