"""Glauber single-spin-flip dynamics on (Z_N)^d.

Engines
-------
master     exact Kolmogorov equation on all 2^|G| configurations (|G| <= 16)
lumped     exact birth-death chain of the up-spin count (Curie-Weiss only)
gillespie  continuous-time Monte Carlo, per site
discrete   discrete-time chain: at most one flip per step of length h
perturbed  rates modified by a contact perturbation F with (Q, Z) updates

Conventions: a configuration is an array of +/-1. The energy uses unordered
pairs, E(s) = -q sum s - sum_{g<h} J_gh s_g s_h, so that flipping site g
changes the energy by Delta = -2 s_g (q + sum_{h != g} J_gh s_h). The flip
rate is w_g = (c/2)(1 + tanh(beta Delta / 2)).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply
from scipy.special import logsumexp

from .io import write_csv

__all__ = [
    "SpinSystem",
    "energy",
    "local_field",
    "flip_delta",
    "flip_rate",
    "master_generator",
    "master_evolve",
    "gibbs_distribution",
    "lump",
    "magnetization_of_states",
    "lumped_rates",
    "lumped_generator",
    "lumped_master_evolve",
    "lumped_stationary",
    "binomial_initial",
    "mean_field_ode",
    "gillespie_run",
    "gillespie_ensemble",
    "discrete_run",
    "discrete_ensemble",
    "discrete_master_evolve",
    "perturbed_step_rates",
    "perturbed_ensemble",
    "perturbed_run",
    "perturbed_mean_field",
    "PathSummary",
    "MAX_MASTER_SITES",
]

MAX_MASTER_SITES = 16


@dataclass(frozen=True)
class SpinSystem:
    """Spins on the group (Z_N)^d with field q, inverse temperature beta, rate scale c.

    ``J`` is None for Curie-Weiss coupling J_gh = b / |G| (g != h).
    """

    N: int
    d: int = 1
    b: float = 0.0
    q: float = 0.0
    beta: float = 1.0
    c: float = 1.0
    J: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.N < 1 or self.d < 1:
            raise ValueError("N and d must be positive")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.c < 0:
            raise ValueError("c must be non-negative")
        if self.J is not None:
            J = np.asarray(self.J, dtype=float)
            if J.shape != (self.size, self.size):
                raise ValueError(f"J must be {self.size}x{self.size}")
            if not np.allclose(J, J.T, atol=0, rtol=0):
                raise ValueError("J must be symmetric")
            if np.any(np.diag(J) != 0):
                raise ValueError("J must have zero diagonal")
            object.__setattr__(self, "J", J)

    @classmethod
    def curie_weiss(cls, N: int, d: int = 1, b: float = 0.0, q: float = 0.0, beta: float = 1.0, c: float = 1.0):
        return cls(N, d, b, q, beta, c, None)

    @classmethod
    def nearest_neighbor(cls, N: int, d: int = 1, Jnn: float = 1.0, q: float = 0.0, beta: float = 1.0, c: float = 1.0):
        """Translation-invariant nearest-neighbour coupling on the torus (Z_N)^d."""
        sites = list(itertools.product(range(N), repeat=d))
        index = {s: i for i, s in enumerate(sites)}
        M = len(sites)
        J = np.zeros((M, M))
        for s in sites:
            for ax in range(d):
                t = list(s)
                t[ax] = (t[ax] + 1) % N
                i, j = index[s], index[tuple(t)]
                if i != j:
                    J[i, j] = J[j, i] = Jnn
        return cls(N, d, 0.0, q, beta, c, J)

    @property
    def size(self) -> int:
        return self.N ** self.d

    @property
    def curie_weiss_coupling(self) -> bool:
        return self.J is None

    def coupling_matrix(self) -> np.ndarray:
        if self.J is not None:
            return self.J
        M = self.size
        J = np.full((M, M), self.b / M)
        np.fill_diagonal(J, 0.0)
        return J

    def translation(self, shift) -> np.ndarray:
        """Site permutation for the group translation by ``shift``."""
        shift = np.broadcast_to(np.asarray(shift, dtype=int), (self.d,))
        sites = np.array(list(itertools.product(range(self.N), repeat=self.d)))
        moved = (sites + shift) % self.N
        weights = self.N ** np.arange(self.d - 1, -1, -1)
        return moved @ weights

    def manifest(self) -> dict:
        return {"N": self.N, "d": self.d, "b": self.b, "q": self.q, "beta": self.beta, "c": self.c,
                "coupling": "curie_weiss" if self.J is None else "explicit"}


def local_field(sys: SpinSystem, s) -> np.ndarray:
    """q + sum_{h != g} J_gh s_h for every site (broadcasts over leading axes)."""
    s = np.asarray(s, dtype=float)
    if sys.J is None:
        M = s.shape[-1]
        return sys.q + (sys.b / M) * (np.sum(s, axis=-1, keepdims=True) - s)
    return sys.q + s @ sys.J


def energy(sys: SpinSystem, s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if sys.J is None:
        M = s.shape[-1]
        S = np.sum(s, axis=-1)
        pair = 0.5 * (sys.b / M) * (S * S - M)
    else:
        pair = 0.5 * np.einsum("...i,ij,...j->...", s, sys.J, s)
    return -sys.q * np.sum(s, axis=-1) - pair


def flip_delta(sys: SpinSystem, s, g=None) -> np.ndarray:
    """Delta_g = E(s) - E(s with site g flipped) = -2 s_g h_g."""
    s = np.asarray(s, dtype=float)
    D = -2.0 * s * local_field(sys, s)
    return D if g is None else D[..., g]


def flip_rate(sys: SpinSystem, s, g=None) -> np.ndarray:
    """w_g(s) = (c/2)(1 + tanh(beta Delta_g / 2)); all sites when g is None."""
    return 0.5 * sys.c * (1.0 + np.tanh(0.5 * sys.beta * flip_delta(sys, s, g)))


# ---------------------------------------------------------------------------
# exact master equation on all configurations


def _all_states(M: int) -> np.ndarray:
    """Row i is the configuration whose bit j (LSB first) marks s_j = +1."""
    idx = np.arange(2 ** M)[:, None]
    bits = (idx >> np.arange(M)[None, :]) & 1
    return 2.0 * bits - 1.0


def magnetization_of_states(M: int) -> np.ndarray:
    return _all_states(M).mean(axis=1)


def master_generator(sys: SpinSystem) -> sp.csr_matrix:
    """Sparse generator L with d pi / dt = L pi (columns sum to zero)."""
    M = sys.size
    if M > MAX_MASTER_SITES:
        raise ValueError(f"master equation limited to |G| <= {MAX_MASTER_SITES} (got {M})")
    S = _all_states(M)
    W = flip_rate(sys, S)  # (2^M, M)
    n = 2 ** M
    src = np.repeat(np.arange(n), M)
    dst = (np.arange(n)[:, None] ^ (1 << np.arange(M))[None, :]).ravel()
    out = W.ravel()
    L = sp.coo_matrix((out, (dst, src)), shape=(n, n)).tocsr()
    L = L - sp.diags(W.sum(axis=1))
    return L.tocsr()


def gibbs_distribution(sys: SpinSystem) -> np.ndarray:
    E = energy(sys, _all_states(sys.size))
    w = -sys.beta * E
    w = np.exp(w - w.max())
    return w / w.sum()


def _check_distribution(pi0, n):
    pi0 = np.asarray(pi0, dtype=float)
    if pi0.shape != (n,):
        raise ValueError(f"distribution must have length {n}")
    if np.any(pi0 < 0) or abs(pi0.sum() - 1.0) > 1e-12:
        raise ValueError("initial distribution must be non-negative and sum to 1 (tol 1e-12)")
    return pi0


def master_evolve(sys: SpinSystem, pi0, t, t_eval=None, rel_tol: float = 1e-10, abs_tol: float = 1e-14):
    """Solve d pi / dt = L pi with the adaptive integrator.

    Returns pi(t), or the array of pi at ``t_eval`` when given.
    """
    from .flow import IntegratorConfig, solve_ode

    L = master_generator(sys)
    pi0 = _check_distribution(pi0, L.shape[0])
    if t == 0:
        return pi0.copy() if t_eval is None else np.repeat(pi0[None], len(t_eval), axis=0)
    cfg = IntegratorConfig(rel_tol=rel_tol, abs_tol=abs_tol, max_time=t, box=None)
    res = solve_ode(lambda _t, y: L @ y, pi0, t, cfg, t_eval=t_eval if t_eval is not None else [t])
    return res.y[-1] if t_eval is None else res.y


def lump(sys: SpinSystem, pi) -> np.ndarray:
    """Distribution of the up-spin count k from a full distribution."""
    M = sys.size
    k = ((_all_states(M) + 1) / 2).sum(axis=1).astype(int)
    pi = np.asarray(pi)
    return np.stack([np.bincount(k, weights=row, minlength=M + 1) for row in np.atleast_2d(pi)]).reshape(
        pi.shape[:-1] + (M + 1,))


def discrete_master_evolve(sys: SpinSystem, pi0, h: float, steps: int) -> np.ndarray:
    """pi_{n+1} = (I + h L) pi_n, the law of the discrete-time chain."""
    L = master_generator(sys)
    pi = _check_distribution(pi0, L.shape[0]).copy()
    if h * float(np.max(-L.diagonal())) > 1.0 + 1e-12:
        raise ValueError("h times the total flip rate must not exceed 1")
    for _ in range(steps):
        pi = pi + h * (L @ pi)
    return pi


# ---------------------------------------------------------------------------
# lumped Curie-Weiss chain


def lumped_rates(sys: SpinSystem):
    """(down, up) transition rates of k for k = 0..M under Curie-Weiss coupling.

    An up spin sees the field q + b (m - 1/M) and flips at
    (c/2)(1 - tanh(beta h)); a down spin sees q + b (m + 1/M) and flips at
    (c/2)(1 + tanh(beta h)). Multiplying by the counts k and M - k gives
    the rates of k -> k-1 and k -> k+1.
    """
    if not sys.curie_weiss_coupling:
        raise ValueError("lumping requires Curie-Weiss coupling")
    M = sys.size
    k = np.arange(M + 1)
    m = (2.0 * k - M) / M
    w_up = 0.5 * sys.c * (1.0 - np.tanh(sys.beta * (sys.q + sys.b * (m - 1.0 / M))))
    w_dn = 0.5 * sys.c * (1.0 + np.tanh(sys.beta * (sys.q + sys.b * (m + 1.0 / M))))
    return k * w_up, (M - k) * w_dn


def lumped_generator(sys: SpinSystem) -> sp.csr_matrix:
    down, up = lumped_rates(sys)
    M = sys.size
    L = sp.diags([down[1:], -(down + up), up[:-1]], [1, 0, -1], shape=(M + 1, M + 1))
    return L.tocsr()


def binomial_initial(M: int, m0: float = 0.0) -> np.ndarray:
    """Law of k under the product measure with mean magnetization m0."""
    from scipy.stats import binom

    return binom.pmf(np.arange(M + 1), M, 0.5 * (1.0 + m0))


def lumped_master_evolve(sys: SpinSystem, pi0, t_eval) -> np.ndarray:
    """Exact evolution of the up-spin count law at the times ``t_eval`` (array or scalar)."""
    L = lumped_generator(sys)
    pi = _check_distribution(pi0, L.shape[0])
    scalar = np.ndim(t_eval) == 0
    ts = np.atleast_1d(np.asarray(t_eval, dtype=float))
    if np.any(np.diff(ts) < 0) or ts[0] < 0:
        raise ValueError("t_eval must be sorted and non-negative")
    out = np.empty((ts.size, pi.size))
    t_prev = 0.0
    for i, t in enumerate(ts):
        if t > t_prev:
            pi = expm_multiply(L * (t - t_prev), pi)
            pi = np.clip(pi, 0.0, None)
            pi /= pi.sum()
        out[i] = pi
        t_prev = t
    return out[0] if scalar else out


def lumped_stationary(sys: SpinSystem, log: bool = False) -> np.ndarray:
    """Stationary law of k from detailed balance of the birth-death chain.

    With ``log=True`` the normalized log-probabilities are returned, which
    keeps metastable modes visible when they underflow in linear scale.
    """
    down, up = lumped_rates(sys)
    logr = np.log(up[:-1]) - np.log(down[1:])
    logpi = np.concatenate([[0.0], np.cumsum(logr)])
    logpi = logpi - logsumexp(logpi)
    return logpi if log else np.exp(logpi)


def mean_field_ode(b: float, beta: float, c: float, q: float, p0: float, t_eval) -> np.ndarray:
    """p' = -c p + c tanh(beta (q + b p)) sampled at ``t_eval``."""
    from .flow import IntegratorConfig, solve_ode

    t_eval = np.asarray(t_eval, dtype=float)
    T = float(t_eval[-1])
    if T == 0:
        return np.full_like(t_eval, p0)
    res = solve_ode(lambda t, y: -c * y + c * np.tanh(beta * (q + b * y)), np.array([p0]), T,
                    IntegratorConfig(max_time=T, box=None), t_eval=t_eval)
    return res.y[:, 0]


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass
class PathSummary:
    """Ensemble magnetization statistics on a time grid."""

    t: np.ndarray
    mean: np.ndarray
    se: np.ndarray
    runs: int
    paths: np.ndarray | None = field(default=None, repr=False)

    def to_csv(self, path):
        rows = ((t, m, s, self.runs) for t, m, s in zip(self.t, self.mean, self.se))
        return write_csv(path, ["t", "mean_m", "se_m", "runs"], rows)


def _summarize(t_grid, paths, keep):
    R = paths.shape[0]
    mean = paths.mean(axis=0)
    se = paths.std(axis=0, ddof=1) / math.sqrt(R) if R > 1 else np.zeros_like(mean)
    return PathSummary(np.asarray(t_grid, dtype=float), mean, se, R, paths if keep else None)


def gillespie_run(sys: SpinSystem, s0, t_max: float, seed) -> tuple[np.ndarray, np.ndarray]:
    """One continuous-time trajectory; returns (event times, magnetization after each event).

    The first entry is (0, m(0)). Deterministic given ``seed``.
    """
    rng = np.random.default_rng(seed)
    s = np.array(s0, dtype=float)
    M = s.size
    times, mags = [0.0], [s.mean()]
    t = 0.0
    J = None if sys.J is None else sys.J
    h = local_field(sys, s)
    while True:
        w = 0.5 * sys.c * (1.0 - s * np.tanh(sys.beta * h))
        total = w.sum()
        if total <= 0:
            break
        t += rng.exponential(1.0 / total)
        if t > t_max:
            break
        g = int(np.searchsorted(np.cumsum(w), rng.random() * total, side="right"))
        g = min(g, M - 1)
        s[g] = -s[g]
        if J is None:
            h = h + (sys.b / M) * 2.0 * s[g]
            h[g] -= (sys.b / M) * 2.0 * s[g]
        else:
            h = h + 2.0 * s[g] * J[g]
        times.append(t)
        mags.append(s.mean())
    return np.array(times), np.array(mags)


def _record(rec, ptr, grid, rows, t_new, value):
    """Fill grid slots with t < t_new for the given rows using ``value``."""
    G = grid.size
    while True:
        live = ptr[rows] < G
        if not live.any():
            return
        due = np.zeros_like(live)
        due[live] = grid[ptr[rows][live]] < t_new[live]
        if not due.any():
            return
        r = rows[due]
        rec[r, ptr[r]] = value[due]
        ptr[r] += 1


def gillespie_ensemble(sys: SpinSystem, s0, t_grid, runs: int, seed, keep_paths: bool = False) -> PathSummary:
    """Vectorized per-site Gillespie over ``runs`` independent copies."""
    rng = np.random.default_rng(seed)
    grid = np.asarray(t_grid, dtype=float)
    S = np.repeat(np.asarray(s0, dtype=float)[None], runs, axis=0)
    M = S.shape[1]
    t = np.zeros(runs)
    rec = np.empty((runs, grid.size))
    ptr = np.zeros(runs, dtype=int)
    active = np.arange(runs)
    while active.size:
        Sa = S[active]
        w = 0.5 * sys.c * (1.0 - Sa * np.tanh(sys.beta * local_field(sys, Sa)))
        total = w.sum(axis=1)
        with np.errstate(divide="ignore"):
            dt = np.where(total > 0, rng.exponential(1.0, active.size) / total, np.inf)
        t_new = t[active] + dt
        _record(rec, ptr, grid, active, t_new, Sa.mean(axis=1))
        alive = t_new <= grid[-1]
        # pick a site proportionally to its rate
        u = rng.random(active.size) * total
        g = np.minimum((np.cumsum(w, axis=1) <= u[:, None]).sum(axis=1), M - 1)
        rows = active[alive]
        S[rows, g[alive]] *= -1.0
        t[rows] = t_new[alive]
        active = rows
    return _summarize(grid, rec, keep_paths)


def discrete_run(sys: SpinSystem, s0, steps: int, h: float, seed) -> np.ndarray:
    """Discrete-time chain: each step flips site g with probability h w_g (at most one flip).

    Returns the magnetization after each step (length steps + 1).
    """
    rng = np.random.default_rng(seed)
    s = np.array(s0, dtype=float)
    out = np.empty(steps + 1)
    out[0] = s.mean()
    for n in range(steps):
        w = h * flip_rate(sys, s)
        if w.sum() > 1.0 + 1e-12:
            raise ValueError("h times the total flip rate must not exceed 1")
        u = rng.random()
        c = np.cumsum(w)
        g = int(np.searchsorted(c, u, side="right"))
        if g < s.size:
            s[g] = -s[g]
        out[n + 1] = s.mean()
    return out


def discrete_ensemble(sys: SpinSystem, s0, steps: int, h: float, runs: int, seed) -> PathSummary:
    rng = np.random.default_rng(seed)
    S = np.repeat(np.asarray(s0, dtype=float)[None], runs, axis=0)
    paths = np.empty((runs, steps + 1))
    paths[:, 0] = S.mean(axis=1)
    rows = np.arange(runs)
    for n in range(steps):
        w = h * flip_rate(sys, S)
        if np.max(w.sum(axis=1)) > 1.0 + 1e-12:
            raise ValueError("h times the total flip rate must not exceed 1")
        u = rng.random(runs)
        g = (np.cumsum(w, axis=1) <= u[:, None]).sum(axis=1)
        flip = g < S.shape[1]
        S[rows[flip], g[flip]] *= -1.0
        paths[:, n + 1] = S.mean(axis=1)
    return _summarize(h * np.arange(steps + 1), paths, False)


# ---------------------------------------------------------------------------
# perturbed dynamics


@dataclass(frozen=True)
class PerturbedRates:
    w_up: np.ndarray  # rate per up spin (flip to down)
    w_down: np.ndarray  # rate per down spin (flip to up)
    c_prime: np.ndarray
    r: np.ndarray
    dQ: np.ndarray  # Q' = -F_P
    dZ: np.ndarray  # Z' = -c Z + F - P F_P
    P: np.ndarray
    clamped: np.ndarray


def perturbed_step_rates(sys: SpinSystem, m, Q, Z, F: Callable, noise=0.0) -> PerturbedRates:
    """Curie-Weiss perturbed rates at magnetization m and stability state (Q, Z).

    P = m - tanh(beta Q) and q = Q - b m. With c' = c - F_Z and r = F_Q:
    an up spin flips at (c'/2)(1 - tanh(beta (q + b (m - 1/M)))) - r/2 and a
    down spin at (c'/2)(1 + tanh(beta (q + b (m + 1/M)))) + r/2, both
    clamped to [0, c']. ``F(X)`` returns (value, gradient) at X = (P, Q, Z);
    ``noise`` adds a zero-mean perturbation to r.
    """
    m, Q, Z = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (m, Q, Z)))
    M = sys.size
    P = m - np.tanh(sys.beta * Q)
    X = np.stack([P, Q, Z], axis=-1)
    Fv, G = F(X)
    FP, FQ, FZ = G[..., 0], G[..., 1], G[..., 2]
    cp = sys.c - FZ
    if np.any(cp <= 0):
        raise ValueError("perturbation too large: c - dF/dZ must stay positive")
    r = FQ + noise
    q = Q - sys.b * m
    wu = 0.5 * cp * (1.0 - np.tanh(sys.beta * (q + sys.b * (m - 1.0 / M)))) - 0.5 * r
    wd = 0.5 * cp * (1.0 + np.tanh(sys.beta * (q + sys.b * (m + 1.0 / M)))) + 0.5 * r
    clamped = (wu < 0) | (wu > cp) | (wd < 0) | (wd > cp)
    wu = np.clip(wu, 0.0, cp)
    wd = np.clip(wd, 0.0, cp)
    return PerturbedRates(wu, wd, cp, r, -FP, -sys.c * Z + Fv - P * FP, P, clamped)


def perturbed_ensemble(sys: SpinSystem, m0: float, Q0: float, Z0: float, F: Callable, t_grid, runs: int, seed,
                       noise: float = 0.0, keep_paths: bool = False) -> dict:
    """Lumped perturbed Gillespie ensemble (Curie-Weiss).

    After every event (Q, Z) takes one explicit Euler step over the waiting
    time. Returns summaries of m and P plus the clamping count.
    """
    if not sys.curie_weiss_coupling:
        raise ValueError("the lumped perturbed engine requires Curie-Weiss coupling")
    rng = np.random.default_rng(seed)
    M = sys.size
    grid = np.asarray(t_grid, dtype=float)
    k0 = 0.5 * M * (1.0 + m0)
    if abs(k0 - round(k0)) > 1e-9 or not 0 <= round(k0) <= M:
        raise ValueError(f"m0 = {m0} is not a magnetization of {M} spins (multiples of 2/M in [-1, 1])")
    k = np.full(runs, int(round(k0)), dtype=np.int64)
    Q = np.full(runs, float(Q0))
    Z = np.full(runs, float(Z0))
    t = np.zeros(runs)
    rec_m = np.empty((runs, grid.size))
    rec_P = np.empty((runs, grid.size))
    ptr = np.zeros(runs, dtype=int)
    ptr_P = np.zeros(runs, dtype=int)
    active = np.arange(runs)
    clamped = 0
    while active.size:
        ka = k[active]
        m = (2.0 * ka - M) / M
        jitter = noise * rng.uniform(-1.0, 1.0, active.size) if noise else 0.0
        R = perturbed_step_rates(sys, m, Q[active], Z[active], F, jitter)
        clamped += int(R.clamped.sum())
        down = ka * R.w_up
        up = (M - ka) * R.w_down
        total = down + up
        with np.errstate(divide="ignore"):
            dt = np.where(total > 0, rng.exponential(1.0, active.size) / total, np.inf)
        t_new = t[active] + dt
        _record(rec_m, ptr, grid, active, t_new, m)
        _record(rec_P, ptr_P, grid, active, t_new, R.P)
        alive = t_new <= grid[-1]
        # Euler update of (Q, Z) over the waiting time (capped at the horizon)
        step = np.minimum(t_new, grid[-1]) - t[active]
        Q[active] = Q[active] + step * R.dQ
        Z[active] = Z[active] + step * R.dZ
        go_down = rng.random(active.size) * total < down
        rows = active[alive]
        k[rows] += np.where(go_down[alive], -1, 1)
        t[rows] = t_new[alive]
        active = rows
    return {"m": _summarize(grid, rec_m, keep_paths), "P": _summarize(grid, rec_P, keep_paths), "clamped": clamped}


def perturbed_mean_field(sys: SpinSystem, m0: float, Q0: float, Z0: float, F: Callable, t_eval) -> np.ndarray:
    """Mean-field limit of the perturbed chain: columns (m, P, Q, Z) at ``t_eval``.

    m' = -(c - F_Z) P + F_Q, Q' = -F_P, Z' = -c Z + F - P F_P with P = m - tanh(beta Q).
    """
    from .flow import IntegratorConfig, solve_ode

    beta, c = sys.beta, sys.c

    def rhs(_t, y):
        m, Q, Z = y
        P = m - math.tanh(beta * Q)
        Fv, G = F(np.array([P, Q, Z]))
        FP, FQ, FZ = (float(v) for v in G)
        return np.array([-(c - FZ) * P + FQ, -FP, -c * Z + float(Fv) - P * FP])

    t_eval = np.asarray(t_eval, dtype=float)
    T = float(t_eval[-1])
    y0 = np.array([m0, Q0, Z0], dtype=float)
    if T == 0:
        Y = np.repeat(y0[None], t_eval.size, axis=0)
    else:
        Y = solve_ode(rhs, y0, T, IntegratorConfig(max_time=T, box=None), t_eval=t_eval).y
    P = Y[:, 0] - np.tanh(beta * Y[:, 1])
    return np.column_stack([Y[:, 0], P, Y[:, 1], Y[:, 2]])


def perturbed_run(sys: SpinSystem, s0, Q0: float, Z0: float, F: Callable, t_max: float, seed):
    """Per-site perturbed trajectory for any coupling.

    The field q = Q - b m is kept in step with Q after every event; for an
    explicit coupling ``b`` is the row-sum scale used in that relation.
    Returns arrays (t, m, Q, Z) at the event times.
    """
    rng = np.random.default_rng(seed)
    s = np.array(s0, dtype=float)
    M = s.size
    J = sys.coupling_matrix()
    Q, Z, t = float(Q0), float(Z0), 0.0
    out = [(0.0, s.mean(), Q, Z)]
    while True:
        m = s.mean()
        P = m - math.tanh(sys.beta * Q)
        Fv, G = F(np.array([P, Q, Z]))
        FP, FQ, FZ = float(G[0]), float(G[1]), float(G[2])
        cp = sys.c - FZ
        if cp <= 0:
            raise ValueError("perturbation too large: c - dF/dZ must stay positive")
        q = Q - sys.b * m
        h = q + s @ J
        w = 0.5 * cp * (1.0 - s * np.tanh(sys.beta * h)) - 0.5 * s * FQ
        w = np.clip(w, 0.0, cp)
        total = w.sum()
        dt = rng.exponential(1.0 / total) if total > 0 else math.inf
        step = min(dt, t_max - t)
        Q += step * (-FP)
        Z += step * (-sys.c * Z + float(Fv) - P * FP)
        t += dt
        if t > t_max:
            break
        g = min(int(np.searchsorted(np.cumsum(w), rng.random() * total, side="right")), M - 1)
        s[g] = -s[g]
        out.append((t, s.mean(), Q, Z))
    arr = np.array(out)
    return arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3]


def write_path_csv(path, t, m):
    return write_csv(path, ["t", "m"], zip(t, m))
