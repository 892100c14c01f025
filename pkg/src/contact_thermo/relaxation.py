"""Relaxation trajectories between Legendrians.

* ``shoot`` integrates from a grid of points on a source Legendrian and
  classifies each trajectory as captured by the target, escaped, or
  undecided, refining captured/escaped boundaries by bisection.
* ``verify_clubsuit`` / ``check_admissibility`` sample the sign conditions
  on dH(R) near the nodal set and far from it, and probe local attraction.
* ``compute_cores`` evolves the two halves of an invariant surface forward
  and backward and compares the limiting clouds with candidate Legendrians.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from .core import ContactHamiltonian, as_state
from .flow import IntegratorConfig, Trajectory, integrate_batch
from .io import write_csv
from .legendrian import Legendrian, distance_to

__all__ = [
    "ShootingProblem",
    "ShootingResult",
    "ShootingReport",
    "shoot",
    "ConditionReport",
    "verify_clubsuit",
    "check_admissibility",
    "clubsuit_example_hamiltonian",
    "CoresResult",
    "compute_cores",
    "hausdorff",
]

CAPTURED, ESCAPED, UNDECIDED = "captured", "escaped", "undecided"


@dataclass
class ShootingProblem:
    """Shoot from ``source`` toward ``target`` under the flow of ``H``.

    Attributes
    ----------
    horizon : float
        Integration time T; defaults to 50 / c with c = -dH(R) on the target.
    eps : float
        Capture radius around the target.
    window : tuple or None
        q-range of source points (graph pieces are clipped to it).
    sigma_plus : callable or None
        Membership test for Sigma_+; defaults to H > 0.
    """

    H: ContactHamiltonian
    source: Legendrian
    target: Legendrian
    horizon: float | None = None
    eps: float = 1e-3
    window: tuple[float, float] | None = None
    sigma_plus: Callable[[np.ndarray], np.ndarray] | None = None
    samples: int = 501
    cfg: IntegratorConfig | None = None

    def __post_init__(self):
        pts = self.target.points(256)
        resid = float(np.max(np.abs(self.H(pts))))
        if resid > 1e-8:
            raise ValueError(f"target is not inside {{H = 0}} (max |H| = {resid:.3g})")
        if self.horizon is None:
            c = float(np.min(-self.H.reeb_derivative(pts)))
            self.horizon = 50.0 / c if c > 0 else 50.0
        if self.sigma_plus is None:
            H = self.H
            self.sigma_plus = lambda X: H(X) > 0

    def source_pieces(self):
        out = []
        for pc in self.source.pieces:
            lo, hi = pc.lo, pc.hi
            if self.window is not None and pc.graph:
                lo, hi = max(lo, self.window[0]), min(hi, self.window[1])
            if hi > lo:
                out.append((pc, lo, hi))
        if not out:
            raise ValueError("source has no points in the window")
        return out


@dataclass
class ShootingResult:
    piece: int
    frac: float  # position along the (clipped) source piece, in [0, 1]
    x0: np.ndarray
    classification: str
    stayed_in_sigma_plus: bool
    final_distance: float
    trajectory: Trajectory | None = field(default=None, repr=False)

    @property
    def u(self) -> float:
        """Global parameter piece + frac."""
        return self.piece + self.frac


@dataclass
class ShootingReport:
    results: list[ShootingResult]
    boundaries: list[tuple[int, float, float]]  # (piece, frac_lo, frac_hi) of captured/escaped switches

    @property
    def captured(self) -> list[ShootingResult]:
        return [r for r in self.results if r.classification == CAPTURED]

    def captured_in_sigma_plus(self) -> list[ShootingResult]:
        return [r for r in self.captured if r.stayed_in_sigma_plus]

    def counts(self) -> dict:
        out = {CAPTURED: 0, ESCAPED: 0, UNDECIDED: 0}
        for r in self.results:
            out[r.classification] += 1
        return out

    def to_csv(self, path):
        rows = ((r.piece, r.frac, r.classification, r.final_distance) for r in self.results)
        return write_csv(path, ["piece", "parameter", "classification", "final_distance"], rows)


def _param_point(prob: ShootingProblem, piece: int, frac: float) -> np.ndarray:
    pc, lo, hi = prob.source_pieces()[piece]
    return pc.point(np.array(lo + frac * (hi - lo)))


def _classify(prob: ShootingProblem, times, points, escaped):
    """Classification of one sampled trajectory."""
    T = prob.horizon
    H = prob.H
    hv = H(points)
    start_plus = bool(prob.sigma_plus(points[0]))
    tail = times >= times[-1] - T / 5.0
    d_tail = distance_to(prob.target, points[tail])
    final = float(d_tail[-1])
    full = times[-1] >= T * (1 - 1e-12)
    captured = full and not escaped and bool(np.all(d_tail <= prob.eps))
    # Sigma_+ contract: H > 0 at every sample before the first entry into the tube
    d_all = distance_to(prob.target, points) if captured else None
    if captured:
        inside = np.flatnonzero(d_all <= prob.eps)
        upto = inside[0] if inside.size else len(times)
        stayed = start_plus and bool(np.all(hv[:upto] > 0))
        return CAPTURED, stayed, final
    stayed = start_plus and bool(np.all(hv > 0))
    crossed = start_plus and bool(np.any(hv < 0))
    if escaped or crossed:
        return ESCAPED, stayed, final
    return UNDECIDED, stayed, final


def _run_batch(prob: ShootingProblem, X: np.ndarray):
    t_eval = np.linspace(0.0, prob.horizon, prob.samples)
    cfg = (prob.cfg or IntegratorConfig(rel_tol=1e-9, abs_tol=1e-12)).replace(max_time=prob.horizon)
    bt = integrate_batch(prob.H, X, cfg, t_eval=t_eval)
    return bt


def shoot(prob: ShootingProblem, grid_size: int = 64, refine: bool = True, tol: float = 1e-8,
          keep_trajectories: bool = True) -> ShootingReport:
    """Shoot from ``grid_size`` source points and classify each trajectory."""
    pieces = prob.source_pieces()
    per = max(2, int(math.ceil(grid_size / len(pieces))))
    params = [(i, float(f)) for i in range(len(pieces)) for f in np.linspace(0.0, 1.0, per)]
    X = np.stack([_param_point(prob, i, f) for i, f in params])
    bt = _run_batch(prob, X)
    results = []
    for k, (i, f) in enumerate(params):
        pts = bt.points[:, k]
        cls, stayed, final = _classify(prob, bt.times, pts, bool(bt.escaped[k]))
        traj = Trajectory(bt.times, pts, [], 1) if keep_trajectories else None
        results.append(ShootingResult(i, f, X[k], cls, stayed, final, traj))

    boundaries = []
    if refine:
        for a, b in zip(results[:-1], results[1:]):
            if a.piece != b.piece or {a.classification, b.classification} != {CAPTURED, ESCAPED}:
                continue
            lo, hi = a.frac, b.frac
            cls_lo = a.classification
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                bt1 = _run_batch(prob, _param_point(prob, a.piece, mid)[None])
                cls_mid = _classify(prob, bt1.times, bt1.points[:, 0], bool(bt1.escaped[0]))[0]
                if cls_mid == UNDECIDED:
                    break
                if cls_mid == cls_lo:
                    lo = mid
                else:
                    hi = mid
            boundaries.append((a.piece, lo, hi))
    return ShootingReport(results, boundaries)


# ---------------------------------------------------------------------------
# sign conditions


@dataclass
class ConditionReport:
    conditions: dict  # name -> bool
    kappa1: float | None
    kappa2: float | None
    details: dict = field(default_factory=dict)

    @property
    def failed(self) -> list[str]:
        return [k for k, ok in self.conditions.items() if not ok]

    @property
    def admissible(self) -> bool:
        return not self.failed

    holds = admissible


def _nodal_points(H: ContactHamiltonian, box, n_side: int = 100, nz: int = 64):
    """Points of {H = 0} found on vertical lines over an n_side x n_side (p, q) grid."""
    (p0, p1), (q0, q1), (z0, z1) = box
    P, Q = np.meshgrid(np.linspace(p0, p1, n_side), np.linspace(q0, q1, n_side), indexing="ij")
    P, Q = P.ravel(), Q.ravel()
    zs = np.linspace(z0, z1, nz)
    X = np.stack(np.broadcast_arrays(P[:, None], Q[:, None], zs[None, :]), axis=-1)
    hv = H(X)
    found = []
    for j in range(nz - 1):
        a, b = hv[:, j], hv[:, j + 1]
        sel = np.flatnonzero((a == 0) | (a * b < 0))
        if not sel.size:
            continue
        lo = np.full(sel.size, zs[j])
        hi = np.full(sel.size, zs[j + 1])
        ha = a[sel]
        for _ in range(50):
            mid = 0.5 * (lo + hi)
            hm = H(np.stack([P[sel], Q[sel], mid], axis=-1))
            same = np.sign(hm) == np.sign(ha)
            lo = np.where(same, mid, lo)
            ha = np.where(same, hm, ha)
            hi = np.where(same, hi, mid)
        found.append(np.stack([P[sel], Q[sel], 0.5 * (lo + hi)], axis=-1))
    return np.concatenate(found) if found else np.empty((0, 3))


def _tube_points(target: Legendrian, radius: float, count: int, rng) -> np.ndarray:
    base = target.points(max(16, count // 16))
    idx = rng.integers(0, base.shape[0], count)
    off = rng.uniform(-radius, radius, (count, 3))
    off[:, 1] = 0.0
    return base[idx] + off


def verify_clubsuit(H: ContactHamiltonian, target: Legendrian, region=None, n: int = 10_000,
                    tube: float = 0.05, probes: int = 16, horizon: float | None = None,
                    seed: int = 0, sigma_plus: Callable | None = None) -> ConditionReport:
    """Sampled check of the four sign/attraction conditions.

    (i)   dH(R) <= 0 on Sigma_+ near the nodal set. Checked on points of
          {H = 0} inside ``region`` (a violation there rules out every
          kappa1 > 0) and on box samples; kappa1 is the largest sampled
          value with no violation in {0 < H < kappa1}.
    (ii)  dH(R) <= 0 on {H >= kappa2}; kappa2 is the smallest sampled level
          above every violation and must leave at least 10% of the Sigma_+
          samples to check.
    (iii) dH(R) < 0 on a tube of radius ``tube`` around the target.
    (iv)  ``probes`` trajectories from the tube converge to the target.
    """
    rng = np.random.default_rng(seed)
    if region is None:
        region = ((-1.0, 1.0), (-2.0, 2.0) if H.period is None else (0.0, H.period), (-2.0, 2.0))
    sp = sigma_plus or (lambda X: H(X) > 0)
    side = max(2, int(round(n ** (1.0 / 3.0))))
    axes = [np.linspace(lo, hi, side) for lo, hi in region]
    B = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    hv = H(B)
    hz = H.reeb_derivative(B)
    plus = sp(B)
    viol = plus & (hz > 1e-12)
    Hpos = hv[plus]

    nod = _nodal_points(H, region, n_side=int(round(math.sqrt(n))))
    on_M_bad = int(np.count_nonzero(H.reeb_derivative(nod) > 1e-12)) if nod.size else 0

    if viol.any():
        kappa1 = float(np.min(hv[viol]))
        kappa2 = float(np.nextafter(np.max(hv[viol]), np.inf))
    elif Hpos.size:
        kappa1, kappa2 = float(np.quantile(Hpos, 0.25)), float(np.quantile(Hpos, 0.5))
    else:
        kappa1 = kappa2 = None
    ok_i = on_M_bad == 0 and kappa1 is not None and kappa1 > 0
    ok_ii = (kappa2 is not None and kappa1 is not None and kappa2 > kappa1
             and Hpos.size > 0 and kappa2 <= float(np.quantile(Hpos, 0.9)))

    tube_pts = _tube_points(target, tube, n, rng)
    ok_iii = bool(np.all(H.reeb_derivative(tube_pts) < 0))

    X0 = _tube_points(target, tube, probes, rng)
    if horizon is None:
        c = float(np.min(-H.reeb_derivative(target.points(64))))
        horizon = 50.0 / c if c > 0 else 50.0
    bt = integrate_batch(H, X0, IntegratorConfig(max_time=horizon, rel_tol=1e-9, abs_tol=1e-12),
                         t_eval=[horizon])
    final = distance_to(target, bt.points[-1])
    ok_iv = bool(not bt.escaped.any() and np.all(final <= 1e-3))
    return ConditionReport(
        {"i": bool(ok_i), "ii": bool(ok_ii), "iii": ok_iii, "iv": ok_iv},
        kappa1, kappa2,
        {"violations_on_M": on_M_bad, "box_violations": int(viol.sum()), "sigma_plus_samples": int(Hpos.size),
         "probe_final_distance": float(np.max(final)) if final.size else None},
    )


def check_admissibility(adm, region=None, **kw) -> ConditionReport:
    """Admissibility of ``H = -cZ + F`` with respect to the zero section (periodic in Q)."""
    from .legendrian import zero_section

    if region is None:
        region = ((-1.0, 1.0), (0.0, adm.tau), (-2.0, 2.0))
    target = zero_section(period=adm.tau, frame="PQZ")
    return verify_clubsuit(adm.H, target, region, **kw)


def clubsuit_example_hamiltonian(c: float = 1.0) -> ContactHamiltonian:
    """-c z for z >= -1, continued as c (1 - tanh(z + 1)) below: bounded and positive on {z < 0}."""
    def value(x):
        z = x[..., 2]
        return np.where(z >= -1.0, -c * z, c * (1.0 - np.tanh(z + 1.0)))

    def grad(x):
        z = x[..., 2]
        t = np.tanh(np.minimum(z + 1.0, 0.0))
        hz = np.where(z >= -1.0, -c, -c * (1.0 - t * t))
        zero = np.zeros_like(z)
        return np.stack([zero, zero, hz], axis=-1)

    return ContactHamiltonian(value, grad, name="clubsuit_example", meta={"c": c})


# ---------------------------------------------------------------------------
# cores


@dataclass
class CoresResult:
    gamma: np.ndarray  # points of {dH(R) = 0} on M
    cloud_minus: np.ndarray  # forward image of M_- at s_max
    cloud_plus: np.ndarray  # backward image of M_+ at s_max
    hausdorff_minus: float | None = None
    hausdorff_plus: float | None = None


def hausdorff(A: np.ndarray, B: np.ndarray, q_period: float | None = None) -> float:
    """Symmetric Hausdorff distance; q (column 1) is periodic when ``q_period`` is set."""
    if A.size == 0 or B.size == 0:
        return math.inf

    def copies(X):
        if q_period is None:
            return X
        Xw = X.copy()
        Xw[:, 1] = np.mod(Xw[:, 1], q_period)
        return np.concatenate([Xw + [0, s, 0] for s in (-q_period, 0.0, q_period)])

    def directed(X, Y):
        tree = cKDTree(copies(Y))
        Xw = X.copy()
        if q_period is not None:
            Xw[:, 1] = np.mod(Xw[:, 1], q_period)
        return float(np.max(tree.query(Xw)[0]))

    return max(directed(A, B), directed(B, A))


def compute_cores(H: ContactHamiltonian, surface: Callable[[np.ndarray, np.ndarray], np.ndarray],
                  u_range: tuple[float, float], v_range: tuple[float, float], n_u: int = 64, n_v: int = 64,
                  s_max: float = 15.0, candidates: tuple[Legendrian | None, Legendrian | None] = (None, None),
                  candidate_samples: int = 4096, invariance_tol: float = 1e-8, cfg: IntegratorConfig | None = None,
                  ) -> CoresResult:
    """Cores of an invariant surface M = {H = 0} given by ``surface(u, v)``.

    Gamma is located by sign changes of dH(R) along v. M_- = {dH(R) < 0} is
    pushed forward and M_+ = {dH(R) > 0} backward by time ``s_max``; the
    clouds are compared with the candidate Legendrians by Hausdorff
    distance (periodic in q when H is).
    """
    u = np.linspace(*u_range, n_u, endpoint=H.period is None)
    v = np.linspace(*v_range, n_v)
    U, V = np.meshgrid(u, v, indexing="ij")
    X = as_state(surface(U, V))
    if float(np.max(np.abs(H(X)))) > invariance_tol:
        raise ValueError("surface is not inside {H = 0}")
    hz = H.reeb_derivative(X)

    gam = []
    for i in range(n_u):
        row = hz[i]
        for j in np.flatnonzero(row[:-1] * row[1:] < 0):
            lo, hi = v[j], v[j + 1]
            f_lo = row[j]
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                fm = float(H.reeb_derivative(surface(np.array(u[i]), np.array(mid))))
                if np.sign(fm) == np.sign(f_lo):
                    lo, f_lo = mid, fm
                else:
                    hi = mid
            gam.append(surface(np.array(u[i]), np.array(0.5 * (lo + hi))))
    gamma = np.array(gam).reshape(-1, 3)

    cfg = (cfg or IntegratorConfig(rel_tol=1e-9, abs_tol=1e-12)).replace(max_time=s_max)
    flat = X.reshape(-1, 3)
    hzf = hz.ravel()
    minus = flat[hzf < 0]
    plus = flat[hzf > 0]
    cloud_minus = integrate_batch(H, minus, cfg, t_eval=[s_max]).points[-1] if minus.size else minus
    cloud_plus = integrate_batch(H.reversed(), plus, cfg, t_eval=[s_max]).points[-1] if plus.size else plus
    res = CoresResult(gamma, cloud_minus, cloud_plus)
    for attr, cloud, cand in (("hausdorff_minus", cloud_minus, candidates[0]),
                              ("hausdorff_plus", cloud_plus, candidates[1])):
        if cand is not None and cloud.size:
            ref = cand.points(candidate_samples)
            setattr(res, attr, hausdorff(cloud, ref, H.period))
    return res
