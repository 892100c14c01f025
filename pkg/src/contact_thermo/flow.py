"""Adaptive integration of contact Hamiltonian flows.

The stepper is the Dormand-Prince 5(4) pair with a PI step-size controller
and the 4th-order continuous extension used for event location and output
sampling. One generic ``solve_ode`` drives everything (contact flows, the
master equation, scalar mean-field ODEs); ``integrate`` wraps it for a
contact Hamiltonian and ``integrate_batch`` advances a stack of phase points
with a shared step sequence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .core import ContactHamiltonian, NonFiniteError, as_state, contact_vector_field

__all__ = [
    "EventSpec",
    "Event",
    "IntegratorConfig",
    "Trajectory",
    "BatchTrajectory",
    "ODEResult",
    "solve_ode",
    "integrate",
    "integrate_batch",
    "flow_map",
    "flow_map_differential",
    "detect_convergence",
    "EVENT_KINDS",
]

EVENT_KINDS = ("hypersurface_crossing", "entered_neighborhood", "escaped_box", "converged", "max_time")

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = _B - np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
# continuous extension: y(t0 + th h) = y0 + h * sum_i K_i (P_i . [th, th^2, th^3, th^4])
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

_SAFETY = 0.9
_FAC_MIN, _FAC_MAX = 0.2, 10.0
_PI_BETA = 0.04
_PI_ALPHA = 0.2 - 0.75 * _PI_BETA


@dataclass(frozen=True)
class EventSpec:
    """Scalar event g(t, x) = 0 located by bisection on the dense output.

    ``direction`` > 0 triggers only on upward crossings, < 0 only on downward.
    """

    func: Callable[[float, np.ndarray], float]
    direction: int = 0
    terminal: bool = False
    name: str = "event"
    kind: str = "hypersurface_crossing"


@dataclass(frozen=True)
class Event:
    time: float
    kind: str
    payload: dict = field(default_factory=dict)


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = math.inf
    max_time: float = 10.0
    events: tuple[EventSpec, ...] = ()
    box: float | None = 50.0
    first_step: float | None = None
    fixed_step: float | None = None
    max_steps: int = 2_000_000

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if not self.max_time > 0:
            raise ValueError("max_time must be positive")
        object.__setattr__(self, "events", tuple(self.events))

    def replace(self, **kw) -> "IntegratorConfig":
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(kw)
        return IntegratorConfig(**d)


@dataclass
class ODEResult:
    t: np.ndarray
    y: np.ndarray
    events: list[Event]
    status: str  # "max_time" | "terminal_event" | "escaped" | "failed"
    nfev: int = 0
    naccept: int = 0
    nreject: int = 0


def _rms_norm(err: np.ndarray, batch: bool) -> float:
    if batch and err.ndim > 1:
        return float(np.max(np.sqrt(np.mean(err * err, axis=tuple(range(1, err.ndim))))))
    return float(np.sqrt(np.mean(err * err)))


def _dense(y0, K, h, theta):
    coeff = _P @ np.array([theta, theta ** 2, theta ** 3, theta ** 4])
    return y0 + h * np.tensordot(coeff, K, axes=(0, 0))


def solve_ode(f: Callable[[float, np.ndarray], np.ndarray], y0, t_end: float,
              cfg: IntegratorConfig | None = None, t_eval: Sequence[float] | None = None,
              batch: bool = False, box_fn: Callable[[np.ndarray], np.ndarray] | None = None) -> ODEResult:
    """Integrate y' = f(t, y) from t = 0 to ``t_end`` (> 0).

    With ``batch=True`` the leading axis of ``y0`` indexes independent
    systems that share one step sequence; rows leaving the box are frozen
    and reported in an ``escaped_box`` event payload instead of terminating.
    ``box_fn`` maps states to the coordinates tested against ``cfg.box``.
    """
    cfg = cfg or IntegratorConfig(max_time=t_end)
    y = np.array(y0, dtype=float, copy=True)
    t = 0.0
    t_end = float(t_end)
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    time_tol = 1e-12 * t_end
    events: list[Event] = []
    ts, ys = [0.0], [y.copy()]
    eval_times = None if t_eval is None else np.asarray(t_eval, dtype=float)
    if eval_times is not None:
        if np.any(np.diff(eval_times) < 0) or eval_times[0] < 0 or eval_times[-1] > t_end * (1 + 1e-14):
            raise ValueError("t_eval must be sorted within [0, t_end]")
        ts, ys = [], []
        ei = 0
        while ei < len(eval_times) and eval_times[ei] <= 0.0:
            ts.append(float(eval_times[ei]))
            ys.append(y.copy())
            ei += 1
    frozen = np.zeros(y.shape[0], dtype=bool) if batch else None
    box_coords = box_fn or (lambda s: s)

    def rhs(tt, yy):
        d = np.asarray(f(tt, yy), dtype=float)
        if batch and frozen.any():
            d = d.copy()
            d[frozen] = 0.0
        return d

    nfev = 0
    try:
        k0 = rhs(t, y)
    except NonFiniteError as exc:
        events.append(Event(0.0, "escaped_box", {"reason": "non_finite", "detail": str(exc)}))
        return ODEResult(np.array(ts), np.array(ys), events, "failed", 1)
    nfev += 1
    if not np.all(np.isfinite(k0)):
        events.append(Event(0.0, "escaped_box", {"reason": "non_finite"}))
        return ODEResult(np.array(ts), np.array(ys), events, "failed", nfev)

    scale0 = cfg.abs_tol + cfg.rel_tol * np.abs(y)
    if cfg.fixed_step is not None:
        h = float(cfg.fixed_step)
    elif cfg.first_step is not None:
        h = float(cfg.first_step)
    else:
        d0 = _rms_norm(y / scale0, batch)
        d1 = _rms_norm(k0 / scale0, batch)
        h = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
        h = min(h, t_end, cfg.max_step)
    g_prev = [spec.func(t, y) for spec in cfg.events]
    err_prev = 1e-4
    naccept = nreject = 0
    status = "max_time"
    K = np.empty((7,) + y.shape)

    while t < t_end - time_tol:
        if naccept + nreject > cfg.max_steps:
            events.append(Event(t, "escaped_box", {"reason": "max_steps"}))
            status = "failed"
            break
        h = min(h, cfg.max_step, t_end - t)
        if h < 1e-14 * max(1.0, abs(t)):
            events.append(Event(t, "escaped_box", {"reason": "step_underflow"}))
            status = "failed"
            break
        K[0] = k0
        try:
            for s in range(1, 7):
                ys_ = y + h * np.tensordot(np.array(_A[s]), K[:s], axes=(0, 0))
                K[s] = rhs(t + _C[s] * h, ys_)
        except NonFiniteError:
            if cfg.fixed_step is not None:
                events.append(Event(t, "escaped_box", {"reason": "non_finite"}))
                status = "failed"
                break
            h *= 0.25
            nreject += 1
            continue
        nfev += 6
        y_new = y + h * np.tensordot(_B, K, axes=(0, 0))
        if not np.all(np.isfinite(y_new)):
            if cfg.fixed_step is not None:
                events.append(Event(t, "escaped_box", {"reason": "non_finite"}))
                status = "failed"
                break
            h *= 0.25
            nreject += 1
            continue
        if cfg.fixed_step is not None:
            err = 0.0
        else:
            scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
            e = h * np.tensordot(_E, K, axes=(0, 0)) / scale
            if batch and frozen.any():
                e[frozen] = 0.0
            err = _rms_norm(e, batch)
        if err > 1.0:
            h *= max(_FAC_MIN, _SAFETY * err ** -0.2)
            nreject += 1
            continue

        # accepted step [t, t + h]
        t_new = t + h
        naccept += 1
        terminal_hit = None
        if cfg.events and not batch:
            g_new = [spec.func(t_new, y_new) for spec in cfg.events]
            hits = []
            for i, spec in enumerate(cfg.events):
                g0, g1 = g_prev[i], g_new[i]
                crossed = (g0 < 0 <= g1) or (g0 > 0 >= g1)
                if not crossed or g0 == 0:
                    continue
                up = g1 > g0
                if spec.direction > 0 and not up or spec.direction < 0 and up:
                    continue
                lo, hi = 0.0, 1.0
                glo = g0
                while (hi - lo) * h > time_tol:
                    mid = 0.5 * (lo + hi)
                    gm = spec.func(t + mid * h, _dense(y, K, h, mid))
                    if (gm < 0) == (glo < 0) and gm != 0:
                        lo, glo = mid, gm
                    else:
                        hi = mid
                te = t + hi * h
                hits.append((te, hi, i, spec))
            hits.sort(key=lambda r: r[0])
            for te, theta, i, spec in hits:
                ye = _dense(y, K, h, theta)
                events.append(Event(te, spec.kind, {"name": spec.name, "state": ye.tolist()}))
                if spec.terminal:
                    terminal_hit = (te, theta, ye)
                    break
            g_prev = g_new

        if terminal_hit is not None:
            te, theta, ye = terminal_hit
            if eval_times is not None:
                while ei < len(eval_times) and eval_times[ei] <= te:
                    ts.append(float(eval_times[ei]))
                    ys.append(_dense(y, K, h, (eval_times[ei] - t) / h))
                    ei += 1
            else:
                ts.append(te)
                ys.append(ye)
            t, y = te, ye
            status = "terminal_event"
            break

        if eval_times is not None:
            while ei < len(eval_times) and eval_times[ei] <= t_new + time_tol:
                te = min(float(eval_times[ei]), t_new)
                ts.append(float(eval_times[ei]))
                ys.append(y_new.copy() if te >= t_new else _dense(y, K, h, (te - t) / h))
                ei += 1

        y_prev, t_prev = y, t
        t, y = t_new, y_new
        k0 = K[6].copy()  # FSAL

        if cfg.box is not None:
            outside = np.abs(box_coords(y)) > cfg.box
            if batch:
                rows = np.any(outside.reshape(y.shape[0], -1), axis=1) & ~frozen
                if rows.any():
                    frozen |= rows
                    events.append(Event(t, "escaped_box", {"rows": np.flatnonzero(rows).tolist()}))
                    k0[rows] = 0.0
            elif np.any(outside):
                events.append(Event(t, "escaped_box", {"state": y.tolist()}))
                if eval_times is None:
                    ts.append(t)
                    ys.append(y.copy())
                status = "escaped"
                break

        if eval_times is None:
            ts.append(t)
            ys.append(y.copy())

        if cfg.fixed_step is None:
            err = max(err, 1e-10)
            fac = _SAFETY * err ** -_PI_ALPHA * err_prev ** _PI_BETA
            fac = min(_FAC_MAX, max(_FAC_MIN, fac))
            h *= fac
            err_prev = err
        del y_prev, t_prev

    if status == "max_time":
        events.append(Event(t, "max_time", {}))
    return ODEResult(np.array(ts), np.array(ys), events, status, nfev, naccept, nreject)


@dataclass
class Trajectory:
    """Time-stamped phase points of one flow line plus event annotations."""

    times: np.ndarray
    points: np.ndarray
    events: list[Event]
    n: int = 1
    status: str = "max_time"

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.points = np.asarray(self.points, dtype=float)
        if self.points.shape[0] != self.times.shape[0]:
            raise ValueError("times and points must have equal length")

    def __len__(self):
        return len(self.times)

    @property
    def endpoint(self) -> np.ndarray:
        return self.points[-1]

    @property
    def p(self):
        return self.points[:, :self.n]

    @property
    def q(self):
        return self.points[:, self.n:2 * self.n]

    @property
    def z(self):
        return self.points[:, 2 * self.n]

    def events_of(self, kind: str) -> list[Event]:
        return [e for e in self.events if e.kind == kind]

    @property
    def escaped(self) -> bool:
        return any(e.kind == "escaped_box" for e in self.events)

    def with_event(self, event: Event) -> "Trajectory":
        return Trajectory(self.times, self.points, [*self.events, event], self.n, self.status)

    def to_csv(self, path) -> Path:
        from .io import write_trajectory_csv

        return write_trajectory_csv(path, self)


@dataclass
class BatchTrajectory:
    times: np.ndarray
    points: np.ndarray  # (T, K, 2n+1)
    escaped: np.ndarray  # (K,) bool
    n: int = 1

    def row(self, k: int) -> Trajectory:
        return Trajectory(self.times, self.points[:, k], [], self.n)


def _box_fn(H: ContactHamiltonian):
    if H.period is None:
        return None
    n, tau = H.n, H.period

    def wrap(x):
        w = x.copy()
        w[..., n:2 * n] = np.mod(w[..., n:2 * n], tau)
        return w

    return wrap


def integrate(H: ContactHamiltonian, x0, cfg: IntegratorConfig | None = None,
              t_eval: Sequence[float] | None = None) -> Trajectory:
    """Integrate the contact flow of ``H`` from ``x0`` over [0, cfg.max_time]."""
    cfg = cfg or IntegratorConfig()
    x0 = as_state(x0)
    if x0.ndim != 1:
        raise ValueError("integrate takes one phase point; use integrate_batch for stacks")
    if x0.size != H.dim:
        raise ValueError(f"point has {x0.size} coordinates, Hamiltonian expects {H.dim}")
    res = solve_ode(lambda t, x: contact_vector_field(H, x), x0, cfg.max_time, cfg, t_eval,
                    box_fn=_box_fn(H))
    return Trajectory(res.t, res.y, res.events, H.n, res.status)


def integrate_batch(H: ContactHamiltonian, X0, cfg: IntegratorConfig | None = None,
                    t_eval: Sequence[float] | None = None) -> BatchTrajectory:
    """Advance a stack of points ``(K, 2n+1)`` with one shared step sequence."""
    cfg = cfg or IntegratorConfig()
    X0 = as_state(X0)
    if X0.ndim != 2:
        raise ValueError("integrate_batch expects an array of shape (K, 2n+1)")
    res = solve_ode(lambda t, x: contact_vector_field(H, x), X0, cfg.max_time, cfg.replace(events=()),
                    t_eval, batch=True, box_fn=_box_fn(H))
    escaped = np.zeros(X0.shape[0], dtype=bool)
    for ev in res.events:
        if ev.kind == "escaped_box" and "rows" in ev.payload:
            escaped[ev.payload["rows"]] = True
    return BatchTrajectory(res.t, res.y, escaped, H.n)


def flow_map(H: ContactHamiltonian, X0, t: float, cfg: IntegratorConfig | None = None) -> np.ndarray:
    """phi^t applied to a point or stack of points (t may be negative)."""
    X0 = as_state(X0)
    if t == 0:
        return X0.copy()
    G = H if t > 0 else H.reversed()
    cfg = (cfg or IntegratorConfig()).replace(max_time=abs(t), events=())
    single = X0.ndim == 1
    out = integrate_batch(G, X0[None] if single else X0, cfg, t_eval=[abs(t)])
    return out.points[-1][0] if single else out.points[-1]


def flow_map_differential(H: ContactHamiltonian, x0, t: float, basis=None,
                          cfg: IntegratorConfig | None = None) -> np.ndarray:
    """Central-difference D_x phi^t; column i is the image of ``basis[i]``.

    The 2(2n+1) displaced points are integrated together so they share a step
    sequence and integration error largely cancels in the differences.
    """
    x0 = as_state(x0)
    d = x0.size
    basis = np.eye(d) if basis is None else np.asarray(basis, dtype=float)
    if t == 0:
        return basis.T.copy()
    if t < 0:
        raise ValueError("t must be non-negative")
    delta = 1e-6 * max(1.0, float(np.linalg.norm(x0)))
    cfg = (cfg or IntegratorConfig()).replace(rel_tol=1e-11, abs_tol=1e-13, box=None)
    X = np.concatenate([x0 + delta * basis, x0 - delta * basis])
    Y = flow_map(H, X, t, cfg)
    m = basis.shape[0]
    return ((Y[:m] - Y[m:]) / (2 * delta)).T


def detect_convergence(traj: Trajectory, target, eps: float, window: float) -> bool:
    """True iff every sample in the trailing ``window`` is within ``eps`` of ``target``.

    ``target`` is a Legendrian or a callable returning distances for an array of points.
    """
    from .legendrian import Legendrian, distance_to

    if len(traj) == 0:
        return False
    t_last = traj.times[-1]
    if t_last - traj.times[0] < window:
        return False
    mask = traj.times >= t_last - window
    pts = traj.points[mask]
    d = distance_to(target, pts) if isinstance(target, Legendrian) else np.asarray(target(pts))
    return bool(np.all(d <= eps))
