"""Worked models with closed-form predictions.

Newton's law of cooling
    p, q, z are temperature, entropy and internal energy; equilibria lie on
    {z = phi(q), p = phi'(q)}. Three Hamiltonians are provided: ``coupled``
    (relaxation to a target entropy sigma), ``isentropic`` (b = 0) and
    ``sine`` (entropy creeps up to the next multiple of pi/N).

Contact Moebius dynamics
    H = a(p^2 + z^2) on J^1 S^1 with a cutoff profile a(s) = s - 1 near the
    unit torus. Inside the solid torus w = z + i p obeys w' = w^2 - 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import ContactHamiltonian, make_contactomorphism
from .flow import IntegratorConfig, Trajectory, integrate

__all__ = [
    "exp_clipped",
    "CoolingModel",
    "cooling_hamiltonian",
    "cooling_closed_form",
    "cooling_flow",
    "cooling_isentropic",
    "cooling_sine",
    "sine_closed_form_q",
    "fit_decay_rate",
    "MoebiusModel",
    "moebius_closed_form",
    "moebius_trajectory",
]

Q_CLIP = 700.0


def exp_clipped(q):
    """e^q with q clipped at 700 to stay finite."""
    return np.exp(np.minimum(np.asarray(q, dtype=float), Q_CLIP))


@dataclass(frozen=True)
class CoolingModel:
    """Parameters of the cooling Hamiltonians.

    ``phi``, ``dphi`` and ``ddphi`` default to the clipped exponential (an
    ideal gas at constant volume).
    """

    a: float = 2.0
    b: float = 1.0
    sigma: float = 0.0
    variant: str = "coupled"  # coupled | isentropic | sine
    eps: float = 0.0
    N: int = 1
    phi: Callable = exp_clipped
    dphi: Callable = exp_clipped
    ddphi: Callable = exp_clipped

    def __post_init__(self):
        if self.variant not in ("coupled", "isentropic", "sine"):
            raise ValueError(f"unknown cooling variant {self.variant!r}")
        if self.variant == "coupled" and not self.a > self.b > 0:
            raise ValueError("the coupled variant needs a > b > 0")
        if self.variant == "isentropic" and (self.b != 0 or not self.a > 0):
            raise ValueError("the isentropic variant needs b = 0 and a > 0")
        if self.variant == "sine":
            if not (self.a > 0 and self.eps > 0 and self.N > 0):
                raise ValueError("the sine variant needs a, eps, N > 0")
            if not self.eps * self.N < self.a:
                raise ValueError(f"the sine variant needs eps*N < a (got {self.eps * self.N:g} >= {self.a:g})")

    def coordinates(self):
        """The contactomorphism to (P, Q, Z) for this variant."""
        sigma = self.sigma if self.variant == "coupled" else 0.0
        return make_contactomorphism("cooling", phi=self.phi, dphi=self.dphi, ddphi=self.ddphi, sigma=sigma)

    def equilibrium(self, q) -> np.ndarray:
        return np.array([float(self.dphi(q)), float(q), float(self.phi(q))])


def cooling_hamiltonian(model: CoolingModel) -> ContactHamiltonian:
    """The variant's Hamiltonian in (p, q, z) with analytic gradient."""
    a, b, s, eps, N = model.a, model.b, model.sigma, model.eps, model.N
    f, df, ddf = model.phi, model.dphi, model.ddphi

    if model.variant == "sine":
        def value(x):
            p, q, z = x[..., 0], x[..., 1], x[..., 2]
            return -a * (z - f(q)) - eps * (p - df(q)) * np.sin(N * q) ** 2

        def grad(x):
            p, q = x[..., 0], x[..., 1]
            s2 = np.sin(N * q) ** 2
            hp = -eps * s2
            hq = a * df(q) + eps * ddf(q) * s2 - eps * (p - df(q)) * N * np.sin(2 * N * q)
            return np.stack(np.broadcast_arrays(hp, hq, np.full_like(p, -a)), axis=-1)
    else:
        bb = b if model.variant == "coupled" else 0.0

        def value(x):
            p, q, z = x[..., 0], x[..., 1], x[..., 2]
            return -a * (z - f(q)) + bb * (p - df(q)) * (q - s)

        def grad(x):
            p, q = x[..., 0], x[..., 1]
            hp = bb * (q - s)
            hq = a * df(q) - bb * ddf(q) * (q - s) + bb * (p - df(q))
            return np.stack(np.broadcast_arrays(hp, hq, np.full_like(p, -a)), axis=-1)

    return ContactHamiltonian(value, grad, name=f"cooling_{model.variant}", meta={"a": a, "b": b})


def cooling_hamiltonian_PQZ(model: CoolingModel) -> ContactHamiltonian:
    """Hamiltonian in (P, Q, Z): -aZ + bPQ, or -aZ - eps P sin^2(NQ) for the sine variant."""
    a, b, eps, N = model.a, model.b, model.eps, model.N
    if model.variant == "sine":
        def value(X):
            return -a * X[..., 2] - eps * X[..., 0] * np.sin(N * X[..., 1]) ** 2

        def grad(X):
            P, Q = X[..., 0], X[..., 1]
            return np.stack(np.broadcast_arrays(-eps * np.sin(N * Q) ** 2, -eps * P * N * np.sin(2 * N * Q),
                                                np.full_like(P, -a)), axis=-1)
    else:
        bb = b if model.variant == "coupled" else 0.0

        def value(X):
            return -a * X[..., 2] + bb * X[..., 0] * X[..., 1]

        def grad(X):
            P, Q = X[..., 0], X[..., 1]
            return np.stack(np.broadcast_arrays(bb * Q, bb * P, np.full_like(P, -a)), axis=-1)

    return ContactHamiltonian(value, grad, name=f"cooling_{model.variant}_PQZ", meta={"a": a, "b": b})


def cooling_closed_form(model: CoolingModel, x0, t) -> np.ndarray:
    """Closed-form state at time(s) t for the coupled and isentropic variants, in (p, q, z)."""
    if model.variant == "sine":
        raise ValueError("use sine_closed_form_q for the sine variant")
    phi = model.coordinates()
    P0, Q0, Z0 = phi(np.asarray(x0, dtype=float))
    t = np.asarray(t, dtype=float)
    bb = model.b if model.variant == "coupled" else 0.0
    X = np.stack(np.broadcast_arrays(P0 * np.exp(-(model.a - bb) * t), Q0 * np.exp(-bb * t),
                                     Z0 * np.exp(-model.a * t)), axis=-1)
    return phi.inverse(X)


def _integrate(model, x0, t, t_eval=None, rel_tol=1e-11, abs_tol=1e-13) -> Trajectory:
    H = cooling_hamiltonian(model)
    return integrate(H, np.asarray(x0, dtype=float), IntegratorConfig(max_time=t, rel_tol=rel_tol, abs_tol=abs_tol,
                                                                    box=None), t_eval=t_eval)


def cooling_flow(model: CoolingModel, x0, t: float, t_eval=None) -> dict:
    """Integrate the coupled cooling flow and compare with the closed form."""
    traj = _integrate(model, x0, t, t_eval)
    exact = cooling_closed_form(model, x0, traj.times)
    return {
        "trajectory": traj,
        "endpoint": traj.endpoint,
        "closed_form_error": float(np.max(np.abs(traj.points - exact))),
        "limit": model.equilibrium(model.sigma),
    }


def cooling_isentropic(model: CoolingModel, x0, t: float, t_eval=None) -> dict:
    if model.variant != "isentropic":
        raise ValueError("cooling_isentropic needs the isentropic (b = 0) variant")
    traj = _integrate(model, x0, t, t_eval)
    q0 = float(x0[1])
    return {
        "trajectory": traj,
        "endpoint": traj.endpoint,
        "q_drift": float(np.max(np.abs(traj.q[:, 0] - q0))),
        "limit": model.equilibrium(q0),
    }


def sine_closed_form_q(model: CoolingModel, q0: float, t):
    """Entropy of the sine variant: cot(N q(t)) = cot(N q0) - eps N t on the branch through q0."""
    N, eps = model.N, model.eps
    t = np.asarray(t, dtype=float)
    k = math.floor(q0 * N / math.pi)
    if q0 * N / math.pi == k:
        return np.full_like(t, q0)
    theta0 = N * q0 - k * math.pi  # in (0, pi)
    theta = np.arctan2(1.0, 1.0 / math.tan(theta0) - eps * N * t)  # continuous branch in (0, pi)
    return (theta + k * math.pi) / N


def cooling_sine(model: CoolingModel, x0, t: float, t_eval=None) -> dict:
    """Integrate the sine variant and report the entropy increment."""
    if model.variant != "sine":
        raise ValueError("cooling_sine needs the sine variant")
    q0 = float(x0[1])
    N = model.N
    k = math.floor(q0 * N / math.pi)
    frozen = q0 * N / math.pi == k
    traj = _integrate(model, x0, t, t_eval)
    q = traj.q[:, 0]
    target = q0 if frozen else math.pi * (k + 1) / N
    return {
        "trajectory": traj,
        "endpoint": traj.endpoint,
        "q_target": target,
        "increment": float(q[-1] - q0),
        "final_gap": float(abs(target - q[-1])),
        "monotone": bool(np.all(np.diff(q) >= -1e-12)),
        "closed_form_error": float(np.max(np.abs(q - sine_closed_form_q(model, q0, traj.times)))),
    }


def fit_decay_rate(t, y) -> float:
    """Exponential rate from a least-squares fit of log|y| against t."""
    t = np.asarray(t, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    if t.size < 2 or not np.all(y > 0):
        raise ValueError("fit_decay_rate needs at least two samples with y != 0")
    A = np.vstack([t, np.ones_like(t)]).T
    return float(-np.linalg.lstsq(A, np.log(y), rcond=None)[0][0])


# ---------------------------------------------------------------------------
# Moebius model


@dataclass(frozen=True)
class MoebiusModel:
    """Cutoff profile a(s) = s - 1 on [0, 1 + eps], then a C^1 exponential approach to a_inf."""

    eps: float = 0.1
    a_inf: float = 2.0

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not self.a_inf > max(1.0, self.eps):
            raise ValueError("a_inf must exceed max(1, eps)")

    def a(self, s):
        s = np.asarray(s, dtype=float)
        s0, ai, e = 1.0 + self.eps, self.a_inf, self.eps
        tail = ai + (e - ai) * np.exp(-(s - s0) / (ai - e))
        return np.where(s <= s0, s - 1.0, tail)

    def da(self, s):
        s = np.asarray(s, dtype=float)
        s0, ai, e = 1.0 + self.eps, self.a_inf, self.eps
        return np.where(s <= s0, 1.0, np.exp(-np.maximum(s - s0, 0.0) / (ai - e)))

    def hamiltonian(self) -> ContactHamiltonian:
        def value(x):
            return self.a(x[..., 0] ** 2 + x[..., 2] ** 2)

        def grad(x):
            p, z = x[..., 0], x[..., 2]
            d = self.da(p * p + z * z)
            return np.stack([2 * d * p, np.zeros_like(p), 2 * d * z], axis=-1)

        return ContactHamiltonian(value, grad, period=2 * math.pi, name="moebius",
                                  meta={"eps": self.eps, "a_inf": self.a_inf})

    def torus(self, u, v) -> np.ndarray:
        """The invariant torus p^2 + z^2 = 1 with q = u and angle v (z = cos v, p = sin v)."""
        u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
        return np.stack([np.sin(v), u, np.cos(v)], axis=-1)


def moebius_closed_form(w0, t):
    """w(t) = (w0 cosh t - sinh t) / (-w0 sinh t + cosh t)."""
    t = np.asarray(t, dtype=float)
    ch, sh = np.cosh(t), np.sinh(t)
    return (w0 * ch - sh) / (-w0 * sh + ch)


def moebius_trajectory(model: MoebiusModel, x0, t: float, t_eval=None, rel_tol=1e-11, abs_tol=1e-13) -> dict:
    """Integrate the Moebius flow; compare (z, p) with w(t) while p^2 + z^2 < 1 + eps."""
    x0 = np.asarray(x0, dtype=float)
    if t_eval is None:
        t_eval = np.linspace(0.0, t, 401)
    traj = integrate(model.hamiltonian(), x0, IntegratorConfig(max_time=t, rel_tol=rel_tol, abs_tol=abs_tol),
                     t_eval=t_eval)
    p, z = traj.p[:, 0], traj.z
    w = moebius_closed_form(complex(x0[2], x0[0]), traj.times)
    inside = p * p + z * z < 1.0 + model.eps
    # only compare up to the first exit from the solid torus of radius^2 1 + eps
    first_out = np.flatnonzero(~inside)
    upto = first_out[0] if first_out.size else len(inside)
    err = np.abs(np.stack([z - w.real, p - w.imag]))[:, :upto]
    return {
        "trajectory": traj,
        "endpoint": traj.endpoint,
        "closed_form_error": float(err.max()) if err.size else 0.0,
        "compared_samples": int(upto),
        "H_max": float(np.max(model.hamiltonian()(traj.points))),
    }
