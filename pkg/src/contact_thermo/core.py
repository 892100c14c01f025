"""Contact Hamiltonians on the standard contact space (R^{2n+1}, dz - p.dq).

States are stored as flat float arrays ``x = [p_1..p_n, q_1..q_n, z]`` so that
every function here broadcasts over leading batch dimensions: an array of
shape ``(..., 2n+1)`` is a stack of phase points.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "PhasePoint",
    "TangentVector",
    "ContactHamiltonian",
    "NonFiniteError",
    "as_state",
    "split_state",
    "contact_form",
    "contact_vector_field",
    "reeb_hamiltonian",
    "verify_contact_identity",
    "Contactomorphism",
    "make_contactomorphism",
    "phi_beta",
    "phi_beta_prime",
]

_FD_SCALE = np.finfo(float).eps ** (1.0 / 3.0)


class NonFiniteError(FloatingPointError):
    """Raised when a Hamiltonian or its gradient evaluates to inf/nan."""


@dataclass(frozen=True)
class PhasePoint:
    p: tuple[float, ...]
    q: tuple[float, ...]
    z: float

    def __post_init__(self):
        p = tuple(float(v) for v in np.atleast_1d(self.p))
        q = tuple(float(v) for v in np.atleast_1d(self.q))
        if len(p) != len(q) or len(p) == 0:
            raise ValueError(f"p and q must have equal length n >= 1, got {len(p)} and {len(q)}")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q)) and np.isfinite(self.z)):
            raise ValueError("phase point entries must be finite")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "z", float(self.z))

    @property
    def n(self) -> int:
        return len(self.p)

    def as_array(self) -> np.ndarray:
        return np.array([*self.p, *self.q, self.z])

    @classmethod
    def from_array(cls, x) -> "PhasePoint":
        x = np.asarray(x, dtype=float)
        n = (x.shape[-1] - 1) // 2
        return cls(tuple(x[:n]), tuple(x[n:2 * n]), float(x[2 * n]))


@dataclass(frozen=True)
class TangentVector:
    dp: tuple[float, ...]
    dq: tuple[float, ...]
    dz: float

    def __post_init__(self):
        dp = tuple(float(v) for v in np.atleast_1d(self.dp))
        dq = tuple(float(v) for v in np.atleast_1d(self.dq))
        if len(dp) != len(dq):
            raise ValueError("dp and dq must have equal length")
        object.__setattr__(self, "dp", dp)
        object.__setattr__(self, "dq", dq)
        object.__setattr__(self, "dz", float(self.dz))

    def as_array(self) -> np.ndarray:
        return np.array([*self.dp, *self.dq, self.dz])

    @classmethod
    def from_array(cls, v) -> "TangentVector":
        v = np.asarray(v, dtype=float)
        n = (v.shape[-1] - 1) // 2
        return cls(tuple(v[:n]), tuple(v[n:2 * n]), float(v[2 * n]))


def as_state(x) -> np.ndarray:
    """Coerce a PhasePoint/TangentVector/array-like to a float array."""
    if isinstance(x, (PhasePoint, TangentVector)):
        return x.as_array()
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] % 2 != 1 or arr.shape[-1] < 3:
        raise ValueError(f"state arrays need a trailing axis of odd length >= 3, got shape {arr.shape}")
    return arr


def split_state(x: np.ndarray):
    """Return views ``(p, q, z)`` with shapes ``(..., n), (..., n), (...)``."""
    n = (x.shape[-1] - 1) // 2
    return x[..., :n], x[..., n:2 * n], x[..., 2 * n]


def contact_form(x, v) -> np.ndarray | float:
    """Evaluate dz - p.dq at ``x`` on the tangent vector ``v``."""
    x = as_state(x)
    v = as_state(v)
    if x.shape[-1] != v.shape[-1]:
        raise ValueError(f"dimension mismatch: point has {x.shape[-1]} coordinates, vector {v.shape[-1]}")
    p, _, _ = split_state(x)
    _, dq, dz = split_state(v)
    out = dz - np.sum(p * dq, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def _fd_gradient(value: Callable, x: np.ndarray) -> np.ndarray:
    # central differences, h_i = max(1, |x_i|) * eps^(1/3)
    grad = np.empty(x.shape, dtype=float)
    for i in range(x.shape[-1]):
        h = np.maximum(1.0, np.abs(x[..., i])) * _FD_SCALE
        xp = x.copy()
        xm = x.copy()
        xp[..., i] += h
        xm[..., i] -= h
        grad[..., i] = (value(xp) - value(xm)) / (xp[..., i] - xm[..., i])
    return grad


@dataclass(frozen=True)
class ContactHamiltonian:
    """A contact Hamiltonian H(p, q, z).

    ``value(x)`` and ``grad(x)`` take state arrays of shape ``(..., 2n+1)``;
    ``grad`` returns ``(dH/dp, dH/dq, dH/dz)`` stacked in the same layout.
    When ``grad`` is omitted central finite differences are used.
    ``period`` marks q as living on circles of that period.
    """

    value: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray] | None = None
    n: int = 1
    period: float | None = None
    name: str = "H"
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def dim(self) -> int:
        return 2 * self.n + 1

    @property
    def topology(self) -> str:
        return "euclidean" if self.period is None else f"q-periodic({self.period:g})"

    @property
    def analytic(self) -> bool:
        return self.grad is not None

    def __call__(self, x) -> np.ndarray:
        return self.value(as_state(x))

    def gradient(self, x) -> np.ndarray:
        x = as_state(x)
        if self.grad is not None:
            return np.asarray(self.grad(x), dtype=float)
        return _fd_gradient(self.value, x)

    def reeb_derivative(self, x) -> np.ndarray:
        """dH(R) = dH/dz."""
        return self.gradient(x)[..., -1]

    def __add__(self, other: "ContactHamiltonian") -> "ContactHamiltonian":
        if self.n != other.n:
            raise ValueError("dimension mismatch")
        grad = None
        if self.grad is not None and other.grad is not None:
            g1, g2 = self.grad, other.grad
            grad = lambda x: g1(x) + g2(x)  # noqa: E731
        v1, v2 = self.value, other.value
        period = self.period if self.period == other.period else None
        return ContactHamiltonian(lambda x: v1(x) + v2(x), grad, self.n, period, f"({self.name}+{other.name})")

    def scaled(self, k: float) -> "ContactHamiltonian":
        v = self.value
        g = self.grad
        grad = None if g is None else (lambda x: k * g(x))
        return ContactHamiltonian(lambda x: k * v(x), grad, self.n, self.period, f"{k:g}*{self.name}", self.meta)

    def __neg__(self) -> "ContactHamiltonian":
        return self.scaled(-1.0)

    def reversed(self) -> "ContactHamiltonian":
        """-H, whose contact field is -v_H (the time-reversed flow)."""
        return self.scaled(-1.0)


def reeb_hamiltonian(n: int = 1) -> ContactHamiltonian:
    """H == 1; its contact field is the Reeb field d/dz."""
    d = 2 * n + 1
    return ContactHamiltonian(
        lambda x: np.ones(x.shape[:-1]),
        lambda x: np.zeros(x.shape[:-1] + (d,)),
        n=n,
        name="1",
    )


def contact_vector_field(H: ContactHamiltonian, x) -> np.ndarray:
    """(dH/dq + p dH/dz, -dH/dp, H - p.dH/dp) at x (broadcasts over batches)."""
    x = as_state(x)
    h = np.asarray(H.value(x), dtype=float)
    g = H.gradient(x)
    if not (np.all(np.isfinite(h)) and np.all(np.isfinite(g))):
        raise NonFiniteError(f"non-finite value or derivative of {H.name}")
    n = (x.shape[-1] - 1) // 2
    p = x[..., :n]
    hp, hq, hz = g[..., :n], g[..., n:2 * n], g[..., 2 * n]
    v = np.empty(np.broadcast_shapes(x.shape, g.shape), dtype=float)
    v[..., :n] = hq + p * hz[..., None]
    v[..., n:2 * n] = -hp
    v[..., 2 * n] = h - np.sum(p * hp, axis=-1)
    return v


def _rk4_flow(H: ContactHamiltonian, x: np.ndarray, dt: float) -> np.ndarray:
    k1 = contact_vector_field(H, x)
    k2 = contact_vector_field(H, x + 0.5 * dt * k1)
    k3 = contact_vector_field(H, x + 0.5 * dt * k2)
    k4 = contact_vector_field(H, x + dt * k3)
    return x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def verify_contact_identity(H: ContactHamiltonian, x, rng=None, delta: float = 1e-4,
                            frame_step: float = 1e-5) -> tuple[float, float]:
    """Residuals of lambda(v_H) = H and of L_v lambda = dH(R) lambda.

    The Lie derivative is obtained by pulling lambda back along the time
    +/-delta flow (one RK4 step each way) and differencing in time; the
    differential of the flow acts on a random tangent frame via central
    differences of step ``frame_step``.
    """
    x = as_state(x).astype(float)
    if x.ndim != 1:
        raise ValueError("verify_contact_identity takes a single point")
    rng = np.random.default_rng(rng)
    v = contact_vector_field(H, x)
    r1 = abs(contact_form(x, v) - float(H.value(x)))

    d = x.size
    frame = rng.standard_normal((d, d))
    frame /= np.linalg.norm(frame, axis=1, keepdims=True)
    hz = float(H.reeb_derivative(x))

    def pulled_back(t):
        y = _rk4_flow(H, x, t)
        fwd = _rk4_flow(H, x + frame_step * frame, t)
        bwd = _rk4_flow(H, x - frame_step * frame, t)
        push = (fwd - bwd) / (2 * frame_step)
        return contact_form(np.broadcast_to(y, push.shape), push)

    lie = (pulled_back(delta) - pulled_back(-delta)) / (2 * delta)
    expected = hz * contact_form(np.broadcast_to(x, frame.shape), frame)
    r2 = float(np.max(np.abs(lie - expected)))
    return float(r1), r2


# ---------------------------------------------------------------------------
# Ising free-energy potential


def phi_beta(beta: float, u):
    """beta^-1 ln(2 cosh(beta u)), evaluated without overflow."""
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    a = np.abs(np.asarray(u, dtype=float))
    out = a + np.log1p(np.exp(-2.0 * beta * a)) / beta
    return float(out) if np.ndim(out) == 0 else out


def phi_beta_prime(beta: float, u):
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    out = np.tanh(beta * np.asarray(u, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Contactomorphisms


@dataclass(frozen=True)
class Contactomorphism:
    """An invertible coordinate change preserving dz - p dq (n = 1)."""

    kind: str
    forward: Callable[[np.ndarray], np.ndarray]
    inverse: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    params: dict = field(default_factory=dict)

    def __call__(self, x) -> np.ndarray:
        return self.forward(as_state(x))

    def pushforward(self, x, v) -> np.ndarray:
        J = self.jacobian(as_state(x))
        return np.einsum("...ij,...j->...i", J, as_state(v))

    def pull_hamiltonian(self, H_new: ContactHamiltonian) -> ContactHamiltonian:
        """Express a Hamiltonian given in target coordinates in source coordinates.

        Since the map preserves lambda, H o Phi generates the conjugated flow.
        """
        fwd, jac = self.forward, self.jacobian
        value = lambda x: H_new.value(fwd(x))  # noqa: E731
        grad = None
        if H_new.grad is not None:
            grad = lambda x: np.einsum("...ji,...j->...i", jac(x), H_new.gradient(fwd(x)))  # noqa: E731
        return ContactHamiltonian(value, grad, H_new.n, None, f"{H_new.name}o{self.kind}")


def _stack(*cols):
    return np.stack(np.broadcast_arrays(*cols), axis=-1)


def _jac_from_rows(rows):
    return np.stack([_stack(*r) for r in rows], axis=-2)


def make_contactomorphism(kind: str, **params) -> Contactomorphism:
    """Build one of the named coordinate changes.

    ``ising_primary(b)``        P = p, Q = q + b p, Z = z + b p^2/2
    ``ising_stability(b, beta)`` Q = q + b p, P = p - tanh(beta Q), Z = z - phi_beta(Q) + b p^2/2
    ``cooling(phi, dphi, ddphi, sigma)``  P = p - phi'(q), Q = q - sigma, Z = z - phi(q)
    ``custom(forward, inverse[, jacobian])``
    """
    if kind == "ising_primary":
        b = float(params["b"])

        def fwd(x):
            p, q, z = x[..., 0], x[..., 1], x[..., 2]
            return _stack(p, q + b * p, z + 0.5 * b * p * p)

        def inv(X):
            P, Q, Z = X[..., 0], X[..., 1], X[..., 2]
            return _stack(P, Q - b * P, Z - 0.5 * b * P * P)

        def jac(x):
            p = x[..., 0]
            one, zero = np.ones_like(p), np.zeros_like(p)
            return _jac_from_rows([(one, zero, zero), (b * one, one, zero), (b * p, zero, one)])

        return Contactomorphism(kind, fwd, inv, jac, {"b": b})

    if kind == "ising_stability":
        b, beta = float(params["b"]), float(params["beta"])
        if beta <= 0:
            raise ValueError("beta must be positive")

        def fwd(x):
            p, q, z = x[..., 0], x[..., 1], x[..., 2]
            Q = q + b * p
            return _stack(p - np.tanh(beta * Q), Q, z - phi_beta(beta, Q) + 0.5 * b * p * p)

        def inv(X):
            P, Q, Z = X[..., 0], X[..., 1], X[..., 2]
            p = P + np.tanh(beta * Q)
            return _stack(p, Q - b * p, Z + phi_beta(beta, Q) - 0.5 * b * p * p)

        def jac(x):
            p, q = x[..., 0], x[..., 1]
            Q = q + b * p
            t = np.tanh(beta * Q)
            s2 = beta * (1.0 - t * t)
            one, zero = np.ones_like(p), np.zeros_like(p)
            return _jac_from_rows([
                (one - s2 * b, -s2 * one, zero),
                (b * one, one, zero),
                (-t * b + b * p, -t, one),
            ])

        return Contactomorphism(kind, fwd, inv, jac, {"b": b, "beta": beta})

    if kind == "cooling":
        phi = params.get("phi", np.exp)
        dphi = params.get("dphi", np.exp)
        ddphi = params.get("ddphi", np.exp)
        sigma = float(params.get("sigma", 0.0))

        def fwd(x):
            p, q, z = x[..., 0], x[..., 1], x[..., 2]
            return _stack(p - dphi(q), q - sigma, z - phi(q))

        def inv(X):
            P, Q, Z = X[..., 0], X[..., 1], X[..., 2]
            q = Q + sigma
            return _stack(P + dphi(q), q, Z + phi(q))

        def jac(x):
            q = x[..., 1]
            one, zero = np.ones_like(q), np.zeros_like(q)
            return _jac_from_rows([(one, -ddphi(q), zero), (zero, one, zero), (zero, -dphi(q), one)])

        return Contactomorphism(kind, fwd, inv, jac, {"sigma": sigma})

    if kind == "custom":
        fwd, inv = params["forward"], params["inverse"]
        jac = params.get("jacobian")
        if jac is None:
            def jac(x):
                cols = []
                for i in range(x.shape[-1]):
                    h = np.maximum(1.0, np.abs(x[..., i])) * _FD_SCALE
                    xp, xm = x.copy(), x.copy()
                    xp[..., i] += h
                    xm[..., i] -= h
                    cols.append((fwd(xp) - fwd(xm)) / (2 * h)[..., None])
                return np.stack(cols, axis=-1)
        x_probe = np.array([0.1, 0.2, 0.3])
        if not np.allclose(inv(fwd(x_probe)), x_probe, atol=1e-8):
            raise ValueError("custom contactomorphism: inverse does not invert forward")
        return Contactomorphism(kind, fwd, inv, jac, {})

    raise ValueError(f"unknown contactomorphism kind {kind!r}")


def lambda_preservation_residual(phi: Contactomorphism, x, v) -> np.ndarray:
    """|lambda(D phi v) at phi(x) - lambda(v) at x|, batched."""
    x, v = as_state(x), as_state(v)
    return np.abs(contact_form(phi(x), phi.pushforward(x, v)) - contact_form(x, v))


def sample_box(rng, count: int, n: int = 1, half_width: float = 5.0) -> np.ndarray:
    """Uniform points in [-w, w]^{2n+1}."""
    rng = np.random.default_rng(rng)
    return rng.uniform(-half_width, half_width, size=(count, 2 * n + 1))


def jet_hamiltonian_minus_cz(c: float = 1.0, n: int = 1) -> ContactHamiltonian:
    """H = -c z (global attractor at the zero section)."""
    d = 2 * n + 1

    def grad(x):
        g = np.zeros(x.shape, dtype=float)
        g[..., d - 1] = -c
        return g

    return ContactHamiltonian(lambda x: -c * x[..., d - 1], grad, n=n, name=f"-{c:g}z", meta={"c": c})


def linear_combination(terms: Sequence[tuple[float, ContactHamiltonian]]) -> ContactHamiltonian:
    out = None
    for k, H in terms:
        Hk = H.scaled(k)
        out = Hk if out is None else out + Hk
    if out is None:
        raise ValueError("empty combination")
    return out
