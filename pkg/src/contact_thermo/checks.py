"""Sampled identity checks shared by the ``check`` command and the test suite."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .core import (
    ContactHamiltonian,
    Contactomorphism,
    contact_form,
    contact_vector_field,
    jet_hamiltonian_minus_cz,
    lambda_preservation_residual,
    make_contactomorphism,
    sample_box,
)

ANALYTIC_TOL = 1e-9
FD_TOL = 1e-5
LAMBDA_TOL = 1e-9


@dataclass
class CheckResult:
    suite: str
    name: str
    max_residual: float
    tol: float
    points: int
    seconds: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_residual) and self.max_residual <= self.tol)

    def as_row(self):
        return (self.suite, self.name, self.max_residual, self.tol, self.points, int(self.passed))


def model_hamiltonians() -> dict[str, ContactHamiltonian]:
    """Every Hamiltonian the package ships, keyed by a short name."""
    from .ising import IsingParams, blocking_hamiltonian, make_admissible, relaxation_hamiltonian
    from .ising import relaxation_hamiltonian_primary
    from .models import CoolingModel, MoebiusModel, cooling_hamiltonian
    from .relaxation import clubsuit_example_hamiltonian

    out = {
        "minus_cz": jet_hamiltonian_minus_cz(1.0),
        "ising_relaxation_A": relaxation_hamiltonian(IsingParams(0.5, 1.0, 1.0)),
        "ising_relaxation_B": relaxation_hamiltonian(IsingParams(6.0, 1.0, 1.0)),
        "ising_relaxation_primary": relaxation_hamiltonian_primary(IsingParams(6.0, 1.0, 1.0)),
        "cooling_coupled": cooling_hamiltonian(CoolingModel(2.0, 1.0, 0.5)),
        "cooling_isentropic": cooling_hamiltonian(CoolingModel(2.0, 0.0, variant="isentropic")),
        "cooling_sine": cooling_hamiltonian(CoolingModel(2.0, 0.0, variant="sine", eps=0.5, N=3)),
        "moebius": MoebiusModel().hamiltonian(),
        "admissible": make_admissible(1.0, 2 * np.pi, 0.1, 0.1, check=False).H,
        "blocking": blocking_hamiltonian(1.0, 0.6),
        "clubsuit_example": clubsuit_example_hamiltonian(1.0),
        # gradient by finite differences
        "fd_quartic": ContactHamiltonian(lambda x: x[..., 0] ** 2 * x[..., 1] - 0.1 * x[..., 2] ** 3,
                                         name="fd_quartic"),
    }
    return out


def jet_lift_sinh() -> Contactomorphism:
    """1-jet lift of the diffeomorphism q -> sinh(q): (p, q, z) -> (p / cosh q, sinh q, z)."""
    def fwd(x):
        p, q, z = x[..., 0], x[..., 1], x[..., 2]
        return np.stack([p / np.cosh(q), np.sinh(q), z], axis=-1)

    def inv(X):
        P, Q, Z = X[..., 0], X[..., 1], X[..., 2]
        q = np.arcsinh(Q)
        return np.stack([P * np.cosh(q), q, Z], axis=-1)

    def jac(x):
        p, q = x[..., 0], x[..., 1]
        ch, th = np.cosh(q), np.tanh(q)
        one, zero = np.ones_like(q), np.zeros_like(q)
        rows = [(1 / ch, -p * th / ch, zero), (zero, ch, zero), (zero, zero, one)]
        return np.stack([np.stack(np.broadcast_arrays(*r), axis=-1) for r in rows], axis=-2)

    return make_contactomorphism("custom", forward=fwd, inverse=inv, jacobian=jac)


def named_contactomorphisms() -> dict[str, Contactomorphism]:
    return {
        "ising_primary": make_contactomorphism("ising_primary", b=1.5),
        "ising_stability": make_contactomorphism("ising_stability", b=6.0, beta=1.0),
        "cooling": make_contactomorphism("cooling", sigma=0.5),
        "custom_jet_lift_sinh": jet_lift_sinh(),
    }


def contact_identity_suite(points: int = 1000, seed: int = 0, half_width: float = 2.0) -> list[CheckResult]:
    """lambda(v_H) = H at ``points`` random points for every model Hamiltonian."""
    rng = np.random.default_rng(seed)
    out = []
    for name, H in model_hamiltonians().items():
        t0 = time.perf_counter()
        X = sample_box(rng, points, 1, half_width)
        h = H(X)
        resid = np.abs(contact_form(X, contact_vector_field(H, X)) - h) / np.maximum(1.0, np.abs(h))
        tol = ANALYTIC_TOL if H.analytic else FD_TOL
        out.append(CheckResult("contact_identity", name, float(resid.max()), tol, points,
                               time.perf_counter() - t0))
    return out


def lambda_preservation_suite(points: int = 1000, seed: int = 0, half_width: float = 2.0) -> list[CheckResult]:
    """|lambda(D phi v) - lambda(v)| at ``points`` random (point, tangent) pairs per map."""
    rng = np.random.default_rng(seed)
    out = []
    for name, phi in named_contactomorphisms().items():
        t0 = time.perf_counter()
        X = sample_box(rng, points, 1, half_width)
        V = rng.standard_normal((points, 3))
        resid = lambda_preservation_residual(phi, X, V)
        out.append(CheckResult("lambda_preservation", name, float(resid.max()), LAMBDA_TOL, points,
                               time.perf_counter() - t0))
    return out


def gradient_agreement_suite(points: int = 200, seed: int = 0, half_width: float = 2.0) -> list[CheckResult]:
    """Analytic gradients against central differences (relative, tolerance 1e-5)."""
    from .core import _fd_gradient

    rng = np.random.default_rng(seed)
    out = []
    for name, H in model_hamiltonians().items():
        if not H.analytic:
            continue
        t0 = time.perf_counter()
        X = sample_box(rng, points, 1, half_width)
        ga, gf = H.gradient(X), _fd_gradient(H.value, X)
        resid = np.abs(ga - gf) / np.maximum(1.0, np.abs(ga))
        out.append(CheckResult("gradient", name, float(resid.max()), FD_TOL, points, time.perf_counter() - t0))
    return out
