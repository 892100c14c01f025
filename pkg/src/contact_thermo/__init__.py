"""Contact Hamiltonian dynamics for non-equilibrium thermodynamics.

Submodules
----------
core        contact Hamiltonians, contact vector fields, coordinate changes
flow        adaptive Dormand-Prince integration, events, flow differentials
legendrian  Legendrian curves, distances, Reeb chords, hyperbolicity rates
ising       mean-field Ising equilibria, relaxation scenarios, admissible H
glauber     Glauber spin dynamics: master equation, lumped chain, Monte Carlo
relaxation  shooting between Legendrians, sign-condition checks, cores
models      Newton cooling and contact Moebius worked models
checks      residual suites for the contact identities
io          CSV and manifest serialization
cli         command-line entry point
"""
__version__ = "0.1.0"

from .core import (  # noqa: E402
    ContactHamiltonian,
    PhasePoint,
    TangentVector,
    contact_form,
    contact_vector_field,
    make_contactomorphism,
    verify_contact_identity,
)
from .flow import IntegratorConfig, Trajectory, integrate  # noqa: E402

__all__ = [
    "__version__",
    "ContactHamiltonian",
    "PhasePoint",
    "TangentVector",
    "contact_form",
    "contact_vector_field",
    "make_contactomorphism",
    "verify_contact_identity",
    "IntegratorConfig",
    "Trajectory",
    "integrate",
]
