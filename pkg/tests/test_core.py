import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contact_thermo.checks import jet_lift_sinh, named_contactomorphisms
from contact_thermo.core import (
    ContactHamiltonian,
    NonFiniteError,
    as_state,
    contact_form,
    contact_vector_field,
    jet_hamiltonian_minus_cz,
    lambda_preservation_residual,
    make_contactomorphism,
    phi_beta,
    phi_beta_prime,
    reeb_hamiltonian,
    verify_contact_identity,
)
from contact_thermo.ising import IsingParams, relaxation_hamiltonian, relaxation_hamiltonian_primary

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)
points = st.tuples(finite, finite, finite).map(np.array)


# contact form -------------------------------------------------------------


@pytest.mark.parametrize("x,v,expected", [
    ((0, 0, 0), (1, 0, 0), 0.0),
    ((0, 0, 0), (0, 0, 1), 1.0),
    ((2, 5, 1), (0, 1, 3), 1.0),
])
def test_contact_form_examples(x, v, expected):
    assert contact_form(np.array(x, float), np.array(v, float)) == expected


def test_contact_form_batches():
    X = np.array([[0, 0, 0], [2, 5, 1]], float)
    V = np.array([[0, 0, 1], [0, 1, 3]], float)
    np.testing.assert_array_equal(contact_form(X, V), [1.0, 1.0])


# vector fields ------------------------------------------------------------


def test_reeb_field():
    x = np.array([0.3, -1.2, 4.0])
    np.testing.assert_array_equal(contact_vector_field(reeb_hamiltonian(), x), [0.0, 0.0, 1.0])


@given(points, st.floats(0.1, 3))
def test_minus_cz_field(x, c):
    v = contact_vector_field(jet_hamiltonian_minus_cz(c), x)
    np.testing.assert_allclose(v, [-c * x[0], 0.0, -c * x[2]], atol=1e-12)


@given(points)
def test_ising_field_in_primary_coordinates(X):
    c, beta = 1.3, 0.7
    H = relaxation_hamiltonian_primary(IsingParams(6.0, beta, c))
    v = contact_vector_field(H, X)
    P, Q, Z = X
    expected = [-c * P + c * math.tanh(beta * Q), 0.0, c * (-Z + phi_beta(beta, Q))]
    np.testing.assert_allclose(v, expected, atol=1e-12)


@settings(max_examples=50)
@given(points, st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_contact_identity_for_quadratic_hamiltonians(x, a, b, c):
    H = ContactHamiltonian(lambda y: a * y[..., 0] ** 2 + b * y[..., 1] * y[..., 2] + c * y[..., 2],
                           lambda y: np.stack([2 * a * y[..., 0], b * y[..., 2], b * y[..., 1] + c], axis=-1))
    v = contact_vector_field(H, x)
    assert abs(contact_form(x, v) - H(x)) <= 1e-9 * max(1.0, abs(H(x)))


@settings(max_examples=30)
@given(points, points)
def test_vector_field_is_linear_in_H(x, coeffs):
    H1 = relaxation_hamiltonian(IsingParams(2.0, 1.0, 1.0))
    H2 = jet_hamiltonian_minus_cz(1.0)
    k = float(coeffs[0])
    combo = H1 + H2.scaled(k)
    np.testing.assert_allclose(contact_vector_field(combo, x),
                               contact_vector_field(H1, x) + k * contact_vector_field(H2, x), atol=1e-10)


def test_reversed_field_is_negated():
    H = relaxation_hamiltonian(IsingParams(6.0, 1.0, 1.0))
    x = np.array([0.2, 0.3, -0.4])
    np.testing.assert_allclose(contact_vector_field(H.reversed(), x), -contact_vector_field(H, x))


def test_non_finite_value_raises():
    H = ContactHamiltonian(lambda y: np.log(np.abs(y[..., 2])), name="log|z|")
    with pytest.raises(NonFiniteError), np.errstate(all="ignore"):
        contact_vector_field(H, np.array([0.0, 0.0, 0.0]))


def test_as_state_rejects_wrong_length():
    with pytest.raises(ValueError):
        as_state(np.zeros(4))


@pytest.mark.parametrize("H", [reeb_hamiltonian(), jet_hamiltonian_minus_cz(1.0),
                               relaxation_hamiltonian(IsingParams(6.0, 1.0, 1.0))], ids=["reeb", "minus_cz", "ising"])
def test_lie_derivative_identity(H, rng):
    worst = (0.0, 0.0)
    for _ in range(100):
        x = rng.uniform(-2, 2, 3)
        r1, r2 = verify_contact_identity(H, x, rng)
        worst = (max(worst[0], r1), max(worst[1], r2))
    assert worst[0] <= 1e-12
    assert worst[1] <= 1e-6


def test_reeb_first_residual_is_exactly_zero(rng):
    for _ in range(20):
        r1, _ = verify_contact_identity(reeb_hamiltonian(), rng.uniform(-3, 3, 3), rng)
        assert r1 == 0.0


def test_finite_difference_gradient_matches_analytic(rng):
    H = relaxation_hamiltonian(IsingParams(6.0, 1.0, 1.0))
    Hfd = ContactHamiltonian(H.value)
    X = rng.uniform(-2, 2, (50, 3))
    np.testing.assert_allclose(Hfd.gradient(X), H.gradient(X), atol=1e-7)


# phi_beta -----------------------------------------------------------------


@given(st.floats(0.05, 5), st.floats(-15, 15))
def test_phi_beta_matches_log_cosh(beta, u):
    assert phi_beta(beta, u) == pytest.approx(math.log(2 * math.cosh(beta * u)) / beta, rel=1e-12, abs=1e-12)


def test_phi_beta_large_argument_without_overflow():
    with np.errstate(over="raise"):
        assert phi_beta(1.0, 50.0) == 50.0 + math.log1p(math.exp(-100.0))
        assert phi_beta(1.0, 1e6) == 1e6


@given(st.floats(0.1, 4), st.floats(-6, 6))
def test_phi_beta_prime_is_derivative(beta, u):
    h = 1e-6
    fd = (phi_beta(beta, u + h) - phi_beta(beta, u - h)) / (2 * h)
    assert phi_beta_prime(beta, u) == pytest.approx(fd, abs=1e-7)


def test_phi_beta_rejects_nonpositive_beta():
    with pytest.raises(ValueError):
        phi_beta(0.0, 1.0)


# contactomorphisms ----------------------------------------------------------


def test_ising_stability_example():
    phi = make_contactomorphism("ising_stability", b=6.0, beta=1.0)
    P, Q, Z = phi(np.array([0.5, 0.0, 0.0]))
    assert Q == 3.0
    assert P == pytest.approx(0.5 - math.tanh(3.0), abs=1e-15)
    assert Z == pytest.approx(-math.log(2 * math.cosh(3.0)) + 0.75, abs=1e-14)


def test_cooling_equilibrium_maps_to_origin():
    phi = make_contactomorphism("cooling", sigma=1.0)
    np.testing.assert_allclose(phi(np.array([math.e, 1.0, math.e])), [0.0, 0.0, 0.0], atol=1e-15)


@pytest.mark.parametrize("name", list(named_contactomorphisms()))
@settings(max_examples=40)
@given(x=points)
def test_round_trip(name, x):
    phi = named_contactomorphisms()[name]
    x = x * 0.4  # keep cosh / exp moderate
    np.testing.assert_allclose(phi.inverse(phi(x)), x, atol=1e-9)


@pytest.mark.parametrize("name", list(named_contactomorphisms()))
@settings(max_examples=40)
@given(x=points, v=points)
def test_lambda_preserved(name, x, v):
    phi = named_contactomorphisms()[name]
    x = x * 0.4
    assert float(lambda_preservation_residual(phi, x, v)) <= 1e-9 * max(1.0, float(np.abs(v).max()))


@pytest.mark.parametrize("name", list(named_contactomorphisms()))
def test_jacobian_matches_finite_differences(name, rng):
    phi = named_contactomorphisms()[name]
    x = rng.uniform(-1, 1, 3)
    h = 1e-6
    fd = np.stack([(phi(x + h * e) - phi(x - h * e)) / (2 * h) for e in np.eye(3)], axis=-1)
    np.testing.assert_allclose(phi.jacobian(x), fd, atol=1e-7)


def test_scaling_is_not_strict_contact():
    phi = make_contactomorphism("custom", forward=lambda x: 2 * x, inverse=lambda X: X / 2)
    assert float(lambda_preservation_residual(phi, np.array([1.0, 1.0, 1.0]), np.array([0.0, 0.0, 1.0]))) > 0.5


def test_custom_requires_true_inverse():
    with pytest.raises(ValueError):
        make_contactomorphism("custom", forward=lambda x: x + 1, inverse=lambda X: X)


def test_unknown_kind():
    with pytest.raises(ValueError):
        make_contactomorphism("bogus")


def test_pull_hamiltonian_conjugates_flow(rng):
    """H_new o Phi has field D Phi^-1 v_{H_new}: check at random points for the primary map."""
    params = IsingParams(6.0, 1.0, 1.0)
    prim = make_contactomorphism("ising_primary", b=6.0)
    pulled = prim.pull_hamiltonian(relaxation_hamiltonian_primary(params))
    direct = relaxation_hamiltonian(params)
    X = rng.uniform(-1, 1, (20, 3))
    np.testing.assert_allclose(contact_vector_field(pulled, X), contact_vector_field(direct, X), atol=1e-12)


def test_jet_lift_is_strict():
    phi = jet_lift_sinh()
    x = np.array([0.7, -0.3, 2.0])
    v = np.array([0.1, 1.0, -0.5])
    assert float(lambda_preservation_residual(phi, x, v)) <= 1e-14
