import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contact_thermo.core import lambda_preservation_residual
from contact_thermo.flow import IntegratorConfig, detect_convergence, integrate
from contact_thermo.legendrian import constant_section
from contact_thermo.models import (
    CoolingModel,
    MoebiusModel,
    cooling_closed_form,
    cooling_flow,
    cooling_isentropic,
    cooling_sine,
    exp_clipped,
    fit_decay_rate,
    moebius_closed_form,
    moebius_trajectory,
    sine_closed_form_q,
)

SINE = CoolingModel(a=2.0, b=0.0, variant="sine", eps=0.5, N=3)


# model validation ----------------------------------------------------------------


@pytest.mark.parametrize("kw", [
    dict(a=1.0, b=2.0),
    dict(a=1.0, b=0.0),
    dict(a=2.0, b=1.0, variant="isentropic"),
    dict(a=1.0, b=0.0, variant="sine", eps=0.5, N=2),
    dict(a=1.0, variant="bogus"),
])
def test_invalid_cooling_models(kw):
    with pytest.raises(ValueError):
        CoolingModel(**kw)


def test_exp_is_clipped():
    with np.errstate(over="raise"):
        assert np.isfinite(exp_clipped(1e4))


@pytest.mark.parametrize("model", [CoolingModel(2.0, 1.0, 0.3), CoolingModel(2.0, 0.0, variant="isentropic"), SINE],
                         ids=["coupled", "isentropic", "sine"])
def test_cooling_coordinates_are_strict(model, rng):
    phi = model.coordinates()
    for _ in range(100):
        x = rng.uniform(-1, 1, 3)
        v = rng.normal(size=3)
        assert float(lambda_preservation_residual(phi, x, v)) <= 1e-9 * max(1.0, float(np.abs(v).max()))


# coupled variant ------------------------------------------------------------------


def test_coupled_flow_matches_closed_form_and_limit():
    model = CoolingModel(2.0, 1.0, 0.5)
    res = cooling_flow(model, [3.0, -0.4, 1.2], 30.0, np.linspace(0, 30, 301))
    assert res["closed_form_error"] <= 1e-6
    np.testing.assert_allclose(res["endpoint"], model.equilibrium(0.5), atol=1e-6)


def test_newton_cooling_rate():
    model = CoolingModel(3.0, 1.0, 0.0)
    t = np.linspace(5, 12, 50)
    x = cooling_closed_form(model, [2.0, 0.4, 1.0], t)
    gap = x[:, 0] - np.exp(x[:, 1])  # p - phi'(q)
    assert fit_decay_rate(t, gap) == pytest.approx(model.a - model.b, rel=0.01)


def test_entropy_increases_below_target():
    model = CoolingModel(2.0, 1.0, 1.0)
    res = cooling_flow(model, [0.5, -1.0, 0.2], 10.0, np.linspace(0, 10, 201))
    assert np.all(np.diff(res["trajectory"].q[:, 0]) > 0)


def test_fit_decay_rate_needs_nonzero_samples():
    with pytest.raises(ValueError):
        fit_decay_rate([0.0, 1.0], [1.0, 0.0])
    with pytest.raises(ValueError):
        fit_decay_rate([0.0], [1.0])


# isentropic variant ------------------------------------------------------------------


@settings(max_examples=10, deadline=None)
@given(st.floats(-2, 2), st.floats(-1, 1), st.floats(-2, 2))
def test_isentropic_conserves_entropy(p0, q0, z0):
    model = CoolingModel(2.0, 0.0, variant="isentropic")
    res = cooling_isentropic(model, [p0, q0, z0], 20.0, np.linspace(0, 20, 101))
    assert res["q_drift"] <= 1e-9
    np.testing.assert_allclose(res["endpoint"], res["limit"], atol=1e-6)


def test_isentropic_equilibrium_is_stationary():
    model = CoolingModel(2.0, 0.0, variant="isentropic")
    x0 = model.equilibrium(0.7)
    res = cooling_isentropic(model, x0, 5.0, np.linspace(0, 5, 11))
    assert np.max(np.abs(res["trajectory"].points - x0)) <= 1e-12


# sine variant ----------------------------------------------------------------------


@pytest.mark.parametrize("k", [0, 1, 2])
def test_sine_fixed_entropy_levels(k):
    q0 = math.pi * k / 3
    res = cooling_sine(SINE, [0.0, q0, 0.5], 10.0)
    assert res["increment"] == 0.0
    assert res["q_target"] == q0


def test_sine_reaches_next_level():
    res = cooling_sine(SINE, [1.0, 0.2, 0.5], 224.0, np.linspace(0, 224, 449))
    assert res["monotone"]
    assert res["closed_form_error"] <= 1e-8
    assert res["q_target"] == pytest.approx(math.pi / 3)
    assert res["final_gap"] <= 1e-3
    assert 0 < res["increment"] < math.pi / 3


@settings(max_examples=20)
@given(st.floats(0.01, 2.0), st.floats(0.0, 500.0))
def test_sine_closed_form_stays_below_next_level(q0, t):
    k = math.floor(q0 * 3 / math.pi)
    q = float(sine_closed_form_q(SINE, q0, t))
    assert q0 <= q < math.pi * (k + 1) / 3
    assert math.pi * (k + 1) / 3 - q < math.pi / 3


def test_sine_closed_form_solves_the_ode():
    t = np.linspace(0, 3, 31)
    q = sine_closed_form_q(SINE, 0.4, t)
    h = 1e-6
    dq = (sine_closed_form_q(SINE, 0.4, t + h) - sine_closed_form_q(SINE, 0.4, t - h)) / (2 * h)
    np.testing.assert_allclose(dq, SINE.eps * np.sin(SINE.N * q) ** 2, atol=1e-8)


def test_sine_requires_sine_variant():
    with pytest.raises(ValueError):
        cooling_sine(CoolingModel(2.0, 1.0), [0, 0, 0], 1.0)


# Moebius model -------------------------------------------------------------------------


def test_cutoff_is_c1_and_bounded():
    m = MoebiusModel()
    s0 = 1.0 + m.eps
    left, right = float(m.a(s0)), float(m.a(np.nextafter(s0, np.inf)))
    assert abs(left - right) <= 1e-12
    assert float(m.da(s0)) == pytest.approx(1.0, abs=1e-12)
    assert float(m.da(s0 + 1e-12)) == pytest.approx(1.0, abs=1e-11)
    s = np.linspace(0, 200, 100_001)
    assert np.all(m.da(s) > 0)
    assert np.all(m.a(s) <= m.a_inf)  # saturates in floating point for large s


def test_cutoff_derivative_matches_finite_difference():
    m = MoebiusModel()
    s = np.linspace(0.1, 10, 200)
    s = s[np.abs(s - 1.1) > 1e-3]
    fd = (m.a(s + 1e-6) - m.a(s - 1e-6)) / 2e-6
    np.testing.assert_allclose(m.da(s), fd, atol=1e-6)


def test_moebius_rejects_bad_parameters():
    with pytest.raises(ValueError):
        MoebiusModel(eps=0.0)
    with pytest.raises(ValueError):
        MoebiusModel(a_inf=0.5)


def test_moebius_fixed_point():
    res = moebius_trajectory(MoebiusModel(), [0.0, 0.3, -1.0], 10.0)
    np.testing.assert_allclose(res["endpoint"], [0.0, 0.3, -1.0], atol=1e-12)


def test_moebius_closed_form_from_half():
    res = moebius_trajectory(MoebiusModel(), [0.5, 0.0, 0.0], 10.0)
    assert res["closed_form_error"] <= 1e-6
    assert res["compared_samples"] > 10


def test_moebius_closed_form_group_property():
    w0 = complex(0.3, 0.4)
    np.testing.assert_allclose(moebius_closed_form(moebius_closed_form(w0, 0.7), 1.1),
                               moebius_closed_form(w0, 1.8), atol=1e-12)


@settings(max_examples=12, deadline=None)
@given(st.floats(0.05, 1.0), st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi))
def test_moebius_solid_torus_does_not_escape(r, angle, q0):
    x0 = [r * math.sin(angle), q0, r * math.cos(angle)]
    H = MoebiusModel().hamiltonian()
    traj = integrate(H, x0, IntegratorConfig(max_time=100.0, box=50.0), t_eval=np.linspace(0, 100, 201))
    assert not traj.escaped
    assert np.max(H(traj.points)) <= MoebiusModel().a_inf


@pytest.mark.parametrize("x0", [[0.5, 0.0, 0.0], [-0.9, 1.0, 0.2], [0.1, 2.0, 0.99], [0.3, 0.0, -0.5]])
def test_generic_points_converge_to_stable_core(x0):
    res = moebius_trajectory(MoebiusModel(), x0, 40.0, np.linspace(0, 40, 401))
    assert detect_convergence(res["trajectory"], constant_section(-1.0, period=2 * math.pi), 1e-6, 5.0)


def test_torus_parameterization():
    m = MoebiusModel()
    X = m.torus(np.linspace(0, 6, 7), np.linspace(0, 6, 7))
    np.testing.assert_allclose(X[:, 0] ** 2 + X[:, 2] ** 2, 1.0, atol=1e-15)
    assert np.max(np.abs(m.hamiltonian()(X))) <= 1e-15
