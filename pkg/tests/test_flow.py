import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contact_thermo.core import ContactHamiltonian, jet_hamiltonian_minus_cz, make_contactomorphism
from contact_thermo.flow import (
    EventSpec,
    IntegratorConfig,
    detect_convergence,
    flow_map,
    flow_map_differential,
    integrate,
    integrate_batch,
    solve_ode,
)
from contact_thermo.io import read_trajectory_csv
from contact_thermo.ising import IsingParams, explicit_solution, relaxation_hamiltonian_primary
from contact_thermo.legendrian import constant_section, zero_section
from contact_thermo.models import CoolingModel, MoebiusModel, cooling_hamiltonian_PQZ, moebius_trajectory


def test_minus_cz_endpoint():
    traj = integrate(jet_hamiltonian_minus_cz(1.0), [1.0, 0.0, 1.0], IntegratorConfig(max_time=5.0))
    np.testing.assert_allclose(traj.endpoint, [math.exp(-5), 0.0, math.exp(-5)], atol=1e-8)
    assert traj.status == "max_time"


def test_ising_primary_closed_form():
    params = IsingParams(6.0, 1.0, 1.0)
    X0 = np.array([0.4, -0.7, 1.3])
    t = np.linspace(0, 10, 51)
    traj = integrate(relaxation_hamiltonian_primary(params), X0, IntegratorConfig(max_time=10.0), t_eval=t)
    np.testing.assert_allclose(traj.points, explicit_solution(params, X0, t[:, None])[:, 0], atol=1e-6)


def test_moebius_closed_form_until_boundary():
    res = moebius_trajectory(MoebiusModel(), [0.5, 0.0, 0.0], 3.0)
    assert res["closed_form_error"] <= 1e-6


def test_fifth_order_convergence():
    """Fixed-step errors shrink by about 2^5 per halving of the step."""
    f = lambda t, y: np.array([y[1], -y[0]])  # noqa: E731
    errs = []
    for h in (0.1, 0.05, 0.025):
        res = solve_ode(f, np.array([1.0, 0.0]), 2.0, IntegratorConfig(max_time=2.0, fixed_step=h))
        errs.append(abs(res.y[-1, 0] - math.cos(2.0)))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert all(o > 4.5 for o in orders), orders


def test_event_location():
    ev = EventSpec(lambda t, y: y[0] - 0.5, direction=-1, terminal=True, name="half")
    res = solve_ode(lambda t, y: -y, np.array([1.0]), 5.0, IntegratorConfig(max_time=5.0, events=(ev,)))
    assert res.status == "terminal_event"
    hits = [e for e in res.events if e.kind == "hypersurface_crossing"]
    assert len(hits) == 1
    assert hits[0].time == pytest.approx(math.log(2.0), abs=1e-9)


def test_nonterminal_events_record_every_crossing():
    ev = EventSpec(lambda t, y: y[0], name="zero")
    res = solve_ode(lambda t, y: np.array([y[1], -y[0]]), np.array([1.0, 0.0]), 10.0,
                    IntegratorConfig(max_time=10.0, events=(ev,)))
    times = [e.time for e in res.events if e.kind == "hypersurface_crossing"]
    expected = [math.pi / 2 + k * math.pi for k in range(3)]
    np.testing.assert_allclose(times, expected, atol=1e-8)


def test_escape_from_box():
    H = ContactHamiltonian(lambda x: x[..., 2] ** 2, lambda x: np.stack(
        [np.zeros_like(x[..., 0]), np.zeros_like(x[..., 0]), 2 * x[..., 2]], axis=-1))
    traj = integrate(H, [0.0, 0.0, 1.0], IntegratorConfig(max_time=5.0, box=50.0))
    assert traj.escaped
    assert np.max(np.abs(traj.points[-1])) >= 50.0 - 1e-6 or traj.times[-1] < 1.0


def test_batch_freezes_escaped_rows():
    H = ContactHamiltonian(lambda x: x[..., 2] ** 2, lambda x: np.stack(
        [np.zeros_like(x[..., 0]), np.zeros_like(x[..., 0]), 2 * x[..., 2]], axis=-1))
    bt = integrate_batch(H, np.array([[0, 0, 1.0], [0, 0, -0.5]]), IntegratorConfig(max_time=5.0),
                         t_eval=[0.0, 5.0])
    assert bt.escaped.tolist() == [True, False]
    # z' = z^2 from -0.5: z(t) = -0.5 / (1 + 0.5 t)
    assert bt.points[-1, 1, 2] == pytest.approx(-0.5 / 3.5, abs=1e-9)


def test_periodic_hamiltonian_does_not_escape_in_q():
    H = ContactHamiltonian(lambda x: -x[..., 0], lambda x: np.stack(
        [-np.ones_like(x[..., 0]), np.zeros_like(x[..., 0]), np.zeros_like(x[..., 0])], axis=-1), period=1.0)
    traj = integrate(H, [0.0, 0.0, 0.0], IntegratorConfig(max_time=100.0, box=50.0))
    assert not traj.escaped
    assert traj.endpoint[1] == pytest.approx(100.0)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.1, 1.0), st.floats(0.1, 1.0))
def test_flow_group_property(s, t):
    H = relaxation_hamiltonian_primary(IsingParams(6.0, 1.0, 1.0))
    x = np.array([0.3, 0.2, -0.1])
    np.testing.assert_allclose(flow_map(H, flow_map(H, x, s), t), flow_map(H, x, s + t), atol=1e-9)


def test_flow_map_negative_time_inverts():
    H = relaxation_hamiltonian_primary(IsingParams(6.0, 1.0, 1.0))
    x = np.array([0.3, 0.2, -0.1])
    np.testing.assert_allclose(flow_map(H, flow_map(H, x, 1.5), -1.5), x, atol=1e-9)


def test_differential_minus_cz():
    D = flow_map_differential(jet_hamiltonian_minus_cz(1.0), np.array([0.3, 0.1, -0.2]), 1.0)
    np.testing.assert_allclose(D, np.diag([math.exp(-1), 1.0, math.exp(-1)]), atol=1e-5)


def test_differential_at_zero_time_is_identity():
    D = flow_map_differential(jet_hamiltonian_minus_cz(1.0), np.array([0.3, 0.1, -0.2]), 0.0)
    assert np.array_equal(D, np.eye(3))


def test_differential_cooling_pqz():
    a, b = 2.0, 1.0
    H = cooling_hamiltonian_PQZ(CoolingModel(a, b))
    D = flow_map_differential(H, np.array([0.0, 0.0, 0.0]), 1.0)
    np.testing.assert_allclose(D, np.diag([math.exp(-(a - b)), math.exp(-b), math.exp(-a)]), atol=1e-5)


def test_cooling_pqz_is_the_pushforward():
    model = CoolingModel(2.0, 1.0, 0.5)
    phi = model.coordinates()
    from contact_thermo.models import cooling_hamiltonian

    x = np.array([1.2, 0.3, 0.8])
    assert cooling_hamiltonian(model)(x) == pytest.approx(cooling_hamiltonian_PQZ(model)(phi(x)), abs=1e-12)


def test_detect_convergence():
    H = jet_hamiltonian_minus_cz(1.0)
    traj = integrate(H, [1.0, 0.0, 1.0], IntegratorConfig(max_time=20.0), t_eval=np.linspace(0, 20, 201))
    assert detect_convergence(traj, zero_section(), 1e-4, 2.0)
    still = integrate(jet_hamiltonian_minus_cz(0.0), [0.0, 0.0, 1.0], IntegratorConfig(max_time=5.0),
                      t_eval=np.linspace(0, 5, 11))
    assert not detect_convergence(still, zero_section(), 1e-4, 2.0)


def test_moebius_escapes_along_z_axis():
    H = MoebiusModel().hamiltonian()
    traj = integrate(H, [0.0, 0.0, 1.0001], IntegratorConfig(max_time=20.0), t_eval=np.linspace(0, 20, 201))
    assert not detect_convergence(traj, constant_section(-1.0, period=2 * math.pi), 1e-4, 2.0)
    assert traj.z[-1] > 10


def test_trajectory_csv_round_trip(tmp_path):
    ev = EventSpec(lambda t, y: y[2] - 0.5, direction=-1, name="half")
    traj = integrate(jet_hamiltonian_minus_cz(1.0), [1.0, 0.0, 1.0], IntegratorConfig(max_time=2.0, events=(ev,)),
                     t_eval=np.linspace(0, 2, 5))
    path = tmp_path / "traj.csv"
    traj.to_csv(path)
    back = read_trajectory_csv(path)
    np.testing.assert_array_equal(back.times, traj.times)
    np.testing.assert_array_equal(back.points, traj.points)
    assert [e.kind for e in back.events] == [e.kind for e in traj.events]
    assert path.read_text().splitlines()[0] == "t,p_1,q_1,z"


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(rel_tol=-1.0)


def test_contactomorphism_conjugates_flows():
    """Flowing in (p,q,z) then mapping equals mapping then flowing in (P,Q,Z)."""
    from contact_thermo.models import cooling_hamiltonian

    model = CoolingModel(2.0, 1.0, 0.5)
    phi = model.coordinates()
    x = np.array([1.2, 0.3, 0.8])
    left = phi(flow_map(cooling_hamiltonian(model), x, 1.0))
    right = flow_map(cooling_hamiltonian_PQZ(model), phi(x), 1.0)
    np.testing.assert_allclose(left, right, atol=1e-9)


def test_stability_coordinates_conjugate_ising_flow():
    params = IsingParams(6.0, 1.0, 1.0)
    prim = make_contactomorphism("ising_primary", b=6.0)
    from contact_thermo.ising import relaxation_hamiltonian

    x = np.array([0.2, -0.5, 0.1])
    left = prim(flow_map(relaxation_hamiltonian(params), x, 2.0))
    right = flow_map(relaxation_hamiltonian_primary(params), prim(x), 2.0)
    np.testing.assert_allclose(left, right, atol=1e-9)
