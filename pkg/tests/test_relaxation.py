import math

import numpy as np
import pytest

from contact_thermo.core import ContactHamiltonian, jet_hamiltonian_minus_cz
from contact_thermo.flow import IntegratorConfig
from contact_thermo.legendrian import JetGraph, constant_section, distance_to, zero_section
from contact_thermo.models import MoebiusModel
from contact_thermo.relaxation import (
    ShootingProblem,
    clubsuit_example_hamiltonian,
    compute_cores,
    hausdorff,
    shoot,
    verify_clubsuit,
)

TWO_PI = 2 * math.pi


def logistic_hamiltonian():
    """H = -z (1 + z): z' = -z (1 + z), so z0 > -1 relaxes to 0 and z0 < -1 runs off."""
    def value(x):
        z = x[..., 2]
        return -z * (1 + z)

    def grad(x):
        z = x[..., 2]
        zero = np.zeros_like(z)
        return np.stack([zero, zero, -1 - 2 * z], axis=-1)

    return ContactHamiltonian(value, grad, name="logistic")


# shooting ------------------------------------------------------------------------


def test_minus_cz_captures_everything():
    prob = ShootingProblem(jet_hamiltonian_minus_cz(1.0), constant_section(-1.0, window=(-5, 5)),
                           zero_section(window=(-6, 6)))
    rep = shoot(prob, grid_size=16)
    assert rep.counts() == {"captured": 16, "escaped": 0, "undecided": 0}
    assert all(r.stayed_in_sigma_plus for r in rep.results)
    assert rep.boundaries == []
    assert prob.horizon == 50.0


def test_expanding_flow_escapes():
    H = jet_hamiltonian_minus_cz(1.0).reversed()
    prob = ShootingProblem(H, constant_section(-1.0, window=(-2, 2)), zero_section(window=(-3, 3)), horizon=20.0)
    rep = shoot(prob, grid_size=8)
    assert rep.counts()["escaped"] == 8


def test_bisection_finds_the_separatrix():
    # p' = -p (1 + 2 z) grows like 1/(1 + z0) while z lingers near -1, so the box must be wide
    source = JetGraph(lambda q: q, np.ones_like, window=(-2.0, 1.0), ddphi=np.zeros_like)
    prob = ShootingProblem(logistic_hamiltonian(), source, zero_section(window=(-3, 3)), horizon=80.0,
                           cfg=IntegratorConfig(rel_tol=1e-9, abs_tol=1e-12, box=1e12))
    rep = shoot(prob, grid_size=16)
    counts = rep.counts()
    assert counts["captured"] > 0 and counts["escaped"] > 0
    assert len(rep.boundaries) == 1
    _, lo, hi = rep.boundaries[0]
    assert lo <= 1 / 3 <= hi
    assert hi - lo < 1e-3
    captured = rep.captured
    assert all(r.x0[2] > -1 for r in captured)
    # H > 0 exactly on -1 < z < 0, and z stays in that band on the way up
    assert all(r.stayed_in_sigma_plus == (r.x0[2] < 0) for r in captured)


def test_target_off_the_zero_level_is_rejected():
    with pytest.raises(ValueError):
        ShootingProblem(jet_hamiltonian_minus_cz(1.0), constant_section(-1.0), constant_section(1.0))


def test_source_outside_window_is_rejected():
    prob = ShootingProblem(jet_hamiltonian_minus_cz(1.0), constant_section(-1.0, window=(-2, 2)),
                           zero_section(), window=(5.0, 6.0))
    with pytest.raises(ValueError):
        shoot(prob, grid_size=4)


def test_shooting_csv(tmp_path):
    prob = ShootingProblem(jet_hamiltonian_minus_cz(2.0), constant_section(-1.0, window=(-1, 1)), zero_section())
    path = shoot(prob, grid_size=4, keep_trajectories=False).to_csv(tmp_path / "s.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "piece,parameter,classification,final_distance"
    assert len(lines) == 5


def test_captured_verdicts_are_stable_under_grid_doubling():
    source = JetGraph(lambda q: q, np.ones_like, window=(-2.0, 1.0), ddphi=np.zeros_like)
    prob = ShootingProblem(logistic_hamiltonian(), source, zero_section(window=(-3, 3)), horizon=40.0)
    coarse = shoot(prob, grid_size=8, refine=False)
    fine = shoot(prob, grid_size=15, refine=False)  # contains every coarse parameter
    fine_cls = {round(r.frac, 12): r.classification for r in fine.results}
    for r in coarse.results:
        assert fine_cls[round(r.frac, 12)] == r.classification


# sign conditions -----------------------------------------------------------------------


def test_clubsuit_example_holds():
    rep = verify_clubsuit(clubsuit_example_hamiltonian(1.0), zero_section(window=(-2, 2)))
    assert rep.holds, rep.failed
    assert 0 < rep.kappa1 < rep.kappa2


def test_clubsuit_example_is_bounded_and_positive_below():
    H = clubsuit_example_hamiltonian(1.0)
    z = np.linspace(-50, -1e-3, 500)
    X = np.stack([np.zeros_like(z), np.zeros_like(z), z], axis=-1)
    assert np.all(H(X) > 0) and np.all(H(X) <= 2.0)


def test_expanding_hamiltonian_fails_condition_iii():
    rep = verify_clubsuit(jet_hamiltonian_minus_cz(1.0).reversed(), zero_section(window=(-2, 2)), horizon=5.0)
    assert not rep.conditions["iii"]
    assert not rep.holds


# Hausdorff distance -------------------------------------------------------------------------


def test_hausdorff_examples():
    A = np.array([[0.0, 0.0, 0.0]])
    B = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    assert hausdorff(A, B) == 1.0
    assert hausdorff(A, A) == 0.0
    assert hausdorff(A, np.empty((0, 3))) == math.inf


def test_hausdorff_periodic():
    A = np.array([[0.0, 0.1, 0.0]])
    B = np.array([[0.0, TWO_PI - 0.1, 0.0]])
    assert hausdorff(A, B) == pytest.approx(TWO_PI - 0.2)
    assert hausdorff(A, B, q_period=TWO_PI) == pytest.approx(0.2, abs=1e-12)


def test_hausdorff_is_symmetric(rng):
    A, B = rng.normal(size=(30, 3)), rng.normal(size=(40, 3))
    assert hausdorff(A, B) == hausdorff(B, A)


# cores ---------------------------------------------------------------------------------------


def test_cores_of_minus_cz_plane():
    H = jet_hamiltonian_minus_cz(1.0)
    plane = lambda u, v: np.stack(np.broadcast_arrays(v, u, np.zeros_like(u)), axis=-1)  # noqa: E731
    res = compute_cores(H, plane, (-2.0, 2.0), (-1.0, 1.0), n_u=16, n_v=9, s_max=15.0,
                        candidates=(zero_section(window=(-2, 2)), None))
    assert res.gamma.shape == (0, 3)
    assert res.cloud_plus.size == 0
    assert np.max(np.abs(res.cloud_minus[:, 0])) <= 1e-6
    assert res.hausdorff_minus < 1e-6 + 4.0 / 15  # q spacing of the grid bounds the reverse direction


def test_moebius_cores_and_their_swap_under_time_reversal():
    H = MoebiusModel().hamiltonian()
    L_st, L_unst = constant_section(-1.0, period=TWO_PI), constant_section(1.0, period=TWO_PI)
    torus = MoebiusModel().torus
    fwd = compute_cores(H, torus, (0.0, TWO_PI), (0.01, TWO_PI + 0.01), n_u=16, n_v=16, s_max=15.0)
    bwd = compute_cores(H.reversed(), torus, (0.0, TWO_PI), (0.01, TWO_PI + 0.01), n_u=16, n_v=16, s_max=15.0)
    # Gamma is the two circles z = 0 of the torus
    np.testing.assert_allclose(fwd.gamma[:, 2], 0.0, atol=1e-12)
    assert set(np.round(fwd.gamma[:, 0])) == {-1.0, 1.0}
    assert np.max(distance_to(L_st, fwd.cloud_minus)) <= 1e-3
    assert np.max(distance_to(L_unst, fwd.cloud_plus)) <= 1e-3
    assert np.max(distance_to(L_unst, bwd.cloud_minus)) <= 1e-3
    assert np.max(distance_to(L_st, bwd.cloud_plus)) <= 1e-3


def test_cores_reject_non_invariant_surface():
    H = jet_hamiltonian_minus_cz(1.0)
    lifted = lambda u, v: np.stack(np.broadcast_arrays(v, u, np.ones_like(u)), axis=-1)  # noqa: E731
    with pytest.raises(ValueError):
        compute_cores(H, lifted, (-1.0, 1.0), (-1.0, 1.0), n_u=4, n_v=4)
