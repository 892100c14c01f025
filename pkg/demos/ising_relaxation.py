"""Mean-field Ising relaxation: fixed field against conserved effective field.

Part one traces the equilibrium branches r_-, s, r_+ for b beta > 1 and
compares two relaxation scenarios started near equilibrium. Holding the
field q fixed (the mean-field Glauber picture) and conserving q + b p
(the contact picture) give the same limit when the start is far from the
fold, with a gap that shrinks with the distance to equilibrium.

Part two moves to the stability coordinates, where the equilibrium at
temperature 1/alpha and field scale a is the Legendrian curve
Lambda_{a, alpha}. A Reeb chord from Lambda_{a, alpha} to the zero section
sits at Q = 0, and an admissible Hamiltonian -c Z + F shoots the source
curve onto the zero section.

Run with ``python3 demos/ising_relaxation.py``.
"""
import numpy as np

from contact_thermo.ising import (
    IsingParams,
    compare_scenarios,
    dPdQ_at_chord,
    equilibrium_branches,
    fold_point,
    lambda_a_alpha,
    make_admissible,
    scenario_I_limit,
    scenario_II_limit,
)
from contact_thermo.legendrian import find_reeb_chords, zero_section
from contact_thermo.relaxation import ShootingProblem, shoot


def branches():
    params = IsingParams(b=6.0, beta=1.0)
    br = equilibrium_branches(params, (-8.0, 8.0), 9)
    print(f"case {params.case}, fold at |q| = {fold_point(6.0, 1.0):.6f}")
    print("      q     r_minus         s    r_plus")
    for row in zip(br.q, br.r_minus, br.s, br.r_plus):
        print("  " + "  ".join(f"{v:8.4f}" if np.isfinite(v) else "       -" for v in row))


def scenarios():
    params = IsingParams(b=6.0, beta=1.0, c=1.0)
    p0, q0 = 0.2, 0.5
    pI, tag = scenario_I_limit(params, p0, q0)
    lim = scenario_II_limit(params, p0, q0)
    print(f"start (p, q) = ({p0}, {q0}) inside the hysteresis window")
    print(f"  fixed field:          p -> {pI:.6f} ({tag})")
    print(f"  conserved q + b p:    p -> {lim.p_inf:.6f}, q -> {lim.q_inf:.6f}")
    print("max |p_I - p_II| over starts with |q0| >= 5 and distance <= delta:")
    for delta in (0.0, 1e-3, 1e-2, 1e-1):
        r = compare_scenarios(params, delta, K=5.0)
        print(f"  delta = {delta:<6g} gap = {r['max_discrepancy']:.3e}")


def chords_and_shooting():
    a, alpha, b, beta = 4.0, 1.0, 1.5, 0.4
    src = lambda_a_alpha(a, alpha, b, beta, (-10.0, 10.0))
    chords = find_reeb_chords(src, zero_section((-10.0, 10.0), frame="PQZ"), (-10.0, 10.0))
    for ch in chords:
        print(f"Reeb chord at Q = {ch.q:+.2e}, length {ch.length:.6f}, nondegenerate {ch.nondegenerate}")
    print(f"  dP/dQ at the chord = {dPdQ_at_chord(a, alpha, b, beta):.6f}")
    adm = make_admissible(c=1.0, eps=0.1)
    prob = ShootingProblem(adm.H, src, zero_section(period=adm.tau, frame="PQZ"))
    rep = shoot(prob, grid_size=24, refine=False, keep_trajectories=False)
    print(f"shooting with {adm.H.name}: {rep.counts()}")
    print(f"  captured without leaving H > 0: {len(rep.captured_in_sigma_plus())}")


if __name__ == "__main__":
    branches()
    print()
    scenarios()
    print()
    chords_and_shooting()
