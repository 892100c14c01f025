"""Glauber dynamics of a Curie-Weiss magnet and its mean-field limit.

The exact law of the magnetization is the lumped birth-death chain on
{0, ..., M} up spins. Its mean is compared with a Gillespie ensemble and
with the scalar mean-field ODE p' = -c p + c tanh(beta (q + b p)) as the
system grows. A second table runs the perturbed chain driven by an
admissible Hamiltonian and shows it approaching its own mean-field limit.

Run with ``python3 demos/glauber_dynamics.py``.
"""
import numpy as np

from contact_thermo import glauber as gl
from contact_thermo.ising import make_admissible

B, BETA, Q, C = 0.5, 1.0, 0.3, 1.0
T = np.linspace(0.0, 4.0, 9)


def lumped_mean(M, m0):
    sys = gl.SpinSystem.curie_weiss(M, 1, B, Q, BETA, C)
    k0 = int(round(0.5 * M * (1 + m0)))
    pi0 = np.zeros(M + 1)
    pi0[k0] = 1.0
    mags = (2.0 * np.arange(M + 1) - M) / M
    return gl.lumped_master_evolve(sys, pi0, T) @ mags


def size_sweep():
    ode = gl.mean_field_ode(B, BETA, C, Q, 1.0, T)
    print("mean magnetization from all spins up; mean-field ODE in the last column")
    print("     t " + "".join(f"  M={M:<6d}" for M in (10, 100, 1000)) + "      ODE")
    cols = [lumped_mean(M, 1.0) for M in (10, 100, 1000)]
    for i, t in enumerate(T):
        print(f"  {t:4.1f} " + "".join(f"  {c[i]:8.5f}" for c in cols) + f"  {ode[i]:8.5f}")


def monte_carlo():
    M = 12
    sys = gl.SpinSystem.curie_weiss(M, 1, B, Q, BETA, C)
    exact = lumped_mean(M, 1.0)
    mc = gl.gillespie_ensemble(sys, np.ones(M), T, runs=2000, seed=1)
    z = np.abs(mc.mean - exact) / np.maximum(mc.se, 1e-12)
    print(f"Gillespie, M = {M}, 2000 runs: largest deviation {z[1:].max():.2f} standard errors")


def perturbed():
    # the bump in F has width rho = 0.1, so chains with 1/sqrt(M) comparable to rho
    # feel a smoothed F and lag behind the mean field; the gap closes as M grows
    adm = make_admissible(c=C, eps=0.2)
    t = np.linspace(0.0, 3.0, 4)
    print(f"perturbed chain driven by {adm.H.name}, magnetization at t = 3 from m0 = 0.5")
    for M in (400, 1600, 6400):
        sys = gl.SpinSystem.curie_weiss(M, 1, 0.0, 0.0, BETA, C)
        mc = gl.perturbed_ensemble(sys, 0.5, 0.0, 0.0, adm.F, t, runs=100, seed=2)["m"]
        mf = gl.perturbed_mean_field(sys, 0.5, 0.0, 0.0, adm.F, t)[-1, 0]
        print(f"  M = {M:<5d} ensemble {mc.mean[-1]:.4f} +- {mc.se[-1]:.4f}   mean field {mf:.4f}")


if __name__ == "__main__":
    size_sweep()
    print()
    monte_carlo()
    print()
    perturbed()
