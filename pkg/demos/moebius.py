"""The contact Moebius model: w = z + i p evolves by w' = w^2 - 1.

Inside the solid torus p^2 + z^2 <= 1 the flow is the Moebius map
w(t) = (w0 cosh t - sinh t) / (cosh t - w0 sinh t). Every orbit except the
fixed circle is pulled to the stable core {p = 0, z = -1} and repelled
from the unstable core {p = 0, z = 1}. Reversing time swaps the two cores.

Run with ``python3 demos/moebius.py``.
"""
import math

import numpy as np

from contact_thermo.legendrian import constant_section, distance_to
from contact_thermo.models import MoebiusModel, moebius_trajectory
from contact_thermo.relaxation import compute_cores

TWO_PI = 2 * math.pi


def orbits():
    model = MoebiusModel()
    stable = constant_section(-1.0, period=TWO_PI)
    print("orbits: distance to the stable core after t = 20")
    for x0 in ([0.5, 0.0, 0.0], [-0.9, 1.0, 0.2], [0.1, 2.0, 0.99], [0.0, 0.3, 0.7]):
        res = moebius_trajectory(model, x0, 20.0, np.linspace(0, 20, 201))
        d = float(distance_to(stable, res["endpoint"]))
        print(f"  x0 = {x0}  closed-form error {res['closed_form_error']:.1e}  distance {d:.2e}")


def cores():
    model = MoebiusModel()
    H = model.hamiltonian()
    span = (0.0, TWO_PI), (0.01, TWO_PI + 0.01)
    fwd = compute_cores(H, model.torus, *span, n_u=32, n_v=16, s_max=15.0)
    bwd = compute_cores(H.reversed(), model.torus, *span, n_u=32, n_v=16, s_max=15.0)
    print("cores of the invariant torus p^2 + z^2 = 1")
    for label, res in (("forward", fwd), ("reversed", bwd)):
        z_minus = np.median(res.cloud_minus[:, 2])
        z_plus = np.median(res.cloud_plus[:, 2])
        print(f"  {label:8s}  attracting core at z = {z_minus:+.4f}, repelling core at z = {z_plus:+.4f}")


if __name__ == "__main__":
    orbits()
    print()
    cores()
