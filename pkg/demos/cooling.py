"""Newton cooling as a contact flow.

A body with entropy q and temperature p = exp(q) sits in a bath. Three
variants of the cooling Hamiltonian are run side by side:

* coupled: the body relaxes to the bath equilibrium at rate a - b, which
  is Newton's law of cooling read off from the gap p - exp(q);
* isentropic: entropy is frozen and only the temperature relaxes;
* sine: entropy creeps up towards the next level pi k / N and never
  crosses it, so the limit depends on where the run starts.

Run with ``python3 demos/cooling.py``.
"""
import math

import numpy as np

from contact_thermo.models import (
    CoolingModel,
    cooling_closed_form,
    cooling_flow,
    cooling_isentropic,
    cooling_sine,
    fit_decay_rate,
)


def coupled():
    model = CoolingModel(a=3.0, b=1.0, sigma=0.0)
    x0 = [2.0, 0.4, 1.0]
    res = cooling_flow(model, x0, 12.0, np.linspace(0, 12, 241))
    t = np.linspace(5, 12, 50)
    x = cooling_closed_form(model, x0, t)
    rate = fit_decay_rate(t, x[:, 0] - np.exp(x[:, 1]))
    print("coupled cooling")
    print(f"  start (p, q, z)       = {np.round(x0, 4)}")
    print(f"  end                   = {np.round(res['endpoint'], 6)}")
    print(f"  bath equilibrium      = {np.round(model.equilibrium(model.sigma), 6)}")
    print(f"  integrator vs closed  = {res['closed_form_error']:.2e}")
    print(f"  fitted cooling rate   = {rate:.4f} (a - b = {model.a - model.b:g})")


def isentropic():
    model = CoolingModel(a=2.0, b=0.0, variant="isentropic")
    res = cooling_isentropic(model, [1.5, -0.3, 0.4], 20.0, np.linspace(0, 20, 201))
    print("isentropic cooling")
    print(f"  entropy drift         = {res['q_drift']:.2e}")
    print(f"  end                   = {np.round(res['endpoint'], 6)}")
    print(f"  predicted limit       = {np.round(res['limit'], 6)}")


def sine():
    model = CoolingModel(a=2.0, b=0.0, variant="sine", eps=0.5, N=3)
    print("sine cooling: entropy stalls below the next multiple of pi/3")
    for q0 in (0.2, 1.3, 2.5):
        res = cooling_sine(model, [1.0, q0, 0.5], 224.0, np.linspace(0, 224, 449))
        print(f"  q0 = {q0:.2f} -> q(224) = {res['trajectory'].q[-1, 0]:.5f}"
              f"  level {res['q_target']:.5f}  increment {res['increment']:.4f}")
    print(f"  (pi/3 = {math.pi / 3:.5f})")


if __name__ == "__main__":
    coupled()
    print()
    isentropic()
    print()
    sine()
