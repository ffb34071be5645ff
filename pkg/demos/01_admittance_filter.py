"""How the base admittance filter responds to a load, for each shipped gain set.

A constant wrench settles at w / K; the damping-to-inertia ratio of the
shipped gains is so high that the response is essentially first order with
time constant D / K.
"""
import numpy as np

from climbsim.control import AdmittanceParams, AdmittanceState, admittance_update

dt = 1e-3
push = np.array([0.0, -10.0, 0.0, 0.0, 0.0, 0.0])   # 10 N sideways

for name, (m, d, k) in {"1 G": (1, 1e4, 4e5), "1/6 G": (1, 5e3, 5e4), "micro-g": (1, 5e3, 2e4)}.items():
    p = AdmittanceParams.uniform(m, d, k)
    s = AdmittanceState()
    trace = []
    for _ in range(3000):
        s = admittance_update(p, s, push, dt)
        trace.append(s.deviation[1])
    trace = np.array(trace)
    t63 = (np.argmax(trace <= 0.632 * push[1] / k) + 1) * dt
    print(f"{name:8s} K={k:8.0f}  settles at {trace[-1] * 1e3:+.4f} mm (w/K = {push[1] / k * 1e3:+.4f} mm), "
          f"63% after {t63 * 1e3:.0f} ms (D/K = {d / k * 1e3:.0f} ms)")

# the sub-millimetre deflections above are why the controller changes so little
# on the reference robot: joint PD stiffness alone lets the base sag by millimetres.
