"""Carrying 1 kg at 1 G on steeper and steeper surfaces.

Flat ground never pulls a gripper past 15 N on the reference robot; on a
wall or ceiling both controllers lose grip.  Each incline takes two full
rollouts, so this sweep runs for several minutes.
"""
import math
from dataclasses import replace

import numpy as np

from climbsim.control import ControllerMode
from climbsim.metrics import rolling_maxima
from climbsim.scenario import NumericalDivergence, load_preset, run_simulation, scenario_model, slope_gravity_direction

base = load_preset("case1_earth")
model = scenario_model(base)
for slope in (0.0, 0.8, 1.2, math.pi / 2, math.pi):
    sc = replace(base, terrain_slope=slope, gravity_direction=slope_gravity_direction(slope))
    row = [f"incline {slope:5.3f} rad"]
    for mode in (ControllerMode.BASELINE, ControllerMode.BASE_ADMITTANCE):
        try:
            log = run_simulation(model, sc, mode=mode)
        except NumericalDivergence as exc:
            log = exc.log
        row.append(f"{mode.value}: detach {log.n_detach_events}, peak force {rolling_maxima(log).peak_force:6.2f} N, "
                   f"min TSM {np.nanmin(log.tsm):+.3f} m")
    print("  ".join(row))
