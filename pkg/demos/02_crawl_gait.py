"""The crawl used by every scenario: one leg at a time, base swaying into the support triangle."""
import numpy as np

from climbsim.gait import LEG_NAMES, gait_targets, support_margin
from climbsim.scenario import load_preset, plan_for, scenario_model

sc = load_preset("case1_earth")
model = scenario_model(sc)
schedule = plan_for(model, sc)

print(f"{len(schedule.swings)} swings over {schedule.duration:.1f} s")
for s in schedule.swings:
    print(f"  {LEG_NAMES[s.leg]}  {s.t_start:4.1f}-{s.t_end:4.1f} s  "
          f"{np.round(s.start[:2], 3)} -> {np.round(s.goal[:2], 3)}")

# how close does the nominal base come to the edge of its support?
worst = (np.inf, 0.0)
for t in np.arange(0.0, schedule.duration, 0.01):
    g = gait_targets(schedule, t)
    stance = [i for i in range(4) if not g.in_swing(i)]
    m = support_margin(g.targets[stance, :2], g.nominal_base.position[:2])
    worst = min(worst, (m, t))
print(f"smallest support margin {worst[0] * 1e3:.1f} mm at t = {worst[1]:.2f} s")
