import numpy as np
import pytest

from climbsim.contact import Mode
from climbsim.control import ControllerMode
from climbsim.dynamics import body_set, momentum
from climbsim.gait import GaitParams
from climbsim.metrics import SimulationLog
from climbsim.output import csv_header, emit_outputs, log_to_csv, summarize, summary_text
from climbsim.scenario import (PRESETS, plan_for, AddedMass, BaseWrench, DisturbanceEvent, Scenario, ScenarioError,
                               disturbance_at, load_preset, load_scenario, preset_text, read_scenario,
                               run_simulation, scenario_model, slope_gravity_direction, transport_mass)
from climbsim.spatial import Wrench, dump_robot_model, reference_model, total_mass

SHORT = """
name = "short"
duration = 2.0
dt = 0.0005
log_period = 0.01
mode = "admittance"

[gravity]
magnitude = 9.81

[gait]
cycle_time = 1.0
n_cycles = 1

[[disturbances]]
kind = "added_mass"
mass = 0.5
start = 0.0
end = 2.0
"""

STILL = """
name = "still"
duration = 1.0
dt = 0.0005
log_period = 0.01

[gravity]
magnitude = 0.0

[gait]
cycle_time = 1.0
n_cycles = 0
"""


@pytest.fixture(scope="module")
def short_logs():
    sc = load_scenario(SHORT)
    m = scenario_model(sc)
    return sc, m, {mode.value: run_simulation(m, sc, mode=mode)
                   for mode in (ControllerMode.BASELINE, ControllerMode.BASE_ADMITTANCE)}


# -- presets ----------------------------------------------------------------

def test_micro_preset():
    sc = load_preset("case2_micro")
    assert sc.gravity_magnitude == pytest.approx(9.81e-6)
    assert np.allclose(sc.gravity, [0, 0, -9.81e-6])
    assert (sc.admittance.M[0], sc.admittance.D[0], sc.admittance.K[0]) == (1.0, 5.0e3, 2.0e4)
    assert sc.mode is ControllerMode.BASE_ADMITTANCE


def test_earth_preset():
    sc = load_preset("case1_earth")
    assert sc.gravity_magnitude == 9.81
    assert (sc.admittance.M[0], sc.admittance.D[0], sc.admittance.K[0]) == (1.0, 1.0e4, 4.0e5)
    (ev,) = sc.disturbances
    assert isinstance(ev.kind, AddedMass) and ev.kind.mass == 1.0
    assert ev.t_start <= 0.0 and ev.t_end >= sc.duration


def test_lunar_preset():
    sc = load_preset("case1_lunar")
    assert sc.gravity_magnitude == pytest.approx(9.81 / 6, rel=1e-3)
    assert (sc.admittance.D[0], sc.admittance.K[0]) == (5.0e3, 5.0e4)


def test_presets_cover_the_walk(model):
    for name in PRESETS:
        sc = load_preset(name)
        assert plan_for(model, sc).duration <= sc.duration


@pytest.mark.parametrize("t, force", [(1.2, [-5, 0, 0]), (2.0, [0, 0, 0]), (7.2, [0, -10, 0]), (4.7, [0, 5, 0]),
                                      (1.5, [0, 0, 0]), (1.0, [-5, 0, 0])])
def test_micro_disturbance_schedule(t, force):
    d = disturbance_at(load_preset("case2_micro"), t)
    assert np.array_equal(d.wrench.force, force) and d.added_mass == 0.0


def test_overlapping_wrenches_superpose():
    a = DisturbanceEvent(BaseWrench(Wrench([1.0, 2.0, 0.0], [0, 0, 0.1])), 0.0, 2.0)
    b = DisturbanceEvent(BaseWrench(Wrench([-3.0, 0.5, 1.0])), 1.0, 3.0)
    c = DisturbanceEvent(AddedMass(0.3), 0.5, 1.5)
    sc = Scenario(disturbances=(a, b, c))
    d = disturbance_at(sc, 1.2)
    assert np.array_equal(d.wrench.force, [-2.0, 2.5, 1.0]) and np.array_equal(d.wrench.moment, [0, 0, 0.1])
    assert d.added_mass == 0.3
    assert np.array_equal(disturbance_at(sc, 2.5).wrench.force, [-3.0, 0.5, 1.0])


def test_transport_mass_counts_payload(model):
    assert transport_mass(model, load_preset("case1_earth")) == pytest.approx(total_mass(model) + 1.0)
    assert transport_mass(model, load_preset("case2_micro")) == pytest.approx(total_mass(model))


def test_slope_directions():
    assert np.allclose(slope_gravity_direction(0.0), [0, 0, -1])
    assert np.allclose(slope_gravity_direction(np.pi / 2), [-1, 0, 0])
    assert np.allclose(slope_gravity_direction(np.pi), [0, 0, 1])


# -- parse errors -----------------------------------------------------------

@pytest.mark.parametrize("text, pattern", [
    ('dt = 0.001\ndt = 0.002\n', "duplicate key 'dt'"),
    ('dt = -1.0\n', r"^dt: "),
    ('duration = 1.0\n', r"^duration: "),
    ('mode = "fast"\n', r"^mode: "),
    ('speed = 3\n', r"^speed: unknown key"),
    ('[gait]\nstride = -1.0\n', r"^gait\.stride: "),
    ('[gait]\nduty_factor = 0.5\n', r"^gait\.duty_factor: "),
    ('[pd]\nk_p = 0.0\n', r"^pd: "),
    ('[gravity]\ndirection = [0, 0, 0]\n', r"^gravity\.direction: "),
    ('[[disturbances]]\nkind = "added_mass"\nmass = 1.0\nstart = 2.0\nend = 1.0\n', r"^disturbances\[0\]"),
    ('[[disturbances]]\nkind = "added_mass"\nmass = -1.0\nstart = 0.0\nend = 1.0\n', r"^disturbances\[0\]"),
    ('[[disturbances]]\nkind = "gust"\nstart = 0.0\nend = 1.0\n', r"^disturbances\[0\]\.kind"),
    ('robot = "no/such/robot.toml"\n', r"^robot: "),
    ('dt = \n', r"parse failure"),
])
def test_invalid_scenarios_name_the_field(text, pattern):
    with pytest.raises(ScenarioError, match=pattern):
        load_scenario(text)


def test_unknown_preset():
    with pytest.raises(ScenarioError, match="unknown preset"):
        preset_text("case9")


def test_robot_file_relative_to_scenario(tmp_path):
    (tmp_path / "bot.toml").write_text(dump_robot_model(reference_model()))
    (tmp_path / "sc.toml").write_text('robot = "bot.toml"\n')
    sc = read_scenario(tmp_path / "sc.toml")
    assert total_mass(scenario_model(sc)) == pytest.approx(2.0)


def test_defaults_fill_missing_sections():
    sc = load_scenario("")
    assert sc.dt == 1e-3 and sc.n_cycles == 2 and sc.gait == GaitParams()


# -- rollouts ---------------------------------------------------------------

def test_short_walk_completes(short_logs):
    sc, m, logs = short_logs
    for log in logs.values():
        assert log.completed and log.n_detach_events == 0
        assert len(log) == int(round(sc.duration / sc.log_period)) + 1
        assert np.all(np.diff(log.t) > 0)
        assert np.allclose(np.diff(log.t), sc.log_period)
        # one stride forward
        assert log.base_position[-1, 0] == pytest.approx(sc.gait.stride, abs=5e-3)
        assert np.all(log.contact_mode[-1] == 1)


def test_rollout_is_deterministic(short_logs, tmp_path):
    sc, m, logs = short_logs
    again = run_simulation(m, sc, mode=ControllerMode.BASE_ADMITTANCE)
    assert log_to_csv(again) == log_to_csv(logs["admittance"])
    a = emit_outputs(logs, sc, tmp_path / "a", m)
    b = emit_outputs(logs, sc, tmp_path / "b", m)
    for pa, pb in zip(a["csv"] + a["plots"] + [a["summary"]], b["csv"] + b["plots"] + [b["summary"]]):
        assert pa.read_bytes() == pb.read_bytes()


def test_outputs_written(short_logs, tmp_path):
    sc, m, logs = short_logs
    w = emit_outputs(logs, sc, tmp_path, m)
    assert sorted(p.name for p in w["csv"]) == ["short_admittance.csv", "short_baseline.csv"]
    assert sorted(p.name for p in w["plots"]) == ["base_trajectory.svg", "max_joint_torque.svg",
                                                    "max_reaction_force.svg", "stability_margins.svg"]
    text = w["summary"].read_text()
    assert "average_cot" in text and "peak_reaction_force" in text
    header = w["csv"][0].read_text().splitlines()[0].split(",")
    assert header == csv_header(4, 12)


def test_zero_disturbance_modes_agree_on_still_stance():
    sc = load_scenario(STILL)
    m = scenario_model(sc)
    a = run_simulation(m, sc, mode=ControllerMode.BASELINE)
    b = run_simulation(m, sc, mode=ControllerMode.BASE_ADMITTANCE)
    assert np.abs(a.tau - b.tau).max() <= 1e-12


def test_free_float_conserves_momentum():
    sc = load_scenario(STILL.replace('name = "still"', 'name = "float"\nfree_float = true')
                       .replace("duration = 1.0", "duration = 10.0").replace("dt = 0.0005", "dt = 0.001"))
    log = run_simulation(scenario_model(sc), sc)
    assert np.all(log.contact_mode == 0)
    assert np.abs(log.base_twist).max() < 1e-6 and np.abs(log.tau).max() == 0.0


def test_added_mass_raises_grip_loads(short_logs):
    sc, m, logs = short_logs
    light = load_scenario(SHORT.split("[[disturbances]]")[0])
    base = run_simulation(m, light, mode=ControllerMode.BASELINE)
    z_heavy = logs["baseline"].foot_force[-1, :, 2].sum()
    z_light = base.foot_force[-1, :, 2].sum()
    assert z_heavy == pytest.approx(z_light + 0.5 * 9.81, rel=0.05)


def test_pull_off_is_logged():
    # an 80 N pull away from the surface loads each of four grasps past 15 N
    sc = load_scenario(STILL + '[[disturbances]]\nkind = "base_wrench"\nforce = [0.0, 0.0, 80.0]\n'
                               'start = 0.2\nend = 0.4\n')
    log = run_simulation(scenario_model(sc), sc, mode=ControllerMode.BASELINE)
    events = [e for e in log.detach_event if e]
    assert events and events[0].startswith("limb ")
    assert log.n_detach_events == 4
    assert np.all(log.contact_mode[-1] == 2)
    assert np.all(log.foot_force[-1] == 0.0)


# -- CSV and summary ---------------------------------------------------------

def two_sample_log():
    k = 2
    return SimulationLog(np.array([0.0, 0.01]), np.arange(k * 12, dtype=float).reshape(k, 4, 3),
                         np.ones((k, 12)), np.zeros((k, 3)), np.tile([1.0, 0, 0, 0], (k, 1)), np.zeros((k, 6)),
                         np.ones((k, 4), int), np.array([0.5, 0.25]), np.array([0.1, np.nan]),
                         np.array([100.0, 3.0]), ["", "limb 1 t=0.010 pull=15.20"], ["", ""], 0.01)


def test_two_sample_csv():
    lines = log_to_csv(two_sample_log()).splitlines()
    assert len(lines) == 3
    header = lines[0].split(",")
    assert len(header) == 1 + 12 + 12 + 7 + 5
    assert header[:4] == ["t", "fx_0", "fy_0", "fz_0"] and header[13:15] == ["tau_0", "tau_1"]
    assert header[25:32] == ["base_x", "base_y", "base_z", "base_qw", "base_qx", "base_qy", "base_qz"]
    assert header[-5:] == ["tsm", "giam", "power", "detach_event", "control_fault"]
    assert all(len(l.split(",")) == len(header) for l in lines[1:])
    assert lines[2].split(",")[-2] == "limb 1 t=0.010 pull=15.20"


def test_summary_reports_reference_values():
    log = two_sample_log()
    s = summarize(log, 2.0, 9.81)
    assert s["peak_reaction_force"] == pytest.approx(np.linalg.norm([21, 22, 23]))
    assert s["average_cot"] is None and s["detach_events"] == 1
    text = summary_text("case1_lunar", {"baseline": s, "admittance": s})
    assert "1.42, 1.38" in text and "reference only" in text
