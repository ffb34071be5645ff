"""Scenario description, disturbance schedule and the fixed-step rollout."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import _toml
from .contact import (ContactParams, FootContact, Mode, attach, contact_wrench, flat_terrain,
                      update_attachment)
from .control import (AdmittanceParams, ControlInputs, ControllerConfig, ControllerMode, ControllerState, PdGains,
                      control_step)
from .dynamics import (GeneralizedForce, SolveFailure, SystemState, body_set, center_of_mass, forward_dynamics,
                       integrate_step, terms_from_bodies)
from .gait import GaitParams, CrawlSchedule, gait_targets, plan_crawl
from .kinematics import leg_inverse_kinematics
from .metrics import SimulationLog, gia_margin, tumble_stability_margin
from .spatial import Pose, RobotModel, Twist, Wrench, read_robot_model, reference_model, total_mass

PRESETS = ("case1_earth", "case1_lunar", "case2_micro")
G_EARTH = 9.81


class ScenarioError(ValueError):
    """Parse or validation failure; the message starts with the offending field path."""


class NumericalDivergence(RuntimeError):
    def __init__(self, t: float, log: SimulationLog):
        super().__init__(f"state became non-finite at t={t:.4f} s")
        self.t = t
        self.log = log


@dataclass(frozen=True)
class AddedMass:
    mass: float


@dataclass(frozen=True)
class BaseWrench:
    wrench: Wrench


@dataclass(frozen=True)
class DisturbanceEvent:
    kind: Union[AddedMass, BaseWrench]
    t_start: float
    t_end: float

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise ValueError("t_start < t_end")
        if isinstance(self.kind, AddedMass) and not self.kind.mass > 0:
            raise ValueError("mass > 0")

    def active(self, t: float) -> bool:
        return self.t_start <= t < self.t_end


@dataclass(frozen=True)
class Disturbance:
    added_mass: float
    wrench: Wrench


def slope_gravity_direction(slope: float) -> np.ndarray:
    """Unit gravity direction in the terrain frame for a surface tilted by ``slope``.

    The tilt is about the terrain y axis with +x pointing uphill: 0 is flat
    ground, pi/2 a vertical wall climbed along +x, pi a ceiling.
    """
    return np.array([-math.sin(slope), 0.0, -math.cos(slope)])


@dataclass(frozen=True)
class Scenario:
    name: str = "custom"
    duration: float = 9.0
    dt: float = 1.0e-3
    log_period: float = 1.0e-2
    gravity_magnitude: float = G_EARTH
    terrain_slope: float = 0.0
    gravity_direction: Optional[np.ndarray] = None
    mode: ControllerMode = ControllerMode.BASE_ADMITTANCE
    admittance: AdmittanceParams = field(default_factory=lambda: AdmittanceParams.uniform(1.0, 1.0e4, 4.0e5))
    foot_admittance: Optional[AdmittanceParams] = None
    pd: PdGains = field(default_factory=PdGains)
    tau_max: float = 2.0
    gait: GaitParams = field(default_factory=GaitParams)
    n_cycles: int = 2
    base_height: float = 0.07
    stance_reach: float = 0.15
    contact: ContactParams = field(default_factory=ContactParams)
    disturbances: tuple = ()
    robot: str = "reference"
    free_float: bool = False
    output_dir: str = "out"

    def __post_init__(self):
        if self.gravity_direction is None:
            object.__setattr__(self, "gravity_direction", slope_gravity_direction(self.terrain_slope))
        d = np.asarray(self.gravity_direction, dtype=float).reshape(3)
        if abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise ScenarioError("gravity.direction: must be a unit vector")
        object.__setattr__(self, "gravity_direction", d)
        object.__setattr__(self, "disturbances", tuple(self.disturbances))
        checks = [
            ("dt", self.dt > 0, "must be positive"),
            ("log_period", self.log_period >= self.dt, "must be at least dt"),
            ("duration", self.duration >= self.gait.cycle_time, "must cover at least one gait cycle"),
            ("gravity.magnitude", self.gravity_magnitude >= 0, "must be non-negative"),
            ("pd.tau_max", self.tau_max > 0, "must be positive"),
            ("gait.n_cycles", self.n_cycles >= 0, "must be non-negative"),
            ("stance.base_height", self.base_height > 0, "must be positive"),
            ("stance.reach", self.stance_reach > 0, "must be positive"),
        ]
        for path, ok, msg in checks:
            if not ok:
                raise ScenarioError(f"{path}: {msg}")

    @property
    def gravity(self) -> np.ndarray:
        return self.gravity_magnitude * self.gravity_direction

    @property
    def steps(self) -> int:
        return int(round(self.duration / self.dt))

    @property
    def log_every(self) -> int:
        return max(1, int(round(self.log_period / self.dt)))


# ---------------------------------------------------------------------------
# scenario files
# ---------------------------------------------------------------------------

_SECTIONS = {
    "": {"name", "duration", "dt", "log_period", "mode", "robot", "free_float", "output_dir",
         "gravity", "admittance", "foot_admittance", "pd", "gait", "stance", "contact", "disturbances"},
    "gravity": {"magnitude", "slope", "direction"},
    "admittance": {"m", "d", "k"},
    "foot_admittance": {"m", "d", "k"},
    "pd": {"k_p", "k_d", "tau_max"},
    "gait": {"cycle_time", "duty_factor", "stride", "swing_height", "leg_order", "heading", "settle_time",
             "sway", "n_cycles"},
    "stance": {"base_height", "reach"},
    "contact": {"stiffness", "damping", "pull_off_force", "attach_tolerance"},
    "disturbances": {"kind", "mass", "force", "moment", "start", "end"},
}


def _check_keys(table, section: str, path: str) -> None:
    if not isinstance(table, dict):
        raise ScenarioError(f"{path or section}: expected a table")
    for key in table:
        if key not in _SECTIONS[section]:
            where = f"{path}.{key}" if path else key
            raise ScenarioError(f"{where}: unknown key")


def _build(path: str, factory, *args, **kwargs):
    try:
        return factory(*args, **kwargs)
    except ScenarioError:
        raise
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


def _admittance(table: dict, path: str) -> AdmittanceParams:
    _check_keys(table, "admittance", path)
    missing = [k for k in ("m", "d", "k") if k not in table]
    if missing:
        raise ScenarioError(f"{path}.{missing[0]}: missing field")
    return _build(path, AdmittanceParams, table["m"], table["d"], table["k"])


def _disturbance(table: dict, path: str) -> DisturbanceEvent:
    _check_keys(table, "disturbances", path)
    for key in ("kind", "start", "end"):
        if key not in table:
            raise ScenarioError(f"{path}.{key}: missing field")
    kind = table["kind"]
    if kind == "added_mass":
        if "mass" not in table:
            raise ScenarioError(f"{path}.mass: missing field")
        payload = AddedMass(float(table["mass"]))
    elif kind == "base_wrench":
        w = _build(path, Wrench, table.get("force", (0.0, 0.0, 0.0)), table.get("moment", (0.0, 0.0, 0.0)))
        payload = BaseWrench(w)
    else:
        raise ScenarioError(f"{path}.kind: expected 'added_mass' or 'base_wrench', got {kind!r}")
    return _build(path, DisturbanceEvent, payload, float(table["start"]), float(table["end"]))


def load_scenario(text: str, base_dir: Optional[Path] = None) -> Scenario:
    """Parse and validate a TOML scenario.  Relative robot paths resolve against ``base_dir``."""
    try:
        data = _toml.parse(text)
    except _toml.TomlError as exc:
        raise ScenarioError(str(exc)) from exc
    _check_keys(data, "", "")
    kw = {}
    for key in ("name", "duration", "dt", "log_period", "free_float", "output_dir"):
        if key in data:
            kw[key] = data[key]
    if "mode" in data:
        try:
            kw["mode"] = ControllerMode(data["mode"])
        except ValueError:
            choices = ", ".join(m.value for m in ControllerMode)
            raise ScenarioError(f"mode: expected one of {choices}, got {data['mode']!r}") from None
    if "robot" in data:
        robot = str(data["robot"])
        if robot != "reference":
            p = Path(robot)
            if not p.is_absolute() and base_dir is not None:
                p = Path(base_dir) / p
            if not p.is_file():
                raise ScenarioError(f"robot: model file not found: {p}")
            robot = str(p)
        kw["robot"] = robot

    g = data.get("gravity", {})
    _check_keys(g, "gravity", "gravity")
    if "magnitude" in g:
        kw["gravity_magnitude"] = float(g["magnitude"])
    if "slope" in g:
        kw["terrain_slope"] = float(g["slope"])
    if "direction" in g:
        d = np.asarray(g["direction"], dtype=float)
        if d.shape != (3,) or not np.linalg.norm(d) > 0:
            raise ScenarioError("gravity.direction: expected a non-zero 3-vector")
        kw["gravity_direction"] = d / np.linalg.norm(d)

    if "admittance" in data:
        kw["admittance"] = _admittance(data["admittance"], "admittance")
    if "foot_admittance" in data:
        kw["foot_admittance"] = _admittance(data["foot_admittance"], "foot_admittance")

    pd = data.get("pd", {})
    _check_keys(pd, "pd", "pd")
    gains = {k: float(pd[k]) for k in ("k_p", "k_d") if k in pd}
    kw["pd"] = _build("pd", PdGains, **gains)
    if "tau_max" in pd:
        kw["tau_max"] = float(pd["tau_max"])

    gait = dict(data.get("gait", {}))
    _check_keys(gait, "gait", "gait")
    if "n_cycles" in gait:
        kw["n_cycles"] = int(gait.pop("n_cycles"))
    for key, value in gait.items():
        try:
            GaitParams(**{key: value})
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"gait.{key}: {exc}") from exc
    kw["gait"] = _build("gait", GaitParams, **gait)

    stance = data.get("stance", {})
    _check_keys(stance, "stance", "stance")
    if "base_height" in stance:
        kw["base_height"] = float(stance["base_height"])
    if "reach" in stance:
        kw["stance_reach"] = float(stance["reach"])

    contact = data.get("contact", {})
    _check_keys(contact, "contact", "contact")
    kw["contact"] = _build("contact", ContactParams, **contact)

    events = data.get("disturbances", [])
    if not isinstance(events, list):
        raise ScenarioError("disturbances: expected an array of tables")
    kw["disturbances"] = tuple(_disturbance(e, f"disturbances[{i}]") for i, e in enumerate(events))
    return _build("scenario", Scenario, **kw)


def read_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"scenario: cannot read {path}: {exc.strerror}") from exc
    return load_scenario(text, base_dir=path.parent)


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ScenarioError(f"scenario: unknown preset {name!r} (choose from {', '.join(PRESETS)})")
    return resources.files("climbsim.data").joinpath(f"{name}.toml").read_text(encoding="utf-8")


def load_preset(name: str) -> Scenario:
    return load_scenario(preset_text(name))


def resolve_scenario(ref: str) -> Scenario:
    """A preset name or a path to a scenario file."""
    if ref in PRESETS:
        return load_preset(ref)
    return read_scenario(ref)


def scenario_model(scenario: Scenario) -> RobotModel:
    return reference_model() if scenario.robot == "reference" else read_robot_model(scenario.robot)


def transport_mass(model: RobotModel, scenario: Scenario) -> float:
    """Robot mass plus every payload the scenario adds, used to normalize cost of transport."""
    return total_mass(model) + sum(e.kind.mass for e in scenario.disturbances if isinstance(e.kind, AddedMass))


# ---------------------------------------------------------------------------
# rollout
# ---------------------------------------------------------------------------

def disturbance_at(scenario: Scenario, t: float) -> Disturbance:
    mass = 0.0
    force = np.zeros(3)
    moment = np.zeros(3)
    for ev in scenario.disturbances:
        if not ev.active(t):
            continue
        if isinstance(ev.kind, AddedMass):
            mass += ev.kind.mass
        else:
            force = force + ev.kind.wrench.force
            moment = moment + ev.kind.wrench.moment
    return Disturbance(mass, Wrench(force, moment))


def initial_footholds(model: RobotModel, scenario: Scenario) -> np.ndarray:
    """Stance footholds on the surface: each hip pushed outward by ``stance_reach``."""
    feet = []
    for limb in model.limbs:
        c, s = math.cos(limb.mount_yaw), math.sin(limb.mount_yaw)
        hip = limb.hip_offset_in_base
        feet.append([hip[0] + scenario.stance_reach * c, hip[1] + scenario.stance_reach * s, 0.0])
    return np.array(feet)


def plan_for(model: RobotModel, scenario: Scenario) -> CrawlSchedule:
    feet = initial_footholds(model, scenario)
    return plan_crawl(scenario.gait, feet, [0.0, 0.0, scenario.base_height], scenario.n_cycles, model=model)


def initial_state(model: RobotModel, scenario: Scenario, schedule: CrawlSchedule) -> SystemState:
    base = Pose(np.array([0.0, 0.0, scenario.base_height]))
    q = np.concatenate([leg_inverse_kinematics(model, i, base.inverse_transform(schedule.footholds[i]))
                        for i in range(model.n_limbs)])
    n = model.joints_total
    return SystemState(base, Twist(), q, np.zeros(n))


class _Recorder:
    def __init__(self, n_legs: int, n_joints: int, period: float):
        self.rows = {k: [] for k in ("t", "foot_force", "tau", "base_position", "base_orientation", "base_twist",
                                     "contact_mode", "power", "tsm", "giam")}
        self.detach = []
        self.fault = []
        self.period = period

    def add(self, **kw):
        for k, v in kw.items():
            if k == "detach_event":
                self.detach.append(v)
            elif k == "control_fault":
                self.fault.append(v)
            else:
                self.rows[k].append(v)

    def log(self, completed: bool) -> SimulationLog:
        arr = {k: np.array(v, dtype=float) for k, v in self.rows.items()}
        return SimulationLog(detach_event=list(self.detach), control_fault=list(self.fault),
                             sample_period=self.period, completed=completed, **arr)


_MODE_CODE = {Mode.SWING: 0, Mode.ATTACHED: 1, Mode.DETACHED: 2}


def run_simulation(model: RobotModel, scenario: Scenario, mode: Optional[ControllerMode] = None,
                   dt: Optional[float] = None) -> SimulationLog:
    """Roll out ``scenario`` with a fixed step; ``mode`` and ``dt`` override the scenario's."""
    if mode is not None or dt is not None:
        scenario = replace(scenario, mode=mode or scenario.mode, dt=dt or scenario.dt)
    h = scenario.dt
    schedule = plan_for(model, scenario)
    state = initial_state(model, scenario, schedule)
    n_legs, n = model.n_limbs, model.joints_total
    gravity = scenario.gravity
    cparams = scenario.contact
    config = ControllerConfig(model, scenario.mode, scenario.admittance,
                              scenario.foot_admittance or scenario.admittance, scenario.pd, scenario.tau_max)

    if scenario.free_float:
        contacts = [FootContact(Mode.SWING) for _ in range(n_legs)]
    else:
        contacts = [FootContact(Mode.ATTACHED, schedule.footholds[i].copy()) for i in range(n_legs)]
    ctrl_state = ControllerState()
    seek = np.zeros(n_legs)
    prev_height = np.full(n_legs, np.nan)
    rec = _Recorder(n_legs, n, h * scenario.log_every)
    energy = 0.0
    energy_t0 = 0.0
    pending_events: list = []
    pending_faults: list = []

    for k in range(scenario.steps + 1):
        t = k * h
        dist = disturbance_at(scenario, t)
        bodies = body_set(model, state, dist.added_mass)
        nu = state.velocity
        feet = bodies.feet
        foot_vel = (bodies.J_b @ nu[:6] + bodies.J_m @ nu[6:]).reshape(n_legs, 6)[:, :3]
        g = gait_targets(schedule, t)

        # swing feet release their grip; stance feet grasp once they touch down
        if not scenario.free_float:
            for i in range(n_legs):
                c = contacts[i]
                landing = not g.in_swing(i) or g.swing_progress[i] >= 0.5
                if g.in_swing(i):
                    seek[i] = 0.0
                    if c.mode is not Mode.SWING and not landing:
                        contacts[i] = c = FootContact(Mode.SWING)
                if c.mode is Mode.SWING and landing:
                    contacts[i] = _touch_down(feet[i], prev_height[i], cparams.attach_tolerance) or c
                    if not g.in_swing(i) and not contacts[i].attached:
                        seek[i] += h
                prev_height[i] = feet[i][2] - flat_terrain(feet[i][0], feet[i][1])
        wrenches = [contact_wrench(cparams, contacts[i], feet[i], foot_vel[i]) for i in range(n_legs)]
        attached = np.array([c.attached for c in contacts])

        if scenario.free_float:
            tau = np.zeros(n)
        else:
            targets = g.targets.copy()
            for i in range(n_legs):
                if attached[i]:
                    targets[i] = contacts[i].anchor
                elif contacts[i].mode is Mode.SWING and seek[i] > 0.0:
                    targets[i] = _touchdown_target(targets[i], feet[i], seek[i])
            inputs = ControlInputs(g.nominal_base, targets, attached, wrenches, bodies.J_b, state.joints,
                                   state.joint_rates)
            out = control_step(config, inputs, ctrl_state, h)
            ctrl_state = out.state
            tau = out.tau
            if out.fault:
                pending_faults.append(f"t={t:.3f}: {out.fault}")

        terms = terms_from_bodies(bodies, nu, gravity)
        try:
            acc = forward_dynamics(terms, GeneralizedForce(dist.wrench, tau), bodies.J_b, bodies.J_m, wrenches)
        except SolveFailure as exc:
            raise NumericalDivergence(t, rec.log(False)) from exc

        for i in range(n_legs):
            contacts[i], ev = update_attachment(cparams, contacts[i], wrenches[i], i, t)
            if ev is not None:
                pending_events.append(f"limb {ev.limb_id} t={ev.t:.3f} pull={ev.pull_force:.2f}")

        power = float(np.abs(tau @ state.joint_rates))
        if k % scenario.log_every == 0:
            span = t - energy_t0
            mean_power = energy / span if span > 0 else power
            rec.add(t=t, foot_force=[w.force for w in wrenches], tau=tau, base_position=state.base_pose.position,
                    base_orientation=state.base_pose.orientation, base_twist=nu[:6],
                    contact_mode=[_MODE_CODE[c.mode] for c in contacts], power=mean_power,
                    tsm=_tsm(contacts, bodies, dist, gravity, cparams),
                    giam=_giam(contacts, bodies, wrenches, model),
                    detach_event="; ".join(pending_events), control_fault="; ".join(pending_faults))
            pending_events, pending_faults = [], []
            energy, energy_t0 = 0.0, t
        energy += power * h

        if k == scenario.steps:
            break
        state = integrate_step(state, acc, h)
        if not state.is_finite():
            raise NumericalDivergence(t + h, rec.log(False))
    return rec.log(True)


# stance feet that have not grasped yet keep moving toward the surface
SEEK_RATE = 0.02    # m/s
SEEK_DEPTH = 0.01   # m


def _touch_down(foot, prev_height: float, tolerance: float) -> Optional[FootContact]:
    """Grasp once the foot reaches the surface: touching, slightly into it, or crossed since the last step."""
    height = foot[2] - flat_terrain(foot[0], foot[1])
    crossed = np.isfinite(prev_height) and prev_height > 0.0 > height
    if -tolerance <= height <= 0.0 or crossed:
        return attach(np.array([foot[0], foot[1], foot[2] - height]), flat_terrain, tolerance)
    return None


def _touchdown_target(planned, foot, waited: float) -> np.ndarray:
    """Target for a stance foot that has not grasped yet: keep moving toward the surface."""
    out = np.array(planned, dtype=float)
    if foot[2] > flat_terrain(foot[0], foot[1]):
        out[2] -= min(SEEK_RATE * waited, SEEK_DEPTH)
    return out


def _tsm(contacts, bodies, dist: Disturbance, gravity, cparams: ContactParams) -> float:
    anchors = [c.anchor for c in contacts if c.attached]
    if len(anchors) < 2:
        return math.nan
    m = float(bodies.mass.sum())
    force = m * np.asarray(gravity) + dist.wrench.force
    return tumble_stability_margin(np.array(anchors), center_of_mass(bodies), force, dist.wrench.moment,
                                   cparams.surface_normal)


def _giam(contacts, bodies, wrenches, model: RobotModel) -> float:
    anchors = [c.anchor for c in contacts if c.attached]
    if not anchors:
        return 0.0
    # the feet currently carry m * (a_com - F_nc / m); the margin asks how far that load can scale
    m = float(bodies.mass.sum())
    contact_sum = np.sum([w.force for w in wrenches], axis=0)
    a_gi = -contact_sum / m
    margin, _ = gia_margin(np.array(anchors), center_of_mass(bodies), a_gi, m, model.grip_force_max)
    return margin
