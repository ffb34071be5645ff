"""Admittance filters, inverse-kinematics target resolution and the PD joint law.

Three controller modes share the same joint-level PD position loop:

* ``BASELINE`` tracks the gait's nominal base pose directly.
* ``BASE_ADMITTANCE`` offsets the nominal base pose by the output of a
  mass-damper-spring filter driven by the foot loads mapped onto the base.
* ``EE_ADMITTANCE`` runs one filter per attached foot and offsets its target.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import expm

from .kinematics import KinematicsError, forward_kinematics, leg_inverse_kinematics
from .spatial import Pose, RobotModel, Wrench, quat_exp, quat_log, quat_mul, quat_conj


class ControllerMode(enum.Enum):
    BASELINE = "baseline"
    BASE_ADMITTANCE = "admittance"
    EE_ADMITTANCE = "ee_admittance"


@dataclass(frozen=True)
class AdmittanceParams:
    """Diagonals of the virtual inertia, damping and stiffness matrices."""

    M: np.ndarray
    D: np.ndarray
    K: np.ndarray

    def __post_init__(self):
        for name in ("M", "D", "K"):
            v = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (6,)).copy()
            object.__setattr__(self, name, v)
        if np.any(self.M <= 0):
            raise ValueError("virtual inertia must be positive")
        if np.any(self.D < 0) or np.any(self.K < 0):
            raise ValueError("virtual damping and stiffness must be non-negative")

    @classmethod
    def uniform(cls, m: float, d: float, k: float) -> "AdmittanceParams":
        return cls(np.full(6, m), np.full(6, d), np.full(6, k))


@dataclass(frozen=True)
class AdmittanceState:
    deviation: np.ndarray = field(default_factory=lambda: np.zeros(6))
    rate: np.ndarray = field(default_factory=lambda: np.zeros(6))
    # last drive sample; None means the next drive is held over the whole step
    drive: Optional[np.ndarray] = None


@dataclass(frozen=True)
class PdGains:
    k_p: float = 50.0
    k_d: float = 0.2

    def __post_init__(self):
        if not self.k_p > 0 or self.k_d < 0:
            raise ValueError("PD gains need k_p > 0 and k_d >= 0")


@lru_cache(maxsize=64)
def _axis_transition(m: float, d: float, k: float, dt: float) -> np.ndarray:
    # states: [x, xdot, u, udot]; u varies linearly across the step
    A = np.array([
        [0.0, 1.0, 0.0, 0.0],
        [-k / m, -d / m, 1.0 / m, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, 0.0, 0.0],
    ])
    return expm(A * dt)[:2]


def _transitions(params: AdmittanceParams, dt: float) -> np.ndarray:
    return np.array([_axis_transition(float(params.M[a]), float(params.D[a]), float(params.K[a]), float(dt))
                     for a in range(6)])


def admittance_update(params: AdmittanceParams, state: AdmittanceState, drive_wrench, dt: float) -> AdmittanceState:
    """Advance ``M x'' + D x' + K x = w`` by one step, per axis.

    The step is the exact solution for a drive that varies linearly between
    the previous sample and ``drive_wrench``; explicit Euler is unstable for
    the large damping-to-inertia ratios this filter is run with.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    w1 = np.asarray(drive_wrench, dtype=float).reshape(6)
    w0 = w1 if state.drive is None else state.drive
    T = _transitions(params, dt)                       # (6, 2, 4)
    x = np.stack((state.deviation, state.rate), axis=1)  # (6, 2)
    aug = np.concatenate((x, w0[:, None], ((w1 - w0) / dt)[:, None]), axis=1)
    out = np.einsum("aij,aj->ai", T, aug)
    return AdmittanceState(out[:, 0].copy(), out[:, 1].copy(), w1.copy())


def desired_base_pose(equilibrium: Pose, state: AdmittanceState) -> Pose:
    dev = state.deviation
    return Pose(equilibrium.position + dev[:3], quat_mul(equilibrium.orientation, quat_exp(dev[3:])))


def pose_deviation(equilibrium: Pose, pose: Pose) -> np.ndarray:
    """Inverse of :func:`desired_base_pose`: translation plus rotation vector."""
    rel = quat_mul(quat_conj(equilibrium.orientation), pose.orientation)
    return np.concatenate((pose.position - equilibrium.position, quat_log(rel)))


def base_internal_wrench(J_b, foot_wrenches: Sequence) -> np.ndarray:
    """``J_b^T F_e`` for stacked foot wrenches (Wrench objects or 6-vectors)."""
    F = np.concatenate([w.as_vector() if isinstance(w, Wrench) else np.asarray(w, dtype=float).reshape(6)
                        for w in foot_wrenches])
    return np.asarray(J_b).T @ F


def resolve_joint_targets(model: RobotModel, desired_base: Pose, foot_targets) -> np.ndarray:
    """Joint angles placing every foot at its world-frame target from ``desired_base``."""
    foot_targets = np.asarray(foot_targets, dtype=float)
    q = np.concatenate([
        leg_inverse_kinematics(model, i, desired_base.inverse_transform(foot_targets[i]))
        for i in range(model.n_limbs)
    ])
    residual = np.abs(forward_kinematics(model, desired_base, q) - foot_targets).max()
    if residual > 1e-9:
        raise KinematicsError(f"IK residual {residual:.3e} m")
    return q


def pd_joint_torque(gains: PdGains, phi_des, phi, phi_dot_des, phi_dot, tau_max: float = np.inf) -> np.ndarray:
    tau = gains.k_p * (np.asarray(phi_des) - np.asarray(phi)) + gains.k_d * (np.asarray(phi_dot_des) - np.asarray(phi_dot))
    return np.clip(tau, -tau_max, tau_max)


@dataclass(frozen=True)
class ControllerConfig:
    model: RobotModel
    mode: ControllerMode = ControllerMode.BASELINE
    base_params: Optional[AdmittanceParams] = None
    foot_params: Optional[AdmittanceParams] = None
    gains: PdGains = field(default_factory=PdGains)
    tau_max: float = 2.0


@dataclass(frozen=True)
class ControlInputs:
    nominal_base: Pose
    foot_targets: np.ndarray       # (N, 3) world targets; anchors for attached feet
    attached: np.ndarray           # (N,) bool
    foot_wrenches: Sequence        # grasp wrench on each foot
    J_b: np.ndarray
    joints: np.ndarray
    joint_rates: np.ndarray


@dataclass(frozen=True)
class ControllerState:
    base: AdmittanceState = field(default_factory=AdmittanceState)
    feet: tuple = ()
    last_targets: Optional[np.ndarray] = None


@dataclass(frozen=True)
class ControlOutput:
    tau: np.ndarray
    state: ControllerState
    targets: np.ndarray
    desired_base: Pose
    fault: Optional[str] = None


def sensor_wrenches(foot_wrenches: Sequence) -> list:
    """Loads the limbs apply to their grippers (what a foot F/T sensor reads)."""
    return [Wrench(-w.force, -w.moment) for w in foot_wrenches]


def base_drive(J_b, foot_wrenches: Sequence, equilibrium: Pose) -> np.ndarray:
    """Base filter input: limb loads mapped onto the base, moment in the equilibrium frame."""
    w = base_internal_wrench(J_b, sensor_wrenches(foot_wrenches))
    w[3:] = equilibrium.rotation.T @ w[3:]
    return w


def control_step(config: ControllerConfig, inputs: ControlInputs, state: ControllerState, dt: float) -> ControlOutput:
    model = config.model
    base_state = state.base
    foot_states = state.feet or tuple(AdmittanceState() for _ in range(model.n_limbs))
    desired_base = inputs.nominal_base
    targets_world = np.array(inputs.foot_targets, dtype=float)

    if config.mode is ControllerMode.BASE_ADMITTANCE:
        drive = base_drive(inputs.J_b, inputs.foot_wrenches, inputs.nominal_base)
        base_state = admittance_update(config.base_params, base_state, drive, dt)
        desired_base = desired_base_pose(inputs.nominal_base, base_state)
    elif config.mode is ControllerMode.EE_ADMITTANCE:
        new_states = []
        for i, w in enumerate(inputs.foot_wrenches):
            if inputs.attached[i]:
                s = admittance_update(config.foot_params, foot_states[i], w.as_vector(), dt)
                targets_world[i] = targets_world[i] + s.deviation[:3]
            else:
                s = AdmittanceState()
            new_states.append(s)
        foot_states = tuple(new_states)

    fault = None
    try:
        phi_des = resolve_joint_targets(model, desired_base, targets_world)
    except KinematicsError as exc:
        fault = str(exc)
        phi_des = state.last_targets if state.last_targets is not None else np.array(inputs.joints, dtype=float)

    if state.last_targets is None:
        phi_dot_des = np.zeros_like(phi_des)
    else:
        phi_dot_des = (phi_des - state.last_targets) / dt
    tau = pd_joint_torque(config.gains, phi_des, inputs.joints, phi_dot_des, inputs.joint_rates, config.tau_max)
    new_state = replace(state, base=base_state, feet=foot_states, last_targets=phi_des)
    return ControlOutput(tau, new_state, phi_des, desired_base, fault)
