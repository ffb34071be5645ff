"""Limb forward/inverse kinematics and the base and limb Jacobians.

Joint vectors are limb-major: limb 0 joints (yaw, pitch, pitch), then limb 1,
and so on.  Positive pitch rotates the distal link towards -z of the base
frame.
"""
from __future__ import annotations

import math

import numpy as np

from .spatial import Pose, RobotModel, rot_y, rot_z, skew

_Y = np.array([0.0, 1.0, 0.0])
_Z = np.array([0.0, 0.0, 1.0])


class KinematicsError(Exception):
    pass


class Unreachable(KinematicsError):
    def __init__(self, limb_id: int, distance_excess: float):
        super().__init__(f"limb {limb_id}: target out of reach by {distance_excess:.3g} m")
        self.limb_id = limb_id
        self.distance_excess = distance_excess


class JointLimitViolation(KinematicsError):
    def __init__(self, limb_id: int, joint_id: int, angle: float):
        super().__init__(f"limb {limb_id}: joint {joint_id} angle {angle:.4f} rad outside limits")
        self.limb_id = limb_id
        self.joint_id = joint_id
        self.angle = angle


def limb_chain(limb, q) -> dict:
    """Frames of one limb in the base frame.

    Returns joint origins, joint axes, link rotations, link centres of mass
    and the foot point, each stacked over the three joints/links.
    """
    L = limb.link_lengths
    R1 = rot_z(limb.mount_yaw + q[0])
    R2 = R1 @ rot_y(q[1])
    R3 = R2 @ rot_y(q[2])
    x1, x2, x3 = R1[:, 0], R2[:, 0], R3[:, 0]
    o1 = limb.hip_offset_in_base
    o2 = o1 + L[0] * x1
    o3 = o2 + L[1] * x2
    foot = o3 + L[2] * x3
    pitch_axis = R1 @ _Y
    return {
        "origins": np.array([o1, o2, o3]),
        "axes": np.array([_Z, pitch_axis, pitch_axis]),
        "rotations": np.array([R1, R2, R3]),
        "coms": np.array([o1 + 0.5 * L[0] * x1, o2 + 0.5 * L[1] * x2, o3 + 0.5 * L[2] * x3]),
        "foot": foot,
    }


def foot_in_base(model: RobotModel, limb_id: int, q) -> np.ndarray:
    return limb_chain(model.limbs[limb_id], q)["foot"]


def forward_kinematics(model: RobotModel, base: Pose, joints) -> np.ndarray:
    """World-frame foot positions, one row per limb."""
    joints = np.asarray(joints, dtype=float)
    R = base.rotation
    feet = np.empty((model.n_limbs, 3))
    for i, limb in enumerate(model.limbs):
        feet[i] = base.position + R @ limb_chain(limb, joints[3 * i:3 * i + 3])["foot"]
    return feet


def leg_inverse_kinematics(model: RobotModel, limb_id: int, foot_in_base_frame, check_limits: bool = True) -> np.ndarray:
    """Joint angles placing limb ``limb_id``'s foot at a base-frame point.

    The knee-down branch (second pitch >= 0) is always returned.
    """
    limb = model.limbs[limb_id]
    L1, L2, L3 = limb.link_lengths
    d = np.asarray(foot_in_base_frame, dtype=float) - limb.hip_offset_in_base
    if math.sqrt(float(d @ d)) > L1 + L2 + L3 + 1e-12:
        raise Unreachable(limb_id, math.sqrt(float(d @ d)) - (L1 + L2 + L3))
    radial = math.hypot(d[0], d[1])
    yaw = math.atan2(d[1], d[0]) - limb.mount_yaw if radial > 1e-12 else 0.0
    yaw = math.remainder(yaw, 2.0 * math.pi)
    u = radial - L1
    w = -d[2]
    r2 = u * u + w * w
    c3 = (r2 - L2 * L2 - L3 * L3) / (2.0 * L2 * L3)
    if c3 > 1.0 + 1e-12:
        raise Unreachable(limb_id, math.sqrt(r2) - (L2 + L3))
    if c3 < -1.0 - 1e-12:
        raise Unreachable(limb_id, abs(L2 - L3) - math.sqrt(r2))
    q3 = math.acos(min(1.0, max(-1.0, c3)))
    q2 = math.atan2(w, u) - math.atan2(L3 * math.sin(q3), L2 + L3 * math.cos(q3))
    q = np.array([yaw, q2, q3])
    if check_limits:
        lim = limb.joint_limits
        for j in range(3):
            if q[j] < lim[j, 0] - 1e-9 or q[j] > lim[j, 1] + 1e-9:
                raise JointLimitViolation(limb_id, j, q[j])
    return q


def base_jacobian(model: RobotModel, base: Pose, feet) -> np.ndarray:
    """Stacked (6N x 6) map from base twist to foot twists.

    Each block is ``[[I, -[r_i - r_b]x], [0, I]]`` with world-frame vectors.
    """
    feet = np.asarray(feet, dtype=float)
    N = model.n_limbs
    J = np.zeros((6 * N, 6))
    eye = np.eye(3)
    for i in range(N):
        J[6 * i:6 * i + 3, 0:3] = eye
        J[6 * i:6 * i + 3, 3:6] = -skew(feet[i] - base.position)
        J[6 * i + 3:6 * i + 6, 3:6] = eye
    return J


def limb_jacobian(model: RobotModel, base: Pose, joints) -> np.ndarray:
    """Stacked (6N x n) map from joint rates to foot twists (world frame).

    The angular rows carry the distal link's angular velocity.
    """
    joints = np.asarray(joints, dtype=float)
    N = model.n_limbs
    J = np.zeros((6 * N, 3 * N))
    R = base.rotation
    for i, limb in enumerate(model.limbs):
        ch = limb_chain(limb, joints[3 * i:3 * i + 3])
        foot = ch["foot"]
        for j in range(3):
            z = R @ ch["axes"][j]
            J[6 * i:6 * i + 3, 3 * i + j] = np.cross(z, R @ (foot - ch["origins"][j]))
            J[6 * i + 3:6 * i + 6, 3 * i + j] = z
    return J

