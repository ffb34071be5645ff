"""Geometric value types and the robot description.

Quaternions are stored scalar-first (w, x, y, z).  All quantities are SI.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
import tomli_w

from . import _toml


class ModelError(ValueError):
    """Raised when a robot description fails to parse or validate."""


# ---------------------------------------------------------------------------
# small SO(3) helpers
# ---------------------------------------------------------------------------

def skew(v) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = math.sqrt(float(q @ q))
    if n < 1e-12:
        raise ValueError("cannot normalize a zero quaternion")
    return q / n


def quat_mul(a, b) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conj(q) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_to_matrix(q) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_exp(rotvec) -> np.ndarray:
    """Unit quaternion of the rotation vector ``rotvec``."""
    rotvec = np.asarray(rotvec, dtype=float)
    angle = math.sqrt(float(rotvec @ rotvec))
    if angle < 1e-8:
        # second-order series keeps the map smooth through zero
        return quat_normalize(np.concatenate(([1.0 - angle * angle / 8.0], 0.5 * rotvec)))
    half = 0.5 * angle
    return np.concatenate(([math.cos(half)], math.sin(half) / angle * rotvec))


def quat_log(q) -> np.ndarray:
    """Rotation vector of a unit quaternion, angle in [0, pi]."""
    q = np.asarray(q, dtype=float)
    if q[0] < 0.0:
        q = -q
    v = q[1:]
    s = math.sqrt(float(v @ v))
    if s < 1e-12:
        return 2.0 * v / q[0]
    angle = 2.0 * math.atan2(s, q[0])
    return angle / s * v


def rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


# ---------------------------------------------------------------------------
# value types
# ---------------------------------------------------------------------------

def _vec3(v, name: str) -> np.ndarray:
    a = np.array(v, dtype=float).reshape(3)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be finite")
    return a


@dataclass(frozen=True)
class Pose:
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    orientation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self):
        object.__setattr__(self, "position", _vec3(self.position, "position"))
        object.__setattr__(self, "orientation", quat_normalize(self.orientation))

    @property
    def rotation(self) -> np.ndarray:
        return quat_to_matrix(self.orientation)

    def transform(self, p) -> np.ndarray:
        """Map a point from this frame into the parent frame."""
        return self.position + self.rotation @ np.asarray(p, dtype=float)

    def inverse_transform(self, p) -> np.ndarray:
        return self.rotation.T @ (np.asarray(p, dtype=float) - self.position)


@dataclass(frozen=True)
class Twist:
    linear: np.ndarray = field(default_factory=lambda: np.zeros(3))
    angular: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "linear", _vec3(self.linear, "linear"))
        object.__setattr__(self, "angular", _vec3(self.angular, "angular"))

    def as_vector(self) -> np.ndarray:
        return np.concatenate((self.linear, self.angular))


@dataclass(frozen=True)
class Wrench:
    force: np.ndarray = field(default_factory=lambda: np.zeros(3))
    moment: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "force", _vec3(self.force, "force"))
        object.__setattr__(self, "moment", _vec3(self.moment, "moment"))

    def as_vector(self) -> np.ndarray:
        return np.concatenate((self.force, self.moment))

    @classmethod
    def from_vector(cls, v) -> "Wrench":
        v = np.asarray(v, dtype=float)
        return cls(v[:3], v[3:6])

    def __add__(self, other: "Wrench") -> "Wrench":
        return Wrench(self.force + other.force, self.moment + other.moment)


# ---------------------------------------------------------------------------
# robot description
# ---------------------------------------------------------------------------

def _check_spd(m: np.ndarray, what: str) -> None:
    if m.shape != (3, 3) or not np.all(np.isfinite(m)):
        raise ModelError(f"invariant violation: {what} must be a finite 3x3 matrix")
    if not np.allclose(m, m.T, rtol=0.0, atol=1e-12):
        raise ModelError(f"invariant violation: {what} symmetric")
    if np.linalg.eigvalsh(m).min() <= 0.0:
        raise ModelError(f"invariant violation: {what} positive definite")


@dataclass(frozen=True)
class LimbModel:
    """One yaw-pitch-pitch limb.

    The limb's zero axis points radially outward from the base centre through
    the hip, so a limb at zero joint angles is stretched horizontally outward.
    Link inertias are expressed in each link's own frame (x along the link)
    about the link centre of mass, which sits at mid-length.
    """

    hip_offset_in_base: np.ndarray
    link_lengths: np.ndarray
    link_masses: np.ndarray
    link_inertias: np.ndarray
    joint_limits: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "hip_offset_in_base", np.array(self.hip_offset_in_base, dtype=float).reshape(3))
        object.__setattr__(self, "link_lengths", np.array(self.link_lengths, dtype=float).reshape(3))
        object.__setattr__(self, "link_masses", np.array(self.link_masses, dtype=float).reshape(3))
        object.__setattr__(self, "link_inertias", np.array(self.link_inertias, dtype=float).reshape(3, 3, 3))
        object.__setattr__(self, "joint_limits", np.array(self.joint_limits, dtype=float).reshape(3, 2))
        if not np.all(np.isfinite(self.hip_offset_in_base)):
            raise ModelError("invariant violation: hip_offset_in_base finite")
        if np.any(~(self.link_lengths > 0)):
            raise ModelError("invariant violation: link_lengths > 0")
        if np.any(~(self.link_masses > 0)):
            raise ModelError("invariant violation: link_masses > 0")
        for k in range(3):
            _check_spd(self.link_inertias[k], f"link_inertias[{k}]")
        if np.any(~(self.joint_limits[:, 0] < self.joint_limits[:, 1])):
            raise ModelError("invariant violation: joint limit lower < upper")

    @property
    def mount_yaw(self) -> float:
        return math.atan2(self.hip_offset_in_base[1], self.hip_offset_in_base[0])

    @property
    def reach(self) -> float:
        return float(self.link_lengths.sum())


@dataclass(frozen=True)
class RobotModel:
    base_mass: float
    base_inertia: np.ndarray
    limbs: tuple
    grip_force_max: float

    def __post_init__(self):
        object.__setattr__(self, "base_mass", float(self.base_mass))
        object.__setattr__(self, "base_inertia", np.array(self.base_inertia, dtype=float).reshape(3, 3))
        object.__setattr__(self, "limbs", tuple(self.limbs))
        object.__setattr__(self, "grip_force_max", float(self.grip_force_max))
        if not self.base_mass > 0:
            raise ModelError("invariant violation: base_mass > 0")
        _check_spd(self.base_inertia, "base_inertia")
        if not self.grip_force_max > 0:
            raise ModelError("invariant violation: grip_force_max > 0")
        if not self.limbs:
            raise ModelError("invariant violation: at least one limb")

    @property
    def n_limbs(self) -> int:
        return len(self.limbs)

    @property
    def joints_total(self) -> int:
        return 3 * len(self.limbs)


def total_mass(model: RobotModel) -> float:
    return model.base_mass + float(sum(l.link_masses.sum() for l in model.limbs))


_TOP_KEYS = {"base_mass", "base_inertia", "grip_force_max", "limbs"}
_LIMB_KEYS = {"hip_offset_in_base", "link_lengths", "link_masses", "link_inertias", "joint_limits"}


def _require(table: dict, keys: set, where: str) -> None:
    unknown = sorted(set(table) - keys)
    if unknown:
        raise ModelError(f"unknown key '{where}{unknown[0]}'")
    missing = sorted(keys - set(table))
    if missing:
        raise ModelError(f"missing field '{where}{missing[0]}'")


def load_robot_model(text: str) -> RobotModel:
    """Parse and validate a TOML robot description."""
    try:
        data = _toml.parse(text)
    except _toml.TomlError as exc:
        raise ModelError(str(exc)) from exc
    _require(data, _TOP_KEYS, "")
    limbs = []
    for i, ld in enumerate(data["limbs"]):
        _require(ld, _LIMB_KEYS, f"limbs[{i}].")
        try:
            limbs.append(LimbModel(**ld))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ModelError):
                raise
            raise ModelError(f"limbs[{i}]: {exc}") from exc
    try:
        return RobotModel(
            base_mass=data["base_mass"],
            base_inertia=data["base_inertia"],
            limbs=limbs,
            grip_force_max=data["grip_force_max"],
        )
    except ModelError:
        raise
    except (TypeError, ValueError) as exc:
        raise ModelError(str(exc)) from exc


def dump_robot_model(model: RobotModel) -> str:
    data = {
        "base_mass": model.base_mass,
        "base_inertia": model.base_inertia.tolist(),
        "grip_force_max": model.grip_force_max,
        "limbs": [
            {
                "hip_offset_in_base": l.hip_offset_in_base.tolist(),
                "link_lengths": l.link_lengths.tolist(),
                "link_masses": l.link_masses.tolist(),
                "link_inertias": l.link_inertias.tolist(),
                "joint_limits": l.joint_limits.tolist(),
            }
            for l in model.limbs
        ],
    }
    return tomli_w.dumps(data)


def read_robot_model(path) -> RobotModel:
    with open(path, encoding="utf-8") as fh:
        return load_robot_model(fh.read())


def reference_model() -> RobotModel:
    """The shipped 2 kg quadruped climbing-robot description."""
    text = resources.files("climbsim.data").joinpath("reference_robot.toml").read_text(encoding="utf-8")
    return load_robot_model(text)
