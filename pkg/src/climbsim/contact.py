"""Anchor-based spring-damper grasp contact with pull-off detachment."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .spatial import Wrench


class Mode(enum.Enum):
    SWING = "swing"
    ATTACHED = "attached"
    DETACHED = "detached"


class AttachTooFar(Exception):
    def __init__(self, distance: float):
        super().__init__(f"foot is {distance * 1e3:.3f} mm from the surface")
        self.distance = distance


@dataclass(frozen=True)
class ContactParams:
    stiffness: np.ndarray = field(default_factory=lambda: np.full(3, 1.0e4))
    damping: np.ndarray = field(default_factory=lambda: np.full(3, 20.0))
    pull_off_force: float = 15.0
    surface_normal: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    attach_tolerance: float = 1.0e-3

    def __post_init__(self):
        k = np.broadcast_to(np.asarray(self.stiffness, dtype=float), (3,)).copy()
        d = np.broadcast_to(np.asarray(self.damping, dtype=float), (3,)).copy()
        n = np.asarray(self.surface_normal, dtype=float).reshape(3)
        if np.any(k <= 0):
            raise ValueError("contact stiffness must be positive")
        if np.any(d < 0):
            raise ValueError("contact damping must be non-negative")
        if not self.pull_off_force > 0:
            raise ValueError("pull_off_force must be positive")
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise ValueError("surface_normal must be a unit vector")
        object.__setattr__(self, "stiffness", k)
        object.__setattr__(self, "damping", d)
        object.__setattr__(self, "surface_normal", n)


@dataclass(frozen=True)
class FootContact:
    mode: Mode = Mode.SWING
    anchor: Optional[np.ndarray] = None
    penetration: np.ndarray = field(default_factory=lambda: np.zeros(3))
    penetration_rate: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @property
    def attached(self) -> bool:
        return self.mode is Mode.ATTACHED


@dataclass(frozen=True)
class DetachEvent:
    limb_id: int
    t: float
    pull_force: float


def contact_wrench(params: ContactParams, contact: FootContact, foot_pos, foot_vel) -> Wrench:
    """Force exerted by the grasp on the foot; zero unless attached."""
    if contact.mode is not Mode.ATTACHED:
        return Wrench()
    delta = contact.anchor - np.asarray(foot_pos, dtype=float)
    delta_rate = -np.asarray(foot_vel, dtype=float)
    return Wrench(params.stiffness * delta + params.damping * delta_rate, np.zeros(3))


def with_penetration(contact: FootContact, foot_pos, foot_vel) -> FootContact:
    if contact.mode is not Mode.ATTACHED:
        return contact
    return FootContact(contact.mode, contact.anchor, contact.anchor - np.asarray(foot_pos, dtype=float),
                       -np.asarray(foot_vel, dtype=float))


def pull_force(params: ContactParams, wrench_on_robot: Wrench) -> float:
    """Tension carried by the gripper, i.e. how hard the robot pulls away from the surface.

    The grasp resists pull-off by pulling the foot into the surface, so the
    tension is the component of the grasp force along the inward normal.
    """
    return float(-wrench_on_robot.force @ params.surface_normal)


def update_attachment(params: ContactParams, contact: FootContact, wrench_on_robot: Wrench,
                      limb_id: int = -1, t: float = float("nan")) -> tuple[FootContact, Optional[DetachEvent]]:
    if contact.mode is not Mode.ATTACHED:
        return contact, None
    tension = pull_force(params, wrench_on_robot)
    if tension > params.pull_off_force:
        return FootContact(Mode.DETACHED), DetachEvent(limb_id, t, tension)
    return contact, None


def attach(foot_pos, terrain_height_fn: Callable[[float, float], float], tolerance: float = 1.0e-3) -> FootContact:
    """Grasp the surface below the foot (terrain given as height over the plane)."""
    p = np.asarray(foot_pos, dtype=float)
    h = float(terrain_height_fn(p[0], p[1]))
    distance = abs(p[2] - h)
    if distance > tolerance:
        raise AttachTooFar(distance)
    return FootContact(Mode.ATTACHED, np.array([p[0], p[1], h]))


def flat_terrain(x: float, y: float) -> float:
    return 0.0
