"""Periodic one-leg-at-a-time crawl: footstep schedule, swing curves and base sway.

Coordinates are in the terrain frame: the surface is the plane z = 0 and +z
points away from it.  The nominal base pose moves through keyframes placed at
swing boundaries.  Each keyframe is offset from the foothold centroid away
from the two legs swinging around it, which keeps the base inside every
support triangle it passes through.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .kinematics import KinematicsError, leg_inverse_kinematics
from .spatial import Pose, RobotModel

LEG_NAMES = ("LF", "RF", "RH", "LH")


class StrideUnreachable(Exception):
    def __init__(self, limb_id: int, t: float, reason: str):
        super().__init__(f"limb {limb_id} cannot reach its target at t={t:.3f} s ({reason})")
        self.limb_id = limb_id
        self.t = t


@dataclass(frozen=True)
class GaitParams:
    cycle_time: float = 4.0
    duty_factor: float = 0.75
    stride: float = 0.05
    swing_height: float = 0.03
    leg_order: tuple = (0, 1, 2, 3)
    heading: tuple = (1.0, 0.0)
    settle_time: float = 0.5
    sway: float = 0.04

    def __post_init__(self):
        object.__setattr__(self, "leg_order", tuple(int(i) for i in self.leg_order))
        h = np.asarray(self.heading, dtype=float)
        if h.shape != (2,) or abs(np.linalg.norm(h) - 1.0) > 1e-9:
            raise ValueError("heading must be a unit 2-vector")
        object.__setattr__(self, "heading", (float(h[0]), float(h[1])))
        if not 0.5 <= self.duty_factor < 1.0:
            raise ValueError("duty_factor must lie in [0.5, 1)")
        if sorted(self.leg_order) != list(range(len(self.leg_order))):
            raise ValueError("leg_order must be a permutation of the limbs")
        n = len(self.leg_order)
        if self.duty_factor < 1.0 - 1.0 / n - 1e-12:
            raise ValueError(f"one swing at a time needs duty_factor >= {1.0 - 1.0 / n}")
        if not self.cycle_time > 0 or self.stride < 0 or self.swing_height < 0 or self.settle_time < 0:
            raise ValueError("cycle_time > 0, stride >= 0, swing_height >= 0, settle_time >= 0")

    @property
    def swing_duration(self) -> float:
        return (1.0 - self.duty_factor) * self.cycle_time


@dataclass(frozen=True)
class Swing:
    leg: int
    t_start: float
    t_end: float
    start: np.ndarray
    goal: np.ndarray


@dataclass(frozen=True)
class CrawlSchedule:
    params: GaitParams
    footholds: np.ndarray          # (N, 3) initial
    swings: tuple
    key_times: np.ndarray
    key_xy: np.ndarray             # (K, 2)
    base_height: float

    @property
    def duration(self) -> float:
        return float(self.key_times[-1])

    def footholds_at(self, t: float) -> np.ndarray:
        """Planned foothold of every foot, counting swings finished by ``t``."""
        feet = self.footholds.copy()
        for s in self.swings:
            if s.t_end <= t:
                feet[s.leg] = s.goal
        return feet


@dataclass(frozen=True)
class GaitTargets:
    swing_progress: np.ndarray     # NaN for stance feet
    targets: np.ndarray            # (N, 3)
    nominal_base: Pose

    def in_swing(self, leg: int) -> bool:
        return not math.isnan(self.swing_progress[leg])


def _smoothstep(s: float) -> float:
    return s * s * (3.0 - 2.0 * s)


def swing_trajectory(start, goal, height: float, progress: float) -> np.ndarray:
    """Quintic blend from start to goal with a sine-squared lift along +z."""
    if not -1e-12 <= progress <= 1.0 + 1e-12:
        raise ValueError("progress must lie in [0, 1]")
    p = min(1.0, max(0.0, progress))
    s = p * p * p * (10.0 + p * (-15.0 + 6.0 * p))
    start = np.asarray(start, dtype=float)
    out = start + s * (np.asarray(goal, dtype=float) - start)
    out[2] += height * math.sin(math.pi * p) ** 2
    return out


def _sway_point(feet: np.ndarray, leg_a: int, leg_b: int, sway: float) -> np.ndarray:
    centroid = feet[:, :2].mean(axis=0)
    ua = feet[leg_a, :2] - centroid
    ub = feet[leg_b, :2] - centroid
    d = -(ua / np.linalg.norm(ua) + ub / np.linalg.norm(ub))
    norm = np.linalg.norm(d)
    if norm < 1e-9:
        return centroid
    return centroid + sway * d / norm


def plan_crawl(params: GaitParams, footholds, base_position, n_cycles: int,
               model: Optional[RobotModel] = None) -> CrawlSchedule:
    """Deterministic crawl schedule; with ``model`` every keyframe is checked for reach."""
    footholds = np.array(footholds, dtype=float)
    n_legs = footholds.shape[0]
    if len(params.leg_order) != n_legs:
        raise ValueError("leg_order length must match the number of footholds")
    heading = np.array([params.heading[0], params.heading[1], 0.0])
    quarter = params.cycle_time / n_legs
    t0 = params.settle_time

    feet = footholds.copy()
    swings = []
    key_times = [0.0]
    key_xy = [np.asarray(base_position, dtype=float)[:2].copy()]
    order = params.leg_order
    total = n_legs * n_cycles
    for k in range(total + 1):
        tb = t0 + k * quarter
        prev_leg = order[(k - 1) % n_legs]
        next_leg = order[k % n_legs]
        if tb > key_times[-1] and total > 0:
            key_times.append(tb)
            key_xy.append(_sway_point(feet, prev_leg, next_leg, params.sway))
        if k < total:
            goal = feet[next_leg] + params.stride * heading
            swings.append(Swing(next_leg, tb, tb + params.swing_duration, feet[next_leg].copy(), goal))
            feet[next_leg] = goal
    t_end = t0 + total * quarter + params.settle_time
    key_times.append(t_end)
    key_xy.append(np.asarray(base_position, dtype=float)[:2] + n_cycles * params.stride * heading[:2])

    schedule = CrawlSchedule(params, footholds, tuple(swings), np.array(key_times), np.array(key_xy),
                             float(np.asarray(base_position, dtype=float)[2]))
    if model is not None:
        _check_reach(model, schedule)
    return schedule


def _check_reach(model: RobotModel, schedule: CrawlSchedule) -> None:
    probe_times = list(schedule.key_times)
    probe_times += [0.5 * (s.t_start + s.t_end) for s in schedule.swings]
    for t in sorted(probe_times):
        g = gait_targets(schedule, t)
        for i in range(model.n_limbs):
            try:
                leg_inverse_kinematics(model, i, g.nominal_base.inverse_transform(g.targets[i]))
            except KinematicsError as exc:
                raise StrideUnreachable(i, t, str(exc)) from exc


def nominal_base(schedule: CrawlSchedule, t: float) -> Pose:
    times = schedule.key_times
    t = min(max(t, 0.0), times[-1])
    k = int(np.searchsorted(times, t, side="right")) - 1
    k = min(k, len(times) - 2)
    span = times[k + 1] - times[k]
    s = _smoothstep((t - times[k]) / span) if span > 0 else 1.0
    xy = schedule.key_xy[k] + s * (schedule.key_xy[k + 1] - schedule.key_xy[k])
    return Pose(np.array([xy[0], xy[1], schedule.base_height]))


def gait_targets(schedule: CrawlSchedule, t: float) -> GaitTargets:
    t = min(max(t, 0.0), schedule.duration)
    feet = schedule.footholds.copy()
    progress = np.full(feet.shape[0], np.nan)
    h = schedule.params.swing_height
    for s in schedule.swings:
        if s.t_end <= t:
            feet[s.leg] = s.goal
        elif s.t_start <= t:
            p = (t - s.t_start) / (s.t_end - s.t_start)
            progress[s.leg] = p
            feet[s.leg] = swing_trajectory(s.start, s.goal, h, p)
    return GaitTargets(progress, feet, nominal_base(schedule, t))


def support_margin(points_xy: np.ndarray, p_xy) -> float:
    """Signed distance from ``p_xy`` to the boundary of the convex hull of ``points_xy``."""
    pts = np.asarray(points_xy, dtype=float)
    c = pts.mean(axis=0)
    order = np.argsort(np.arctan2(pts[:, 1] - c[1], pts[:, 0] - c[0]))
    pts = pts[order]
    p = np.asarray(p_xy, dtype=float)
    margin = np.inf
    for a, b in zip(pts, np.roll(pts, -1, axis=0)):
        e = b - a
        nrm = np.linalg.norm(e)
        margin = min(margin, (e[0] * (p[1] - a[1]) - e[1] * (p[0] - a[0])) / nrm)
    return float(margin)
