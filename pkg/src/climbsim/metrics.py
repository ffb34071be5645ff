"""Stability margins, cost of transport and peak load statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize


class ZeroDistance(ValueError):
    pass


@dataclass
class SimulationLog:
    """Fixed-period samples of one rollout.

    ``detach_event`` and ``control_fault`` hold one string per sample (empty
    when nothing happened).
    """

    t: np.ndarray
    foot_force: np.ndarray        # (K, N, 3) grasp force on each foot
    tau: np.ndarray               # (K, n)
    base_position: np.ndarray     # (K, 3)
    base_orientation: np.ndarray  # (K, 4) w, x, y, z
    base_twist: np.ndarray        # (K, 6)
    contact_mode: np.ndarray      # (K, N) 0 swing, 1 attached, 2 detached
    power: np.ndarray             # (K,)
    tsm: np.ndarray               # (K,) NaN where undefined
    giam: np.ndarray              # (K,)
    detach_event: list = field(default_factory=list)
    control_fault: list = field(default_factory=list)
    sample_period: float = 0.0
    completed: bool = True

    def __len__(self) -> int:
        return len(self.t)

    @property
    def n_detach_events(self) -> int:
        return sum(len(e.split(";")) for e in self.detach_event if e)


def _order_around(points: np.ndarray, normal: np.ndarray) -> np.ndarray:
    """Indices ordering ``points`` counter-clockwise seen from +normal."""
    c = points.mean(axis=0)
    u = np.cross(normal, [1.0, 0.0, 0.0])
    if np.linalg.norm(u) < 1e-6:
        u = np.cross(normal, [0.0, 1.0, 0.0])
    u /= np.linalg.norm(u)
    v = np.cross(normal, u)
    d = points - c
    return np.argsort(np.arctan2(d @ v, d @ u))


def tumble_stability_margin(anchors, com, force, moment=None, normal=(0.0, 0.0, 1.0)) -> float:
    """Smallest force-normalized restoring moment about the support-polygon edges.

    Each edge between adjacent anchors is a tumble axis; the applied wrench
    (``force`` through ``com`` plus ``moment``) is resolved about it and
    divided by ``|force|``, giving a length.  Positive values resist the
    tumble, zero is the tipping boundary.  Returns NaN with fewer than two
    anchors or a vanishing force.
    """
    anchors = np.asarray(anchors, dtype=float).reshape(-1, 3)
    force = np.asarray(force, dtype=float)
    fnorm = float(np.linalg.norm(force))
    if len(anchors) < 2 or fnorm == 0.0:
        return math.nan
    normal = np.asarray(normal, dtype=float)
    moment = np.zeros(3) if moment is None else np.asarray(moment, dtype=float)
    com = np.asarray(com, dtype=float)
    pts = anchors[_order_around(anchors, normal)]
    margin = math.inf
    for a, b in zip(pts, np.roll(pts, -1, axis=0)):
        e = b - a
        length = np.linalg.norm(e)
        if length < 1e-12:
            continue
        e /= length
        m_axis = e @ (np.cross(com - a, force) + moment)
        margin = min(margin, -m_axis / fnorm)
    return float(margin)


def _balance_matrix(anchors: np.ndarray, com: np.ndarray) -> np.ndarray:
    k = len(anchors)
    A = np.zeros((6, 3 * k))
    for i, r in enumerate(anchors - com):
        A[:3, 3 * i:3 * i + 3] = np.eye(3)
        A[3:, 3 * i:3 * i + 3] = np.array([[0.0, -r[2], r[1]], [r[2], 0.0, -r[0]], [-r[1], r[0], 0.0]])
    return A


def min_peak_grip_force(anchors, com, required_wrench) -> float:
    """Smallest possible largest foot-force norm that realizes ``required_wrench``.

    ``required_wrench`` is the net force and moment (about ``com``) the
    feet must supply.  Returns ``inf`` when no force distribution exists.
    """
    anchors = np.asarray(anchors, dtype=float).reshape(-1, 3)
    com = np.asarray(com, dtype=float)
    b = np.asarray(required_wrench, dtype=float)
    scale = float(np.linalg.norm(b))
    if scale == 0.0:
        return 0.0
    b = b / scale
    A = _balance_matrix(anchors, com)
    k = len(anchors)
    f0, *_ = np.linalg.lstsq(A, b, rcond=None)
    if np.linalg.norm(A @ f0 - b) > 1e-9:
        return math.inf
    if k == 1:
        return scale * float(np.linalg.norm(f0))
    # null-space parametrization keeps the equality constraints exact
    _, sv, vt = np.linalg.svd(A)
    rank = int((sv > 1e-10 * sv[0]).sum())
    Z = vt[rank:].T
    if Z.shape[1] == 0:
        return scale * float(np.linalg.norm(f0.reshape(k, 3), axis=1).max())

    def norms(y):
        return (f0 + Z @ y).reshape(k, 3)

    t0 = float(np.linalg.norm(norms(np.zeros(Z.shape[1])), axis=1).max())
    x0 = np.concatenate((np.zeros(Z.shape[1]), [t0]))
    cons = {
        "type": "ineq",
        "fun": lambda x: x[-1] ** 2 - (norms(x[:-1]) ** 2).sum(axis=1),
        "jac": lambda x: np.column_stack((
            -2.0 * np.einsum("ka,kaj->kj", norms(x[:-1]), Z.reshape(k, 3, -1)),
            np.full(k, 2.0 * x[-1]),
        )),
    }
    res = minimize(lambda x: x[-1], x0, jac=lambda x: np.eye(len(x))[-1], constraints=[cons],
                   method="SLSQP", options={"ftol": 1e-12, "maxiter": 200})
    f = norms(res.x[:-1])
    return scale * float(np.linalg.norm(f, axis=1).max())


def gia_margin(anchors, com, a_gi, mass: float, grip_force_max: float, cap: float = 100.0) -> tuple[float, bool]:
    """Fraction by which the gravito-inertial load can grow before the grasps saturate.

    Finds the largest ``s`` in ``[0, cap]`` for which feet bounded by
    ``grip_force_max`` in norm can balance ``(1 + s) * mass * a_gi`` applied
    at ``com`` (zero net moment).  Because the peak required grip force is
    homogeneous in the load, the search collapses to one convex solve.
    Returns ``(margin, infeasible)``; an already infeasible state gives 0.
    """
    a_gi = np.asarray(a_gi, dtype=float)
    anchors = np.asarray(anchors, dtype=float).reshape(-1, 3)
    if len(anchors) == 0:
        return 0.0, True
    required = np.concatenate((-mass * a_gi, np.zeros(3)))
    peak = min_peak_grip_force(anchors, com, required)
    if peak == 0.0:
        return cap, False
    if not peak <= grip_force_max:
        return 0.0, True
    return float(min(cap, grip_force_max / peak - 1.0)), False


def cost_of_transport(log: SimulationLog, total_mass: float, g_env: float, distance_epsilon: float = 1e-6) -> float:
    """Unsigned mechanical joint work over weight times in-plane distance."""
    if not g_env > 0:
        raise ValueError("g_env must be positive")
    travel = np.asarray(log.base_position[-1, :2]) - np.asarray(log.base_position[0, :2])
    distance = float(np.linalg.norm(travel))
    if distance <= distance_epsilon:
        raise ZeroDistance(f"base travelled {distance:.3e} m")
    dt = log.sample_period if log.sample_period > 0 else float(np.mean(np.diff(log.t)))
    energy = float(np.sum(log.power) * dt)
    return energy / (total_mass * g_env * distance)


@dataclass(frozen=True)
class Maxima:
    max_force: np.ndarray   # per-sample max foot-force norm
    max_torque: np.ndarray  # per-sample max |tau_j|
    peak_force: float
    peak_torque: float


def rolling_maxima(log: SimulationLog) -> Maxima:
    if len(log.t) == 0:
        raise ValueError("empty log")
    f = np.linalg.norm(np.asarray(log.foot_force), axis=2).max(axis=1)
    tau = np.abs(np.asarray(log.tau)).max(axis=1)
    return Maxima(f, tau, float(f.max()), float(tau.max()))
