"""Floating-base equation of motion.

Generalized velocity is ``[v_b, w_b, dphi]``: world-frame linear velocity of
the base centre of mass, world-frame base angular velocity, then joint rates.
The inertia matrix is assembled by summing each body's contribution through
its point Jacobians; the bias vector ``c`` is the generalized inertial force
at zero acceleration minus the gravity load.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit
from scipy.linalg import cho_factor, cho_solve

from .spatial import Pose, RobotModel, Twist, Wrench, quat_exp, quat_mul, quat_normalize


class SolveFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class SystemState:
    base_pose: Pose
    base_twist: Twist
    joints: np.ndarray
    joint_rates: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "joints", np.array(self.joints, dtype=float))
        object.__setattr__(self, "joint_rates", np.array(self.joint_rates, dtype=float))
        if self.joints.shape != self.joint_rates.shape:
            raise ValueError("joints and joint_rates must have the same length")

    @property
    def velocity(self) -> np.ndarray:
        return np.concatenate((self.base_twist.linear, self.base_twist.angular, self.joint_rates))

    def is_finite(self) -> bool:
        return bool(
            np.all(np.isfinite(self.base_pose.position))
            and np.all(np.isfinite(self.base_pose.orientation))
            and np.all(np.isfinite(self.velocity))
            and np.all(np.isfinite(self.joints))
        )

    def with_velocity(self, nu) -> "SystemState":
        nu = np.asarray(nu, dtype=float)
        return replace(self, base_twist=Twist(nu[0:3], nu[3:6]), joint_rates=nu[6:])


@dataclass(frozen=True)
class EomTerms:
    H_b: np.ndarray
    H_bm: np.ndarray
    H_m: np.ndarray
    c_b: np.ndarray
    c_m: np.ndarray

    @property
    def H(self) -> np.ndarray:
        return np.block([[self.H_b, self.H_bm], [self.H_bm.T, self.H_m]])

    @property
    def c(self) -> np.ndarray:
        return np.concatenate((self.c_b, self.c_m))


@dataclass(frozen=True)
class GeneralizedForce:
    base: Wrench = field(default_factory=Wrench)
    joint: np.ndarray = None

    def vector(self, n: int) -> np.ndarray:
        tau = np.zeros(n) if self.joint is None else np.asarray(self.joint, dtype=float)
        return np.concatenate((self.base.as_vector(), tau))


@dataclass
class BodySet:
    """Per-body world quantities for one configuration (bodies: base, then links)."""

    mass: np.ndarray        # (B,)
    com: np.ndarray         # (B, 3)
    inertia: np.ndarray     # (B, 3, 3) world frame, about the COM
    Jv: np.ndarray          # (B, 3, nv)
    Jw: np.ndarray          # (B, 3, nv)
    parent: np.ndarray
    joint_origin: np.ndarray  # (B, 3), row 0 unused
    joint_axis: np.ndarray    # (B, 3), row 0 unused
    feet: np.ndarray        # (N, 3)
    J_b: np.ndarray         # (6N, 6)
    J_m: np.ndarray         # (6N, n)


def _packed(model: RobotModel) -> tuple:
    cached = model.__dict__.get("_packed_arrays")
    if cached is None:
        cached = (
            np.array([l.hip_offset_in_base for l in model.limbs]),
            np.array([l.mount_yaw for l in model.limbs]),
            np.array([l.link_lengths for l in model.limbs]),
            np.array([l.link_masses for l in model.limbs]),
            np.array([l.link_inertias for l in model.limbs]),
        )
        object.__setattr__(model, "_packed_arrays", cached)
    return cached


@njit(cache=True)
def _cross(a, b):
    return np.array([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])


@njit(cache=True)
def _bodies_kernel(base_mass, base_I, hips, yaw0, lengths, lmass, linertia, pb, R, q):
    N = hips.shape[0]
    n = 3 * N
    nv = 6 + n
    B = 1 + n
    mass = np.empty(B)
    com = np.empty((B, 3))
    inertia = np.empty((B, 3, 3))
    Jv = np.zeros((B, 3, nv))
    Jw = np.zeros((B, 3, nv))
    origin = np.zeros((B, 3))
    axis = np.zeros((B, 3))
    parent = np.full(B, -1, dtype=np.int64)
    feet = np.empty((N, 3))
    J_b = np.zeros((6 * N, 6))
    J_m = np.zeros((6 * N, n))

    mass[0] = base_mass
    com[0] = pb
    inertia[0] = R @ base_I @ R.T
    for a in range(3):
        Jv[0, a, a] = 1.0
        Jw[0, a, 3 + a] = 1.0

    rots = np.empty((3, 3, 3))
    o_w = np.empty((3, 3))
    z_w = np.empty((3, 3))
    c_w = np.empty((3, 3))
    for i in range(N):
        psi = yaw0[i] + q[3 * i]
        cz, sz = np.cos(psi), np.sin(psi)
        R1 = np.array([[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]])
        c2, s2 = np.cos(q[3 * i + 1]), np.sin(q[3 * i + 1])
        Ry2 = np.array([[c2, 0.0, s2], [0.0, 1.0, 0.0], [-s2, 0.0, c2]])
        c3, s3 = np.cos(q[3 * i + 2]), np.sin(q[3 * i + 2])
        Ry3 = np.array([[c3, 0.0, s3], [0.0, 1.0, 0.0], [-s3, 0.0, c3]])
        rots[0] = R @ R1
        rots[1] = rots[0] @ Ry2
        rots[2] = rots[1] @ Ry3
        o = pb + R @ hips[i]
        pitch = rots[0][:, 1].copy()
        z_w[0] = R[:, 2]
        z_w[1] = pitch
        z_w[2] = pitch
        for j in range(3):
            x = rots[j][:, 0].copy()
            o_w[j] = o
            c_w[j] = o + 0.5 * lengths[i, j] * x
            o = o + lengths[i, j] * x
        foot = o
        feet[i] = foot
        r = foot - pb
        for a in range(3):
            J_b[6 * i + a, a] = 1.0
            J_b[6 * i + 3 + a, 3 + a] = 1.0
        J_b[6 * i + 0, 4] = r[2]
        J_b[6 * i + 0, 5] = -r[1]
        J_b[6 * i + 1, 3] = -r[2]
        J_b[6 * i + 1, 5] = r[0]
        J_b[6 * i + 2, 3] = r[1]
        J_b[6 * i + 2, 4] = -r[0]
        for j in range(3):
            k = 1 + 3 * i + j
            parent[k] = 0 if j == 0 else k - 1
            mass[k] = lmass[i, j]
            com[k] = c_w[j]
            inertia[k] = rots[j] @ linertia[i, j] @ rots[j].T
            origin[k] = o_w[j]
            axis[k] = z_w[j]
            rc = c_w[j] - pb
            for a in range(3):
                Jv[k, a, a] = 1.0
                Jw[k, a, 3 + a] = 1.0
            Jv[k, 0, 4] = rc[2]
            Jv[k, 0, 5] = -rc[1]
            Jv[k, 1, 3] = -rc[2]
            Jv[k, 1, 5] = rc[0]
            Jv[k, 2, 3] = rc[1]
            Jv[k, 2, 4] = -rc[0]
            for m in range(j + 1):
                col = 6 + 3 * i + m
                v = _cross(z_w[m], c_w[j] - o_w[m])
                for a in range(3):
                    Jv[k, a, col] = v[a]
                    Jw[k, a, col] = z_w[m, a]
            v = _cross(z_w[j], foot - o_w[j])
            for a in range(3):
                J_m[6 * i + a, 3 * i + j] = v[a]
                J_m[6 * i + 3 + a, 3 * i + j] = z_w[j, a]
    return mass, com, inertia, Jv, Jw, parent, origin, axis, feet, J_b, J_m


@njit(cache=True)
def _eom_kernel(mass, com, inertia, Jv, Jw, parent, origin, axis, nu, gravity):
    B = mass.shape[0]
    nv = nu.shape[0]
    H = np.zeros((nv, nv))
    c = np.zeros(nv)
    omega = np.empty((B, 3))
    alpha0 = np.zeros((B, 3))
    acc0 = np.zeros((B, 3))
    for k in range(B):
        omega[k] = Jw[k] @ nu
    for k in range(1, B):
        p = parent[k]
        wp = omega[p]
        r_po = origin[k] - com[p]
        a_o = acc0[p] + _cross(alpha0[p], r_po) + _cross(wp, _cross(wp, r_po))
        alpha0[k] = alpha0[p] + _cross(wp, axis[k] * nu[6 + k - 1])
        r_oc = com[k] - origin[k]
        wk = omega[k]
        acc0[k] = a_o + _cross(alpha0[k], r_oc) + _cross(wk, _cross(wk, r_oc))
    for k in range(B):
        H += mass[k] * (Jv[k].T @ Jv[k]) + Jw[k].T @ (inertia[k] @ Jw[k])
        lin = mass[k] * (acc0[k] - gravity)
        Iw = inertia[k] @ omega[k]
        ang = inertia[k] @ alpha0[k] + _cross(omega[k], Iw)
        c += Jv[k].T @ lin + Jw[k].T @ ang
    H = 0.5 * (H + H.T)
    return H, c


def body_set(model: RobotModel, state: SystemState, extra_base_mass: float = 0.0) -> BodySet:
    hips, yaw0, lengths, lmass, linertia = _packed(model)
    out = _bodies_kernel(model.base_mass + extra_base_mass, model.base_inertia, hips, yaw0, lengths, lmass,
                         linertia, state.base_pose.position, state.base_pose.rotation, state.joints)
    return BodySet(*out)


def mass_matrix(bodies: BodySet) -> np.ndarray:
    H = np.einsum("k,kai,kaj->ij", bodies.mass, bodies.Jv, bodies.Jv)
    H += np.einsum("kai,kab,kbj->ij", bodies.Jw, bodies.inertia, bodies.Jw)
    return 0.5 * (H + H.T)


def terms_from_bodies(bodies: BodySet, nu, gravity) -> EomTerms:
    H, c = _eom_kernel(bodies.mass, bodies.com, bodies.inertia, bodies.Jv, bodies.Jw, bodies.parent,
                       bodies.joint_origin, bodies.joint_axis, np.asarray(nu, dtype=float),
                       np.asarray(gravity, dtype=float))
    return EomTerms(H[:6, :6], H[:6, 6:], H[6:, 6:], c[:6], c[6:])


def assemble_eom(model: RobotModel, state: SystemState, gravity, extra_base_mass: float = 0.0) -> EomTerms:
    """Inertia blocks and bias terms of the floating-base equation of motion."""
    bodies = body_set(model, state, extra_base_mass)
    return terms_from_bodies(bodies, state.velocity, gravity)


def forward_dynamics(terms: EomTerms, applied: GeneralizedForce, J_b, J_m, foot_wrenches) -> np.ndarray:
    """Solve ``H a + c = [F_b; tau] + [J_b^T; J_m^T] F_e`` for ``a``."""
    H = terms.H
    n = H.shape[0] - 6
    F_e = stack_wrenches(foot_wrenches)
    rhs = applied.vector(n) - terms.c
    if F_e.size:
        rhs[:6] += np.asarray(J_b).T @ F_e
        rhs[6:] += np.asarray(J_m).T @ F_e
    try:
        a = cho_solve(cho_factor(H), rhs)
    except np.linalg.LinAlgError as exc:
        raise SolveFailure(str(exc)) from exc
    residual = np.linalg.norm(H @ a - rhs)
    if not residual < 1e-9 * max(1.0, np.linalg.norm(rhs)):
        raise SolveFailure(f"residual {residual:.3e} exceeds tolerance")
    return a


def stack_wrenches(wrenches) -> np.ndarray:
    """Concatenate Wrench objects (or 6-vectors) into one flat vector."""
    return np.concatenate([w.as_vector() if isinstance(w, Wrench) else np.asarray(w, dtype=float).reshape(6)
                           for w in wrenches]) if len(wrenches) else np.zeros(0)


def integrate_step(state: SystemState, accelerations, dt: float) -> SystemState:
    """Semi-implicit Euler: velocities first, then positions with the new velocities."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    nu = state.velocity + dt * np.asarray(accelerations, dtype=float)
    v, w, dphi = nu[0:3], nu[3:6], nu[6:]
    q = quat_normalize(quat_mul(quat_exp(w * dt), state.base_pose.orientation))
    pose = Pose(state.base_pose.position + dt * v, q)
    return SystemState(pose, Twist(v, w), state.joints + dt * dphi, dphi)


def momentum(bodies: BodySet, nu) -> tuple[np.ndarray, np.ndarray]:
    """Linear momentum and angular momentum about the world origin."""
    nu = np.asarray(nu, dtype=float)
    v = bodies.Jv @ nu
    w = bodies.Jw @ nu
    p = bodies.mass[:, None] * v
    L = np.cross(bodies.com, p) + np.einsum("kab,kb->ka", bodies.inertia, w)
    return p.sum(axis=0), L.sum(axis=0)


def kinetic_energy(bodies: BodySet, nu) -> float:
    nu = np.asarray(nu, dtype=float)
    return 0.5 * float(nu @ mass_matrix(bodies) @ nu)


def center_of_mass(bodies: BodySet) -> np.ndarray:
    return (bodies.mass[:, None] * bodies.com).sum(axis=0) / bodies.mass.sum()
