import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from climbsim.kinematics import (JointLimitViolation, Unreachable, base_jacobian, foot_in_base, forward_kinematics,
                                 leg_inverse_kinematics, limb_chain, limb_jacobian)
from climbsim.spatial import Pose, Wrench, quat_exp, quat_log, quat_mul, quat_normalize
from climbsim.control import base_internal_wrench


def random_pose(rng):
    return Pose(rng.normal(scale=0.2, size=3), quat_normalize(rng.normal(size=4)))


def random_joints(rng, n_limbs=4):
    # knee-down branch away from the straight-leg singularity
    q = []
    for _ in range(n_limbs):
        q += [rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2), rng.uniform(0.05, 2.8)]
    return np.array(q)


def transport_oracle(base_position, feet, wrenches):
    """Sum of foot wrenches moved to the base origin: force unchanged, moment + r x f."""
    f = np.zeros(3)
    m = np.zeros(3)
    for p, w in zip(feet, wrenches):
        f += w.force
        m += w.moment + np.cross(p - base_position, w.force)
    return np.concatenate((f, m))


def test_zero_configuration_stretches_each_limb(model):
    feet = forward_kinematics(model, Pose(), np.zeros(12))
    for i, limb in enumerate(model.limbs):
        radial = np.array([np.cos(limb.mount_yaw), np.sin(limb.mount_yaw), 0.0])
        assert np.allclose(feet[i], limb.hip_offset_in_base + limb.reach * radial, atol=1e-15)


def test_translation_moves_feet_rigidly(model, rng):
    q = random_joints(rng)
    d = np.array([0.3, -0.2, 0.1])
    a = forward_kinematics(model, Pose(), q)
    b = forward_kinematics(model, Pose(d), q)
    assert np.allclose(b - a, d, atol=1e-15)


def test_fk_of_ik_over_reachable_targets(model, rng):
    worst = 0.0
    for _ in range(1000):
        i = int(rng.integers(4))
        q = random_joints(rng, 1)
        target = foot_in_base(model, i, q)
        # targets behind the hip come back on the mirrored-yaw branch, so limits are not checked here
        q_ik = leg_inverse_kinematics(model, i, target, check_limits=False)
        worst = max(worst, np.abs(foot_in_base(model, i, q_ik) - target).max())
        assert q_ik[2] >= 0.0
    assert worst < 1e-9


def test_ik_of_stretched_target_is_zero(model):
    limb = model.limbs[2]
    radial = np.array([np.cos(limb.mount_yaw), np.sin(limb.mount_yaw), 0.0])
    q = leg_inverse_kinematics(model, 2, limb.hip_offset_in_base + limb.reach * radial)
    assert np.allclose(q, 0.0, atol=1e-7)


def test_ik_errors(model):
    limb = model.limbs[1]
    with pytest.raises(Unreachable) as err:
        leg_inverse_kinematics(model, 1, limb.hip_offset_in_base + [0.0, 0.0, -0.27])
    assert err.value.limb_id == 1
    # reachable, but only with the hip yawed past its limit
    with pytest.raises(JointLimitViolation) as err:
        leg_inverse_kinematics(model, 1, foot_in_base(model, 1, [2.0, 0.3, 1.0]))
    assert err.value.joint_id == 0


def _fd_limb(model, base, q, h=1e-6):
    J = np.zeros((24, 12))
    for j in range(12):
        dq = np.zeros(12)
        dq[j] = h
        J[:, j][np.arange(24) % 6 < 3] = ((forward_kinematics(model, base, q + dq)
                                           - forward_kinematics(model, base, q - dq)) / (2 * h)).reshape(-1)
        for i, limb in enumerate(model.limbs):
            Rp = base.rotation @ limb_chain(limb, (q + dq)[3 * i:3 * i + 3])["rotations"][2]
            Rm = base.rotation @ limb_chain(limb, (q - dq)[3 * i:3 * i + 3])["rotations"][2]
            W = (Rp - Rm) / (2 * h) @ Rp.T
            J[6 * i + 3:6 * i + 6, j] = [W[2, 1], W[0, 2], W[1, 0]]
    return J


def test_limb_jacobian_matches_finite_differences(model, rng):
    for _ in range(100):
        base = random_pose(rng)
        q = random_joints(rng)
        assert np.abs(limb_jacobian(model, base, q) - _fd_limb(model, base, q)).max() < 1e-6


def test_base_jacobian_matches_finite_differences(model, rng):
    h = 1e-6
    for _ in range(100):
        base = random_pose(rng)
        q = random_joints(rng)
        feet = forward_kinematics(model, base, q)
        J = base_jacobian(model, base, feet)
        fd = np.zeros_like(J)
        for k in range(6):
            d = np.zeros(6)
            d[k] = h
            plus = Pose(base.position + d[:3], quat_mul(quat_exp(d[3:]), base.orientation))
            minus = Pose(base.position - d[:3], quat_mul(quat_exp(-d[3:]), base.orientation))
            lin = (forward_kinematics(model, plus, q) - forward_kinematics(model, minus, q)) / (2 * h)
            ang = quat_log(quat_mul(plus.orientation, minus.orientation * [1, -1, -1, -1])) / (2 * h)
            for i in range(4):
                fd[6 * i:6 * i + 3, k] = lin[i]
                fd[6 * i + 3:6 * i + 6, k] = ang
        assert np.abs(J - fd).max() < 1e-6


def test_limb_jacobian_is_block_diagonal(model, rng):
    J = limb_jacobian(model, random_pose(rng), random_joints(rng))
    for i in range(4):
        for k in range(4):
            if i != k:
                assert np.all(J[6 * i:6 * i + 6, 3 * k:3 * k + 3] == 0.0)


def test_stretched_limb_is_singular(model):
    J = limb_jacobian(model, Pose(), np.zeros(12))
    assert np.linalg.matrix_rank(J[0:3, 0:3], tol=1e-9) < 3
    J = limb_jacobian(model, Pose(), np.tile([0.0, 0.4, 1.0], 4))
    assert np.linalg.matrix_rank(J[0:3, 0:3], tol=1e-9) == 3


def test_base_jacobian_block_at_base_origin(model):
    J = base_jacobian(model, Pose(), np.zeros((4, 3)))
    assert np.array_equal(J[0:6], np.eye(6))


def test_base_jacobian_transpose_single_force(model):
    feet = np.array([[0.1, 0.0, 0.0]] + [[0.0, 0.0, 0.0]] * 3)
    J = base_jacobian(model, Pose(), feet)
    w = base_internal_wrench(J, [Wrench([0, 0, -5])] + [Wrench()] * 3)
    assert np.allclose(w, [0, 0, -5, 0, 0.5, 0], atol=1e-15)


def test_opposing_lateral_forces_cancel(model):
    feet = np.array([[0.1, 0.1, 0.0], [0.1, -0.1, 0.0], [0, 0, 0], [0, 0, 0]])
    J = base_jacobian(model, Pose(), feet)
    w = base_internal_wrench(J, [Wrench([1, 0, 0]), Wrench([-1, 0, 0]), Wrench(), Wrench()])
    assert np.allclose(w[:3], 0.0) and np.linalg.norm(w[3:]) > 0.1


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_base_jacobian_transpose_is_wrench_transport(seed):
    from climbsim.spatial import reference_model
    rng = np.random.default_rng(seed)
    model = reference_model()
    base = random_pose(rng)
    feet = forward_kinematics(model, base, random_joints(rng))
    wrenches = [Wrench(rng.normal(size=3) * 10, rng.normal(size=3)) for _ in range(4)]
    got = base_internal_wrench(base_jacobian(model, base, feet), wrenches)
    assert np.abs(got - transport_oracle(base.position, feet, wrenches)).max() < 1e-12
