import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from se2mpc.liegroup import (
    AlgebraMatrix,
    LieGroupError,
    Pose,
    Rotation,
    Twist,
    adm,
    compose,
    exp,
    inverse,
    log,
    near_branch_boundary,
    rotation_from_angle,
    vee,
    wedge,
)

from oracles import expm_twist, vee_raw, wedge_raw

RNG = np.random.default_rng(20240817)


def rand_twist(scale=1.0, angle_cap=math.pi - 1e-3):
    v = RNG.uniform(-scale, scale, 3)
    v[2] = RNG.uniform(-angle_cap, angle_cap)
    return Twist(*v)


def test_rotation_from_angle_basics():
    np.testing.assert_allclose(rotation_from_angle(0.0).m, np.eye(2), atol=0)
    np.testing.assert_allclose(
        rotation_from_angle(math.pi / 2).m, [[0, -1], [1, 0]], atol=1e-15
    )
    np.testing.assert_allclose(
        rotation_from_angle(math.pi).m, [[-1, 0], [0, -1]], atol=1e-15
    )


def test_rotation_from_angle_rejects_nonfinite():
    with pytest.raises(LieGroupError):
        rotation_from_angle(float("nan"))
    with pytest.raises(LieGroupError):
        rotation_from_angle(float("inf"))


def test_rotation_rejects_non_orthonormal():
    with pytest.raises(LieGroupError):
        Rotation(np.array([[1.0, 0.1], [0.0, 1.0]]))
    with pytest.raises(LieGroupError):
        Rotation(np.array([[1.0, 0.0], [0.0, -1.0]]))  # det -1


def test_wedge_template():
    assert not wedge(Twist(0, 0, 0)).m.any()
    np.testing.assert_array_equal(
        wedge(Twist(1, 2, 3)).m, [[0, -3, 1], [3, 0, 2], [0, 0, 0]]
    )


def test_wedge_vee_roundtrip_random():
    for _ in range(100):
        z = rand_twist(5.0, 5.0)
        back = vee(wedge(z))
        assert (back.vx, back.vy, back.w) == (z.vx, z.vy, z.w)


def test_wedge_is_linear():
    a, b = rand_twist(3.0), rand_twist(3.0)
    ca, cb = 1.75, -0.5
    combo = Twist(ca * a.vx + cb * b.vx, ca * a.vy + cb * b.vy, ca * a.w + cb * b.w)
    np.testing.assert_array_equal(wedge(combo).m, ca * wedge(a).m + cb * wedge(b).m)


def test_vee_rejects_bad_structure():
    m = wedge(Twist(1, 2, 3)).m.copy()
    m[2, 0] = 1e-6  # nonzero bottom row
    with pytest.raises(LieGroupError):
        vee(m)
    m = np.zeros((3, 3))
    m[0, 0] = 1e-6  # non-skew rotation block
    with pytest.raises(LieGroupError):
        vee(m)
    with pytest.raises(LieGroupError):
        AlgebraMatrix(np.eye(3))


def test_exp_trivial_cases():
    ident = exp(Twist(0, 0, 0))
    np.testing.assert_array_equal(ident.as_matrix(), np.eye(3))
    p = exp(Twist(1, 0, 0))
    np.testing.assert_allclose(p.rot.m, np.eye(2), atol=0)
    np.testing.assert_allclose(p.trans, [1, 0], atol=0)


def test_exp_quarter_turn_against_matrix_exponential():
    # closed form gives trans = (2/pi, 2/pi) for the unit-speed quarter turn
    z = Twist(1.0, 0.0, math.pi / 2)
    p = exp(z)
    np.testing.assert_allclose(p.trans, [2 / math.pi, 2 / math.pi], atol=1e-12)
    np.testing.assert_allclose(p.as_matrix(), expm_twist([1, 0, math.pi / 2]), atol=1e-12)


def test_exp_matches_matrix_exponential_up_to_norm_10():
    for _ in range(200):
        v = RNG.uniform(-1, 1, 3)
        v *= RNG.uniform(0, 10) / max(np.linalg.norm(v), 1e-12)
        np.testing.assert_allclose(
            exp(Twist(*v)).as_matrix(), expm_twist(v), atol=1e-9
        )


def test_exp_small_angle_branch_is_smooth():
    # Taylor branch (|w| < 1e-6) must agree with the oracle to full precision
    for w in (0.0, 1e-12, -1e-9, 9.9e-7, -9.9e-7, 1.1e-6):
        v = [0.3, -0.4, w]
        np.testing.assert_allclose(exp(Twist(*v)).as_matrix(), expm_twist(v), atol=1e-15)


def test_log_trivial_cases():
    z = log(Pose.identity())
    assert (z.vx, z.vy, z.w) == (0.0, 0.0, 0.0)
    z = log(Pose(Rotation.identity(), np.array([3.0, -2.0])))
    assert (z.vx, z.vy, z.w) == (3.0, -2.0, 0.0)


def test_log_roundtrip_specific():
    z = Twist(0.4, -0.1, 1.3)
    back = log(exp(z))
    np.testing.assert_allclose(back.as_array(), z.as_array(), atol=1e-10)


def test_exp_log_roundtrip_random_1000():
    worst = 0.0
    for _ in range(1000):
        z = rand_twist(5.0)
        err = np.max(np.abs(log(exp(z)).as_array() - z.as_array()))
        worst = max(worst, err)
    assert worst <= 1e-10


@settings(max_examples=200, deadline=None)
@given(
    vx=st.floats(-20, 20),
    vy=st.floats(-20, 20),
    w=st.floats(-math.pi + 1e-3, math.pi - 1e-3),
)
def test_exp_log_roundtrip_property(vx, vy, w):
    z = Twist(vx, vy, w)
    np.testing.assert_allclose(log(exp(z)).as_array(), z.as_array(), atol=1e-9)


def test_log_branch_boundary_flagged_not_fatal():
    p = Pose(rotation_from_angle(math.pi), np.array([0.5, 0.0]))
    assert near_branch_boundary(p)
    z = log(p)  # principal value still comes back
    assert abs(z.w) <= math.pi
    assert not near_branch_boundary(exp(Twist(0, 0, 1.0)))


def test_log_principal_branch_is_half_open():
    # exactly pi stays at +pi, never -pi
    m = np.array([[-1.0, 0.0], [0.0, -1.0]])
    assert Rotation(m).angle == math.pi


def test_compose_identity_and_inverse_axioms():
    ident = Pose.identity()
    b = exp(Twist(0.7, -0.2, 0.9))
    np.testing.assert_array_equal(compose(ident, b).as_matrix(), b.as_matrix())
    np.testing.assert_allclose(
        compose(b, inverse(b)).as_matrix(), np.eye(3), atol=1e-10
    )


def test_compose_associativity_against_matrix_product():
    for _ in range(100):
        a, b, c = (exp(rand_twist(2.0)) for _ in range(3))
        left = compose(compose(a, b), c).as_matrix()
        right = compose(a, compose(b, c)).as_matrix()
        oracle = a.as_matrix() @ b.as_matrix() @ c.as_matrix()
        np.testing.assert_allclose(left, right, atol=1e-9)
        np.testing.assert_allclose(left, oracle, atol=1e-9)


def test_compose_result_satisfies_pose_invariants():
    x = exp(rand_twist(2.0))
    for _ in range(1000):
        x = compose(x, exp(rand_twist(0.5)))
    r = x.rot.m
    np.testing.assert_allclose(r.T @ r, np.eye(2), atol=1e-12)
    assert abs(np.linalg.det(r) - 1.0) <= 1e-12
    assert x.as_matrix()[2, 0] == 0.0 and x.as_matrix()[2, 2] == 1.0


def test_inverse_trivial_and_oracle():
    np.testing.assert_array_equal(inverse(Pose.identity()).as_matrix(), np.eye(3))
    p = Pose(Rotation.identity(), np.array([1.0, 2.0]))
    np.testing.assert_array_equal(inverse(p).trans, [-1.0, -2.0])
    for _ in range(50):
        x = exp(rand_twist(3.0))
        np.testing.assert_allclose(
            inverse(x).as_matrix(), np.linalg.inv(x.as_matrix()), atol=1e-10
        )


def test_adm_template():
    assert not adm(Twist(0, 0, 0)).any()
    np.testing.assert_array_equal(
        adm(Twist(1, 2, 3)), [[0, 3, -2], [-3, 0, 1], [0, 0, 0]]
    )


def test_commutator_identity_1000_random_pairs():
    # vee([psi^, zeta^]) = adm(zeta) psi -- the step that turns the kept
    # bracket terms into a linear state map
    worst = 0.0
    for _ in range(1000):
        psi = RNG.uniform(-1, 1, 3)
        zeta = RNG.uniform(-1, 1, 3)
        bracket = wedge_raw(psi) @ wedge_raw(zeta) - wedge_raw(zeta) @ wedge_raw(psi)
        worst = max(worst, np.max(np.abs(vee_raw(bracket) - adm(Twist(*zeta)) @ psi)))
    assert worst <= 1e-12


def test_pose_from_matrix_requires_exact_bottom_row():
    m = exp(Twist(1, 2, 0.5)).as_matrix()
    assert Pose.from_matrix(m).as_matrix() is not None
    m[2, 0] = 1e-14
    with pytest.raises(LieGroupError):
        Pose.from_matrix(m)


def test_twist_requires_finite_components():
    with pytest.raises(LieGroupError):
        Twist(1.0, float("nan"), 0.0)
