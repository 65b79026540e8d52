"""Unicycle kinematics and on-manifold tracking-error dynamics.

The robot state is a Pose; the input u = (mu, omega) maps to the body twist
(mu, 0, omega) -- zero lateral velocity is the no-slip constraint. The error
state relative to a reference pose is Psi = Xd^-1 X with Log coordinates psi;
its exact rate Psi' = Psi z^ - zd^ Psi admits two first-order linearizations
that differ in how the cross term psi^ z^ is kept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .liegroup import (
    Pose,
    Twist,
    adm,
    compose,
    exp,
    inverse,
    log,
    near_branch_boundary,
    wedge,
)

SCHEMES = ("proposed", "naive")

# Input-to-twist matrix evaluated at zero heading: columns (forward, yaw).
C0 = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]])


@dataclass(frozen=True)
class ControlInput:
    """Forward speed mu (m/s) and yaw rate omega (rad/s)."""

    mu: float
    omega: float

    def __post_init__(self):
        mu, omega = float(self.mu), float(self.omega)
        if not (math.isfinite(mu) and math.isfinite(omega)):
            raise ValueError("control input must be finite")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "omega", omega)

    def as_array(self) -> np.ndarray:
        return np.array([self.mu, self.omega])

    @classmethod
    def from_array(cls, a) -> "ControlInput":
        mu, omega = np.asarray(a, dtype=float).reshape(2)
        return cls(mu, omega)


@dataclass(frozen=True, eq=False)
class LinearizedDynamics:
    """Continuous-time error dynamics psi' = A psi + B u + c."""

    A: np.ndarray
    B: np.ndarray
    c: np.ndarray


@dataclass(frozen=True, eq=False)
class DiscreteDynamics:
    """One Euler step of the linearized error dynamics."""

    Ak: np.ndarray
    Bk: np.ndarray
    ck: np.ndarray
    dt: float


class ErrorState(NamedTuple):
    pose: Pose            # Psi = Xd^-1 X
    twist: Twist          # psi = Log(Psi)
    branch_boundary: bool


def input_to_twist(u: ControlInput) -> Twist:
    """Body twist (mu, 0, omega); the zero lateral component is the constraint."""
    return Twist(u.mu, 0.0, u.omega)


def plant_step(x: Pose, u: ControlInput, dt: float) -> Pose:
    """Advance the pose by dt under constant input (exact group integration)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    return compose(x, exp(input_to_twist(u) * dt))


def plant_step_euler(x: Pose, u: ControlInput, dt: float) -> Pose:
    """Forward-Euler step in (x, y, theta) coordinates.

    Leaves the manifold-exact integrator above as the default; this variant
    exists for fidelity studies against references generated the same way.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    th = x.angle
    return Pose.from_xytheta(
        x.x + dt * u.mu * math.cos(th),
        x.y + dt * u.mu * math.sin(th),
        th + dt * u.omega,
    )


def error_state(xd: Pose, x: Pose) -> ErrorState:
    """Relative pose Psi = Xd^-1 X and its Log coordinates.

    Tracking is perfect iff Psi is the identity iff psi = 0. The
    branch_boundary flag is set when the relative angle sits at +/-pi, where
    the Log principal value is ambiguous.
    """
    psi_pose = compose(inverse(xd), x)
    return ErrorState(psi_pose, log(psi_pose), near_branch_boundary(psi_pose))


def exact_error_rate(psi_pose: Pose, z: Twist, zd: Twist) -> np.ndarray:
    """Exact rate Psi' = Psi z^ - zd^ Psi as a raw 3x3 matrix."""
    p = psi_pose.as_matrix()
    return p @ wedge(z).m - wedge(zd).m @ p


def linearize_proposed(zd: Twist) -> LinearizedDynamics:
    """Linearization that keeps the psi^ zd^ cross term: A = adm(zd).

    Exact whenever the applied twist equals the reference twist, which is
    the operating point a tracking controller drives toward.
    """
    return LinearizedDynamics(adm(zd), C0, -zd.as_array())


def linearize_naive(zd: Twist) -> LinearizedDynamics:
    """Linearization that drops the psi^ z^ cross term entirely.

    The remaining -zd^ psi^ term is not closed in se(2); projecting out its
    (identity-multiple) rotation block leaves A = adm((0, 0, wd)), i.e. the
    heading-to-lateral coupling vxd is lost. Exact only at psi = 0.
    """
    return LinearizedDynamics(adm(Twist(0.0, 0.0, zd.w)), C0, -zd.as_array())


def linearize(zd: Twist, scheme: str) -> LinearizedDynamics:
    if scheme == "proposed":
        return linearize_proposed(zd)
    if scheme == "naive":
        return linearize_naive(zd)
    raise ValueError(f"unknown linearization scheme {scheme!r}")


def residual(psi: Twist, z: Twist, zd: Twist, scheme: str) -> np.ndarray:
    """Dropped term of the chosen scheme, as a 3x3 matrix.

    Defined as the rate of the first-order pose reconstruction (I + psi^)
    minus the scheme's linear rate; that difference simplifies exactly to
    psi^ (z - zd)^ for the proposed scheme and psi^ z^ for the naive one,
    which is what gets computed (no floating-point cancellation).
    """
    p = wedge(psi).m
    if scheme == "proposed":
        return p @ (wedge(z).m - wedge(zd).m)
    if scheme == "naive":
        return p @ wedge(z).m
    raise ValueError(f"unknown linearization scheme {scheme!r}")


def discretize_euler(ld: LinearizedDynamics, dt: float) -> DiscreteDynamics:
    """Euler discretization: Ak = I + A dt, Bk = B dt, ck = c dt."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    return DiscreteDynamics(np.eye(3) + ld.A * dt, ld.B * dt, ld.c * dt, dt)
