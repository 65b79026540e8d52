"""Planar rigid-transform groups: SO(2)/SE(2) elements, wedge/vee, Exp/Log.

Conventions: twists are ordered (vx, vy, w); the wedge image of a twist is
    [[0, -w, vx],
     [w,  0, vy],
     [0,  0,  0]]
and the group Log uses the principal angle branch (-pi, pi].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ORTHO_ATOL = 1e-10      # orthonormality / unit-determinant tolerance for rotations
STRUCTURE_ATOL = 1e-9   # se(2) membership tolerance used by vee
SMALL_ANGLE = 1e-6      # below this |w|, translation coefficients use their Taylor series
BRANCH_ATOL = 1e-9      # |angle| within this of pi counts as a branch boundary


class LieGroupError(ValueError):
    """Input violates group or algebra structure."""


@dataclass(frozen=True, eq=False)
class Rotation:
    """A 2x2 rotation matrix (orthonormal, det +1)."""

    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        if m.shape != (2, 2):
            raise LieGroupError(f"rotation must be 2x2, got shape {m.shape}")
        m00, m01, m10, m11 = (float(v) for v in m.ravel())
        err = max(
            abs(m00 * m00 + m10 * m10 - 1.0),
            abs(m01 * m01 + m11 * m11 - 1.0),
            abs(m00 * m01 + m10 * m11),
            abs(m00 * m11 - m01 * m10 - 1.0),
        )
        if not err <= ORTHO_ATOL:
            raise LieGroupError(f"matrix is not a rotation (violation {err:.3e})")
        object.__setattr__(self, "m", m)

    @property
    def angle(self) -> float:
        """Principal angle in (-pi, pi]."""
        th = math.atan2(self.m[1, 0], self.m[0, 0])
        if th <= -math.pi:
            th = math.pi
        return th

    @classmethod
    def identity(cls) -> "Rotation":
        return cls(np.eye(2))


@dataclass(frozen=True, eq=False)
class Pose:
    """An SE(2) element: rotation plus translation (meters)."""

    rot: Rotation
    trans: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.trans, dtype=float).reshape(2)
        if not np.all(np.isfinite(t)):
            raise LieGroupError("translation must be finite")
        object.__setattr__(self, "trans", t)
        object.__setattr__(self, "_angle", None)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(Rotation.identity(), np.zeros(2))

    @classmethod
    def from_xytheta(cls, x: float, y: float, theta: float) -> "Pose":
        p = cls(rotation_from_angle(theta), np.array([x, y], dtype=float))
        if -math.pi < theta <= math.pi:
            # keep the exact constructor angle so a CSV round trip does not
            # churn the last bit through atan2(sin, cos)
            object.__setattr__(p, "_angle", float(theta))
        return p

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "Pose":
        m = np.asarray(m, dtype=float)
        if m.shape != (3, 3):
            raise LieGroupError(f"homogeneous pose must be 3x3, got {m.shape}")
        if not (m[2, 0] == 0.0 and m[2, 1] == 0.0 and m[2, 2] == 1.0):
            raise LieGroupError("bottom row of a homogeneous pose must be (0, 0, 1)")
        return cls(Rotation(m[:2, :2]), m[:2, 2])

    def as_matrix(self) -> np.ndarray:
        m = np.zeros((3, 3))
        m[:2, :2] = self.rot.m
        m[:2, 2] = self.trans
        m[2, 2] = 1.0
        return m

    @property
    def x(self) -> float:
        return float(self.trans[0])

    @property
    def y(self) -> float:
        return float(self.trans[1])

    @property
    def angle(self) -> float:
        if self._angle is None:
            object.__setattr__(self, "_angle", self.rot.angle)
        return self._angle


@dataclass(frozen=True)
class Twist:
    """Body velocity (vx, vy, w), or a pose-error vector in Log coordinates."""

    vx: float
    vy: float
    w: float

    def __post_init__(self):
        vx, vy, w = float(self.vx), float(self.vy), float(self.w)
        if not (math.isfinite(vx) and math.isfinite(vy) and math.isfinite(w)):
            raise LieGroupError("twist components must be finite")
        object.__setattr__(self, "vx", vx)
        object.__setattr__(self, "vy", vy)
        object.__setattr__(self, "w", w)

    def as_array(self) -> np.ndarray:
        return np.array([self.vx, self.vy, self.w])

    @classmethod
    def from_array(cls, a) -> "Twist":
        vx, vy, w = np.asarray(a, dtype=float).reshape(3)
        return cls(vx, vy, w)

    def __mul__(self, s: float) -> "Twist":
        return Twist(self.vx * s, self.vy * s, self.w * s)

    __rmul__ = __mul__

    @property
    def norm(self) -> float:
        return math.sqrt(self.vx**2 + self.vy**2 + self.w**2)


@dataclass(frozen=True, eq=False)
class AlgebraMatrix:
    """A 3x3 se(2) element: skew rotation block over a zero bottom row."""

    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        if m.shape != (3, 3):
            raise LieGroupError(f"algebra element must be 3x3, got {m.shape}")
        err = max(
            abs(m[0, 0]), abs(m[1, 1]), abs(m[0, 1] + m[1, 0]),
            abs(m[2, 0]), abs(m[2, 1]), abs(m[2, 2]),
        )
        if not err <= STRUCTURE_ATOL:
            raise LieGroupError(f"matrix is not in se(2) (violation {err:.3e})")
        object.__setattr__(self, "m", m)


def rotation_from_angle(theta: float) -> Rotation:
    """Rotation matrix [[cos, -sin], [sin, cos]] for a finite angle."""
    theta = float(theta)
    if not math.isfinite(theta):
        raise LieGroupError("rotation angle must be finite")
    c, s = math.cos(theta), math.sin(theta)
    return Rotation(np.array([[c, -s], [s, c]]))


def wedge(z: Twist) -> AlgebraMatrix:
    """Map a twist to its se(2) matrix."""
    return AlgebraMatrix(np.array([
        [0.0, -z.w, z.vx],
        [z.w, 0.0, z.vy],
        [0.0, 0.0, 0.0],
    ]))


def vee(m) -> Twist:
    """Inverse of wedge; accepts an AlgebraMatrix or a raw 3x3 array.

    Raw arrays are structure-checked (tolerance STRUCTURE_ATOL) before the
    components are read off.
    """
    if not isinstance(m, AlgebraMatrix):
        m = AlgebraMatrix(m)
    a = m.m
    return Twist(a[0, 2], a[1, 2], a[1, 0])


def _translation_coeffs(w: float) -> tuple[float, float]:
    # a = sin(w)/w, b = (1-cos(w))/w; the pair defines V(w) = [[a, -b], [b, a]].
    if abs(w) < SMALL_ANGLE:
        w2 = w * w
        a = 1.0 - w2 / 6.0 + w2 * w2 / 120.0
        b = w / 2.0 - w * w2 / 24.0
    else:
        a = math.sin(w) / w
        b = (1.0 - math.cos(w)) / w
    return a, b


def exp(z: Twist) -> Pose:
    """Group exponential: twist vector -> SE(2) element."""
    a, b = _translation_coeffs(z.w)
    trans = np.array([a * z.vx - b * z.vy, b * z.vx + a * z.vy])
    return Pose(rotation_from_angle(z.w), trans)


def log(x: Pose) -> Twist:
    """Group logarithm on the principal branch (-pi, pi].

    exp(log(x)) reproduces x to machine precision for |angle| < pi; at the
    branch boundary the principal value is still returned (callers that care
    check near_branch_boundary).
    """
    th = x.rot.angle
    a, b = _translation_coeffs(th)
    # V(th)^-1 = [[a, b], [-b, a]] / (a^2 + b^2)
    det = a * a + b * b
    tx, ty = x.trans
    return Twist((a * tx + b * ty) / det, (-b * tx + a * ty) / det, th)


def near_branch_boundary(x, atol: float = BRANCH_ATOL) -> bool:
    """True when the rotation angle of x (Pose or Rotation) is within atol of pi."""
    rot = x.rot if isinstance(x, Pose) else x
    return math.pi - abs(rot.angle) <= atol


def _renormalize(m: np.ndarray) -> np.ndarray:
    # Project onto SO(2): normalize the first column, take its perpendicular
    # as the second. Keeps long compose chains from drifting off the manifold.
    c0 = m[:, 0]
    n = math.sqrt(c0[0] * c0[0] + c0[1] * c0[1])
    c, s = c0[0] / n, c0[1] / n
    return np.array([[c, -s], [s, c]])


def compose(a: Pose, b: Pose) -> Pose:
    """Group product a*b (homogeneous matrix product, rotation renormalized)."""
    rot = _renormalize(a.rot.m @ b.rot.m)
    trans = a.rot.m @ b.trans + a.trans
    return Pose(Rotation(rot), trans)


def inverse(x: Pose) -> Pose:
    """Group inverse: (R, p) -> (R^T, -R^T p)."""
    rt = x.rot.m.T
    return Pose(Rotation(rt.copy()), -(rt @ x.trans))


def adm(z: Twist) -> np.ndarray:
    """Matrix form of the se(2) commutator with z: vee([psi^, z^]) = adm(z) @ psi.

    Returns a plain 3x3 array (it is a linear operator on twist vectors, not
    an algebra element).
    """
    return np.array([
        [0.0, z.w, -z.vy],
        [-z.w, 0.0, z.vx],
        [0.0, 0.0, 0.0],
    ])
