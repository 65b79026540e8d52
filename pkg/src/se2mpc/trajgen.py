"""Reference trajectories on a uniform time grid: generation, CSV storage.

A reference is a timed sequence of (pose, body twist, input) triples that is
dynamically consistent: the twist is always the image of the input, and in
group-integration mode each pose is the previous one advanced by the twist.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .liegroup import Pose, Twist, compose, exp
from .model import ControlInput, input_to_twist, plant_step, plant_step_euler

EPS_SPEED = 1e-4        # below this path speed the flatness formulas blow up
CONSISTENCY_ATOL = 1e-9

CSV_HEADER = "t,x,y,theta,vx,vy,w,mu,omega"


class TrajectoryError(ValueError):
    """Malformed trajectory data; carries the offending line/sample when known."""

    def __init__(self, msg: str, line: int | None = None):
        super().__init__(msg if line is None else f"line {line}: {msg}")
        self.line = line


class Sample(NamedTuple):
    t: float
    xd: Pose
    zd: Twist
    ud: ControlInput


def _consistency_gap(a: Pose, zd: Twist, dt: float, b: Pose) -> float:
    predicted = compose(a, exp(zd * dt))
    return float(np.max(np.abs(predicted.as_matrix() - b.as_matrix())))


@dataclass(frozen=True)
class ReferenceTrajectory:
    """Uniformly sampled reference; immutable after construction."""

    dt: float
    samples: tuple[Sample, ...]
    integration: str = "group"  # "group" (exact) or "euler" (coordinate forward Euler)

    def __post_init__(self):
        if self.dt <= 0:
            raise TrajectoryError("dt must be positive")
        if not self.samples:
            raise TrajectoryError("trajectory needs at least one sample")
        if self.integration not in ("group", "euler"):
            raise TrajectoryError(f"unknown integration mode {self.integration!r}")
        object.__setattr__(self, "samples", tuple(self.samples))
        for k, s in enumerate(self.samples):
            if s.t != k * self.dt:
                raise TrajectoryError(f"non-uniform grid: t[{k}] = {s.t!r}, expected {k * self.dt!r}")
            zd = input_to_twist(s.ud)
            if (s.zd.vx, s.zd.vy, s.zd.w) != (zd.vx, zd.vy, zd.w):
                raise TrajectoryError(f"sample {k}: twist is not the image of the input")
        if self.integration == "group":
            for k in range(len(self.samples) - 1):
                a, b = self.samples[k], self.samples[k + 1]
                gap = _consistency_gap(a.xd, a.zd, self.dt, b.xd)
                if gap > CONSISTENCY_ATOL:
                    raise TrajectoryError(
                        f"samples {k}->{k + 1} inconsistent with group integration (gap {gap:.3e})"
                    )

    def __len__(self) -> int:
        return len(self.samples)

    def __getitem__(self, k: int) -> Sample:
        return self.samples[k]

    @property
    def duration(self) -> float:
        return self.samples[-1].t

    def positions(self) -> np.ndarray:
        """(n, 2) array of reference positions, for plotting."""
        return np.array([[s.xd.x, s.xd.y] for s in self.samples])


def _integrate(x0: Pose, us: list[ControlInput], dt: float, mode: str) -> ReferenceTrajectory:
    step = plant_step if mode == "group" else plant_step_euler
    samples = []
    x = x0
    for k, u in enumerate(us):
        samples.append(Sample(k * dt, x, input_to_twist(u), u))
        if k < len(us) - 1:
            x = step(x, u, dt)
    return ReferenceTrajectory(dt, tuple(samples), integration=mode)


def gen_constant_twist(
    ud: ControlInput, dt: float, n: int, mode: str = "group"
) -> ReferenceTrajectory:
    """n steps of a constant input from the origin: a line (omega = 0) or a
    circle of radius mu/|omega|. Returns n+1 samples."""
    if dt <= 0:
        raise TrajectoryError("dt must be positive")
    if n < 1:
        raise TrajectoryError("need at least one step")
    return _integrate(Pose.identity(), [ud] * (n + 1), dt, mode)


@dataclass(frozen=True)
class Lissajous:
    """Planar Lissajous path x = ax sin(fx t + phase), y = ay sin(fy t).

    With ax = ay = r, fx = fy = w0, phase = pi/2 this is the
    counterclockwise circle of radius r; fx = w0, fy = 2 w0, phase = 0
    gives a figure-eight.
    """

    ax: float
    ay: float
    fx: float
    fy: float
    phase: float = 0.0

    def point(self, t):
        return self.ax * np.sin(self.fx * t + self.phase), self.ay * np.sin(self.fy * t)

    def velocity(self, t):
        return (
            self.ax * self.fx * np.cos(self.fx * t + self.phase),
            self.ay * self.fy * np.cos(self.fy * t),
        )

    def acceleration(self, t):
        return (
            -self.ax * self.fx**2 * np.sin(self.fx * t + self.phase),
            -self.ay * self.fy**2 * np.sin(self.fy * t),
        )


def flat_inputs(path: Lissajous, t: np.ndarray) -> np.ndarray:
    """Reference inputs from the path derivatives (differential flatness).

    mu = sqrt(xd^2 + yd^2), omega = (xd ydd - yd xdd) / (xd^2 + yd^2).
    Raises on any grid point where the speed is below EPS_SPEED.
    """
    xd, yd = path.velocity(t)
    xdd, ydd = path.acceleration(t)
    speed_sq = xd * xd + yd * yd
    bad = np.flatnonzero(speed_sq < EPS_SPEED**2)
    if bad.size:
        k = int(bad[0])
        raise TrajectoryError(
            f"degenerate path: speed {math.sqrt(speed_sq[k]):.3e} < {EPS_SPEED} "
            f"at t = {t[k]!r} (sample {k})"
        )
    mu = np.sqrt(speed_sq)
    omega = (xd * ydd - yd * xdd) / speed_sq
    return np.column_stack([mu, omega])


def gen_flat(
    path: Lissajous,
    dt: float,
    n: int,
    mode: str = "group",
    bounds: tuple[ControlInput, ControlInput] | None = None,
) -> ReferenceTrajectory:
    """Reference along a Lissajous path via differential flatness.

    The inputs come from the analytic derivatives; the poses are then
    re-integrated from those inputs (not sampled from the curve), so the
    result is dynamically consistent by construction. If bounds are given,
    any violating grid point aborts with a report.
    """
    if dt <= 0:
        raise TrajectoryError("dt must be positive")
    if n < 1:
        raise TrajectoryError("need at least one step")
    t = np.arange(n + 1) * dt
    uarr = flat_inputs(path, t)
    if bounds is not None:
        lb, ub = bounds
        lo = np.array([lb.mu, lb.omega])
        hi = np.array([ub.mu, ub.omega])
        viol = np.flatnonzero(np.any((uarr < lo) | (uarr > hi), axis=1))
        if viol.size:
            ts = ", ".join(f"{t[int(k)]:.4g}" for k in viol[:5])
            raise TrajectoryError(
                f"reference input exceeds bounds at {viol.size} grid points (first at t = {ts})"
            )
    vx0, vy0 = path.velocity(0.0)
    x0, y0 = path.point(0.0)
    start = Pose.from_xytheta(float(x0), float(y0), math.atan2(float(vy0), float(vx0)))
    us = [ControlInput(float(m), float(w)) for m, w in uarr]
    return _integrate(start, us, dt, mode)


def _fmt(v: float) -> str:
    return format(v, ".17g")


def save_csv(traj: ReferenceTrajectory, path) -> None:
    with open(path, "w", newline="") as f:
        f.write(CSV_HEADER + "\n")
        for s in traj.samples:
            row = (s.t, s.xd.x, s.xd.y, s.xd.angle,
                   s.zd.vx, s.zd.vy, s.zd.w, s.ud.mu, s.ud.omega)
            f.write(",".join(_fmt(v) for v in row) + "\n")


def load_csv(path) -> ReferenceTrajectory:
    """Parse a reference CSV; rejects malformed rows, non-uniform grids, and
    twist/input inconsistencies with the offending line number (1-based,
    header is line 1). Integration mode is inferred from pose consistency."""
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise TrajectoryError(f"bad header, expected {CSV_HEADER!r}", line=1)
    rows = []
    for i, text in enumerate(lines[1:], start=2):
        if not text.strip():
            continue
        parts = text.split(",")
        if len(parts) != 9:
            raise TrajectoryError(f"expected 9 fields, got {len(parts)}", line=i)
        try:
            vals = [float(p) for p in parts]
        except ValueError as e:
            raise TrajectoryError(str(e), line=i) from None
        rows.append((i, vals))
    if len(rows) < 2:
        raise TrajectoryError("need at least two samples to establish the grid")

    dt = rows[1][1][0] - rows[0][1][0]
    if dt <= 0:
        raise TrajectoryError("non-increasing timestamps", line=rows[1][0])
    samples = []
    for k, (i, (t, x, y, th, vx, vy, w, mu, omega)) in enumerate(rows):
        if t != k * dt:
            raise TrajectoryError(
                f"out-of-order or non-uniform timestamp {t!r} (expected {k * dt!r})", line=i
            )
        ud = ControlInput(mu, omega)
        ref = input_to_twist(ud)
        if (vx, vy, w) != (ref.vx, ref.vy, ref.w):
            raise TrajectoryError("twist columns do not match the input columns", line=i)
        samples.append(Sample(t, Pose.from_xytheta(x, y, th), Twist(vx, vy, w), ud))

    mode = "group"
    for k in range(len(samples) - 1):
        if _consistency_gap(samples[k].xd, samples[k].zd, dt, samples[k + 1].xd) > CONSISTENCY_ATOL:
            mode = "euler"
            break
    return ReferenceTrajectory(dt, tuple(samples), integration=mode)
