"""Closed-loop simulation, Monte-Carlo studies, and result logging.

Everything is seeded and deterministic: initial poses and actuation noise
come from counter-based Philox streams keyed by (seed, run index), so runs
reproduce bit-for-bit and Monte-Carlo batches are order-independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .controller import GmpcConfig, GmpcController, tracking_errors
from .liegroup import Pose, Twist, compose, exp
from .model import ControlInput, input_to_twist
from .trajgen import ReferenceTrajectory

RESULT_HEADER = "t,x,y,theta,mu,omega,ep,eR,psix,psiy,psitheta,qp_iters,kkt,solve_time"

PLANT_MODES = ("group_exact", "coordinate_euler")


class Record(NamedTuple):
    """One logged step; mirrors the result CSV schema column for column."""

    t: float
    x: float
    y: float
    theta: float
    mu: float
    omega: float
    ep: float
    eR: float
    psix: float
    psiy: float
    psitheta: float
    qp_iters: float
    kkt: float
    solve_time: float


@dataclass(frozen=True)
class SimScenario:
    traj: ReferenceTrajectory
    init_pose: Pose
    cfg: GmpcConfig
    steps: int
    noise_std: tuple[float, float, float] | None = None  # twist-component stds
    plant_mode: str = "group_exact"
    seed: int = 0

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be at least 1")
        if self.steps > len(self.traj):
            raise ValueError(
                f"steps ({self.steps}) exceeds reference length ({len(self.traj)})"
            )
        if self.plant_mode not in PLANT_MODES:
            raise ValueError(f"unknown plant mode {self.plant_mode!r}")
        if self.noise_std is not None:
            std = tuple(float(s) for s in self.noise_std)
            if any(s < 0 for s in std):
                raise ValueError("noise stds must be nonnegative")
            object.__setattr__(self, "noise_std", std if any(std) else None)


@dataclass(frozen=True)
class Summary:
    steps: int
    max_ep: float
    mean_ep: float
    steady_state_ep: float
    max_eR: float
    mean_eR: float
    steady_state_eR: float
    saturation_count: int
    bound_violations: int
    solve_time_median: float
    solve_time_p95: float
    solve_time_max: float


@dataclass(frozen=True)
class SimResult:
    scenario: SimScenario
    records: tuple[Record, ...]
    summary: Summary | None
    failed: bool = False
    failure: str | None = None


def _rng(seed: int, counter: int = 0) -> np.random.Generator:
    # Philox is counter-based: (seed, counter) keys independent streams.
    return np.random.Generator(np.random.Philox(key=(int(seed) << 64) + int(counter)))


def summarize(records, lb: ControlInput, ub: ControlInput) -> Summary:
    """Aggregate a record list; bit-reproducible from the records alone."""
    records = list(records)
    ep = np.array([r.ep for r in records])
    er = np.array([r.eR for r in records])
    st = np.array([r.solve_time for r in records])
    tail = records[(3 * len(records)) // 4:]  # final 25% = steady state
    sat = sum(
        (r.mu == lb.mu or r.mu == ub.mu or r.omega == lb.omega or r.omega == ub.omega)
        for r in records
    )
    viol = sum(
        not (lb.mu <= r.mu <= ub.mu and lb.omega <= r.omega <= ub.omega)
        for r in records
    )
    return Summary(
        steps=len(records),
        max_ep=float(ep.max()),
        mean_ep=float(ep.mean()),
        steady_state_ep=float(np.mean([r.ep for r in tail])),
        max_eR=float(er.max()),
        mean_eR=float(er.mean()),
        steady_state_eR=float(np.mean([r.eR for r in tail])),
        saturation_count=int(sat),
        bound_violations=int(viol),
        solve_time_median=float(np.quantile(st, 0.5)),
        solve_time_p95=float(np.quantile(st, 0.95)),
        solve_time_max=float(st.max()),
    )


def _apply_twist(x: Pose, tw: Twist, dt: float, mode: str) -> Pose:
    if mode == "group_exact":
        return compose(x, exp(tw * dt))
    th = x.angle
    c, s = math.cos(th), math.sin(th)
    return Pose.from_xytheta(
        x.x + dt * (tw.vx * c - tw.vy * s),
        x.y + dt * (tw.vx * s + tw.vy * c),
        th + dt * tw.w,
    )


def run(s: SimScenario) -> SimResult:
    """Simulate the closed loop; returns a partial result with a failure
    marker if the controller raises mid-run."""
    ctrl = GmpcController(s.traj, s.cfg)
    rng = _rng(s.seed) if s.noise_std is not None else None
    x = s.init_pose
    records: list[Record] = []
    for k in range(s.steps):
        ref = s.traj[k]
        try:
            u, diag = ctrl.step(x, k)
        except Exception as e:  # propagate as a marked partial result
            return SimResult(s, tuple(records), None, failed=True,
                             failure=f"step {k}: {e}")
        ep, er = tracking_errors(x, ref.xd)
        records.append(Record(
            t=ref.t, x=x.x, y=x.y, theta=x.angle,
            mu=u.mu, omega=u.omega, ep=ep, eR=er,
            psix=diag.psi.vx, psiy=diag.psi.vy, psitheta=diag.psi.w,
            qp_iters=float(diag.qp_iterations), kkt=diag.kkt_residual,
            solve_time=diag.solve_time,
        ))
        tw = input_to_twist(u)
        if rng is not None:
            n = rng.normal(0.0, s.noise_std)
            tw = Twist(tw.vx + n[0], tw.vy + n[1], tw.w + n[2])
        x = _apply_twist(x, tw, s.cfg.dt, s.plant_mode)
    return SimResult(s, tuple(records), summarize(records, s.cfg.lb, s.cfg.ub))


@dataclass(frozen=True)
class InitSampler:
    """Uniform initial-pose sampler: position box and heading interval."""

    pos_box: tuple[tuple[float, float], tuple[float, float]]
    heading_range: tuple[float, float]

    def draw(self, rng: np.random.Generator) -> Pose:
        (x0, x1), (y0, y1) = self.pos_box
        h0, h1 = self.heading_range
        return Pose.from_xytheta(
            rng.uniform(x0, x1), rng.uniform(y0, y1), rng.uniform(h0, h1)
        )


@dataclass(frozen=True)
class Envelope:
    """Per-time error envelopes over the successful runs."""

    t: np.ndarray
    ep_min: np.ndarray
    ep_median: np.ndarray
    ep_max: np.ndarray
    eR_min: np.ndarray
    eR_median: np.ndarray
    eR_max: np.ndarray
    n_runs: int
    n_failed: int


def monte_carlo(
    base: SimScenario,
    runs: int,
    sampler: InitSampler,
    seed: int = 0,
) -> tuple[list[SimResult], Envelope]:
    """Independent seeded runs from sampled initial poses, merged in run order.

    Failed runs are reported in their slot; the envelope aggregates the
    successes only.
    """
    if runs < 1:
        raise ValueError("runs must be at least 1")
    results = []
    for i in range(runs):
        rng = _rng(seed, counter=2 * i)
        scenario = replace(base, init_pose=sampler.draw(rng), seed=(seed << 32) + i)
        results.append(run(scenario))

    ok = [r for r in results if not r.failed]
    if not ok:
        raise RuntimeError("all Monte-Carlo runs failed")
    t = np.array([rec.t for rec in ok[0].records])
    ep = np.array([[rec.ep for rec in r.records] for r in ok])
    er = np.array([[rec.eR for rec in r.records] for r in ok])
    env = Envelope(
        t=t,
        ep_min=ep.min(axis=0), ep_median=np.median(ep, axis=0), ep_max=ep.max(axis=0),
        eR_min=er.min(axis=0), eR_median=np.median(er, axis=0), eR_max=er.max(axis=0),
        n_runs=runs, n_failed=len(results) - len(ok),
    )
    return results, env


def _fmt(v: float) -> str:
    return format(v, ".17g")


def export_csv(r: SimResult, path, timing: bool = False) -> None:
    """Write the per-step records (14 columns).

    With timing=False (default) the solve_time column is written as 0 so the
    artifact is byte-reproducible from (scenario, seed); pass timing=True to
    keep the measured values.
    """
    try:
        with open(path, "w", newline="") as f:
            f.write(RESULT_HEADER + "\n")
            for rec in r.records:
                row = rec if timing else rec._replace(solve_time=0.0)
                f.write(",".join(_fmt(v) for v in row) + "\n")
    except OSError as e:
        raise OSError(f"failed to write result CSV {path}: {e}") from e


def load_csv(path) -> tuple[Record, ...]:
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines or lines[0] != RESULT_HEADER:
        raise ValueError(f"bad result header in {path}")
    records = []
    for i, text in enumerate(lines[1:], start=2):
        if not text.strip():
            continue
        parts = text.split(",")
        if len(parts) != 14:
            raise ValueError(f"{path} line {i}: expected 14 fields, got {len(parts)}")
        records.append(Record(*(float(p) for p in parts)))
    return tuple(records)
