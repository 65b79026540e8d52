"""Receding-horizon tracking controller.

Each step: measure the Log-coordinate error against the reference, linearize
the error dynamics along the upcoming reference twists (either scheme),
Euler-discretize, condense to a box QP over the input deviations, solve, and
apply the first input. Per-step weights follow the Euler rule Qk = Q dt,
Hk = H dt with the terminal weight unscaled.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .liegroup import Pose, Rotation, Twist
from .model import ControlInput, discretize_euler, error_state, linearize
from .qpsolver import MpcWindow, _check_weight, condense, solve
from .trajgen import ReferenceTrajectory


def _default_q() -> np.ndarray:
    return np.diag([10.0, 10.0, 10.0])


def _default_h() -> np.ndarray:
    return np.diag([1.0, 1.0])


@dataclass(frozen=True, eq=False)
class GmpcConfig:
    """Controller parameters; weights are overridable per experiment.

    When Qf is omitted it defaults to 100x the running weight Q: the strong
    terminal cost stands in for the infinite-horizon tail, which the short
    window (horizon * dt ~ 0.2 s) otherwise prices too cheaply to remove
    lateral error at a useful rate.
    """

    dt: float
    lb: ControlInput
    ub: ControlInput
    horizon: int = 10
    Q: np.ndarray = field(default_factory=_default_q)
    Qf: np.ndarray | None = None
    H: np.ndarray = field(default_factory=_default_h)
    scheme: str = "proposed"
    solver_tol: float = 1e-8
    solver_max_iter: int = 200
    warm_start: bool = True

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.scheme not in ("proposed", "naive"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not (self.lb.mu <= self.ub.mu and self.lb.omega <= self.ub.omega):
            raise ValueError("lower input bound exceeds upper input bound")
        object.__setattr__(self, "Q", np.asarray(self.Q, dtype=float))
        object.__setattr__(self, "H", np.asarray(self.H, dtype=float))
        if self.Qf is None:
            object.__setattr__(self, "Qf", 100.0 * self.Q)
        else:
            object.__setattr__(self, "Qf", np.asarray(self.Qf, dtype=float))
        _check_weight(self.Q, "Q", min_eig=-1e-10)
        _check_weight(self.Qf, "Qf", min_eig=-1e-10)
        _check_weight(self.H, "H", min_eig=1e-12)

    def with_scheme(self, scheme: str) -> "GmpcConfig":
        return replace(self, scheme=scheme)


@dataclass(frozen=True, eq=False)
class StepDiagnostics:
    psi: Twist
    predicted_psi: tuple[Twist, ...]  # horizon+1 entries; [0] is psi itself
    qp_iterations: int
    kkt_residual: float
    solve_time: float
    saturated: tuple[bool, bool]
    solver_status: str
    branch_boundary: bool
    uhat: np.ndarray | None = field(repr=False, default=None)  # stacked deviations, for warm starts


def tracking_errors(x: Pose, xd: Pose) -> tuple[float, float]:
    """Position error (Euclidean) and orientation error (Riemannian metric,
    the absolute principal angle of Rd^-1 R)."""
    e_p = float(np.hypot(x.x - xd.x, x.y - xd.y))
    e_r = abs(Rotation(xd.rot.m.T @ x.rot.m).angle)
    return e_p, e_r


def gmpc_step(
    x: Pose,
    traj: ReferenceTrajectory,
    k: int,
    cfg: GmpcConfig,
    warm: np.ndarray | None = None,
) -> tuple[ControlInput, StepDiagnostics]:
    """One receding-horizon step at reference index k.

    Past the end of the reference the last sample is held, so the window
    stays well-posed up to the final index. The returned input is clamped to
    the box so bound satisfaction is exact, not just up to solver tolerance.
    """
    last = len(traj) - 1
    if k < 0 or k > last:
        raise IndexError(f"reference window exhausted: step {k} of {last + 1} samples")
    T = cfg.horizon

    win = [traj[min(k + i, last)] for i in range(T + 1)]
    err = error_state(win[0].xd, x)

    dyn = tuple(
        discretize_euler(linearize(win[i].zd, cfg.scheme), cfg.dt) for i in range(T)
    )
    ud = tuple(win[i].ud for i in range(T))
    window = MpcWindow(
        horizon=T,
        psi0=err.twist,
        dyn=dyn,
        ud=ud,
        Q=cfg.Q * cfg.dt,
        Qf=cfg.Qf,
        H=cfg.H * cfg.dt,
        lb=cfg.lb,
        ub=cfg.ub,
    )
    qp = condense(window)

    t0 = time.perf_counter()
    sol = solve(qp, tol=cfg.solver_tol, max_iter=cfg.solver_max_iter, warm_start=warm)
    solve_time = time.perf_counter() - t0

    u0 = ControlInput(
        min(max(sol.uhat[0] + ud[0].mu, cfg.lb.mu), cfg.ub.mu),
        min(max(sol.uhat[1] + ud[0].omega, cfg.lb.omega), cfg.ub.omega),
    )
    saturated = (
        u0.mu == cfg.lb.mu or u0.mu == cfg.ub.mu,
        u0.omega == cfg.lb.omega or u0.omega == cfg.ub.omega,
    )

    predicted = [err.twist]
    psi = err.twist.as_array()
    for i in range(T):
        u_i = sol.uhat[2 * i:2 * i + 2] + ud[i].as_array()
        psi = dyn[i].Ak @ psi + dyn[i].Bk @ u_i + dyn[i].ck
        predicted.append(Twist.from_array(psi))

    diag = StepDiagnostics(
        psi=err.twist,
        predicted_psi=tuple(predicted),
        qp_iterations=sol.iterations,
        kkt_residual=sol.kkt_residual,
        solve_time=solve_time,
        saturated=saturated,
        solver_status=sol.status,
        branch_boundary=err.branch_boundary,
        uhat=sol.uhat,
    )
    return u0, diag


class GmpcController:
    """Stateful wrapper owning the warm-start chain for one closed loop.

    Not safe for concurrent use; run one instance per simulation.
    """

    def __init__(self, traj: ReferenceTrajectory, cfg: GmpcConfig):
        self.traj = traj
        self.cfg = cfg
        self._last_uhat: np.ndarray | None = None

    def step(self, x: Pose, k: int) -> tuple[ControlInput, StepDiagnostics]:
        warm = None
        if self.cfg.warm_start and self._last_uhat is not None:
            # shift by one step, repeat the final block
            warm = np.concatenate([self._last_uhat[2:], self._last_uhat[-2:]])
        u, diag = gmpc_step(x, self.traj, k, self.cfg, warm=warm)
        self._last_uhat = diag.uhat
        return u, diag

    def reset(self) -> None:
        self._last_uhat = None
