"""Command-line front end: run experiments from JSON configs.

Subcommands: run, montecarlo, bench, selftest. Exit codes: 0 ok, 1 runtime
failure, 2 config error. Artifacts (CSV/SVG/summary) are byte-reproducible
from (config, seed); only the bench timing report is not.
"""

from __future__ import annotations

import gc
import json
import math
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path

import click
import numpy as np

from . import simkit, svgplot, trajgen
from .controller import GmpcConfig, GmpcController
from .liegroup import Pose, Twist, adm, exp, log, vee, wedge
from .model import ControlInput, plant_step, residual
from .qpsolver import BoxQp, MpcWindow, condense, solve
from .simkit import InitSampler, SimScenario

# mu range [m/s], omega range [rad/s]; both platforms run at 50 Hz
PLATFORMS = {
    "turtlebot3": ((-0.22, 0.22), (-2.84, 2.84)),
    "scoutmini": ((-3.0, 3.0), (-2.523, 2.523)),
}


class ConfigError(Exception):
    """Schema violation; message names the offending field path."""


def _req(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"{where}.{key}: missing required field")
    return d[key]


def _num(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {v!r}")
    return float(v)


def _vec(v, n: int, where: str) -> list[float]:
    if not isinstance(v, list) or len(v) != n:
        raise ConfigError(f"{where}: expected a list of {n} numbers")
    return [_num(x, f"{where}[{i}]") for i, x in enumerate(v)]


@dataclass
class ExperimentConfig:
    name: str
    dt: float
    steps: int
    trajectory: dict
    lb: ControlInput
    ub: ControlInput
    gmpc: GmpcConfig
    init_pose: Pose
    plant_mode: str
    noise_std: tuple | None
    seed: int
    plot: bool
    monte_carlo: dict | None
    bench_steps: int


def _parse_bounds(raw, where: str) -> tuple[ControlInput, ControlInput]:
    if isinstance(raw, str):
        if raw not in PLATFORMS:
            raise ConfigError(f"{where}: unknown platform {raw!r} "
                              f"(choose from {sorted(PLATFORMS)})")
        (mlo, mhi), (wlo, whi) = PLATFORMS[raw]
    elif isinstance(raw, dict):
        mlo, mhi = _vec(_req(raw, "mu", where), 2, f"{where}.mu")
        wlo, whi = _vec(_req(raw, "omega", where), 2, f"{where}.omega")
    else:
        raise ConfigError(f"{where}: expected a platform name or explicit bounds")
    if mlo > mhi:
        raise ConfigError(f"{where}.mu: lower bound {mlo} exceeds upper bound {mhi}")
    if wlo > whi:
        raise ConfigError(f"{where}.omega: lower bound {wlo} exceeds upper bound {whi}")
    return ControlInput(mlo, wlo), ControlInput(mhi, whi)


def load_config(path, seed=None, scheme=None, platform=None) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError("top level: expected an object")

    name = raw.get("name", Path(path).stem)
    dt = _num(raw.get("dt", 0.02), "dt")
    if dt <= 0:
        raise ConfigError("dt: must be positive")

    tr = _req(raw, "trajectory", "")
    if not isinstance(tr, dict) or "type" not in tr:
        raise ConfigError("trajectory.type: missing")
    if tr["type"] not in ("constant_twist", "lissajous"):
        raise ConfigError(f"trajectory.type: unknown type {tr['type']!r}")
    steps = int(_num(_req(tr, "steps", "trajectory"), "trajectory.steps"))
    if steps < 1:
        raise ConfigError("trajectory.steps: must be at least 1")

    lb, ub = _parse_bounds(platform or raw.get("platform", "turtlebot3"), "platform")

    c = raw.get("controller", {})
    if not isinstance(c, dict):
        raise ConfigError("controller: expected an object")
    horizon = int(_num(c.get("horizon", 10), "controller.horizon"))
    if horizon < 1:
        raise ConfigError("controller.horizon: must be at least 1")
    sch = scheme or c.get("scheme", "proposed")
    if sch not in ("proposed", "naive"):
        raise ConfigError(f"controller.scheme: unknown scheme {sch!r}")
    q = np.diag(_vec(c["q"], 3, "controller.q")) if "q" in c else None
    qf = np.diag(_vec(c["qf"], 3, "controller.qf")) if "qf" in c else None
    h = np.diag(_vec(c["h"], 2, "controller.h")) if "h" in c else None
    kw = {}
    if q is not None:
        kw["Q"] = q
    if h is not None:
        kw["H"] = h
    try:
        gmpc = GmpcConfig(
            dt=dt, lb=lb, ub=ub, horizon=horizon, Qf=qf, scheme=sch,
            solver_tol=_num(c.get("tol", 1e-8), "controller.tol"),
            solver_max_iter=int(_num(c.get("max_iter", 200), "controller.max_iter")),
            warm_start=bool(c.get("warm_start", True)),
            **kw,
        )
    except ValueError as e:
        raise ConfigError(f"controller: {e}") from e

    ip = _vec(raw.get("initial_pose", [0.0, 0.0, 0.0]), 3, "initial_pose")
    plant_mode = raw.get("plant_mode", "group_exact")
    if plant_mode not in simkit.PLANT_MODES:
        raise ConfigError(f"plant_mode: unknown mode {plant_mode!r}")
    noise = raw.get("noise_std")
    if noise is not None:
        noise = tuple(_vec(noise, 3, "noise_std"))
        if any(s < 0 for s in noise):
            raise ConfigError("noise_std: stds must be nonnegative")

    mc = raw.get("monte_carlo")
    if mc is not None:
        if not isinstance(mc, dict):
            raise ConfigError("monte_carlo: expected an object")
        runs = int(_num(_req(mc, "runs", "monte_carlo"), "monte_carlo.runs"))
        if runs < 1:
            raise ConfigError("monte_carlo.runs: must be at least 1")
        box = _req(mc, "pos_box", "monte_carlo")
        if not isinstance(box, list) or len(box) != 2:
            raise ConfigError("monte_carlo.pos_box: expected [[xmin,xmax],[ymin,ymax]]")
        _vec(box[0], 2, "monte_carlo.pos_box[0]")
        _vec(box[1], 2, "monte_carlo.pos_box[1]")
        _vec(_req(mc, "heading_range", "monte_carlo"), 2, "monte_carlo.heading_range")

    return ExperimentConfig(
        name=name,
        dt=dt,
        steps=steps,
        trajectory=tr,
        lb=lb,
        ub=ub,
        gmpc=gmpc,
        init_pose=Pose.from_xytheta(*ip),
        plant_mode=plant_mode,
        noise_std=noise,
        seed=int(_num(raw.get("seed", 0), "seed")) if seed is None else int(seed),
        plot=bool(raw.get("plot", True)),
        monte_carlo=mc,
        bench_steps=int(_num(raw.get("bench", {}).get("steps", 1000), "bench.steps")),
    )


def build_trajectory(ec: ExperimentConfig) -> trajgen.ReferenceTrajectory:
    """Reference with a horizon's worth of extra samples so the controller
    never has to hold the tail during a scored run."""
    tr = ec.trajectory
    n = ec.steps + ec.gmpc.horizon + 1
    mode = tr.get("integration", "group")
    if mode not in ("group", "euler"):
        raise ConfigError(f"trajectory.integration: unknown mode {mode!r}")
    if tr["type"] == "constant_twist":
        ud = ControlInput(_num(_req(tr, "mu", "trajectory"), "trajectory.mu"),
                          _num(_req(tr, "omega", "trajectory"), "trajectory.omega"))
        return trajgen.gen_constant_twist(ud, ec.dt, n, mode=mode)
    path = trajgen.Lissajous(
        ax=_num(_req(tr, "ax", "trajectory"), "trajectory.ax"),
        ay=_num(_req(tr, "ay", "trajectory"), "trajectory.ay"),
        fx=_num(_req(tr, "fx", "trajectory"), "trajectory.fx"),
        fy=_num(_req(tr, "fy", "trajectory"), "trajectory.fy"),
        phase=_num(tr.get("phase", 0.0), "trajectory.phase"),
    )
    return trajgen.gen_flat(path, ec.dt, n, mode=mode, bounds=(ec.lb, ec.ub))


def build_scenario(ec: ExperimentConfig) -> SimScenario:
    return SimScenario(
        traj=build_trajectory(ec),
        init_pose=ec.init_pose,
        cfg=ec.gmpc,
        steps=ec.steps,
        noise_std=ec.noise_std,
        plant_mode=ec.plant_mode,
        seed=ec.seed,
    )


def _write_summary(path, ec: ExperimentConfig, result: simkit.SimResult) -> None:
    s = result.summary
    lines = [
        f"scenario: {ec.name}",
        f"steps: {ec.steps}  dt: {ec.dt:g}  scheme: {ec.gmpc.scheme}  "
        f"horizon: {ec.gmpc.horizon}  seed: {ec.seed}",
        f"bounds: mu in [{ec.lb.mu:g}, {ec.ub.mu:g}] m/s, "
        f"omega in [{ec.lb.omega:g}, {ec.ub.omega:g}] rad/s",
    ]
    if result.failed:
        lines.append(f"status: FAILED ({result.failure})")
    else:
        lines += [
            "status: ok",
            f"steady-state e_p [m]: {s.steady_state_ep:.17g}",
            f"steady-state e_R [rad]: {s.steady_state_eR:.17g}",
            f"max e_p [m]: {s.max_ep:.17g}",
            f"mean e_p [m]: {s.mean_ep:.17g}",
            f"max e_R [rad]: {s.max_eR:.17g}",
            f"saturated steps: {s.saturation_count}",
            f"bound violations: {s.bound_violations}",
            "(solve-time statistics: see the bench subcommand)",
        ]
    Path(path).write_text("\n".join(lines) + "\n")


@click.group()
def main():
    """Geometric MPC tracking experiments for wheeled mobile robots."""


_common = [
    click.option("--config", "config_path", required=True,
                 type=click.Path(exists=False), help="JSON experiment config."),
    click.option("--out", "out_dir", default=None, help="Output directory."),
    click.option("--seed", default=None, type=int, help="Override the config seed."),
    click.option("--scheme", default=None, type=click.Choice(["proposed", "naive"]),
                 help="Override the linearization scheme."),
    click.option("--platform", default=None,
                 type=click.Choice(sorted(PLATFORMS)), help="Override the platform."),
]


def _with_common(cmd):
    for opt in reversed(_common):
        cmd = opt(cmd)
    return cmd


def _load_or_exit(config_path, seed, scheme, platform) -> ExperimentConfig:
    try:
        return load_config(config_path, seed=seed, scheme=scheme, platform=platform)
    except ConfigError as e:
        click.echo(f"config error: {e}", err=True)
        sys.exit(2)


def _outdir(ec: ExperimentConfig, out_dir) -> Path:
    out = Path(out_dir) if out_dir else Path("out") / ec.name
    out.mkdir(parents=True, exist_ok=True)
    return out


@main.command("run")
@_with_common
def cmd_run(config_path, out_dir, seed, scheme, platform):
    """Single closed-loop experiment; writes result.csv / summary.txt / plot.svg."""
    ec = _load_or_exit(config_path, seed, scheme, platform)
    out = _outdir(ec, out_dir)
    try:
        scenario = build_scenario(ec)
        result = simkit.run(scenario)
        simkit.export_csv(result, out / "result.csv")
        _write_summary(out / "summary.txt", ec, result)
        if ec.plot and result.records:
            svgplot.tracking_plot(result.records, out / "plot.svg")
    except (trajgen.TrajectoryError, ValueError, OSError) as e:
        click.echo(f"runtime failure: {e}", err=True)
        sys.exit(1)
    if result.failed:
        click.echo(f"runtime failure: {result.failure}", err=True)
        sys.exit(1)
    click.echo(f"wrote {out}/result.csv (steady-state e_p = "
               f"{result.summary.steady_state_ep:.3e} m)")


@main.command("montecarlo")
@_with_common
def cmd_montecarlo(config_path, out_dir, seed, scheme, platform):
    """Seeded Monte-Carlo study; writes per-run CSVs and an envelope CSV."""
    ec = _load_or_exit(config_path, seed, scheme, platform)
    if ec.monte_carlo is None:
        click.echo("config error: monte_carlo: missing required block", err=True)
        sys.exit(2)
    out = _outdir(ec, out_dir)
    mc = ec.monte_carlo
    sampler = InitSampler(
        pos_box=((mc["pos_box"][0][0], mc["pos_box"][0][1]),
                 (mc["pos_box"][1][0], mc["pos_box"][1][1])),
        heading_range=tuple(mc["heading_range"]),
    )
    try:
        base = build_scenario(ec)
        results, env = simkit.monte_carlo(base, int(mc["runs"]), sampler, seed=ec.seed)
        for i, r in enumerate(results):
            simkit.export_csv(r, out / f"run_{i:03d}.csv")
        with open(out / "envelope.csv", "w", newline="") as f:
            f.write("t,ep_min,ep_median,ep_max,eR_min,eR_median,eR_max\n")
            for row in zip(env.t, env.ep_min, env.ep_median, env.ep_max,
                           env.eR_min, env.eR_median, env.eR_max):
                f.write(",".join(format(v, ".17g") for v in row) + "\n")
        final = (f"runs: {env.n_runs}  failed: {env.n_failed}\n"
                 f"final e_p envelope [m]: {env.ep_min[-1]:.17g} / "
                 f"{env.ep_median[-1]:.17g} / {env.ep_max[-1]:.17g}\n"
                 f"final e_R envelope [rad]: {env.eR_min[-1]:.17g} / "
                 f"{env.eR_median[-1]:.17g} / {env.eR_max[-1]:.17g}\n")
        (out / "summary.txt").write_text(final)
        if ec.plot:
            svgplot.envelope_plot(env, out / "plot.svg")
    except (trajgen.TrajectoryError, ValueError, OSError, RuntimeError) as e:
        click.echo(f"runtime failure: {e}", err=True)
        sys.exit(1)
    if env.n_failed:
        click.echo(f"runtime failure: {env.n_failed} of {env.n_runs} runs failed", err=True)
        sys.exit(1)
    click.echo(f"wrote {out}/envelope.csv over {env.n_runs} runs "
               f"(final median e_p = {env.ep_median[-1]:.3e} m)")


@main.command("bench")
@_with_common
def cmd_bench(config_path, out_dir, seed, scheme, platform):
    """QP solve-time benchmark over >= 1000 closed-loop controller steps."""
    ec = _load_or_exit(config_path, seed, scheme, platform)
    out = _outdir(ec, out_dir)
    steps = max(ec.bench_steps, 1000)
    try:
        ec_bench = replace(ec, steps=steps)
        scenario = build_scenario(ec_bench)
        gc_was_enabled = gc.isenabled()
        gc.collect()
        gc.disable()  # keep allocator pauses out of the percentiles
        try:
            result = simkit.run(scenario)
        finally:
            if gc_was_enabled:
                gc.enable()
        if result.failed:
            click.echo(f"runtime failure: {result.failure}", err=True)
            sys.exit(1)
        st = np.array([r.solve_time for r in result.records])
        med = float(np.quantile(st, 0.5))
        p95 = float(np.quantile(st, 0.95))
        report = (
            f"QP solve-time benchmark (timing report, not reproducible)\n"
            f"scenario: {ec.name}  horizon: {ec.gmpc.horizon}  steps: {steps}\n"
            f"median [ms]: {med * 1e3:.4f}\n"
            f"p95 [ms]: {p95 * 1e3:.4f}\n"
            f"max [ms]: {float(st.max()) * 1e3:.4f}\n"
            f"p95/median: {p95 / med:.3f}\n"
        )
        (out / "bench.txt").write_text(report)
        click.echo(report, nl=False)
    except (trajgen.TrajectoryError, ValueError, OSError) as e:
        click.echo(f"runtime failure: {e}", err=True)
        sys.exit(1)


def _selftest_suites():
    rng = np.random.default_rng(12345)

    def lie_roundtrip():
        worst = 0.0
        for _ in range(1000):
            v = rng.uniform([-5, -5, -(math.pi - 1e-3)], [5, 5, math.pi - 1e-3])
            tw = Twist(*v)
            back = log(exp(tw))
            worst = max(worst, float(np.max(np.abs(back.as_array() - tw.as_array()))))
        return worst <= 1e-10, f"max roundtrip error {worst:.2e}"

    def commutator():
        worst = 0.0
        for _ in range(1000):
            a = Twist(*rng.uniform(-1, 1, 3))
            b = Twist(*rng.uniform(-1, 1, 3))
            lhs = vee(wedge(a).m @ wedge(b).m - wedge(b).m @ wedge(a).m)
            rhs = adm(b) @ a.as_array()
            worst = max(worst, float(np.max(np.abs(lhs.as_array() - rhs))))
        return worst <= 1e-12, f"max commutator mismatch {worst:.2e}"

    def group_axioms():
        from .liegroup import compose, inverse
        worst = 0.0
        for _ in range(100):
            ps = [exp(Twist(*rng.uniform(-2, 2, 3))) for _ in range(3)]
            a, b, c = ps
            assoc = compose(compose(a, b), c).as_matrix() - compose(a, compose(b, c)).as_matrix()
            inv = compose(a, inverse(a)).as_matrix() - np.eye(3)
            worst = max(worst, float(np.max(np.abs(assoc))), float(np.max(np.abs(inv))))
        return worst <= 1e-9, f"max axiom violation {worst:.2e}"

    def residual_order():
        psi = Twist(0.08, -0.05, 0.06)
        dz = Twist(0.03, -0.02, 0.04)
        zd = Twist(0.2, 0.0, 0.196)
        ok = True
        prev = None
        for i in range(4):
            s = 0.5**i
            r = np.linalg.norm(residual(psi * s, Twist(zd.vx + dz.vx * s, zd.vy + dz.vy * s,
                                                       zd.w + dz.w * s), zd, "proposed"))
            if prev is not None:
                ok = ok and 3.5 <= prev / r <= 4.5
            prev = r
        return ok, "halving ratio in [3.5, 4.5]"

    def condensing():
        from .model import DiscreteDynamics
        worst = 0.0
        for T in (1, 3, 5):
            dyn, ud = [], []
            for _ in range(T):
                dyn.append(DiscreteDynamics(np.eye(3) + 0.02 * rng.normal(size=(3, 3)),
                                            0.02 * rng.normal(size=(3, 2)),
                                            0.02 * rng.normal(size=3), 0.02))
                ud.append(ControlInput(*rng.normal(size=2)))
            w = MpcWindow(horizon=T, psi0=Twist(*rng.normal(size=3)), dyn=tuple(dyn),
                          ud=tuple(ud), Q=np.diag(rng.uniform(0.5, 2, 3)),
                          Qf=np.diag(rng.uniform(0.5, 2, 3)), H=np.diag(rng.uniform(0.5, 2, 2)),
                          lb=ControlInput(-5, -5), ub=ControlInput(5, 5))
            qp = condense(w)
            for _ in range(20):
                uh = rng.normal(size=2 * T)
                psi = w.psi0.as_array()
                val = float(psi @ w.Q @ psi)
                for k in range(T):
                    u = uh[2 * k:2 * k + 2] + ud[k].as_array()
                    val += float(uh[2 * k:2 * k + 2] @ w.H @ uh[2 * k:2 * k + 2])
                    psi = dyn[k].Ak @ psi + dyn[k].Bk @ u + dyn[k].ck
                    blk = w.Q if k < T - 1 else w.Qf
                    val += float(psi @ blk @ psi)
                worst = max(worst, abs(qp.objective(uh) - val) / max(1.0, abs(val)))
        return worst <= 1e-9, f"max relative objective gap {worst:.2e}"

    def qp_enumeration():
        worst = 0.0
        for _ in range(40):
            n = int(rng.integers(1, 5))
            a = rng.normal(size=(n, n))
            p = a.T @ a + 0.1 * np.eye(n)
            q = rng.normal(size=n)
            lo = rng.uniform(-2, 0, n)
            hi = rng.uniform(0, 2, n)
            qp = BoxQp(0.5 * (p + p.T), q, lo, hi)
            got = solve(qp).uhat
            best, bestval = None, np.inf
            for code in range(3**n):
                pattern, c = [], code
                for _ in range(n):
                    pattern.append(c % 3)
                    c //= 3
                x = np.empty(n)
                fixed = np.array([pt != 2 for pt in pattern])
                x[[pt == 0 for pt in pattern]] = lo[[pt == 0 for pt in pattern]]
                x[[pt == 1 for pt in pattern]] = hi[[pt == 1 for pt in pattern]]
                free = ~fixed
                if free.any():
                    rhs = -(q[free] + p[np.ix_(free, fixed)] @ x[fixed]) if fixed.any() else -q[free]
                    x[free] = np.linalg.solve(p[np.ix_(free, free)], rhs)
                if np.all(x >= lo - 1e-9) and np.all(x <= hi + 1e-9):
                    val = 0.5 * x @ p @ x + q @ x
                    if val < bestval:
                        best, bestval = x, val
            worst = max(worst, float(np.max(np.abs(got - best))))
        return worst <= 1e-8, f"max argmin gap vs enumeration {worst:.2e}"

    def fixed_point():
        traj = trajgen.gen_constant_twist(ControlInput(0.2, 0.196), 0.02, 80)
        cfg = GmpcConfig(dt=0.02, lb=ControlInput(-0.22, -2.84), ub=ControlInput(0.22, 2.84))
        ctrl = GmpcController(traj, cfg)
        x = Pose.identity()
        worst = 0.0
        for k in range(60):
            u, _ = ctrl.step(x, k)
            worst = max(worst, abs(u.mu - 0.2), abs(u.omega - 0.196))
            x = plant_step(x, u, cfg.dt)
        return worst <= 1e-7, f"max |u - ud| on reference {worst:.2e}"

    return [
        ("lie-group Exp/Log roundtrip", lie_roundtrip),
        ("commutator identity vs adm", commutator),
        ("group axioms", group_axioms),
        ("linearization residual order", residual_order),
        ("condensed objective vs rollout", condensing),
        ("QP solver vs enumeration", qp_enumeration),
        ("closed-loop reference fixed point", fixed_point),
    ]


@main.command("selftest")
def cmd_selftest():
    """Run the invariant suites and report one line per suite."""
    failed = 0
    for name, fn in _selftest_suites():
        t0 = time.perf_counter()
        ok, detail = fn()
        ms = (time.perf_counter() - t0) * 1e3
        status = "ok" if ok else "FAIL"
        click.echo(f"[{status}] {name}: {detail} ({ms:.0f} ms)")
        failed += not ok
    sys.exit(1 if failed else 0)


if __name__ == "__main__":
    main()
