"""Convex model predictive tracking control for unicycle robots on SE(2)."""

from .liegroup import (
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
from .model import (
    ControlInput,
    DiscreteDynamics,
    ErrorState,
    LinearizedDynamics,
    discretize_euler,
    error_state,
    exact_error_rate,
    input_to_twist,
    linearize,
    linearize_naive,
    linearize_proposed,
    plant_step,
    plant_step_euler,
    residual,
)
from .trajgen import (
    Lissajous,
    ReferenceTrajectory,
    Sample,
    TrajectoryError,
    gen_constant_twist,
    gen_flat,
)
from .qpsolver import BoxQp, MpcWindow, QpSolution, condense, kkt_residual, solve
from .controller import GmpcConfig, GmpcController, StepDiagnostics, gmpc_step, tracking_errors
from .simkit import (
    Envelope,
    InitSampler,
    Record,
    SimResult,
    SimScenario,
    Summary,
    monte_carlo,
    run,
    summarize,
)

__version__ = "0.1.0"
