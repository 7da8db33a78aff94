//! Time-scale adaptive gradient descent-ascent for nonconvex-strongly-concave
//! minimax problems, together with the single-loop adaptive baselines it is
//! usually compared against, analytic test problems with exact gradients,
//! per-step diagnostics, and a reproducible experiment harness.
//!
//! The core update keeps one accumulated squared-gradient-norm sum per
//! variable and feeds the *maximum* of the two into the primal denominator:
//!
//! ```text
//! x' = x - eta_x / max(vx, vy)^alpha * gx
//! y' = P( y + eta_y / vy^beta * gy )        with beta < alpha
//! ```
//!
//! so the primal-to-dual effective stepsize ratio is capped by a decreasing
//! sequence and eventually crosses the `1/kappa` threshold where plain
//! descent-ascent starts to contract. The diagnostics layer records the
//! effective stepsizes, their ratio, and the stage flag for every step;
//! the harness runs configs, stepsize grids, and exponent ablations from
//! TOML files into CSV/JSON outputs.

pub mod diagnostics;
pub mod harness;
pub mod optimizers;
pub mod problems;

pub use diagnostics::{
    detect_stage_transition, finite_difference_gradient, rate_check, ratio_upper_bound,
    ratio_upper_bound_factored, Stage, StageTransition, StepDiagnostics, Termination,
    TrajectoryRecord, TrajectorySummary,
};
pub use harness::{
    run_ablation, run_all_checks, run_experiment, run_sweep, AblationSpec, ExperimentConfig,
    HarnessError, SweepSpec,
};
pub use optimizers::{
    build_optimizer, run_optimizer, MomentScheme, Optimizer, OptimizerError, StepError,
    TiAdaParams, OPTIMIZER_IDS,
};
pub use problems::{
    make_stochastic, mccormick_problem, problem_from_spec, quadratic_problem, DomainSpec,
    GradientOracle, GradientPair, Iterate, MinimaxProblem, ProblemConstants, ProblemError,
    PROBLEM_IDS,
};
