//! Analytic minimax test problems with exact gradients.
//!
//! A [`MinimaxProblem`] is a smooth objective `f(x, y)` that is minimized
//! over the primal variable `x` and maximized over the dual variable `y`.
//! Every problem here exposes closed-form gradients, the inner maximizer
//! `y*(x)`, the primal function `phi(x) = f(x, y*(x))`, and its smoothness
//! and strong-concavity constants. A [`StochasticOracle`] wraps a problem
//! with seedable per-query Gaussian noise.

mod domain;
mod mccormick;
mod oracle;
mod quadratic;

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

pub use domain::DomainSpec;
pub use mccormick::McCormick;
pub use oracle::{DeterministicOracle, GradientOracle, StochasticOracle};
pub use quadratic::Quadratic;

/// A primal/dual point. `x` lives in `R^d1`, `y` in the problem's domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Iterate {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.y.iter()).all(|v| v.is_finite())
    }
}

/// The pair of partial gradients at a point: `gx` with respect to the
/// primal variable, `gy` with respect to the dual variable.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientPair {
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
}

impl GradientPair {
    pub fn is_finite(&self) -> bool {
        self.gx.iter().chain(self.gy.iter()).all(|v| v.is_finite())
    }
}

/// Problem constants used by the diagnostics layer.
///
/// `smoothness` is a joint Lipschitz constant of the gradient, taken as the
/// spectral norm of the full Hessian. `kappa = smoothness / strong_concavity`
/// is the condition number that sets the stage-transition threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemConstants {
    pub smoothness: f64,
    pub strong_concavity: f64,
    pub kappa: f64,
    /// Coupling constant of the bilinear term, when the problem has one.
    pub coupling: Option<f64>,
    /// Uniform bound on stochastic gradient norms, when one exists.
    pub grad_bound: Option<f64>,
    /// Lipschitz constant of the cross and dual Hessian blocks.
    pub second_order: Option<f64>,
}

impl ProblemConstants {
    pub fn new(smoothness: f64, strong_concavity: f64) -> Self {
        assert!(smoothness > 0.0 && strong_concavity > 0.0);
        Self {
            smoothness,
            strong_concavity,
            kappa: smoothness / strong_concavity,
            coupling: None,
            grad_bound: None,
            second_order: None,
        }
    }

    pub fn with_coupling(mut self, coupling: f64) -> Self {
        self.coupling = Some(coupling);
        self
    }

    pub fn with_second_order(mut self, second_order: f64) -> Self {
        self.second_order = Some(second_order);
        self
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ProblemError {
    #[error("dimension mismatch: expected (d1, d2) = {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("unknown problem id `{0}`")]
    UnknownProblem(String),
    #[error("invalid parameter for problem `{problem}`: {message}")]
    InvalidParam { problem: String, message: String },
    #[error("problem `{0}` has no closed-form inner solution")]
    NoInnerSolution(String),
}

/// A smooth minimax objective with exact derivatives.
///
/// Implementations are immutable and cheap to share across threads.
pub trait MinimaxProblem: Send + Sync {
    /// Stable identifier used by config files and output metadata.
    fn id(&self) -> &'static str;

    /// Primal dimension `d1`.
    fn primal_dim(&self) -> usize;

    /// Dual dimension `d2`.
    fn dual_dim(&self) -> usize;

    /// Objective value `f(x, y)`.
    fn evaluate(&self, p: &Iterate) -> Result<f64, ProblemError>;

    /// Exact partial gradients at `p`.
    fn gradient(&self, p: &Iterate) -> Result<GradientPair, ProblemError>;

    /// The inner maximizer `y*(x)`, when available in closed form.
    fn inner_solution(&self, x: &[f64]) -> Result<Vec<f64>, ProblemError> {
        let _ = x;
        Err(ProblemError::NoInnerSolution(self.id().to_string()))
    }

    /// The primal function `phi(x) = f(x, y*(x))`, when available.
    fn primal_value(&self, x: &[f64]) -> Option<f64> {
        let _ = x;
        None
    }

    fn constants(&self) -> ProblemConstants;

    fn check_dims(&self, p: &Iterate) -> Result<(), ProblemError> {
        let expected = (self.primal_dim(), self.dual_dim());
        let got = (p.x.len(), p.y.len());
        if expected != got {
            return Err(ProblemError::DimensionMismatch { expected, got });
        }
        Ok(())
    }

    /// Starting point used when a config does not give one.
    fn default_start(&self) -> Iterate;
}

/// Builds the quadratic test problem with coupling constant `L > 0`.
pub fn quadratic_problem(coupling: f64) -> Result<Quadratic, ProblemError> {
    Quadratic::new(coupling)
}

/// Builds the McCormick-based test problem.
pub fn mccormick_problem() -> McCormick {
    McCormick::new()
}

/// Wraps a problem in a stochastic oracle with independent zero-mean
/// Gaussian noise of the given standard deviation on every gradient query.
pub fn make_stochastic(
    problem: Arc<dyn MinimaxProblem>,
    noise_stddev: f64,
    seed: u64,
) -> StochasticOracle {
    StochasticOracle::new(problem, noise_stddev, seed)
}

/// Problem ids accepted by [`problem_from_spec`].
pub const PROBLEM_IDS: &[&str] = &["quadratic", "mccormick"];

/// Resolves a problem id plus parameter map into a problem instance.
///
/// Unknown ids and unknown parameter keys are rejected.
pub fn problem_from_spec(
    id: &str,
    params: &BTreeMap<String, f64>,
) -> Result<Arc<dyn MinimaxProblem>, ProblemError> {
    match id {
        "quadratic" => {
            let mut coupling = 2.0;
            for (key, value) in params {
                match key.as_str() {
                    "L" => coupling = *value,
                    other => {
                        return Err(ProblemError::InvalidParam {
                            problem: id.to_string(),
                            message: format!("unknown parameter `{other}`"),
                        })
                    }
                }
            }
            Ok(Arc::new(Quadratic::new(coupling)?))
        }
        "mccormick" => {
            if let Some(key) = params.keys().next() {
                return Err(ProblemError::InvalidParam {
                    problem: id.to_string(),
                    message: format!("unknown parameter `{key}`"),
                });
            }
            Ok(Arc::new(McCormick::new()))
        }
        other => Err(ProblemError::UnknownProblem(other.to_string())),
    }
}

/// Default parameters for a problem id, as recorded in config echoes.
pub fn default_problem_params(id: &str) -> BTreeMap<String, f64> {
    let mut params = BTreeMap::new();
    if id == "quadratic" {
        params.insert("L".to_string(), 2.0);
    }
    params
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    norm_sq(v).sqrt()
}

pub(crate) fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}
