//! Step-based minimax optimizers.
//!
//! The family is built around two second-moment accumulators, one per
//! variable. The time-scale adaptive update couples the primal denominator
//! to the maximum of the two; the plain adaptive GDA variants keep each
//! variable on its own history. All optimizers expose the same [`Optimizer`]
//! step interface and produce a [`StepDiagnostics`] row per step.

mod coordwise;
mod generalized;
mod moments;
mod neada;
mod tiada;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::diagnostics::{classify_stage, StepDiagnostics, Termination};
use crate::problems::{norm, DomainSpec, GradientOracle, GradientPair, Iterate, ProblemError};

pub use coordwise::{coordwise_tiada_step, damping_factor, CoordState, CoordTiAda};
pub use generalized::{adaptive_gda_step, generalized_tiada_step, MomentGda, MomentState};
pub use moments::{FirstMoment, MomentScheme, SecondMomentKind, SecondMomentState};
pub use neada::{neada_run, neada_step, NeAda, NeAdaParams, NeAdaState};
pub use tiada::{tiada_nomax_step, tiada_step, TiAda, TiAdaState};

/// Stepsizes, exponents, and initial second moments shared by the
/// adaptive optimizers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiAdaParams {
    /// Initial primal stepsize.
    pub eta_x: f64,
    /// Initial dual stepsize.
    pub eta_y: f64,
    /// Primal denominator exponent.
    pub alpha: f64,
    /// Dual denominator exponent.
    pub beta: f64,
    /// Initial primal second moment.
    pub v0_x: f64,
    /// Initial dual second moment.
    pub v0_y: f64,
}

impl Default for TiAdaParams {
    fn default() -> Self {
        Self {
            eta_x: 1.0,
            eta_y: 1.0,
            alpha: 0.6,
            beta: 0.4,
            v0_x: 1.0,
            v0_y: 1.0,
        }
    }
}

impl TiAdaParams {
    /// Positivity and exponent-range checks shared by all optimizers.
    pub fn validate(&self) -> Result<(), OptimizerError> {
        let positive = [
            ("eta_x", self.eta_x),
            ("eta_y", self.eta_y),
            ("v0_x", self.v0_x),
            ("v0_y", self.v0_y),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(OptimizerError::InvalidParams(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        for (name, value) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(value > 0.0 && value < 1.0) {
                return Err(OptimizerError::InvalidParams(format!(
                    "{name} must lie in (0, 1), got {value}"
                )));
            }
        }
        Ok(())
    }

    /// Additionally requires the time-scale separation regime `beta < alpha`.
    pub fn validate_separated(&self) -> Result<(), OptimizerError> {
        self.validate()?;
        if !(self.beta < self.alpha) {
            return Err(OptimizerError::InvalidParams(format!(
                "time-scale adaptive updates need beta < alpha, got alpha = {}, beta = {}",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum OptimizerError {
    #[error("invalid optimizer parameters: {0}")]
    InvalidParams(String),
    #[error("unknown optimizer id `{0}`")]
    UnknownOptimizer(String),
    #[error("optimizer `{optimizer}` does not accept parameter `{key}`")]
    UnknownParam { optimizer: String, key: String },
    #[error("optimizer `{optimizer}` requires parameter `{key}`")]
    MissingParam { optimizer: String, key: String },
}

#[derive(Debug, Error)]
pub enum StepError {
    /// The run cannot continue; the trajectory up to this step stays valid.
    #[error("non-finite {what} at step {step}")]
    NonFinite { step: u64, what: &'static str },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
}

/// A stateful optimizer advancing one iteration per call.
pub trait Optimizer {
    fn step(
        &mut self,
        oracle: &mut dyn GradientOracle,
        domain: &DomainSpec,
    ) -> Result<StepDiagnostics, StepError>;

    fn iterate(&self) -> &Iterate;
}

/// `eta / denom^exponent`, the effective stepsize of one variable.
#[inline]
pub(crate) fn effective_step(eta: f64, denom: f64, exponent: f64) -> f64 {
    eta / denom.powf(exponent)
}

/// `x - step * g`, elementwise.
#[inline]
pub(crate) fn descend(x: &[f64], step: f64, g: &[f64]) -> Vec<f64> {
    x.iter().zip(g).map(|(xi, gi)| xi - step * gi).collect()
}

/// `y + step * g`, elementwise.
#[inline]
pub(crate) fn ascend(y: &[f64], step: f64, g: &[f64]) -> Vec<f64> {
    y.iter().zip(g).map(|(yi, gi)| yi + step * gi).collect()
}

pub(crate) struct StepInfo<'a> {
    pub t: u64,
    /// The point the gradients were taken at (before the update).
    pub at: &'a Iterate,
    pub grads: &'a GradientPair,
    pub eff_step_x: f64,
    pub eff_step_y: f64,
    pub vx: f64,
    pub vy: f64,
}

/// Assembles the diagnostics row for a step, evaluating the exact gradient,
/// objective, and primal value at the pre-update point.
pub(crate) fn build_diagnostics(
    oracle: &dyn GradientOracle,
    info: StepInfo<'_>,
) -> Result<StepDiagnostics, StepError> {
    let problem = oracle.problem();
    let (det_grad_x_norm, det_grad_y_norm) = if oracle.is_exact() {
        (norm(&info.grads.gx), norm(&info.grads.gy))
    } else {
        let exact = problem.gradient(info.at)?;
        (norm(&exact.gx), norm(&exact.gy))
    };
    let ratio = info.eff_step_x / info.eff_step_y;
    Ok(StepDiagnostics {
        t: info.t,
        grad_x_norm: norm(&info.grads.gx),
        grad_y_norm: norm(&info.grads.gy),
        det_grad_x_norm,
        det_grad_y_norm,
        eff_step_x: info.eff_step_x,
        eff_step_y: info.eff_step_y,
        ratio,
        f_value: problem.evaluate(info.at)?,
        phi_value: problem.primal_value(&info.at.x),
        stage: classify_stage(ratio, problem.constants().kappa),
        oracle_calls: oracle.calls(),
        vx: info.vx,
        vy: info.vy,
    })
}

/// Trajectory data from driving an optimizer for up to `iterations` steps.
pub struct RunOutcome {
    pub steps: Vec<StepDiagnostics>,
    pub termination: Termination,
}

/// Drives an optimizer, recording every `record_every`-th step plus the
/// final one. A non-finite step ends the run and keeps the prior rows.
/// `stop_grad_sum` stops once the exact ||gx|| + ||gy|| falls to it.
pub fn run_optimizer(
    optimizer: &mut dyn Optimizer,
    oracle: &mut dyn GradientOracle,
    domain: &DomainSpec,
    iterations: u64,
    record_every: u64,
    stop_grad_sum: Option<f64>,
) -> Result<RunOutcome, StepError> {
    assert!(iterations >= 1 && record_every >= 1);
    let mut steps = Vec::new();
    let mut termination = Termination::Completed;
    for t in 0..iterations {
        match optimizer.step(oracle, domain) {
            Ok(diag) => {
                let stop = stop_grad_sum
                    .map_or(false, |tol| diag.det_grad_x_norm + diag.det_grad_y_norm <= tol);
                if t % record_every == 0 || t + 1 == iterations || stop {
                    steps.push(diag);
                }
                if stop {
                    termination = Termination::Stationarity { step: t };
                    break;
                }
            }
            Err(StepError::NonFinite { step, .. }) => {
                termination = Termination::NonFinite { step };
                break;
            }
            Err(other) => return Err(other),
        }
    }
    Ok(RunOutcome { steps, termination })
}

/// Optimizer ids accepted by [`build_optimizer`].
pub const OPTIMIZER_IDS: &[&str] = &[
    "tiada",
    "tiada-nomax",
    "tiada-adam",
    "tiada-amsgrad",
    "tiada-coord",
    "adagrad-gda",
    "adam-gda",
    "amsgrad-gda",
    "gda",
    "neada-adagrad",
];

/// Parameter keys per optimizer id; `None` marks a required key.
fn param_spec(id: &str) -> Result<&'static [(&'static str, Option<f64>)], OptimizerError> {
    const TIADA: &[(&str, Option<f64>)] = &[
        ("eta_x", None),
        ("eta_y", None),
        ("alpha", Some(0.6)),
        ("beta", Some(0.4)),
        ("v0_x", Some(1.0)),
        ("v0_y", Some(1.0)),
    ];
    const TIADA_MOMENT: &[(&str, Option<f64>)] = &[
        ("eta_x", None),
        ("eta_y", None),
        ("alpha", Some(0.6)),
        ("beta", Some(0.4)),
        ("v0_x", Some(1.0)),
        ("v0_y", Some(1.0)),
        ("beta1", Some(0.9)),
        ("gamma", Some(0.999)),
    ];
    const GDA_FAMILY: &[(&str, Option<f64>)] = &[
        ("eta_x", None),
        ("eta_y", None),
        ("alpha", Some(0.5)),
        ("beta", Some(0.5)),
        ("v0_x", Some(1.0)),
        ("v0_y", Some(1.0)),
    ];
    const GDA_MOMENT: &[(&str, Option<f64>)] = &[
        ("eta_x", None),
        ("eta_y", None),
        ("alpha", Some(0.5)),
        ("beta", Some(0.5)),
        ("v0_x", Some(1.0)),
        ("v0_y", Some(1.0)),
        ("beta1", Some(0.9)),
        ("gamma", Some(0.999)),
    ];
    const PLAIN_GDA: &[(&str, Option<f64>)] = &[("eta_x", None), ("eta_y", None)];
    const NEADA: &[(&str, Option<f64>)] = &[
        ("eta_x", None),
        ("eta_y", None),
        ("alpha", Some(0.5)),
        ("beta", Some(0.5)),
        ("v0_x", Some(1.0)),
        ("v0_y", Some(1.0)),
        ("inner_cap", Some(100.0)),
    ];
    match id {
        "tiada" | "tiada-nomax" | "tiada-coord" => Ok(TIADA),
        "tiada-adam" | "tiada-amsgrad" => Ok(TIADA_MOMENT),
        "adagrad-gda" => Ok(GDA_FAMILY),
        "adam-gda" | "amsgrad-gda" => Ok(GDA_MOMENT),
        "gda" => Ok(PLAIN_GDA),
        "neada-adagrad" => Ok(NEADA),
        other => Err(OptimizerError::UnknownOptimizer(other.to_string())),
    }
}

/// Fills defaults into a user parameter map, rejecting unknown keys and
/// missing required ones. The result is what config echoes record.
pub fn resolve_optimizer_params(
    id: &str,
    user: &BTreeMap<String, f64>,
) -> Result<BTreeMap<String, f64>, OptimizerError> {
    let spec = param_spec(id)?;
    let mut remaining = user.clone();
    let mut resolved = BTreeMap::new();
    for (key, default) in spec {
        let value = match remaining.remove(*key) {
            Some(v) => v,
            None => default.ok_or_else(|| OptimizerError::MissingParam {
                optimizer: id.to_string(),
                key: key.to_string(),
            })?,
        };
        resolved.insert(key.to_string(), value);
    }
    if let Some(key) = remaining.keys().next() {
        return Err(OptimizerError::UnknownParam {
            optimizer: id.to_string(),
            key: key.clone(),
        });
    }
    Ok(resolved)
}

/// Builds an optimizer from its id and a flat parameter map.
pub fn build_optimizer(
    id: &str,
    user: &BTreeMap<String, f64>,
    start: Iterate,
) -> Result<Box<dyn Optimizer>, OptimizerError> {
    let p = resolve_optimizer_params(id, user)?;
    let get = |key: &str| p[key];
    let base = |alpha_default: f64, beta_default: f64| TiAdaParams {
        eta_x: get("eta_x"),
        eta_y: get("eta_y"),
        alpha: p.get("alpha").copied().unwrap_or(alpha_default),
        beta: p.get("beta").copied().unwrap_or(beta_default),
        v0_x: p.get("v0_x").copied().unwrap_or(1.0),
        v0_y: p.get("v0_y").copied().unwrap_or(1.0),
    };
    let moment_scheme = |kind: &str| -> Result<MomentScheme, OptimizerError> {
        let scheme = match kind {
            "adam" => MomentScheme::adam(get("beta1"), get("gamma")),
            _ => MomentScheme::amsgrad(get("beta1"), get("gamma")),
        };
        scheme.validate()?;
        Ok(scheme)
    };
    match id {
        "tiada" => Ok(Box::new(TiAda::new(start, base(0.6, 0.4))?)),
        "tiada-nomax" => Ok(Box::new(TiAda::without_max(start, base(0.6, 0.4))?)),
        "tiada-coord" => Ok(Box::new(CoordTiAda::new(start, base(0.6, 0.4))?)),
        "tiada-adam" => Ok(Box::new(MomentGda::max_coupled(
            start,
            moment_scheme("adam")?,
            base(0.6, 0.4),
        )?)),
        "tiada-amsgrad" => Ok(Box::new(MomentGda::max_coupled(
            start,
            moment_scheme("amsgrad")?,
            base(0.6, 0.4),
        )?)),
        "adagrad-gda" => Ok(Box::new(MomentGda::uncoupled(
            start,
            MomentScheme::adagrad(),
            base(0.5, 0.5),
        )?)),
        "adam-gda" => Ok(Box::new(MomentGda::uncoupled(
            start,
            moment_scheme("adam")?,
            base(0.5, 0.5),
        )?)),
        "amsgrad-gda" => Ok(Box::new(MomentGda::uncoupled(
            start,
            moment_scheme("amsgrad")?,
            base(0.5, 0.5),
        )?)),
        "gda" => Ok(Box::new(MomentGda::uncoupled(
            start,
            MomentScheme::fixed(),
            base(0.5, 0.5),
        )?)),
        "neada-adagrad" => {
            let inner_cap = get("inner_cap");
            if !(inner_cap >= 1.0 && inner_cap.fract() == 0.0 && inner_cap.is_finite()) {
                return Err(OptimizerError::InvalidParams(format!(
                    "inner_cap must be a positive integer, got {inner_cap}"
                )));
            }
            Ok(Box::new(NeAda::new(
                start,
                NeAdaParams {
                    base: base(0.5, 0.5),
                    inner_cap: inner_cap as u64,
                },
            )?))
        }
        other => Err(OptimizerError::UnknownOptimizer(other.to_string())),
    }
}
