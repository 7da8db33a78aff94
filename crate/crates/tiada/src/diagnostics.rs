//! Per-step instrumentation and trajectory-level analysis.
//!
//! Step records carry the gradient norms, effective stepsizes, their ratio,
//! and the stage label (II once the ratio drops below `1/kappa`). Trajectory
//! records bundle the step sequence with a config snapshot, a termination
//! reason, and a summary that is recomputable from the raw rows.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::ExperimentConfig;
use crate::problems::{GradientPair, Iterate, MinimaxProblem, ProblemError};

/// Trajectory phase relative to the time-scale separation threshold:
/// Stage I while the effective stepsize ratio is at least `1/kappa`,
/// Stage II once it has dropped below.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    #[serde(rename = "I")]
    One,
    #[serde(rename = "II")]
    Two,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Stage::One => write!(f, "I"),
            Stage::Two => write!(f, "II"),
        }
    }
}

/// Stage label as a pure function of the observed ratio and `kappa`.
pub fn classify_stage(ratio: f64, kappa: f64) -> Stage {
    if ratio < 1.0 / kappa {
        Stage::Two
    } else {
        Stage::One
    }
}

/// One optimizer step's worth of diagnostics.
///
/// `grad_*_norm` are the norms of the (possibly noisy) gradients the update
/// consumed; `det_grad_*_norm` are exact-gradient norms at the same point,
/// equal to the former on deterministic runs. `vx`/`vy` are the second
/// moments after accumulating this step's gradients, i.e. the values inside
/// the effective-stepsize denominators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub t: u64,
    pub grad_x_norm: f64,
    pub grad_y_norm: f64,
    pub det_grad_x_norm: f64,
    pub det_grad_y_norm: f64,
    pub eff_step_x: f64,
    pub eff_step_y: f64,
    pub ratio: f64,
    pub f_value: f64,
    pub phi_value: Option<f64>,
    pub stage: Stage,
    pub oracle_calls: u64,
    pub vx: f64,
    pub vy: f64,
}

/// Why a run stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum Termination {
    /// Ran the full iteration budget.
    Completed,
    /// A gradient, iterate, or second moment stopped being finite.
    NonFinite { step: u64 },
    /// The exact-gradient norm dropped below the configured tolerance.
    Stationarity { step: u64 },
}

/// Aggregates recomputable from the recorded step sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub steps_recorded: u64,
    /// First recorded step with ratio below `1/kappa`, if any.
    pub stage2_first_step: Option<u64>,
    /// Whether the ratio stayed below `1/kappa` for all later recorded steps.
    pub stage2_persistent: Option<bool>,
    pub final_det_grad_x_norm: f64,
    pub final_det_grad_y_norm: f64,
    pub min_det_grad_x_norm: f64,
    pub min_det_grad_y_norm: f64,
    /// Mean of squared exact-gradient norms over the recorded steps.
    pub avg_sq_det_grad_x: f64,
    pub avg_sq_det_grad_y: f64,
    pub final_f_value: f64,
    pub final_oracle_calls: u64,
}

/// Computes the summary from raw step records.
pub fn compute_summary(steps: &[StepDiagnostics], kappa: f64) -> Option<TrajectorySummary> {
    let last = steps.last()?;
    let n = steps.len() as f64;
    let transition = detect_stage_transition(steps, kappa);
    Some(TrajectorySummary {
        steps_recorded: steps.len() as u64,
        stage2_first_step: transition.as_ref().map(|tr| tr.first_step),
        stage2_persistent: transition.as_ref().map(|tr| tr.persistent),
        final_det_grad_x_norm: last.det_grad_x_norm,
        final_det_grad_y_norm: last.det_grad_y_norm,
        min_det_grad_x_norm: steps.iter().map(|s| s.det_grad_x_norm).fold(f64::INFINITY, f64::min),
        min_det_grad_y_norm: steps.iter().map(|s| s.det_grad_y_norm).fold(f64::INFINITY, f64::min),
        avg_sq_det_grad_x: steps.iter().map(|s| s.det_grad_x_norm.powi(2)).sum::<f64>() / n,
        avg_sq_det_grad_y: steps.iter().map(|s| s.det_grad_y_norm.powi(2)).sum::<f64>() / n,
        final_f_value: last.f_value,
        final_oracle_calls: last.oracle_calls,
    })
}

/// A full run: config snapshot, step records, termination, and summary.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub config: ExperimentConfig,
    pub seed: u64,
    /// Condition number used for stage labels, derived from the problem.
    pub kappa: f64,
    pub steps: Vec<StepDiagnostics>,
    pub termination: Termination,
    pub summary: Option<TrajectorySummary>,
}

impl TrajectoryRecord {
    pub fn new(
        config: ExperimentConfig,
        seed: u64,
        kappa: f64,
        steps: Vec<StepDiagnostics>,
        termination: Termination,
    ) -> Self {
        let summary = compute_summary(&steps, kappa);
        Self {
            config,
            seed,
            kappa,
            steps,
            termination,
            summary,
        }
    }
}

/// Result of scanning a trajectory for the stage transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageTransition {
    /// Step index (the recorded `t`) of the first ratio below `1/kappa`.
    pub first_step: u64,
    /// True when every later recorded ratio also stays below `1/kappa`.
    pub persistent: bool,
}

/// Finds the first recorded step whose effective-stepsize ratio is below
/// `1/kappa`, and whether the ratio stays below from there on.
pub fn detect_stage_transition(
    steps: &[StepDiagnostics],
    kappa: f64,
) -> Option<StageTransition> {
    let threshold = 1.0 / kappa;
    let idx = steps.iter().position(|s| s.ratio < threshold)?;
    let persistent = steps[idx..].iter().all(|s| s.ratio < threshold);
    Some(StageTransition {
        first_step: steps[idx].t,
        persistent,
    })
}

#[derive(Debug, Error, PartialEq)]
pub enum DiagnosticsError {
    #[error("trajectory too short: need at least {need} contiguous steps, have {len}")]
    InsufficientTrajectory { need: u64, len: u64 },
    #[error("rate check requires an unthinned trajectory recorded from step 0")]
    NonContiguous,
    #[error("rate check requires a deterministic run (noise_stddev = 0)")]
    StochasticTrajectory,
}

/// Running average of squared exact-gradient norms over the first `t` steps:
/// `(1/t) sum ||gx||^2 + (1/t) sum ||gy||^2`.
fn average_sq_grad(steps: &[StepDiagnostics], t: u64) -> f64 {
    let head = &steps[..t as usize];
    let sum_x: f64 = head.iter().map(|s| s.det_grad_x_norm.powi(2)).sum();
    let sum_y: f64 = head.iter().map(|s| s.det_grad_y_norm.powi(2)).sum();
    (sum_x + sum_y) / t as f64
}

/// Ratio `A(t2) / A(t1)` of running averages of squared gradient norms.
///
/// For a process whose averaged squared gradient norm decays like `1/T`
/// with a converged tail, doubling the horizon halves the average.
pub fn rate_check(
    record: &TrajectoryRecord,
    t1: u64,
    t2: u64,
) -> Result<f64, DiagnosticsError> {
    if record.config.run.noise_stddev > 0.0 {
        return Err(DiagnosticsError::StochasticTrajectory);
    }
    let len = record.steps.len() as u64;
    if !(t1 >= 1 && t1 < t2 && t2 <= len) {
        return Err(DiagnosticsError::InsufficientTrajectory { need: t2, len });
    }
    let contiguous = record
        .steps
        .iter()
        .enumerate()
        .all(|(i, s)| s.t == i as u64);
    if !contiguous {
        return Err(DiagnosticsError::NonContiguous);
    }
    Ok(average_sq_grad(&record.steps, t2) / average_sq_grad(&record.steps, t1))
}

/// Central-difference gradient of the objective, for verification only.
pub fn finite_difference_gradient(
    problem: &dyn MinimaxProblem,
    p: &Iterate,
    h: f64,
) -> Result<GradientPair, ProblemError> {
    assert!(h > 0.0, "finite-difference step must be positive");
    problem.check_dims(p)?;
    let mut work = p.clone();
    let mut gx = Vec::with_capacity(p.x.len());
    for i in 0..p.x.len() {
        work.x[i] = p.x[i] + h;
        let plus = problem.evaluate(&work)?;
        work.x[i] = p.x[i] - h;
        let minus = problem.evaluate(&work)?;
        work.x[i] = p.x[i];
        gx.push((plus - minus) / (2.0 * h));
    }
    let mut gy = Vec::with_capacity(p.y.len());
    for i in 0..p.y.len() {
        work.y[i] = p.y[i] + h;
        let plus = problem.evaluate(&work)?;
        work.y[i] = p.y[i] - h;
        let minus = problem.evaluate(&work)?;
        work.y[i] = p.y[i];
        gy.push((plus - minus) / (2.0 * h));
    }
    Ok(GradientPair { gx, gy })
}

/// Decreasing upper bound on the effective stepsize ratio of max-coupled
/// updates: `eta_x / (eta_y * vy^(alpha - beta))`.
///
/// Evaluated with a single power so that the sequence is nonincreasing in
/// `vy` in floating point.
pub fn ratio_upper_bound(eta_x: f64, eta_y: f64, alpha: f64, beta: f64, vy: f64) -> f64 {
    eta_x / (eta_y * vy.powf(alpha - beta))
}

/// The same bound factored as `(eta_x / vy^alpha) / (eta_y / vy^beta)`.
///
/// This matches the step's own arithmetic term for term, so the observed
/// ratio never exceeds it in floating point as long as the max-coupled
/// denominator is at least `vy`.
pub fn ratio_upper_bound_factored(
    eta_x: f64,
    eta_y: f64,
    alpha: f64,
    beta: f64,
    vy: f64,
) -> f64 {
    (eta_x / vy.powf(alpha)) / (eta_y / vy.powf(beta))
}

#[cfg(test)]
pub(crate) fn synthetic_step(t: u64, ratio: f64, kappa: f64) -> StepDiagnostics {
    StepDiagnostics {
        t,
        grad_x_norm: 1.0,
        grad_y_norm: 1.0,
        det_grad_x_norm: 1.0,
        det_grad_y_norm: 1.0,
        eff_step_x: ratio,
        eff_step_y: 1.0,
        ratio,
        f_value: 0.0,
        phi_value: None,
        stage: classify_stage(ratio, kappa),
        oracle_calls: 2 * (t + 1),
        vx: 1.0,
        vy: 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::ExperimentConfig;
    use crate::problems::{mccormick_problem, quadratic_problem, norm};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn record_with(ratios: &[f64], kappa: f64) -> Vec<StepDiagnostics> {
        ratios
            .iter()
            .enumerate()
            .map(|(t, r)| synthetic_step(t as u64, *r, kappa))
            .collect()
    }

    #[test]
    fn stage_transition_finds_the_first_crossing() {
        let steps = record_with(&[2.0, 0.4, 0.3], 2.0);
        let tr = detect_stage_transition(&steps, 2.0).unwrap();
        assert_eq!(tr.first_step, 1);
        assert!(tr.persistent);

        let steps = record_with(&[2.0, 0.4, 0.6, 0.3], 2.0);
        let tr = detect_stage_transition(&steps, 2.0).unwrap();
        assert_eq!(tr.first_step, 1);
        assert!(!tr.persistent);

        let steps = record_with(&[0.6, 0.7, 0.5], 2.0);
        assert_eq!(detect_stage_transition(&steps, 2.0), None);
    }

    #[test]
    fn stage_labels_are_a_pure_function_of_ratio_and_kappa() {
        let kappa = 3.0;
        let steps = record_with(&[1.0, 0.5, 0.3333333, 0.3, 0.34], kappa);
        for s in &steps {
            let expected = if s.ratio < 1.0 / kappa {
                Stage::Two
            } else {
                Stage::One
            };
            assert_eq!(s.stage, expected);
            assert_eq!(classify_stage(s.ratio, kappa), expected);
        }
    }

    fn dummy_record(det_norms: Vec<(f64, f64)>) -> TrajectoryRecord {
        let steps: Vec<StepDiagnostics> = det_norms
            .iter()
            .enumerate()
            .map(|(t, (gx, gy))| {
                let mut s = synthetic_step(t as u64, 1.0, 2.0);
                s.grad_x_norm = *gx;
                s.grad_y_norm = *gy;
                s.det_grad_x_norm = *gx;
                s.det_grad_y_norm = *gy;
                s
            })
            .collect();
        TrajectoryRecord::new(
            ExperimentConfig::example(),
            0,
            2.0,
            steps,
            Termination::Completed,
        )
    }

    #[test]
    fn rate_check_is_one_for_constant_gradients() {
        let record = dummy_record(vec![(2.0, 1.0); 100]);
        let r = rate_check(&record, 50, 100).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rate_check_halves_for_a_frozen_numerator() {
        // Gradients vanish after step 10; with t2 = 2 t1 the averages halve.
        let mut norms = vec![(3.0, 1.5); 10];
        norms.extend(vec![(0.0, 0.0); 390]);
        let record = dummy_record(norms);
        let r = rate_check(&record, 200, 400).unwrap();
        assert_eq!(r, 0.5);
    }

    #[test]
    fn rate_check_validates_inputs() {
        let record = dummy_record(vec![(1.0, 1.0); 10]);
        assert!(matches!(
            rate_check(&record, 5, 20),
            Err(DiagnosticsError::InsufficientTrajectory { .. })
        ));
        assert!(matches!(
            rate_check(&record, 7, 5),
            Err(DiagnosticsError::InsufficientTrajectory { .. })
        ));

        let mut stochastic = record.clone();
        stochastic.config.run.noise_stddev = 0.1;
        assert!(matches!(
            rate_check(&stochastic, 5, 10),
            Err(DiagnosticsError::StochasticTrajectory)
        ));

        let mut thinned = record;
        thinned.steps[3].t = 30;
        assert!(matches!(
            rate_check(&thinned, 5, 10),
            Err(DiagnosticsError::NonContiguous)
        ));
    }

    #[test]
    fn summary_recomputes_from_rows() {
        let record = dummy_record(vec![(2.0, 1.0), (4.0, 2.0), (1.0, 0.5)]);
        let summary = record.summary.clone().unwrap();
        assert_eq!(summary.steps_recorded, 3);
        assert_eq!(summary.final_det_grad_x_norm, 1.0);
        assert_eq!(summary.min_det_grad_y_norm, 0.5);
        assert!((summary.avg_sq_det_grad_x - (4.0 + 16.0 + 1.0) / 3.0).abs() < 1e-15);
        assert_eq!(compute_summary(&record.steps, record.kappa).unwrap(), summary);
    }

    #[test]
    fn finite_differences_match_the_hand_computed_gradient() {
        let p = quadratic_problem(2.0).unwrap();
        let at = Iterate::new(vec![1.0], vec![0.01]);
        let fd = finite_difference_gradient(&p, &at, 1e-6).unwrap();
        assert!((fd.gx[0] - (-3.98)).abs() < 1e-6);
        assert!((fd.gy[0] - 1.99).abs() < 1e-6);

        // Directional stationarity of the inner problem at y = L x.
        let on_line = Iterate::new(vec![1.0], vec![2.0]);
        let fd = finite_difference_gradient(&p, &on_line, 1e-6).unwrap();
        assert!(fd.gy[0].abs() < 1e-8);
    }

    #[test]
    fn finite_differences_match_analytic_gradients_at_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let quadratic = quadratic_problem(2.0).unwrap();
        let mccormick = mccormick_problem();
        let problems: [&dyn MinimaxProblem; 2] = [&quadratic, &mccormick];
        for problem in problems {
            for _ in 0..100 {
                let p = Iterate::new(
                    (0..problem.primal_dim()).map(|_| rng.gen_range(-5.0..5.0)).collect(),
                    (0..problem.dual_dim()).map(|_| rng.gen_range(-5.0..5.0)).collect(),
                );
                let exact = problem.gradient(&p).unwrap();
                let fd = finite_difference_gradient(problem, &p, 1e-6).unwrap();
                let diff: Vec<f64> = exact
                    .gx
                    .iter()
                    .chain(&exact.gy)
                    .zip(fd.gx.iter().chain(&fd.gy))
                    .map(|(a, b)| a - b)
                    .collect();
                let full: Vec<f64> = exact.gx.iter().chain(&exact.gy).copied().collect();
                assert!(norm(&diff) / norm(&full).max(1e-9) < 1e-6);
            }
        }
    }

    #[test]
    fn ratio_bound_forms_agree_and_decrease() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let (eta_x, eta_y) = (rng.gen_range(0.01..5.0), rng.gen_range(0.01..5.0));
            let alpha = rng.gen_range(0.51..0.9);
            let beta = 1.0 - alpha;
            let vy_small = rng.gen_range(1.0..100.0);
            let vy_large = vy_small + rng.gen_range(0.0..50.0);
            let canonical = ratio_upper_bound(eta_x, eta_y, alpha, beta, vy_small);
            let factored = ratio_upper_bound_factored(eta_x, eta_y, alpha, beta, vy_small);
            assert!((canonical - factored).abs() <= 1e-12 * canonical.abs());
            assert!(
                ratio_upper_bound(eta_x, eta_y, alpha, beta, vy_large) <= canonical
            );
        }
    }
}
