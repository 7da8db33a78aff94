//! Experiment harness: config files, runs, sweeps, and ablations.
//!
//! A config is one TOML file naming a problem, an optimizer, a run budget,
//! and output options. Runs are seed-reproducible: the noise stream is a
//! pure function of the config seed (and the sweep cell index), so parallel
//! and serial execution emit identical files.

mod checks;
mod output;
mod sweep;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::TrajectoryRecord;
use crate::optimizers::{
    build_optimizer, resolve_optimizer_params, run_optimizer, OptimizerError, StepError,
};
use crate::problems::{
    default_problem_params, make_stochastic, problem_from_spec, DeterministicOracle, DomainSpec,
    GradientOracle, Iterate, MinimaxProblem, ProblemError,
};

pub use checks::{run_all_checks, CheckResult};
pub use output::{
    fmt_f64, parse_trajectory_csv, run_summary_file, trajectory_csv, write_ablation_outputs,
    write_experiment_outputs, write_sweep_outputs, RunSummaryFile, SeedSummary,
    TRAJECTORY_HEADER,
};
pub use sweep::{
    aggregate_cell, run_ablation, run_sweep, AblationResult, AblationRow, AblationSpec,
    AxisValue, CellAggregate, SweepAxis, SweepCellResult, SweepResult, SweepSpec,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSection {
    pub id: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSection {
    pub id: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_record_every() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSection {
    /// Iteration budget (outer steps for the nested baseline).
    pub iterations: u64,
    /// Initial primal point; the problem's default start when omitted.
    #[serde(default)]
    pub init_x: Option<Vec<f64>>,
    /// Initial dual point; the problem's default start when omitted.
    #[serde(default)]
    pub init_y: Option<Vec<f64>>,
    /// Standard deviation of the per-component Gaussian gradient noise.
    #[serde(default)]
    pub noise_stddev: f64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Record every n-th step (the final step is always recorded).
    #[serde(default = "default_record_every")]
    pub record_every: u64,
    /// Stop early once the exact ||gx|| + ||gy|| falls to this value.
    #[serde(default)]
    pub stop_grad_sum: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSection {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_out_dir(),
            format: OutputFormat::Csv,
        }
    }
}

/// One experiment: problem, optimizer, run budget, domain, and outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub problem: ProblemSection,
    pub optimizer: OptimizerSection,
    pub run: RunSection,
    #[serde(default)]
    pub domain: DomainSpec,
    #[serde(default)]
    pub output: OutputSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// A small deterministic run on the quadratic problem.
    pub fn example() -> Self {
        let mut optimizer_params = BTreeMap::new();
        optimizer_params.insert("eta_x".to_string(), 1.0);
        optimizer_params.insert("eta_y".to_string(), 0.2);
        Self {
            name: "example".to_string(),
            problem: ProblemSection {
                id: "quadratic".to_string(),
                params: BTreeMap::new(),
            },
            optimizer: OptimizerSection {
                id: "tiada".to_string(),
                params: optimizer_params,
            },
            run: RunSection {
                iterations: 100,
                init_x: Some(vec![1.0]),
                init_y: Some(vec![0.01]),
                noise_stddev: 0.0,
                seeds: vec![0],
                record_every: 1,
                stop_grad_sum: None,
            },
            domain: DomainSpec::Unconstrained,
            output: OutputSection::default(),
        }
    }
}

/// A validated config with every default filled in, plus the problem.
pub struct ResolvedExperiment {
    pub config: ExperimentConfig,
    pub problem: Arc<dyn MinimaxProblem>,
}

/// Validates a config and resolves problem parameters, optimizer
/// parameters, and the initial point into an explicit echo.
pub fn resolve(config: &ExperimentConfig) -> Result<ResolvedExperiment, HarnessError> {
    let problem = problem_from_spec(&config.problem.id, &config.problem.params)?;

    let mut resolved = config.clone();
    let mut problem_params = default_problem_params(&config.problem.id);
    problem_params.extend(config.problem.params.clone());
    resolved.problem.params = problem_params;
    resolved.optimizer.params =
        resolve_optimizer_params(&config.optimizer.id, &config.optimizer.params)?;

    let run = &mut resolved.run;
    if run.iterations < 1 {
        return Err(HarnessError::Config(
            "run.iterations must be at least 1".to_string(),
        ));
    }
    if run.record_every < 1 {
        return Err(HarnessError::Config(
            "run.record_every must be at least 1".to_string(),
        ));
    }
    if run.seeds.is_empty() {
        return Err(HarnessError::Config(
            "run.seeds must not be empty".to_string(),
        ));
    }
    if !(run.noise_stddev >= 0.0 && run.noise_stddev.is_finite()) {
        return Err(HarnessError::Config(format!(
            "run.noise_stddev must be nonnegative, got {}",
            run.noise_stddev
        )));
    }
    if let Some(tol) = run.stop_grad_sum {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(HarnessError::Config(format!(
                "run.stop_grad_sum must be positive, got {tol}"
            )));
        }
    }

    let default_start = problem.default_start();
    let init_x = run.init_x.clone().unwrap_or(default_start.x);
    let init_y = run.init_y.clone().unwrap_or(default_start.y);
    if init_x.len() != problem.primal_dim() || init_y.len() != problem.dual_dim() {
        return Err(HarnessError::Config(format!(
            "initial point has dimensions ({}, {}), problem `{}` needs ({}, {})",
            init_x.len(),
            init_y.len(),
            problem.id(),
            problem.primal_dim(),
            problem.dual_dim()
        )));
    }
    if init_x.iter().chain(init_y.iter()).any(|v| !v.is_finite()) {
        return Err(HarnessError::Config(
            "initial point must be finite".to_string(),
        ));
    }
    resolved
        .domain
        .validate(problem.dual_dim())
        .map_err(HarnessError::Config)?;
    // The dual iterate lives inside the domain from the very start.
    let init_y = resolved.domain.project(&init_y);
    run.init_x = Some(init_x.clone());
    run.init_y = Some(init_y.clone());

    // Surface bad optimizer parameters at load time.
    build_optimizer(
        &resolved.optimizer.id,
        &resolved.optimizer.params,
        Iterate::new(init_x, init_y),
    )?;

    Ok(ResolvedExperiment {
        config: resolved,
        problem,
    })
}

/// splitmix64: the seed mixer used to decorrelate sweep cells.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Noise-stream seed for a config seed inside a sweep cell.
///
/// Cell 0 — and every plain (non-sweep) run — uses the config seed as is,
/// so a single-cell sweep reproduces `run_experiment` exactly. Later cells
/// mix the pair through splitmix64.
pub fn oracle_seed(seed: u64, cell_index: u64) -> u64 {
    if cell_index == 0 {
        seed
    } else {
        splitmix64(seed ^ splitmix64(cell_index))
    }
}

fn run_single(
    resolved: &ResolvedExperiment,
    seed: u64,
    cell_index: u64,
) -> Result<TrajectoryRecord, HarnessError> {
    let config = &resolved.config;
    let run = &config.run;
    let start = Iterate::new(
        run.init_x.clone().expect("resolved config has init_x"),
        run.init_y.clone().expect("resolved config has init_y"),
    );
    let mut optimizer = build_optimizer(&config.optimizer.id, &config.optimizer.params, start)?;
    let mut oracle: Box<dyn GradientOracle> = if run.noise_stddev == 0.0 {
        Box::new(DeterministicOracle::new(resolved.problem.clone()))
    } else {
        Box::new(make_stochastic(
            resolved.problem.clone(),
            run.noise_stddev,
            oracle_seed(seed, cell_index),
        ))
    };
    let outcome = run_optimizer(
        optimizer.as_mut(),
        oracle.as_mut(),
        &config.domain,
        run.iterations,
        run.record_every,
        run.stop_grad_sum,
    )?;
    Ok(TrajectoryRecord::new(
        config.clone(),
        seed,
        resolved.problem.constants().kappa,
        outcome.steps,
        outcome.termination,
    ))
}

/// Runs one experiment, producing one trajectory record per seed.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<TrajectoryRecord>, HarnessError> {
    run_experiment_cell(config, 0)
}

pub(crate) fn run_experiment_cell(
    config: &ExperimentConfig,
    cell_index: u64,
) -> Result<Vec<TrajectoryRecord>, HarnessError> {
    let resolved = resolve(config)?;
    let seeds = resolved.config.run.seeds.clone();
    seeds
        .par_iter()
        .map(|seed| run_single(&resolved, *seed, cell_index))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::Termination;

    #[test]
    fn example_config_round_trips_through_toml_and_json() {
        let config = ExperimentConfig::example();
        let toml_text = toml::to_string(&config).unwrap();
        let back = ExperimentConfig::from_toml_str(&toml_text).unwrap();
        assert_eq!(config, back);

        let json_text = serde_json::to_string(&config).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json_text).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn resolution_fills_defaults_into_the_echo() {
        let mut config = ExperimentConfig::example();
        config.run.init_x = None;
        config.run.init_y = None;
        let resolved = resolve(&config).unwrap().config;
        assert_eq!(resolved.problem.params["L"], 2.0);
        assert_eq!(resolved.optimizer.params["alpha"], 0.6);
        assert_eq!(resolved.optimizer.params["beta"], 0.4);
        assert_eq!(resolved.run.init_x, Some(vec![1.0]));
        assert_eq!(resolved.run.init_y, Some(vec![0.01]));

        // Resolution is idempotent: echoing an echo changes nothing.
        let again = resolve(&resolved).unwrap().config;
        assert_eq!(resolved, again);
    }

    #[test]
    fn resolution_rejects_bad_configs() {
        let mut config = ExperimentConfig::example();
        config.run.iterations = 0;
        assert!(matches!(resolve(&config), Err(HarnessError::Config(_))));

        let mut config = ExperimentConfig::example();
        config.run.seeds = vec![];
        assert!(matches!(resolve(&config), Err(HarnessError::Config(_))));

        let mut config = ExperimentConfig::example();
        config.run.init_x = Some(vec![1.0, 2.0]);
        assert!(matches!(resolve(&config), Err(HarnessError::Config(_))));

        let mut config = ExperimentConfig::example();
        config.optimizer.id = "sgd".to_string();
        assert!(matches!(resolve(&config), Err(HarnessError::Optimizer(_))));

        let mut config = ExperimentConfig::example();
        config.problem.id = "rastrigin".to_string();
        assert!(matches!(resolve(&config), Err(HarnessError::Problem(_))));
    }

    #[test]
    fn minimal_run_produces_one_row() {
        let mut config = ExperimentConfig::example();
        config.run.iterations = 1;
        let records = run_experiment(&config).unwrap();
        assert_eq!(records.len(), 1);
        let record = &records[0];
        assert_eq!(record.steps.len(), 1);
        assert_eq!(record.termination, Termination::Completed);
        let summary = record.summary.as_ref().unwrap();
        assert_eq!(summary.steps_recorded, 1);
        assert_eq!(
            summary.final_det_grad_x_norm,
            record.steps[0].det_grad_x_norm
        );
    }

    #[test]
    fn identical_configs_give_identical_trajectories() {
        let mut config = ExperimentConfig::example();
        config.run.noise_stddev = 0.1;
        config.run.seeds = vec![7, 8];
        config.run.iterations = 50;
        let first = run_experiment(&config).unwrap();
        let second = run_experiment(&config).unwrap();
        for (a, b) in first.iter().zip(&second) {
            assert_eq!(a.steps, b.steps);
            assert_eq!(a.termination, b.termination);
        }
        // Different seeds disagree.
        assert_ne!(first[0].steps, first[1].steps);
    }

    #[test]
    fn stop_tolerance_reports_stationarity() {
        let mut config = ExperimentConfig::example();
        config.run.iterations = 100_000;
        config.run.record_every = 1000;
        config.run.stop_grad_sum = Some(1e-3);
        // A benign ratio converges quickly on the quadratic.
        config
            .optimizer
            .params
            .insert("eta_x".to_string(), 0.05);
        let records = run_experiment(&config).unwrap();
        let record = &records[0];
        assert!(matches!(
            record.termination,
            Termination::Stationarity { .. }
        ));
        let last = record.steps.last().unwrap();
        assert!(last.det_grad_x_norm + last.det_grad_y_norm <= 1e-3);
    }

    #[test]
    fn oracle_seed_is_stable_for_cell_zero() {
        assert_eq!(oracle_seed(42, 0), 42);
        assert_ne!(oracle_seed(42, 1), 42);
        assert_ne!(oracle_seed(42, 1), oracle_seed(42, 2));
        assert_ne!(oracle_seed(41, 1), oracle_seed(42, 1));
    }
}
