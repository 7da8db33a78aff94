use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_experiment_cell, ExperimentConfig, HarnessError};
use crate::diagnostics::TrajectoryRecord;

/// A value on a sweep axis: a number for parameter entries, text for ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisValue {
    Number(f64),
    Text(String),
}

impl std::fmt::Display for AxisValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AxisValue::Number(v) => write!(f, "{v}"),
            AxisValue::Text(s) => write!(f, "{s}"),
        }
    }
}

/// One swept parameter: a dotted config path and the values to try.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub param: String,
    pub values: Vec<AxisValue>,
}

/// A grid over a base config. Cells enumerate the Cartesian product of the
/// axes, with the last axis varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub name: String,
    /// Also write the per-cell trajectory files, not just the table.
    #[serde(default)]
    pub emit_raw: bool,
    pub base: ExperimentConfig,
    pub axes: Vec<SweepAxis>,
}

impl SweepSpec {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn cell_count(&self) -> u64 {
        self.axes.iter().map(|a| a.values.len() as u64).product()
    }
}

/// Applies one axis assignment to a config. Supported paths: `problem.id`,
/// `problem.params.*`, `optimizer.id`, `optimizer.params.*`,
/// `run.iterations`, and `run.noise_stddev`.
pub(crate) fn apply_axis_value(
    config: &mut ExperimentConfig,
    path: &str,
    value: &AxisValue,
) -> Result<(), HarnessError> {
    let expect_number = || -> Result<f64, HarnessError> {
        match value {
            AxisValue::Number(v) => Ok(*v),
            AxisValue::Text(s) => Err(HarnessError::Config(format!(
                "axis `{path}` needs a numeric value, got `{s}`"
            ))),
        }
    };
    let expect_text = || -> Result<String, HarnessError> {
        match value {
            AxisValue::Text(s) => Ok(s.clone()),
            AxisValue::Number(v) => Err(HarnessError::Config(format!(
                "axis `{path}` needs a string value, got `{v}`"
            ))),
        }
    };
    if path == "problem.id" {
        config.problem.id = expect_text()?;
    } else if let Some(key) = path.strip_prefix("problem.params.") {
        config.problem.params.insert(key.to_string(), expect_number()?);
    } else if path == "optimizer.id" {
        config.optimizer.id = expect_text()?;
    } else if let Some(key) = path.strip_prefix("optimizer.params.") {
        config
            .optimizer
            .params
            .insert(key.to_string(), expect_number()?);
    } else if path == "run.iterations" {
        let v = expect_number()?;
        if !(v >= 1.0 && v.fract() == 0.0 && v.is_finite()) {
            return Err(HarnessError::Config(format!(
                "axis `run.iterations` needs a positive integer, got {v}"
            )));
        }
        config.run.iterations = v as u64;
    } else if path == "run.noise_stddev" {
        config.run.noise_stddev = expect_number()?;
    } else {
        return Err(HarnessError::Config(format!(
            "unsupported sweep axis `{path}`"
        )));
    }
    Ok(())
}

/// Per-cell aggregate over seeds: medians of final exact-gradient norms,
/// the median stage-transition step, and termination counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellAggregate {
    pub seed_count: u64,
    pub median_final_det_grad_x: f64,
    pub median_final_det_grad_y: f64,
    pub median_final_det_grad_sum: f64,
    /// Median first stage-II step among seeds that reached stage II.
    pub median_stage2_first_step: Option<f64>,
    pub stage2_count: u64,
    pub completed: u64,
    pub nonfinite: u64,
}

fn median(values: &mut Vec<f64>) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite medians"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Recomputes a cell's aggregate from its trajectory records.
pub fn aggregate_cell(records: &[TrajectoryRecord]) -> CellAggregate {
    use crate::diagnostics::Termination;
    let mut finals_x = Vec::new();
    let mut finals_y = Vec::new();
    let mut finals_sum = Vec::new();
    let mut transitions = Vec::new();
    let (mut stage2_count, mut completed, mut nonfinite) = (0, 0, 0);
    for record in records {
        match record.termination {
            Termination::Completed | Termination::Stationarity { .. } => completed += 1,
            Termination::NonFinite { .. } => nonfinite += 1,
        }
        if let Some(summary) = &record.summary {
            finals_x.push(summary.final_det_grad_x_norm);
            finals_y.push(summary.final_det_grad_y_norm);
            finals_sum.push(summary.final_det_grad_x_norm + summary.final_det_grad_y_norm);
            if let Some(step) = summary.stage2_first_step {
                stage2_count += 1;
                transitions.push(step as f64);
            }
        }
    }
    CellAggregate {
        seed_count: records.len() as u64,
        median_final_det_grad_x: median(&mut finals_x),
        median_final_det_grad_y: median(&mut finals_y),
        median_final_det_grad_sum: median(&mut finals_sum),
        median_stage2_first_step: if transitions.is_empty() {
            None
        } else {
            Some(median(&mut transitions))
        },
        stage2_count,
        completed,
        nonfinite,
    }
}

/// One evaluated sweep cell.
pub struct SweepCellResult {
    pub cell_index: u64,
    /// The full parameter assignment, one entry per axis.
    pub assignment: Vec<(String, AxisValue)>,
    pub config: ExperimentConfig,
    pub records: Vec<TrajectoryRecord>,
    pub aggregate: CellAggregate,
}

pub struct SweepResult {
    pub spec: SweepSpec,
    pub cells: Vec<SweepCellResult>,
}

fn cell_assignment(spec: &SweepSpec, mut index: u64) -> Vec<(String, AxisValue)> {
    // Last axis varies fastest.
    let mut assignment = vec![None; spec.axes.len()];
    for (slot, axis) in spec.axes.iter().enumerate().rev() {
        let len = axis.values.len() as u64;
        let pick = (index % len) as usize;
        index /= len;
        assignment[slot] = Some((axis.param.clone(), axis.values[pick].clone()));
    }
    assignment.into_iter().map(|a| a.expect("filled")).collect()
}

/// Runs every cell of the grid. Cells and seeds execute in parallel; the
/// output is identical to a serial run because each trajectory's noise
/// stream depends only on (seed, cell index).
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult, HarnessError> {
    if spec.axes.is_empty() {
        return Err(HarnessError::Config(
            "sweep needs at least one axis".to_string(),
        ));
    }
    for axis in &spec.axes {
        if axis.values.is_empty() {
            return Err(HarnessError::Config(format!(
                "sweep axis `{}` has no values",
                axis.param
            )));
        }
    }
    let total = spec.cell_count();
    let cells: Result<Vec<SweepCellResult>, HarnessError> = (0..total)
        .into_par_iter()
        .map(|cell_index| {
            let assignment = cell_assignment(spec, cell_index);
            let mut config = spec.base.clone();
            for (path, value) in &assignment {
                apply_axis_value(&mut config, path, value)?;
            }
            let records = run_experiment_cell(&config, cell_index)?;
            let aggregate = aggregate_cell(&records);
            Ok(SweepCellResult {
                cell_index,
                assignment,
                config,
                records,
                aggregate,
            })
        })
        .collect();
    Ok(SweepResult {
        spec: spec.clone(),
        cells: cells?,
    })
}

/// An exponent-pair ablation: each alpha runs with beta = 1 - alpha.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSpec {
    pub name: String,
    pub alphas: Vec<f64>,
    pub base: ExperimentConfig,
}

impl AblationSpec {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}

/// Table row for one ablation run (the first seed of its config).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub alpha: f64,
    pub beta: f64,
    pub stage2_first_step: Option<u64>,
    pub stage2_persistent: Option<bool>,
    pub final_det_grad_x: f64,
    pub final_det_grad_y: f64,
    pub final_det_grad_sum: f64,
    pub steps_recorded: u64,
}

pub struct AblationResult {
    pub spec: AblationSpec,
    /// Condition number of the swept problem; `1/kappa` is the stage
    /// threshold to draw against the ratio curves.
    pub kappa: f64,
    pub rows: Vec<AblationRow>,
    pub records: Vec<TrajectoryRecord>,
}

/// Runs the ablation grid. Every alpha must lie in (0.5, 1) so that
/// beta = 1 - alpha keeps the separation regime.
pub fn run_ablation(spec: &AblationSpec) -> Result<AblationResult, HarnessError> {
    if spec.alphas.is_empty() {
        return Err(HarnessError::Config(
            "ablation needs at least one alpha".to_string(),
        ));
    }
    for alpha in &spec.alphas {
        if !(*alpha > 0.5 && *alpha < 1.0) {
            return Err(HarnessError::Config(format!(
                "ablation alpha must lie in (0.5, 1), got {alpha}"
            )));
        }
    }
    let runs: Result<Vec<(AblationRow, Vec<TrajectoryRecord>, f64)>, HarnessError> = spec
        .alphas
        .par_iter()
        .enumerate()
        .map(|(index, alpha)| {
            let mut config = spec.base.clone();
            config
                .optimizer
                .params
                .insert("alpha".to_string(), *alpha);
            config
                .optimizer
                .params
                .insert("beta".to_string(), 1.0 - alpha);
            let records = run_experiment_cell(&config, index as u64)?;
            let kappa = records[0].kappa;
            let summary = records[0].summary.as_ref();
            let row = AblationRow {
                alpha: *alpha,
                beta: 1.0 - alpha,
                stage2_first_step: summary.and_then(|s| s.stage2_first_step),
                stage2_persistent: summary.and_then(|s| s.stage2_persistent),
                final_det_grad_x: summary.map_or(f64::NAN, |s| s.final_det_grad_x_norm),
                final_det_grad_y: summary.map_or(f64::NAN, |s| s.final_det_grad_y_norm),
                final_det_grad_sum: summary
                    .map_or(f64::NAN, |s| s.final_det_grad_x_norm + s.final_det_grad_y_norm),
                steps_recorded: summary.map_or(0, |s| s.steps_recorded),
            };
            Ok((row, records, kappa))
        })
        .collect();
    let runs = runs?;
    let kappa = runs.first().map(|(_, _, k)| *k).unwrap_or(f64::NAN);
    let mut rows = Vec::with_capacity(runs.len());
    let mut records = Vec::new();
    for (row, mut cell_records, _) in runs {
        rows.push(row);
        records.append(&mut cell_records);
    }
    Ok(AblationResult {
        spec: spec.clone(),
        kappa,
        rows,
        records,
    })
}
