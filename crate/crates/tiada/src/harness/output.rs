use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    AblationResult, ExperimentConfig, HarnessError, OutputFormat, SweepResult,
};
use crate::diagnostics::{
    Stage, StepDiagnostics, Termination, TrajectoryRecord, TrajectorySummary,
};

/// Shortest decimal form that parses back to exactly the same float.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Column order of every trajectory CSV.
pub const TRAJECTORY_HEADER: &str = "iter,grad_x_norm,grad_y_norm,det_grad_x_norm,\
det_grad_y_norm,eff_step_x,eff_step_y,ratio,f_value,phi_value,stage,oracle_calls,vx,vy";

/// Renders one trajectory as CSV. Reruns of the same config produce
/// byte-identical output.
pub fn trajectory_csv(record: &TrajectoryRecord) -> String {
    let mut text = String::with_capacity(64 * (record.steps.len() + 1));
    text.push_str(TRAJECTORY_HEADER);
    text.push('\n');
    for s in &record.steps {
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            s.t,
            fmt_f64(s.grad_x_norm),
            fmt_f64(s.grad_y_norm),
            fmt_f64(s.det_grad_x_norm),
            fmt_f64(s.det_grad_y_norm),
            fmt_f64(s.eff_step_x),
            fmt_f64(s.eff_step_y),
            fmt_f64(s.ratio),
            fmt_f64(s.f_value),
            fmt_opt_f64(s.phi_value),
            s.stage,
            s.oracle_calls,
            fmt_f64(s.vx),
            fmt_f64(s.vy),
        );
    }
    text
}

/// Parses a trajectory CSV back into step records. The stage column is
/// rederived from nothing: it is read verbatim ("I"/"II").
pub fn parse_trajectory_csv(text: &str) -> Result<Vec<StepDiagnostics>, HarnessError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| HarnessError::Config("empty trajectory file".to_string()))?;
    if header != TRAJECTORY_HEADER {
        return Err(HarnessError::Config(format!(
            "unexpected trajectory header `{header}`"
        )));
    }
    let parse_f64 = |field: &str, line: usize| -> Result<f64, HarnessError> {
        field.parse::<f64>().map_err(|_| {
            HarnessError::Config(format!("bad float `{field}` on line {line}"))
        })
    };
    let mut steps = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 14 {
            return Err(HarnessError::Config(format!(
                "expected 14 fields on line {}, got {}",
                i + 2,
                fields.len()
            )));
        }
        let row = i + 2;
        steps.push(StepDiagnostics {
            t: fields[0]
                .parse()
                .map_err(|_| HarnessError::Config(format!("bad iter on line {row}")))?,
            grad_x_norm: parse_f64(fields[1], row)?,
            grad_y_norm: parse_f64(fields[2], row)?,
            det_grad_x_norm: parse_f64(fields[3], row)?,
            det_grad_y_norm: parse_f64(fields[4], row)?,
            eff_step_x: parse_f64(fields[5], row)?,
            eff_step_y: parse_f64(fields[6], row)?,
            ratio: parse_f64(fields[7], row)?,
            f_value: parse_f64(fields[8], row)?,
            phi_value: if fields[9].is_empty() {
                None
            } else {
                Some(parse_f64(fields[9], row)?)
            },
            stage: match fields[10] {
                "I" => Stage::One,
                "II" => Stage::Two,
                other => {
                    return Err(HarnessError::Config(format!(
                        "bad stage `{other}` on line {row}"
                    )))
                }
            },
            oracle_calls: fields[11]
                .parse()
                .map_err(|_| HarnessError::Config(format!("bad oracle_calls on line {row}")))?,
            vx: parse_f64(fields[12], row)?,
            vy: parse_f64(fields[13], row)?,
        });
    }
    Ok(steps)
}

/// Derived constants echoed into summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub smoothness: f64,
    pub strong_concavity: f64,
    pub kappa: f64,
    pub inv_kappa: f64,
}

/// Per-seed slice of the run summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub termination: Termination,
    pub summary: Option<TrajectorySummary>,
}

/// The `<name>.summary.json` payload. `generated_at` is the only
/// nondeterministic field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummaryFile {
    pub generated_at: String,
    pub config: ExperimentConfig,
    pub derived: DerivedConstants,
    pub runs: Vec<SeedSummary>,
}

fn derived_constants(record: &TrajectoryRecord) -> DerivedConstants {
    // The records carry kappa; recover the pieces from the problem spec.
    let problem = crate::problems::problem_from_spec(
        &record.config.problem.id,
        &record.config.problem.params,
    )
    .expect("records come from resolvable configs");
    let c = problem.constants();
    DerivedConstants {
        smoothness: c.smoothness,
        strong_concavity: c.strong_concavity,
        kappa: c.kappa,
        inv_kappa: 1.0 / c.kappa,
    }
}

pub fn run_summary_file(config: &ExperimentConfig, records: &[TrajectoryRecord]) -> RunSummaryFile {
    RunSummaryFile {
        generated_at: chrono::Utc::now().to_rfc3339(),
        config: config.clone(),
        derived: derived_constants(&records[0]),
        runs: records
            .iter()
            .map(|r| SeedSummary {
                seed: r.seed,
                termination: r.termination.clone(),
                summary: r.summary.clone(),
            })
            .collect(),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

fn trajectory_json(record: &TrajectoryRecord) -> Result<String, HarnessError> {
    let mut text = serde_json::to_string_pretty(&record.steps)?;
    text.push('\n');
    Ok(text)
}

fn trajectory_file_name(name: &str, seed: u64, single: bool, format: OutputFormat) -> String {
    let ext = match format {
        OutputFormat::Csv => "csv",
        OutputFormat::Json => "json",
    };
    if single {
        format!("{name}.{ext}")
    } else {
        format!("{name}.seed{seed}.{ext}")
    }
}

/// Writes `<name>.csv` (or `.seed<s>.csv` for multi-seed runs) per
/// trajectory plus `<name>.summary.json`. Returns the written paths.
pub fn write_experiment_outputs(
    dir: &Path,
    config: &ExperimentConfig,
    records: &[TrajectoryRecord],
    format: OutputFormat,
) -> Result<Vec<PathBuf>, HarnessError> {
    let mut written = Vec::new();
    let single = records.len() == 1;
    for record in records {
        let path = dir.join(trajectory_file_name(&config.name, record.seed, single, format));
        let body = match format {
            OutputFormat::Csv => trajectory_csv(record),
            OutputFormat::Json => trajectory_json(record)?,
        };
        write_file(&path, &body)?;
        written.push(path);
    }
    let summary = run_summary_file(config, records);
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    let path = dir.join(format!("{}.summary.json", config.name));
    write_file(&path, &text)?;
    written.push(path);
    Ok(written)
}

/// The `<sweep>.table.csv` aggregate, one row per cell.
pub fn sweep_table_csv(result: &SweepResult) -> String {
    let mut text = String::new();
    text.push_str("cell");
    for axis in &result.spec.axes {
        let _ = write!(text, ",{}", axis.param);
    }
    text.push_str(
        ",seed_count,median_final_det_grad_x,median_final_det_grad_y,\
median_final_det_grad_sum,median_stage2_first_step,stage2_count,completed,nonfinite\n",
    );
    for cell in &result.cells {
        let _ = write!(text, "{}", cell.cell_index);
        for (_, value) in &cell.assignment {
            let _ = write!(text, ",{value}");
        }
        let a = &cell.aggregate;
        let _ = writeln!(
            text,
            ",{},{},{},{},{},{},{},{}",
            a.seed_count,
            fmt_f64(a.median_final_det_grad_x),
            fmt_f64(a.median_final_det_grad_y),
            fmt_f64(a.median_final_det_grad_sum),
            fmt_opt_f64(a.median_stage2_first_step),
            a.stage2_count,
            a.completed,
            a.nonfinite,
        );
    }
    text
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SweepSummaryFile {
    generated_at: String,
    spec: super::SweepSpec,
    aggregates: Vec<super::CellAggregate>,
}

/// Writes the sweep table, a JSON echo, and (for `emit_raw`) one
/// trajectory file per cell and seed.
pub fn write_sweep_outputs(
    dir: &Path,
    result: &SweepResult,
    format: OutputFormat,
) -> Result<Vec<PathBuf>, HarnessError> {
    let mut written = Vec::new();
    let name = &result.spec.name;
    let table = dir.join(format!("{name}.table.csv"));
    write_file(&table, &sweep_table_csv(result))?;
    written.push(table);

    let summary = SweepSummaryFile {
        generated_at: chrono::Utc::now().to_rfc3339(),
        spec: result.spec.clone(),
        aggregates: result.cells.iter().map(|c| c.aggregate.clone()).collect(),
    };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    let path = dir.join(format!("{name}.summary.json"));
    write_file(&path, &text)?;
    written.push(path);

    if result.spec.emit_raw {
        for cell in &result.cells {
            for record in &cell.records {
                let path = dir.join(format!(
                    "{name}.cell{}.seed{}.{}",
                    cell.cell_index,
                    record.seed,
                    match format {
                        OutputFormat::Csv => "csv",
                        OutputFormat::Json => "json",
                    }
                ));
                let body = match format {
                    OutputFormat::Csv => trajectory_csv(record),
                    OutputFormat::Json => trajectory_json(record)?,
                };
                write_file(&path, &body)?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

/// The ablation table: one row per alpha.
pub fn ablation_table_csv(result: &AblationResult) -> String {
    let mut text = String::from(
        "alpha,beta,stage2_first_step,stage2_persistent,final_det_grad_x,\
final_det_grad_y,final_det_grad_sum,steps_recorded\n",
    );
    for row in &result.rows {
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{},{}",
            fmt_f64(row.alpha),
            fmt_f64(row.beta),
            row.stage2_first_step
                .map(|v| v.to_string())
                .unwrap_or_default(),
            row.stage2_persistent
                .map(|v| v.to_string())
                .unwrap_or_default(),
            fmt_f64(row.final_det_grad_x),
            fmt_f64(row.final_det_grad_y),
            fmt_f64(row.final_det_grad_sum),
            row.steps_recorded,
        );
    }
    text
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct AblationSummaryFile {
    generated_at: String,
    spec: super::AblationSpec,
    kappa: f64,
    inv_kappa: f64,
    rows: Vec<super::AblationRow>,
}

/// Writes the ablation table, a JSON echo carrying `1/kappa`, and one
/// trajectory file per (alpha, seed).
pub fn write_ablation_outputs(
    dir: &Path,
    result: &AblationResult,
    format: OutputFormat,
) -> Result<Vec<PathBuf>, HarnessError> {
    let mut written = Vec::new();
    let name = &result.spec.name;
    let table = dir.join(format!("{name}.table.csv"));
    write_file(&table, &ablation_table_csv(result))?;
    written.push(table);

    let summary = AblationSummaryFile {
        generated_at: chrono::Utc::now().to_rfc3339(),
        spec: result.spec.clone(),
        kappa: result.kappa,
        inv_kappa: 1.0 / result.kappa,
        rows: result.rows.clone(),
    };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    let path = dir.join(format!("{name}.summary.json"));
    write_file(&path, &text)?;
    written.push(path);

    let seeds = result.spec.base.run.seeds.len().max(1);
    for record in &result.records {
        let alpha = record.config.optimizer.params["alpha"];
        let path = dir.join(format!(
            "{name}.alpha{}{}.{}",
            fmt_f64(alpha),
            if seeds == 1 {
                String::new()
            } else {
                format!(".seed{}", record.seed)
            },
            match format {
                OutputFormat::Csv => "csv",
                OutputFormat::Json => "json",
            }
        ));
        let body = match format {
            OutputFormat::Csv => trajectory_csv(record),
            OutputFormat::Json => trajectory_json(record)?,
        };
        write_file(&path, &body)?;
        written.push(path);
    }
    Ok(written)
}
