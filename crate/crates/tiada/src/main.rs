use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use tiada::harness::{
    resolve, run_ablation, run_all_checks, run_experiment, run_sweep, write_ablation_outputs,
    write_experiment_outputs, write_sweep_outputs, AblationSpec, ExperimentConfig, OutputFormat,
    SweepSpec,
};

#[derive(Parser)]
#[command(
    name = "tiada",
    about = "Time-scale adaptive gradient descent-ascent experiment runner",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct OutputOverrides {
    /// Output directory (overrides the config's `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated seed list (overrides `run.seeds`).
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Record every n-th step (overrides `run.record_every`).
    #[arg(long)]
    record_every: Option<u64>,
    /// Trajectory file format.
    #[arg(long, value_parser = parse_format)]
    format: Option<OutputFormat>,
}

fn parse_format(text: &str) -> Result<OutputFormat, String> {
    match text {
        "csv" => Ok(OutputFormat::Csv),
        "json" => Ok(OutputFormat::Json),
        other => Err(format!("unknown format `{other}` (use csv or json)")),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config and write its trajectories and summary.
    Run {
        /// Path to the experiment TOML file.
        config: PathBuf,
        #[command(flatten)]
        overrides: OutputOverrides,
    },
    /// Run a parameter grid and write the aggregate table.
    Sweep {
        /// Path to the sweep TOML file.
        spec: PathBuf,
        #[command(flatten)]
        overrides: OutputOverrides,
        /// Also write the per-cell trajectory files.
        #[arg(long)]
        raw: bool,
    },
    /// Run an exponent-pair ablation (beta = 1 - alpha per alpha).
    Ablate {
        /// Path to the ablation TOML file.
        spec: PathBuf,
        #[command(flatten)]
        overrides: OutputOverrides,
    },
    /// Run the built-in verification suite and print pass/fail lines.
    Check,
}

fn apply_overrides(config: &mut ExperimentConfig, overrides: &OutputOverrides) {
    if let Some(dir) = &overrides.out {
        config.output.dir = dir.clone();
    }
    if let Some(seeds) = &overrides.seeds {
        config.run.seeds = seeds.clone();
    }
    if let Some(every) = overrides.record_every {
        config.run.record_every = every;
    }
    if let Some(format) = overrides.format {
        config.output.format = format;
    }
}

fn cmd_run(path: PathBuf, overrides: OutputOverrides) -> anyhow::Result<()> {
    let mut config = ExperimentConfig::load(&path)
        .with_context(|| format!("loading config {}", path.display()))?;
    apply_overrides(&mut config, &overrides);
    let resolved = resolve(&config)?.config;
    let records = run_experiment(&resolved)?;
    let written = write_experiment_outputs(
        &resolved.output.dir,
        &resolved,
        &records,
        resolved.output.format,
    )?;
    for path in written {
        println!("wrote {}", path.display());
    }
    for record in &records {
        if let Some(summary) = &record.summary {
            println!(
                "seed {}: {} steps, final |gx| = {:.6e}, |gy| = {:.6e}, stage II from {:?}",
                record.seed,
                summary.steps_recorded,
                summary.final_det_grad_x_norm,
                summary.final_det_grad_y_norm,
                summary.stage2_first_step,
            );
        }
    }
    Ok(())
}

fn cmd_sweep(path: PathBuf, overrides: OutputOverrides, raw: bool) -> anyhow::Result<()> {
    let mut spec =
        SweepSpec::load(&path).with_context(|| format!("loading sweep {}", path.display()))?;
    apply_overrides(&mut spec.base, &overrides);
    if raw {
        spec.emit_raw = true;
    }
    let result = run_sweep(&spec)?;
    let written = write_sweep_outputs(
        &spec.base.output.dir,
        &result,
        spec.base.output.format,
    )?;
    for path in written {
        println!("wrote {}", path.display());
    }
    println!("{} cells, {} seeds each", result.cells.len(), spec.base.run.seeds.len());
    Ok(())
}

fn cmd_ablate(path: PathBuf, overrides: OutputOverrides) -> anyhow::Result<()> {
    let mut spec = AblationSpec::load(&path)
        .with_context(|| format!("loading ablation {}", path.display()))?;
    apply_overrides(&mut spec.base, &overrides);
    let result = run_ablation(&spec)?;
    let written = write_ablation_outputs(
        &spec.base.output.dir,
        &result,
        spec.base.output.format,
    )?;
    for path in written {
        println!("wrote {}", path.display());
    }
    for row in &result.rows {
        println!(
            "alpha {} -> stage II from {:?}, final |gx|+|gy| = {:.6e}",
            row.alpha, row.stage2_first_step, row.final_det_grad_sum
        );
    }
    Ok(())
}

fn cmd_check() -> ExitCode {
    let results = run_all_checks();
    let mut all_passed = true;
    for result in &results {
        let status = if result.passed { "ok" } else { "FAIL" };
        println!("check {:<45} {status}  ({})", result.name, result.detail);
        all_passed &= result.passed;
    }
    if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, overrides } => cmd_run(config, overrides),
        Command::Sweep {
            spec,
            overrides,
            raw,
        } => cmd_sweep(spec, overrides, raw),
        Command::Ablate { spec, overrides } => cmd_ablate(spec, overrides),
        Command::Check => return cmd_check(),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
