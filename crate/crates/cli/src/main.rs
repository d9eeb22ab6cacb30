//! `rfedit`: run toy rectified-flow inversion and editing experiments.
//!
//! Exit status is 0 on success, 1 when a run fails or a directional check
//! does not hold, and 2 for configuration errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rfedit::harness::{
    compare, edit_runs, plot, reconstruct, sweep, write_output, ExperimentConfig, HarnessError, OutputFormat,
    RunOutput, SweepParam,
};

#[derive(Parser, Debug)]
#[command(
    name = "rfedit",
    version,
    about = "Few-step rectified-flow editing experiments on toy Gaussian fields"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML experiment config; defaults apply to everything it omits.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed (overrides `run.seed`).
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Row format (overrides `output.format`).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Also write trajectory SVGs for 2-D models.
    #[arg(long, global = true)]
    svg: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Inversion then regeneration under the source condition.
    Reconstruct,
    /// The configured edit over sampled source points.
    Edit,
    /// Ablation matrix with paired seeds.
    Compare,
    /// One run per value of a single parameter.
    Sweep {
        /// Parameter to sweep (overrides `sweep.param`).
        #[arg(long, value_enum)]
        param: Option<Param>,
        /// Comma-separated ascending values (overrides `sweep.values`).
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Option<Vec<f64>>,
    },
    /// Straightened versus curved sampling trajectories (always writes SVG).
    Plot,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Param {
    W,
    Alpha,
    S,
    #[value(name = "n_steps", alias = "n-steps")]
    NSteps,
}

impl From<Param> for SweepParam {
    fn from(p: Param) -> Self {
        match p {
            Param::W => SweepParam::W,
            Param::Alpha => SweepParam::Alpha,
            Param::S => SweepParam::S,
            Param::NSteps => SweepParam::NSteps,
        }
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.run.seed = Some(seed);
    }
    if let Some(dir) = &cli.out {
        cfg.output.dir = dir.clone();
    }
    if let Some(format) = cli.format {
        cfg.output.format = match format {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        };
    }
    if cli.svg {
        cfg.output.svg = true;
    }
    if let Command::Sweep { param, values } = &cli.command {
        if let Some(p) = param {
            cfg.sweep.param = (*p).into();
        }
        if let Some(v) = values {
            cfg.sweep.values = v.clone();
        }
    }
    if matches!(cli.command, Command::Plot) {
        cfg.output.svg = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<RunOutput, HarnessError> {
    let cfg = load(cli)?;
    let out = match cli.command {
        Command::Reconstruct => reconstruct(&cfg)?,
        Command::Edit => edit_runs(&cfg)?,
        Command::Compare => compare(&cfg)?,
        Command::Sweep { .. } => sweep(&cfg)?,
        Command::Plot => plot(&cfg)?,
    };
    for path in write_output(&cfg.output.dir, cfg.output.format, cfg.output.svg, &out)? {
        println!("wrote {}", path.display());
    }
    for s in &out.summaries {
        println!(
            "{:<16} n={:<4} consistency={:.6} alignment={:.6} roundtrip={:.6}",
            s.variant, s.samples, s.mean_consistency, s.mean_alignment, s.mean_roundtrip
        );
    }
    for c in &out.checks {
        println!("[{}] {}: {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) if out.failed_checks().is_empty() => ExitCode::SUCCESS,
        Ok(out) => {
            eprintln!("{} check(s) failed", out.failed_checks().len());
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
