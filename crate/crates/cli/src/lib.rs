//! Command-line front end for the sensing simulator.
//!
//! Exit codes: 0 on success, 1 when a run fails, 2 when the input is invalid
//! (unreadable or malformed configuration, schema violations, empty sweep
//! grids). Argument errors are reported by clap, which also exits with 2.

pub mod output;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use ssaas_core::cloud::TemplateError;
use ssaas_core::scenario::{self, ExperimentReport, ScenarioConfig, ScenarioError};

#[derive(Debug, Parser)]
#[command(name = "ssaas", version, about = "Trust-based consensus spectrum sensing simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a deployment template or scenario configuration.
    Validate {
        /// JSON file to check.
        path: PathBuf,
    },
    /// Run the configured consensus repetitions and write trace.csv and summary.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the configuration's base seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Suppress the stdout summary.
        #[arg(long)]
        quiet: bool,
    },
    /// Sweep availability or latency over the configured grid and write curves.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        kind: SweepKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    Availability,
    Latency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    Runtime,
    InvalidInput,
}

#[derive(Debug)]
pub struct Failure {
    pub kind: FailureKind,
    pub error: anyhow::Error,
}

impl Failure {
    fn invalid(error: impl Into<anyhow::Error>) -> Self {
        Self {
            kind: FailureKind::InvalidInput,
            error: error.into(),
        }
    }

    fn runtime(error: impl Into<anyhow::Error>) -> Self {
        Self {
            kind: FailureKind::Runtime,
            error: error.into(),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        match self.kind {
            FailureKind::Runtime => ExitCode::from(1),
            FailureKind::InvalidInput => ExitCode::from(2),
        }
    }
}

impl From<ScenarioError> for Failure {
    /// Anything the configuration alone could have caught is invalid input.
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Consensus(_) => Failure::runtime(e),
            _ => Failure::invalid(e),
        }
    }
}

pub type Outcome = Result<(), Failure>;

pub fn execute(cli: Cli) -> Outcome {
    match cli.command {
        Command::Validate { path } => validate(&path),
        Command::Run {
            config,
            seed,
            out,
            quiet,
        } => run(&config, seed, &out, quiet),
        Command::Sweep {
            config,
            kind,
            out,
            quiet,
        } => sweep(&config, kind, &out, quiet),
    }
}

fn read_config(path: &Path) -> Result<ScenarioConfig, Failure> {
    let raw = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(Failure::invalid)?;
    let config = ScenarioConfig::from_json(&raw)
        .with_context(|| format!("{} is not a valid configuration", path.display()))
        .map_err(|e| match e.downcast_ref::<ScenarioError>() {
            Some(ScenarioError::Consensus(_)) => Failure::runtime(e),
            _ => Failure::invalid(e),
        })?;
    Ok(config)
}

pub fn validate(path: &Path) -> Outcome {
    let raw = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(Failure::invalid)?;
    match ScenarioConfig::from_json(&raw) {
        Ok(config) => {
            println!(
                "{}: ok ({} servers, sensing {}, trust {})",
                path.display(),
                config.template.number_of_servers,
                config.template.sensing_algorithm.name,
                config.template.trust_algorithm.name
            );
            Ok(())
        }
        Err(ScenarioError::Template(TemplateError::SchemaViolation(violations))) => {
            for v in &violations {
                eprintln!("{}: {v}", path.display());
            }
            Err(Failure::invalid(anyhow!(
                "{} violates the template schema ({} problem(s))",
                path.display(),
                violations.len()
            )))
        }
        Err(e) => Err(Failure::invalid(
            anyhow::Error::new(e).context(format!("{} is not a valid configuration", path.display())),
        )),
    }
}

fn create_out_dir(out: &Path) -> Result<(), Failure> {
    fs::create_dir_all(out)
        .with_context(|| format!("cannot create output directory {}", out.display()))
        .map_err(Failure::runtime)
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> anyhow::Result<()>) -> Outcome {
    let result = File::create(path).map_err(anyhow::Error::from).and_then(|f| {
        let mut w = BufWriter::new(f);
        body(&mut w)?;
        w.flush()?;
        Ok(())
    });
    result
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(Failure::runtime)
}

pub fn run(config_path: &Path, seed: Option<u64>, out: &Path, quiet: bool) -> Outcome {
    let mut config = read_config(config_path)?;
    if let Some(seed) = seed {
        config.scenario.seed = seed;
    }
    let topology = config.topology()?;
    log::info!(
        "running {} repetitions on {} nodes from seed {}",
        config.scenario.repetitions,
        topology.node_count(),
        config.scenario.seed
    );
    let report = scenario::run_scenario(&config)?;

    create_out_dir(out)?;
    write_file(&out.join("trace.csv"), |w| output::write_trace(&report, &topology, w))?;
    write_file(&out.join("summary.csv"), |w| output::write_summary(&report, w))?;

    if !quiet {
        print_run_summary(&report, out);
    }
    Ok(())
}

fn print_run_summary(report: &ExperimentReport, out: &Path) {
    let runs = report.repetitions.len();
    let converged = report.summaries().filter(|s| s.converged).count();
    println!("runs: {runs}  converged: {converged}");
    if let Some(accuracy) = report.accuracy {
        println!("accuracy: {accuracy:.4}");
    }
    if let Some(it) = report.iterations {
        println!(
            "iterations: mean {:.2}  median {}  p90 {}  max {}",
            it.mean, it.median, it.p90, it.max
        );
    }
    println!("wrote {}", out.display());
}

pub fn sweep(config_path: &Path, kind: SweepKind, out: &Path, quiet: bool) -> Outcome {
    let config = read_config(config_path)?;
    let sweep = &config.scenario.sweep;
    let report = match kind {
        SweepKind::Availability => {
            scenario::sweep_availability(&config, &sweep.availability.p_av_grid, sweep.availability.trials)?
        }
        SweepKind::Latency => scenario::sweep_latency(&config, &sweep.latency.vm_counts)?,
    };

    create_out_dir(out)?;
    let path = out.join("curves.csv");
    write_file(&path, |w| match kind {
        SweepKind::Availability => output::write_availability(&report, w),
        SweepKind::Latency => output::write_latency(&report, w),
    })?;

    if !quiet {
        let points = report.availability.len() + report.latency.len();
        println!("{points} grid points written to {}", path.display());
    }
    Ok(())
}
