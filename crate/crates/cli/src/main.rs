#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod experiments;
mod graph;
mod report;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use config::{Cli, ExperimentConfig, Format};

/// Directory for output files when `--output` is not given.
pub const OUTPUT_DIR_ENV: &str = "IEM_OUTPUT_DIR";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(String),
    Theta(String),
    Graph(String),
    Io(String),
    Config(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (kind, msg) = match self {
            CliError::Usage(m) => ("usage", m),
            CliError::Domain(m) => ("domain", m),
            CliError::Theta(m) => ("theta", m),
            CliError::Graph(m) => ("graph", m),
            CliError::Io(m) => ("io", m),
            CliError::Config(m) => ("config", m),
        };
        write!(f, "{kind} error: {msg}")
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Theta(_) => 4,
            CliError::Graph(_) => 5,
            CliError::Io(_) => 6,
            CliError::Config(_) => 7,
        }
    }
}

impl From<iem_core::Error> for CliError {
    fn from(e: iem_core::Error) -> Self {
        match e {
            iem_core::Error::Domain(m) if m.contains("theta") => CliError::Theta(m),
            iem_core::Error::Domain(m) => CliError::Domain(m),
            iem_core::Error::InvalidKernel(m) => CliError::Graph(m),
            other @ iem_core::Error::DimensionMismatch { .. } => CliError::Usage(other.to_string()),
        }
    }
}

fn open_output(cfg: &ExperimentConfig) -> Result<Box<dyn Write>, CliError> {
    let ext = match cfg.format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let path = match cfg.output.as_deref() {
        Some("-") => return Ok(Box::new(io::stdout().lock())),
        Some(p) => PathBuf::from(p),
        None => match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(dir) => PathBuf::from(dir).join(format!("{}.{ext}", cfg.command.name())),
            None => return Ok(Box::new(io::stdout().lock())),
        },
    };
    let file = File::create(&path).map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
    Ok(Box::new(BufWriter::new(file)))
}

fn execute(cli: Cli) -> Result<bool, CliError> {
    let cfg = ExperimentConfig::resolve(cli.command, &cli.flags)?;
    if let Some(path) = &cli.flags.save_config {
        std::fs::write(path, cfg.to_json()).map_err(|e| CliError::Io(format!("cannot write {path}: {e}")))?;
    }
    if let Some(threads) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let start = Instant::now();
    let mut record = experiments::run(&cfg)?;
    record.wall_clock(start.elapsed().as_secs_f64());
    let mut out = open_output(&cfg)?;
    record.write(cfg.format, &mut out)?;
    out.flush().map_err(|e| CliError::Io(e.to_string()))?;
    if !record.all_pass() {
        eprintln!("assertion failed: {}", record.failures().join(", "));
    }
    Ok(record.all_pass())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("iem: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
