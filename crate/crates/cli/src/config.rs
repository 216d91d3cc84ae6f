use std::path::Path;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use iem_core::ModelParams;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Subcommand)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// One trajectory of the continuous exchange process.
    Simulate,
    /// One trajectory of the discrete dual process.
    SimulateDual,
    /// Generator and path duality checks.
    VerifyDuality,
    /// Self-duality of the dual process on a two-site sector grid.
    VerifySelfDuality,
    /// Canonical law of a two-site sector.
    Stationary,
    /// Detailed balance of the discrete Gamma product law.
    DetailedBalance,
    /// Long-time split of two agents against the Beta law.
    Ergodic,
    /// One-step moment gaps of the rescaled dual update.
    ScalingLimit,
    /// SU(1,1) commutation, algebra, adjointness and intertwining checks.
    Su11,
    /// Monte Carlo expected wealth against the single-particle walk.
    WealthSpread,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::SimulateDual => "simulate-dual",
            Command::VerifyDuality => "verify-duality",
            Command::VerifySelfDuality => "verify-self-duality",
            Command::Stationary => "stationary",
            Command::DetailedBalance => "detailed-balance",
            Command::Ergodic => "ergodic",
            Command::ScalingLimit => "scaling-limit",
            Command::Su11 => "su11",
            Command::WealthSpread => "wealth-spread",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "iem", version, about = "Immediate exchange model experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

/// Raw flags. Everything is optional so a JSON config can fill the gaps.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub s: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub t: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    /// two | path:k | cycle:k | complete:k | path to an edge-list file
    #[arg(long, global = true)]
    pub graph: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub time: Option<f64>,
    #[arg(long, global = true)]
    pub replicas: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file, `-` for standard output.
    #[arg(long, global = true)]
    pub output: Option<String>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub n: Option<u64>,
    #[arg(long, global = true)]
    pub m: Option<u64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub x: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub y: Option<f64>,
    /// Sector total, or the largest total for grid checks.
    #[arg(long = "N", global = true)]
    pub big_n: Option<u64>,
    /// Scale of the scaling-limit check.
    #[arg(long = "K", global = true)]
    pub big_k: Option<u64>,
    /// Comma-separated initial wealth, one value per vertex.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    pub init: Option<Vec<f64>>,
    /// Comma-separated dual occupation, one count per vertex.
    #[arg(long, global = true, value_delimiter = ',')]
    pub xi: Option<Vec<u64>>,
    /// JSON config; its keys override the flags.
    #[arg(long, global = true)]
    pub config: Option<String>,
    /// Write the resolved config as JSON to this file before running.
    #[arg(long, global = true)]
    pub save_config: Option<String>,
}

/// A fully resolved experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    pub s: f64,
    pub t: f64,
    pub theta: f64,
    pub graph: String,
    /// Unset means the experiment's own default.
    pub time: Option<f64>,
    pub replicas: usize,
    pub seed: u64,
    pub output: Option<String>,
    pub format: Format,
    pub threads: Option<usize>,
    pub n: u64,
    pub m: u64,
    pub x: f64,
    pub y: f64,
    #[serde(rename = "N")]
    pub big_n: Option<u64>,
    #[serde(rename = "K")]
    pub big_k: u64,
    pub init: Option<Vec<f64>>,
    pub xi: Option<Vec<u64>>,
}

impl ExperimentConfig {
    pub fn defaults(command: Command) -> Self {
        Self {
            command,
            s: 1.0,
            t: 1.0,
            theta: 0.5,
            graph: "two".into(),
            time: None,
            replicas: 100_000,
            seed: 1,
            output: None,
            format: Format::Csv,
            threads: None,
            n: 2,
            m: 1,
            x: 1.0,
            y: 2.0,
            big_n: None,
            big_k: 10_000,
            init: None,
            xi: None,
        }
    }

    pub fn params(&self) -> ModelParams {
        ModelParams::new(self.s, self.t).expect("validated")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.s > 0.0 && self.s.is_finite()) || !(self.t > 0.0 && self.t.is_finite()) {
            return Err(CliError::Domain(format!("s and t must be positive, got s={}, t={}", self.s, self.t)));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(CliError::Theta(format!("theta must lie in (0, 1), got {}", self.theta)));
        }
        if let Some(time) = self.time {
            if !(time >= 0.0 && time.is_finite()) {
                return Err(CliError::Domain(format!("time must be finite and nonnegative, got {time}")));
            }
        }
        if !(self.x >= 0.0) || !(self.y >= 0.0) {
            return Err(CliError::Domain(format!("wealth must be nonnegative, got x={}, y={}", self.x, self.y)));
        }
        if let Some(init) = &self.init {
            if init.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(CliError::Domain("initial wealth must be finite and nonnegative".into()));
            }
        }
        if self.replicas < 2 {
            return Err(CliError::Domain(format!("need at least 2 replicas, got {}", self.replicas)));
        }
        if self.threads == Some(0) {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        Ok(())
    }

    /// Flags on top of the defaults, then the config file on top of both.
    pub fn resolve(command: Command, flags: &Flags) -> Result<Self, CliError> {
        let mut cfg = Self::defaults(command);
        macro_rules! take {
            ($($field:ident),*) => { $( if let Some(v) = flags.$field.clone() { cfg.$field = v; } )* };
        }
        take!(s, t, theta, graph, replicas, seed, format, n, m, x, y);
        take!(big_k);
        cfg.time = flags.time.or(cfg.time);
        cfg.output = flags.output.clone().or(cfg.output);
        cfg.threads = flags.threads.or(cfg.threads);
        cfg.big_n = flags.big_n.or(cfg.big_n);
        cfg.init = flags.init.clone().or(cfg.init);
        cfg.xi = flags.xi.clone().or(cfg.xi);

        if let Some(path) = &flags.config {
            cfg = cfg.overlay_file(Path::new(path))?;
            if cfg.command != command {
                return Err(CliError::Config(format!(
                    "config is for `{}` but `{}` was requested",
                    cfg.command.name(),
                    command.name()
                )));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn overlay_file(self, path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        let overlay: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let serde_json::Value::Object(overlay) = overlay else {
            return Err(CliError::Config(format!("{}: expected a JSON object", path.display())));
        };
        let mut base = serde_json::to_value(&self).expect("config serializes");
        let obj = base.as_object_mut().expect("config is an object");
        for (k, v) in overlay {
            obj.insert(k, v);
        }
        serde_json::from_value(base).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
