use std::io::Write;

use serde::Serialize;

use crate::config::{ExperimentConfig, Format};
use crate::CliError;

/// Key of the one row that varies between identical runs.
pub const WALL_CLOCK_KEY: &str = "wall_clock_seconds";

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Value {
    Num(f64),
    Int(u64),
    Text(String),
}

impl Value {
    fn render(&self) -> String {
        match self {
            Value::Num(v) => format!("{v:e}"),
            Value::Int(v) => v.to_string(),
            Value::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub experiment: String,
    pub key: String,
    pub value: Value,
    pub tolerance: Option<f64>,
    pub pass: Option<bool>,
}

/// Rows of one run. Pass/fail is decided only from the recorded value and
/// tolerance.
#[derive(Debug, Clone, Default)]
pub struct Record {
    experiment: String,
    rows: Vec<Row>,
}

impl Record {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        let mut r = Record {
            experiment: cfg.command.name().to_string(),
            rows: Vec::new(),
        };
        let echo = serde_json::to_value(cfg).expect("config serializes");
        // Thread count and destination do not change the numbers.
        for (k, v) in echo.as_object().expect("config is an object") {
            if k == "threads" || k == "output" {
                continue;
            }
            let text = match v {
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            r.text(&format!("config.{k}"), text);
        }
        r
    }

    fn push(&mut self, key: &str, value: Value, tolerance: Option<f64>, pass: Option<bool>) {
        self.rows.push(Row {
            experiment: self.experiment.clone(),
            key: key.to_string(),
            value,
            tolerance,
            pass,
        });
    }

    pub fn num(&mut self, key: &str, value: f64) {
        self.push(key, Value::Num(value), None, None);
    }

    pub fn int(&mut self, key: &str, value: u64) {
        self.push(key, Value::Int(value), None, None);
    }

    pub fn text(&mut self, key: &str, value: String) {
        self.push(key, Value::Text(value), None, None);
    }

    /// `value <= tolerance`.
    pub fn at_most(&mut self, key: &str, value: f64, tolerance: f64) -> bool {
        let pass = value <= tolerance;
        self.push(key, Value::Num(value), Some(tolerance), Some(pass));
        pass
    }

    pub fn wall_clock(&mut self, seconds: f64) {
        self.num(WALL_CLOCK_KEY, seconds);
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass != Some(false))
    }

    pub fn failures(&self) -> Vec<&str> {
        self.rows.iter().filter(|r| r.pass == Some(false)).map(|r| r.key.as_str()).collect()
    }

    #[cfg(test)]
    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn write(&self, format: Format, out: &mut dyn Write) -> Result<(), CliError> {
        let io = |e: std::io::Error| CliError::Io(e.to_string());
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(out);
                w.write_record(["experiment", "key", "value", "tolerance", "pass"])
                    .map_err(|e| CliError::Io(e.to_string()))?;
                for r in &self.rows {
                    w.write_record([
                        r.experiment.clone(),
                        r.key.clone(),
                        r.value.render(),
                        r.tolerance.map(|t| format!("{t:e}")).unwrap_or_default(),
                        r.pass.map(|p| p.to_string()).unwrap_or_default(),
                    ])
                    .map_err(|e| CliError::Io(e.to_string()))?;
                }
                w.flush().map_err(io)?;
            }
            Format::Json => {
                serde_json::to_writer_pretty(&mut *out, &self.rows).map_err(|e| CliError::Io(e.to_string()))?;
                writeln!(out).map_err(io)?;
            }
        }
        Ok(())
    }
}
