use std::path::Path;

use iem_core::ExchangeKernel;

use crate::CliError;

/// Parses `two`, `path:k`, `cycle:k`, `complete:k`, or reads an edge-list file.
pub fn parse_graph(desc: &str) -> Result<ExchangeKernel, CliError> {
    let bad = |msg: String| CliError::Graph(format!("graph `{desc}`: {msg}"));
    if desc == "two" {
        return Ok(ExchangeKernel::two());
    }
    if Path::new(desc).is_file() {
        return read_edge_list(desc);
    }
    if let Some((kind, size)) = desc.split_once(':') {
        let k: usize = size.parse().map_err(|_| bad(format!("`{size}` is not a vertex count")))?;
        let kernel = match kind {
            "path" => ExchangeKernel::path(k),
            "cycle" => ExchangeKernel::cycle(k),
            "complete" => ExchangeKernel::complete(k),
            _ => return Err(bad(format!("unknown builtin `{kind}`"))),
        };
        return kernel.map_err(|e| bad(e.to_string()));
    }
    read_edge_list(desc)
}

fn read_edge_list(path: &str) -> Result<ExchangeKernel, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Graph(format!("cannot read edge list `{path}`: {e}")))?;
    parse_edge_list(&text).map_err(|msg| CliError::Graph(format!("{path}: {msg}")))
}

/// One `i j weight` triple per line, 0-indexed, `#` starts a comment.
pub fn parse_edge_list(text: &str) -> Result<ExchangeKernel, String> {
    let mut triples = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [i, j, w] = fields[..] else {
            return Err(format!("line {}: expected `i j weight`", lineno + 1));
        };
        let i: usize = i.parse().map_err(|_| format!("line {}: bad vertex `{i}`", lineno + 1))?;
        let j: usize = j.parse().map_err(|_| format!("line {}: bad vertex `{j}`", lineno + 1))?;
        let w: f64 = w.parse().map_err(|_| format!("line {}: bad weight `{w}`", lineno + 1))?;
        triples.push((i, j, w));
    }
    let vertices = triples.iter().map(|(i, j, _)| i.max(j) + 1).max().ok_or("no edges")?;
    ExchangeKernel::new(vertices, &triples).map_err(|e| e.to_string())
}
