//! CSV trajectories and JSON summaries.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

pub const OUT_DIR_ENV: &str = "ZENO_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "zeno-out";
/// Every written row has populations summing to one within this.
pub const POPULATION_SUM_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub t: f64,
    pub scheme: &'static str,
    pub populations: Vec<f64>,
    pub offdiag_norm: f64,
}

/// Flag, then environment, then config, then the default.
pub fn resolve_out_dir(flag: Option<&Path>, config: Option<&str>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUT_DIR_ENV).filter(|p| !p.is_empty()) {
        return PathBuf::from(p);
    }
    PathBuf::from(config.unwrap_or(DEFAULT_OUT_DIR))
}

fn number(x: f64) -> String {
    format!("{x:.16e}")
}

/// Renders `t,scheme,p0..p{d-1},offdiag_norm` rows.
pub fn render_csv(dim: usize, rows: &[Row]) -> Result<String, CliError> {
    let mut out = String::from("t,scheme");
    for k in 0..dim {
        let _ = write!(out, ",p{k}");
    }
    out.push_str(",offdiag_norm\n");
    for row in rows {
        if row.populations.len() != dim {
            return Err(CliError::Failure(format!(
                "row at t = {} has {} populations, expected {dim}",
                row.t,
                row.populations.len()
            )));
        }
        let sum: f64 = row.populations.iter().sum();
        if !((sum - 1.0).abs() <= POPULATION_SUM_TOLERANCE) {
            return Err(CliError::Failure(format!(
                "populations of scheme {} at t = {} sum to {sum}",
                row.scheme, row.t
            )));
        }
        out.push_str(&number(row.t));
        out.push(',');
        out.push_str(row.scheme);
        for p in &row.populations {
            out.push(',');
            out.push_str(&number(*p));
        }
        out.push(',');
        out.push_str(&number(row.offdiag_norm));
        out.push('\n');
    }
    Ok(out)
}

pub fn write_csv(path: &Path, dim: usize, rows: &[Row]) -> Result<(), CliError> {
    std::fs::write(path, render_csv(dim, rows)?)?;
    Ok(())
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Failure(format!("cannot serialize summary: {e}")))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Failure(format!("cannot create output directory {}: {e}", dir.display())))
}

#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
}

impl Provenance {
    pub fn new(command: &'static str) -> Self {
        Self {
            tool: "zeno",
            version: env!("CARGO_PKG_VERSION"),
            command,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_and_full_precision() {
        let rows = [Row {
            t: 0.1,
            scheme: "exact",
            populations: vec![0.25, 0.75],
            offdiag_norm: 0.0,
        }];
        let csv = render_csv(2, &rows).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,scheme,p0,p1,offdiag_norm"));
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(fields[1], "exact");
        assert_eq!(fields[0].parse::<f64>().unwrap(), 0.1);
        assert_eq!(fields[0], "1.0000000000000001e-1");
    }

    #[test]
    fn unnormalized_rows_are_rejected() {
        let rows = [Row {
            t: 0.0,
            scheme: "effective",
            populations: vec![0.5, 0.6],
            offdiag_norm: 0.0,
        }];
        assert!(matches!(render_csv(2, &rows), Err(CliError::Failure(_))));
    }

    #[test]
    fn flag_beats_config() {
        let p = resolve_out_dir(Some(Path::new("a")), Some("b"));
        assert_eq!(p, PathBuf::from("a"));
    }
}
