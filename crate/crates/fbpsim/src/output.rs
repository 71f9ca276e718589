//! On-disk formats: snapshot CSVs, the diagnostics CSV, the run manifest and
//! the check reports.
//!
//! Floats are written in the shortest decimal form that round-trips exactly,
//! so re-reading a stored trajectory reproduces the bit pattern that was
//! simulated and diagnostics recomputed offline match the run byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{
    BudgetReport, DiagnosticsRecord, EnergyReport, MaxPrincipleReport, MuLinfReport,
};
use crate::grid::{Field, Grid};
use crate::integrator::SimState;
use crate::scenario::DerivedConstants;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed file {path}: {message}")]
    Malformed { path: PathBuf, message: String },
    #[error("json error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io { path: path.to_path_buf(), source }
}

/// Shortest round-trip decimal; scientific notation outside a plain-decimal
/// comfort window. The rule is fixed so outputs are byte-deterministic.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 || (v.abs() >= 1e-4 && v.abs() < 1e16) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub const SNAPSHOT_COLUMNS_1D: &[&str] = &["x", "u", "mu", "w", "xi", "mu_flat"];
pub const SNAPSHOT_COLUMNS_2D: &[&str] = &["x", "y", "u", "mu", "w", "xi", "mu_flat"];

pub const DIAGNOSTICS_COLUMNS: &[&str] = &[
    "step",
    "t",
    "energy",
    "rate_step",
    "rate_cum",
    "source_step",
    "source_cum",
    "boundary_work_step",
    "boundary_work_cum",
    "grad_mu",
    "w_norm",
    "xi_w_inner",
    "zeta_star",
    "zeta_star_flagged",
    "u_min",
    "u_max",
    "mu_shift_linf",
    "min_dissipation",
    "ledger_residual",
    "mu_flat_dot_norm",
    "picard_iterations",
    "picard_max_ratio",
    "newton_iterations",
    "elliptic_residual",
    "fallback_used",
];

pub fn write_snapshot(path: &Path, state: &SimState) -> Result<(), OutputError> {
    let grid = state.u.grid();
    let two_d = grid.dim() == 2;
    let mut text = String::new();
    let header = if two_d { SNAPSHOT_COLUMNS_2D } else { SNAPSHOT_COLUMNS_1D };
    text.push_str(&header.join(","));
    text.push('\n');
    for i in 0..grid.node_count() {
        let (x, y) = grid.coords(i);
        write!(text, "{}", fmt_f64(x)).unwrap();
        if two_d {
            write!(text, ",{}", fmt_f64(y)).unwrap();
        }
        writeln!(
            text,
            ",{},{},{},{},{}",
            fmt_f64(state.u.values()[i]),
            fmt_f64(state.mu.values()[i]),
            fmt_f64(state.w.values()[i]),
            fmt_f64(state.xi.values()[i]),
            fmt_f64(state.mu_flat.values()[i]),
        )
        .unwrap();
    }
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_snapshot(path: &Path, grid: &Arc<Grid>, t: f64) -> Result<SimState, OutputError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| OutputError::Malformed {
        path: path.to_path_buf(),
        message: "empty snapshot".into(),
    })?;
    let expected = if grid.dim() == 2 { SNAPSHOT_COLUMNS_2D } else { SNAPSHOT_COLUMNS_1D };
    if header != expected.join(",") {
        return Err(OutputError::Malformed {
            path: path.to_path_buf(),
            message: format!("unexpected header {header:?}"),
        });
    }
    let coord_cols = grid.dim();
    let n = grid.node_count();
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(n); 5];
    for (row, line) in lines.enumerate() {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != expected.len() {
            return Err(OutputError::Malformed {
                path: path.to_path_buf(),
                message: format!("row {row} has {} fields, expected {}", parts.len(), expected.len()),
            });
        }
        for (c, part) in parts[coord_cols..].iter().enumerate() {
            let v: f64 = part.parse().map_err(|_| OutputError::Malformed {
                path: path.to_path_buf(),
                message: format!("bad float {part:?} in row {row}"),
            })?;
            cols[c].push(v);
        }
    }
    if cols[0].len() != n {
        return Err(OutputError::Malformed {
            path: path.to_path_buf(),
            message: format!("{} rows for a grid of {} nodes", cols[0].len(), n),
        });
    }
    let mut take = cols.into_iter();
    let mut field = |_: &str| {
        Field::from_values(grid, take.next().expect("five columns")).expect("length checked")
    };
    Ok(SimState {
        t,
        u: field("u"),
        mu: field("mu"),
        w: field("w"),
        xi: field("xi"),
        mu_flat: field("mu_flat"),
    })
}

/// Single-field CSV: optional header, one value per row (last column wins).
pub fn read_field_csv(path: &Path) -> Result<Vec<f64>, OutputError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let last = line.rsplit(',').next().unwrap_or("").trim();
        match last.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => continue, // header row
            Err(_) => {
                return Err(OutputError::Malformed {
                    path: path.to_path_buf(),
                    message: format!("bad float {last:?} in row {i}"),
                })
            }
        }
    }
    Ok(out)
}

pub fn write_diagnostics_csv(path: &Path, records: &[DiagnosticsRecord]) -> Result<(), OutputError> {
    let mut text = String::new();
    text.push_str(&DIAGNOSTICS_COLUMNS.join(","));
    text.push('\n');
    for (step, r) in records.iter().enumerate() {
        let zeta = r.zeta_star.map(fmt_f64).unwrap_or_default();
        let flagged = if r.zeta_star.is_none() { "1" } else { "0" };
        let ratio = r.picard_max_ratio.map(fmt_f64).unwrap_or_default();
        writeln!(
            text,
            "{step},{},{},{},{},{},{},{},{},{},{},{},{zeta},{flagged},{},{},{},{},{},{},{},{ratio},{},{},{}",
            fmt_f64(r.t),
            fmt_f64(r.energy),
            fmt_f64(r.rate_step),
            fmt_f64(r.rate_cum),
            fmt_f64(r.source_step),
            fmt_f64(r.source_cum),
            fmt_f64(r.boundary_work_step),
            fmt_f64(r.boundary_work_cum),
            fmt_f64(r.grad_mu),
            fmt_f64(r.w_norm),
            fmt_f64(r.xi_w_inner),
            fmt_f64(r.u_min),
            fmt_f64(r.u_max),
            fmt_f64(r.mu_shift_linf),
            fmt_f64(r.min_dissipation),
            fmt_f64(r.ledger_residual),
            fmt_f64(r.mu_flat_dot_norm),
            r.picard_iterations,
            r.newton_iterations,
            fmt_f64(r.elliptic_residual),
            u8::from(r.fallback_used),
        )
        .unwrap();
    }
    fs::write(path, text).map_err(io_err(path))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub step: usize,
    pub t: f64,
    pub file: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunFailureInfo {
    pub at_step: usize,
    pub message: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnDoc {
    pub snapshot: Vec<String>,
    pub diagnostics: Vec<String>,
}

/// Everything needed to reproduce and audit a stored run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub command: String,
    pub config: serde_json::Value,
    pub derived: DerivedConstants,
    pub columns: ColumnDoc,
    pub subsample: usize,
    pub seed: u64,
    pub snapshots: Vec<SnapshotEntry>,
    pub error: Option<RunFailureInfo>,
}

/// Diagnostic verdicts of one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReports {
    pub energy: EnergyReport,
    pub max_principle: MaxPrincipleReport,
    pub mu_linf: MuLinfReport,
    pub zeta_star_budget: BudgetReport,
    /// Observed sup over the run of ‖μ − μ♭‖∞.
    pub m_run: f64,
    pub m_pre: f64,
    pub m_effective: f64,
    /// Whether the provisional bound covered the observed one, which is what
    /// makes the a-priori threshold placement valid for this run.
    pub truncation_consistent: bool,
    pub kstar_low_posterior: f64,
    pub kstar_high_posterior: f64,
    pub all_pass: bool,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), OutputError> {
    let text = serde_json::to_string_pretty(value).map_err(|source| OutputError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, text + "\n").map_err(io_err(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, OutputError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| OutputError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn snapshot_file_name(step: usize) -> String {
    format!("step_{step:06}.csv")
}

/// Loop CSV of a hysteresis rung: columns s, f, ku_pde, ku_stop.
pub fn write_loop_csv(
    path: &Path,
    samples: &[crate::hysteresis::LoopSample],
) -> Result<(), OutputError> {
    let mut text = String::from("s,f,ku_pde,ku_stop\n");
    for s in samples {
        writeln!(
            text,
            "{},{},{},{}",
            fmt_f64(s.s),
            fmt_f64(s.f),
            fmt_f64(s.ku_pde),
            fmt_f64(s.ku_stop)
        )
        .unwrap();
    }
    fs::write(path, text).map_err(io_err(path))
}
