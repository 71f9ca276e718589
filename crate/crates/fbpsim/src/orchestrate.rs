//! Command pipelines: single runs, sweep matrices, hysteresis ladders, and
//! offline re-checking of stored runs.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{self, DiagnosticsRecord};
use crate::grid::{self, Field, Grid};
use crate::hysteresis::{self, HysteresisError, SlowDrivingExperiment};
use crate::integrator::{self, Model, StepError};
use crate::output::{
    self, ColumnDoc, Manifest, OutputError, RunFailureInfo, RunReports, SnapshotEntry,
};
use crate::potentials::Potential;
use crate::scenario::{
    self, graph_from_config, potential_from_config, DerivedConstants, ScenarioConfig,
    ScenarioError,
};

#[derive(Debug, Error)]
pub enum OrchestrateError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Hysteresis(#[from] HysteresisError),
    #[error("{0}")]
    BadRequest(String),
    #[error("check failed: {0}")]
    CheckFailed(String),
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORTS_FILE: &str = "reports.json";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const SNAPSHOT_DIR: &str = "snapshots";

/// Everything a caller may want after a completed run.
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub reports: RunReports,
    pub final_u: Field,
    pub error: Option<RunFailureInfo>,
}

impl RunArtifacts {
    pub fn succeeded(&self) -> bool {
        self.error.is_none() && self.reports.all_pass
    }
}

/// The shared report computation: a pure function of the record sequence and
/// the derived constants, so the offline check reproduces it bit for bit.
/// Disabled toggles leave their report informational.
fn compute_reports(
    potential: &Potential,
    model: &Model,
    derived: &DerivedConstants,
    toggles: &scenario::DiagnosticsToggles,
    records: &[DiagnosticsRecord],
) -> RunReports {
    let energy = diagnostics::energy_check(records);
    let mu_linf = diagnostics::mu_linf_check(records);
    let m_run = mu_linf.sup;
    let m_posterior = m_run.max(1e-12);
    let (k_lo, k_hi, _) = potential
        .thresholds_containing(m_posterior, derived.u0_min, derived.u0_max)
        .unwrap_or((derived.kstar_low, derived.kstar_high, derived.m_effective));
    let max_principle = diagnostics::max_principle_check(records, k_lo, k_hi);
    let budget = diagnostics::zeta_star_budget_check(records, derived.k1, &model.graph);
    let truncation_consistent = m_run <= derived.m_effective;
    let all_pass = (!toggles.energy || energy.pass)
        && (!toggles.max_principle || (max_principle.pass && truncation_consistent))
        && (!toggles.zeta_star || budget.pass)
        && (!toggles.mu_linf || mu_linf.all_finite);
    RunReports {
        energy,
        max_principle,
        mu_linf,
        zeta_star_budget: budget,
        m_run,
        m_pre: derived.m_pre,
        m_effective: derived.m_effective,
        truncation_consistent,
        kstar_low_posterior: k_lo,
        kstar_high_posterior: k_hi,
        all_pass,
    }
}

/// Simulate one prepared scenario and write the full artifact set.
pub fn run_to_dir(
    config: &ScenarioConfig,
    config_dir: &Path,
    out_dir: &Path,
    subsample_override: Option<usize>,
    command: &str,
) -> Result<RunArtifacts, OrchestrateError> {
    let prepared = scenario::prepare(config, config_dir)?;
    let out = integrator::run(&prepared.model, &prepared.schedule, &prepared.datum, &prepared.u0)?;

    let snap_dir = out_dir.join(SNAPSHOT_DIR);
    std::fs::create_dir_all(&snap_dir).map_err(|source| OutputError::Io {
        path: snap_dir.clone(),
        source,
    })?;

    let subsample = subsample_override.unwrap_or(prepared.config.output.subsample).max(1);
    let last = out.states.len() - 1;
    let mut snapshots = Vec::new();
    for (i, state) in out.states.iter().enumerate() {
        if i % subsample != 0 && i != last {
            continue;
        }
        let file = output::snapshot_file_name(i);
        output::write_snapshot(&snap_dir.join(&file), state)?;
        snapshots.push(SnapshotEntry {
            step: i,
            t: state.t,
            file: format!("{SNAPSHOT_DIR}/{file}"),
        });
    }
    output::write_diagnostics_csv(&out_dir.join(DIAGNOSTICS_FILE), &out.records)?;

    let potential = potential_from_config(&prepared.config.potential);
    let reports = compute_reports(
        &potential,
        &prepared.model,
        &prepared.derived,
        &prepared.config.diagnostics,
        &out.records,
    );
    let error = out
        .error
        .as_ref()
        .map(|f| RunFailureInfo { at_step: f.at_step, message: f.message.clone() });

    let manifest = Manifest {
        format_version: 1,
        command: command.to_string(),
        config: serde_json::to_value(&prepared.config).expect("config serializes"),
        derived: prepared.derived.clone(),
        columns: ColumnDoc {
            snapshot: snapshot_columns(&prepared.model.grid),
            diagnostics: output::DIAGNOSTICS_COLUMNS.iter().map(|s| s.to_string()).collect(),
        },
        subsample,
        seed: prepared.config.seed,
        snapshots,
        error: error.clone(),
    };
    output::write_json(&out_dir.join(MANIFEST_FILE), &manifest)?;
    output::write_json(&out_dir.join(REPORTS_FILE), &reports)?;

    Ok(RunArtifacts {
        out_dir: out_dir.to_path_buf(),
        reports,
        final_u: out.states.last().expect("nonempty").u.clone(),
        error,
    })
}

fn snapshot_columns(grid: &Arc<Grid>) -> Vec<String> {
    let cols = if grid.dim() == 2 {
        output::SNAPSHOT_COLUMNS_2D
    } else {
        output::SNAPSHOT_COLUMNS_1D
    };
    cols.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellSummary {
    pub index: usize,
    pub dir: String,
    pub overrides: Vec<(String, f64)>,
    pub all_pass: bool,
    pub m_run: f64,
    pub error: Option<RunFailureInfo>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefinementReport {
    /// ‖u_final(τᵢ) − u_final(τᵢ₊₁)‖∞ between consecutive cells.
    pub final_diffs: Vec<f64>,
    /// Ratios of consecutive diffs; near 2 indicates first-order behavior
    /// under τ halving.
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub cells: Vec<CellSummary>,
    pub refinement: Option<RefinementReport>,
}

/// One run per cell of the cartesian override matrix; cells execute
/// concurrently on the ambient thread pool, each writing its own directory.
pub fn sweep_to_dir(
    config: &ScenarioConfig,
    config_dir: &Path,
    out_dir: &Path,
) -> Result<SweepReport, OrchestrateError> {
    let sweep = config.sweep.as_ref().ok_or_else(|| {
        OrchestrateError::BadRequest("the sweep command needs a [sweep] block".into())
    })?;
    if sweep.axes.is_empty() {
        return Err(OrchestrateError::BadRequest("sweep needs at least one axis".into()));
    }
    let mut cells: Vec<Vec<(String, f64)>> = vec![Vec::new()];
    for axis in &sweep.axes {
        let mut next = Vec::new();
        for cell in &cells {
            for &v in &axis.values {
                let mut c = cell.clone();
                c.push((axis.key.clone(), v));
                next.push(c);
            }
        }
        cells = next;
    }

    std::fs::create_dir_all(out_dir).map_err(|source| OutputError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;

    let results: Result<Vec<(CellSummary, Field)>, OrchestrateError> = cells
        .par_iter()
        .enumerate()
        .map(|(index, overrides)| {
            let mut cell_config = config.clone();
            cell_config.sweep = None;
            for (key, value) in overrides {
                cell_config = scenario::apply_override(&cell_config, key, *value)?;
            }
            let dir_name = format!("cell_{index:03}");
            let cell_dir = out_dir.join(&dir_name);
            let artifacts =
                run_to_dir(&cell_config, config_dir, &cell_dir, None, "sweep-cell")?;
            Ok((
                CellSummary {
                    index,
                    dir: dir_name,
                    overrides: overrides.clone(),
                    all_pass: artifacts.reports.all_pass,
                    m_run: artifacts.reports.m_run,
                    error: artifacts.error.clone(),
                },
                artifacts.final_u,
            ))
        })
        .collect();
    let mut results = results?;
    results.sort_by_key(|(c, _)| c.index);

    // refinement diffs along a pure time.tau sweep
    let refinement = if sweep.axes.len() == 1 && sweep.axes[0].key == "time.tau" {
        let finals: Vec<&Field> = results.iter().map(|(_, f)| f).collect();
        let mut diffs = Vec::new();
        for pair in finals.windows(2) {
            diffs.push(grid::linf_norm(&pair[0].sub(pair[1]).expect("same grid")));
        }
        let ratios = diffs
            .windows(2)
            .map(|p| if p[1] > 0.0 { p[0] / p[1] } else { f64::INFINITY })
            .collect();
        Some(RefinementReport { final_diffs: diffs, ratios })
    } else {
        None
    };

    let report = SweepReport {
        cells: results.into_iter().map(|(c, _)| c).collect(),
        refinement,
    };
    output::write_json(&out_dir.join("sweep_report.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LadderRungSummary {
    pub tau_char: f64,
    pub distance: f64,
    pub mu_uniformity_defect: f64,
    pub steps: usize,
    pub loop_file: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LadderSummary {
    pub rungs: Vec<LadderRungSummary>,
    pub distances_nonincreasing: bool,
    pub distances_strictly_decreasing: bool,
    /// Gap |u(s=1) − u(s=2)| of the two-period stop reference; the loop is
    /// periodic after the first period.
    pub stop_loop_closure: f64,
}

/// Slow-driving ladder from the config's `[hysteresis]` block.
pub fn hysteresis_to_dir(
    config: &ScenarioConfig,
    out_dir: &Path,
) -> Result<LadderSummary, OrchestrateError> {
    let block = config.hysteresis.as_ref().ok_or_else(|| {
        OrchestrateError::BadRequest("the hysteresis command needs a [hysteresis] block".into())
    })?;
    if config.potential.kind != "quadratic" {
        return Err(OrchestrateError::BadRequest(
            "the slow-driving experiment is defined for the quadratic potential".into(),
        ));
    }
    if config.graph.kind != "sign" {
        return Err(OrchestrateError::BadRequest(
            "the slow-driving experiment is defined for the sign graph".into(),
        ));
    }
    if config.grid.dim != 1 {
        return Err(OrchestrateError::BadRequest(
            "the slow-driving experiment runs on a 1D grid".into(),
        ));
    }
    let u_init = match config.initial.kind.as_str() {
        "constant" => config.initial.value.unwrap_or(0.0),
        _ => {
            return Err(OrchestrateError::BadRequest(
                "the slow-driving experiment needs constant initial data".into(),
            ))
        }
    };

    let experiment = SlowDrivingExperiment {
        n: config.grid.n[0],
        extent: config.grid.extent[0],
        k: config.potential.k.expect("validated"),
        beta0: config.graph.beta0.expect("validated"),
        signal: hysteresis::triangle_wave(block.amplitude, 1),
        u_init,
        tau_chars: block.tau_chars.clone(),
        steps_per_segment: block.steps_per_segment,
        picard_tol: config.picard.tol,
        elliptic_tol: config.elliptic.tol,
    };
    let report = experiment.run()?;

    // closure of the scalar reference over two periods
    let two_periods = hysteresis::triangle_wave(block.amplitude, 2);
    let samples: Vec<f64> = (0..=8192).map(|i| 2.0 * i as f64 / 8192.0).collect();
    let u = hysteresis::stop_on_partition(
        &two_periods,
        experiment.k,
        experiment.beta0,
        u_init,
        &samples,
    )?;
    let stop_loop_closure = (u[4096] - u[8192]).abs();

    std::fs::create_dir_all(out_dir).map_err(|source| OutputError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut rungs = Vec::new();
    for (i, rung) in report.rungs.iter().enumerate() {
        let loop_file = format!("loop_{i:02}.csv");
        output::write_loop_csv(&out_dir.join(&loop_file), &rung.loop_samples)?;
        rungs.push(LadderRungSummary {
            tau_char: rung.tau_char,
            distance: rung.distance,
            mu_uniformity_defect: rung.mu_uniformity_defect,
            steps: rung.steps,
            loop_file,
        });
    }
    let summary = LadderSummary {
        rungs,
        distances_nonincreasing: report.distances_nonincreasing,
        distances_strictly_decreasing: report.distances_strictly_decreasing,
        stop_loop_closure,
    };
    output::write_json(&out_dir.join("ladder_report.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub reports_match: bool,
    pub all_pass: bool,
    pub recomputed: RunReports,
}

/// Re-run the diagnostics of a stored run directory, no simulation involved:
/// rebuild the record sequence from the stored snapshots and recompute every
/// report; the result must match `reports.json` byte for byte.
pub fn check_dir(dir: &Path) -> Result<CheckOutcome, OrchestrateError> {
    let manifest: Manifest = output::read_json(&dir.join(MANIFEST_FILE))?;
    let stored: RunReports = output::read_json(&dir.join(REPORTS_FILE))?;
    if manifest.subsample != 1 {
        return Err(OrchestrateError::BadRequest(format!(
            "check needs every step stored (subsample = 1), this run has {}",
            manifest.subsample
        )));
    }
    let config: ScenarioConfig =
        serde_json::from_value(manifest.config.clone()).map_err(|e| {
            OrchestrateError::CheckFailed(format!("manifest config does not parse: {e}"))
        })?;
    let (scaled, _) = scenario::nondimensionalize(&config);
    let potential = potential_from_config(&scaled.potential);
    let psi_star = potential
        .truncate(manifest.derived.trunc_low, manifest.derived.trunc_high)
        .map_err(|e| OrchestrateError::CheckFailed(format!("stored truncation invalid: {e}")))?;
    let grid = if scaled.grid.dim == 1 {
        Grid::new_1d(scaled.grid.n[0], scaled.grid.extent[0])
    } else {
        Grid::new_2d(scaled.grid.n[0], scaled.grid.n[1], scaled.grid.extent[0], scaled.grid.extent[1])
    }
    .map_err(|e| OrchestrateError::CheckFailed(format!("stored grid invalid: {e}")))?;
    let model = Model {
        grid: grid.clone(),
        graph: graph_from_config(&scaled.graph),
        psi_star,
        elliptic_tol: scaled.elliptic.tol,
        elliptic_max_outer: scaled.elliptic.max_outer,
    };

    let mut states = Vec::with_capacity(manifest.snapshots.len());
    for entry in &manifest.snapshots {
        let state = output::read_snapshot(&dir.join(&entry.file), &grid, entry.t)?;
        states.push(state);
    }
    if states.is_empty() {
        return Err(OrchestrateError::CheckFailed("no snapshots stored".into()));
    }
    let records = diagnostics::rebuild_records(&states, &model);
    let recomputed = compute_reports(&potential, &model, &manifest.derived, &config.diagnostics, &records);

    let reports_match = serde_json::to_string(&recomputed).expect("serializes")
        == serde_json::to_string(&stored).expect("serializes");
    Ok(CheckOutcome { reports_match, all_pass: recomputed.all_pass, recomputed })
}
