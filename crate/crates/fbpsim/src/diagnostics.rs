//! Runtime-checked counterparts of the system's a-priori estimates.
//!
//! Per time level the recorder stores the energy ∫ψ*(u), the cumulative
//! dissipation ledger τ·(‖w‖² + ⟨ξ,w⟩ + ∫|∇μ|²), the boundary-work budget,
//! the ζ*-budget ½‖∇μ‖² + ½‖w‖² + ∫ζ*(ξ), extremal values of u, the bound
//! ‖μ − μ♭‖∞ and the nodewise dissipation ξ·w. The check functions turn
//! those ledgers into pass/fail reports with explicit margins. Every check is
//! a pure function of the trajectory, so re-running diagnostics on stored
//! snapshots reproduces bit-identical reports.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graphs::{Extended, MonotoneGraph};
use crate::grid::{self, Field};
use crate::integrator::{self, BoundaryDatum, Model, Schedule, SimState, StepStats};
use crate::signal::TimeSeries;

/// Per-step diagnostic quantities. Cumulative columns carry their own running
/// sums so a record row is self-contained.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// ∫ψ*(u); equals ∫ψ(u) while u stays in the kept interval.
    pub energy: f64,
    pub rate_step: f64,
    pub rate_cum: f64,
    /// τ·∫|μ♭ w| (the majorant actually used by the energy inequality).
    pub source_step: f64,
    pub source_cum: f64,
    /// Signed pairing τ·⟨μ♭, w⟩.
    pub boundary_work_step: f64,
    pub boundary_work_cum: f64,
    pub grad_mu: f64,
    pub w_norm: f64,
    pub xi_w_inner: f64,
    /// ∫ζ*(ξ); `None` flags a membership defect beyond the solver tolerance.
    pub zeta_star: Option<f64>,
    pub u_min: f64,
    pub u_max: f64,
    pub mu_shift_linf: f64,
    /// min over nodes of ξ·w.
    pub min_dissipation: f64,
    /// |⟨w, μ⟩ + ⟨μ, Aμ⟩|, the raw closure defect of the tested equations.
    pub ledger_residual: f64,
    /// ‖(μ♭ⁿ − μ♭ⁿ⁻¹)/τ‖ entering the ζ*-budget majorant.
    pub mu_flat_dot_norm: f64,
    pub picard_iterations: usize,
    pub picard_max_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub picard_gaps: Vec<f64>,
    pub newton_iterations: usize,
    pub elliptic_residual: f64,
    pub fallback_used: bool,
}

/// Tolerance below which a ζ*-domain violation counts as solver slack rather
/// than a membership defect.
fn membership_slack(state: &SimState, model: &Model) -> f64 {
    // g = μ − w − ξ reconstructs the datum of the defining elliptic solve
    let g_norm = state
        .mu
        .values()
        .iter()
        .zip(state.w.values())
        .zip(state.xi.values())
        .map(|((&m, &w), &xi)| (m - w - xi) * (m - w - xi))
        .sum::<f64>()
        .sqrt();
    10.0 * model.elliptic_tol * (1.0 + g_norm)
}

fn zeta_star_integral(state: &SimState, model: &Model) -> Option<f64> {
    let slack = membership_slack(state, model);
    let weight = state.u.grid().cell_weight();
    let mut sum = 0.0;
    for &xi in state.xi.values() {
        match model.graph.zeta_star_tol(xi, slack) {
            Extended::Finite(v) => sum += v,
            Extended::PosInf => return None,
        }
    }
    Some(weight * sum)
}

fn shared_columns(state: &SimState, model: &Model) -> (f64, f64, f64, f64, f64, f64) {
    let energy = state.u.grid().cell_weight()
        * state.u.values().iter().map(|&u| model.psi_star.value(u)).sum::<f64>();
    let grad_mu = grid::grad_energy(&state.mu);
    let w_norm = grid::l2_norm(&state.w);
    let xi_w_inner = grid::l2_inner(&state.xi, &state.w).expect("same grid");
    let mu_shift = grid::linf_norm(&state.mu.sub(&state.mu_flat).expect("same grid"));
    let min_diss = state
        .xi
        .values()
        .iter()
        .zip(state.w.values())
        .map(|(&xi, &w)| xi * w)
        .fold(f64::INFINITY, f64::min);
    (energy, grad_mu, w_norm, xi_w_inner, mu_shift, min_diss)
}

pub fn record_initial(state: &SimState, model: &Model) -> DiagnosticsRecord {
    let (energy, grad_mu, w_norm, xi_w_inner, mu_shift, min_diss) = shared_columns(state, model);
    DiagnosticsRecord {
        t: state.t,
        energy,
        rate_step: 0.0,
        rate_cum: 0.0,
        source_step: 0.0,
        source_cum: 0.0,
        boundary_work_step: 0.0,
        boundary_work_cum: 0.0,
        grad_mu,
        w_norm,
        xi_w_inner,
        zeta_star: zeta_star_integral(state, model),
        u_min: state.u.min(),
        u_max: state.u.max(),
        mu_shift_linf: mu_shift,
        min_dissipation: min_diss,
        ledger_residual: 0.0,
        mu_flat_dot_norm: 0.0,
        picard_iterations: 0,
        picard_max_ratio: None,
        picard_gaps: Vec::new(),
        newton_iterations: 0,
        elliptic_residual: 0.0,
        fallback_used: false,
    }
}

pub fn record_step(
    prev: &DiagnosticsRecord,
    prev_state: &SimState,
    state: &SimState,
    stats: &StepStats,
    model: &Model,
) -> DiagnosticsRecord {
    let tau = state.t - prev_state.t;
    let (energy, grad_mu, w_norm, xi_w_inner, mu_shift, min_diss) = shared_columns(state, model);

    let rate_step = tau * (w_norm * w_norm + xi_w_inner + grad_mu);
    let weight = state.u.grid().cell_weight();
    let source_step = tau
        * weight
        * state
            .mu_flat
            .values()
            .iter()
            .zip(state.w.values())
            .map(|(&mf, &w)| (mf * w).abs())
            .sum::<f64>();
    let boundary_work_step =
        tau * grid::l2_inner(&state.mu_flat, &state.w).expect("same grid");

    let amu = grid::apply_a(&state.mu);
    let ledger_residual = (grid::l2_inner(&state.w, &state.mu).expect("same grid")
        + grid::l2_inner(&state.mu, &amu).expect("same grid"))
    .abs();

    let dlast = state.mu_flat.sub(&prev_state.mu_flat).expect("same grid");
    let mu_flat_dot_norm = grid::l2_norm(&dlast) / tau;

    let picard_max_ratio = stats
        .picard_gaps
        .windows(2)
        .filter(|p| p[0] > 0.0)
        .map(|p| p[1] / p[0])
        .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.max(r))));

    DiagnosticsRecord {
        t: state.t,
        energy,
        rate_step,
        rate_cum: prev.rate_cum + rate_step,
        source_step,
        source_cum: prev.source_cum + source_step,
        boundary_work_step,
        boundary_work_cum: prev.boundary_work_cum + boundary_work_step,
        grad_mu,
        w_norm,
        xi_w_inner,
        zeta_star: zeta_star_integral(state, model),
        u_min: state.u.min(),
        u_max: state.u.max(),
        mu_shift_linf: mu_shift,
        min_dissipation: min_diss,
        ledger_residual,
        mu_flat_dot_norm,
        picard_iterations: stats.picard_iterations,
        picard_max_ratio,
        picard_gaps: stats.picard_gaps.clone(),
        newton_iterations: stats.newton_iterations,
        elliptic_residual: stats.elliptic_residual_max,
        fallback_used: stats.fallback_used,
    }
}

/// Rebuild the physics columns of the record sequence from stored states
/// (solver columns are zeroed). Used by the offline `check` path.
pub fn rebuild_records(states: &[SimState], model: &Model) -> Vec<DiagnosticsRecord> {
    let mut records = Vec::with_capacity(states.len());
    if states.is_empty() {
        return records;
    }
    records.push(record_initial(&states[0], model));
    for i in 1..states.len() {
        let rec = record_step(
            &records[i - 1],
            &states[i - 1],
            &states[i],
            &StepStats::default(),
            model,
        );
        records.push(rec);
    }
    records
}

const XI_W_FLOOR: f64 = -1e-9;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyReport {
    pub pass: bool,
    /// min over steps of (right side + slack − left side) of the inequality.
    pub worst_margin: f64,
    pub min_xi_w_inner: f64,
    pub min_dissipation: f64,
    pub steps: usize,
}

/// Cumulative energy inequality:
/// E(t) + Σ τ(‖w‖² + ⟨ξ,w⟩ + ∫|∇μ|²) ≤ E(0) + Σ τ∫|μ♭ w| + slack,
/// with slack = 1e-6·(1 + involved magnitudes), plus positivity of the
/// dissipation pairing at every step.
pub fn energy_check(records: &[DiagnosticsRecord]) -> EnergyReport {
    assert!(!records.is_empty(), "energy_check needs a trajectory");
    let e0 = records[0].energy;
    let mut worst = f64::INFINITY;
    let mut min_inner = f64::INFINITY;
    let mut min_diss = f64::INFINITY;
    for r in records {
        let lhs = r.energy + r.rate_cum;
        let rhs = e0 + r.source_cum;
        let slack = 1e-6 * (1.0 + e0.abs() + r.energy.abs() + r.rate_cum.abs() + r.source_cum);
        worst = worst.min(rhs + slack - lhs);
        min_inner = min_inner.min(r.xi_w_inner);
        min_diss = min_diss.min(r.min_dissipation);
    }
    EnergyReport {
        pass: worst >= 0.0 && min_inner >= XI_W_FLOOR && min_diss >= XI_W_FLOOR,
        worst_margin: worst,
        min_xi_w_inner: min_inner,
        min_dissipation: min_diss,
        steps: records.len(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaxPrincipleReport {
    pub pass: bool,
    pub kstar_low: f64,
    pub kstar_high: f64,
    /// min over steps of (u_min − (k_low − ε)); negative means violation.
    pub low_margin: f64,
    pub high_margin: f64,
}

const MAX_PRINCIPLE_EPS: f64 = 1e-8;

/// Confinement k_low − ε ≤ u ≤ k_high + ε at every recorded level.
pub fn max_principle_check(
    records: &[DiagnosticsRecord],
    kstar_low: f64,
    kstar_high: f64,
) -> MaxPrincipleReport {
    let mut low = f64::INFINITY;
    let mut high = f64::INFINITY;
    for r in records {
        low = low.min(r.u_min - (kstar_low - MAX_PRINCIPLE_EPS));
        high = high.min(kstar_high + MAX_PRINCIPLE_EPS - r.u_max);
    }
    MaxPrincipleReport {
        pass: low >= 0.0 && high >= 0.0,
        kstar_low,
        kstar_high,
        low_margin: low,
        high_margin: high,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MuLinfReport {
    pub sup: f64,
    pub all_finite: bool,
}

pub fn mu_linf_check(records: &[DiagnosticsRecord]) -> MuLinfReport {
    let sup = records.iter().fold(0.0f64, |m, r| m.max(r.mu_shift_linf));
    MuLinfReport { sup, all_finite: sup.is_finite() }
}

/// Stability of the μ-bound under time refinement: the sups of two runs of
/// the same scenario at τ and τ/2 must agree within 10%.
pub fn mu_linf_refinement_stable(sup_coarse: f64, sup_fine: f64) -> bool {
    let scale = sup_coarse.abs().max(sup_fine.abs());
    if scale == 0.0 {
        return true;
    }
    (sup_coarse - sup_fine).abs() <= 0.10 * scale
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BudgetReport {
    /// True for the zero graph, whose ζ* is the indicator of {0} and whose
    /// budget is identically trivial.
    pub skipped: bool,
    pub pass: bool,
    pub worst_margin: f64,
    pub flagged_steps: usize,
}

/// ζ*-budget: B(t) = ½∫|∇μ|² + ½‖w‖² + ∫ζ*(ξ) stays below
/// B(0) + Σ τ(‖∂ₜμ♭‖·‖w‖ + K₁‖w‖²) + slack.
pub fn zeta_star_budget_check(
    records: &[DiagnosticsRecord],
    k1: f64,
    graph: &MonotoneGraph,
) -> BudgetReport {
    if matches!(graph, MonotoneGraph::Zero) {
        return BudgetReport { skipped: true, pass: true, worst_margin: 0.0, flagged_steps: 0 };
    }
    assert!(!records.is_empty());
    let b_at = |r: &DiagnosticsRecord| {
        r.zeta_star.map(|z| 0.5 * r.grad_mu + 0.5 * r.w_norm * r.w_norm + z)
    };
    let mut flagged = 0usize;
    let mut worst = f64::INFINITY;
    let b0 = match b_at(&records[0]) {
        Some(b) => b,
        None => {
            return BudgetReport {
                skipped: false,
                pass: false,
                worst_margin: f64::NEG_INFINITY,
                flagged_steps: 1,
            }
        }
    };
    let mut majorant = 0.0;
    for i in 1..records.len() {
        let r = &records[i];
        let tau = r.t - records[i - 1].t;
        majorant += tau * (r.mu_flat_dot_norm * r.w_norm + k1 * r.w_norm * r.w_norm);
        match b_at(r) {
            Some(b) => {
                let slack = 1e-6 * (1.0 + b0 + majorant + b.abs());
                worst = worst.min(b0 + majorant + slack - b);
            }
            None => flagged += 1,
        }
    }
    BudgetReport {
        skipped: false,
        pass: flagged == 0 && worst >= 0.0,
        worst_margin: worst,
        flagged_steps: flagged,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub scale: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeReport {
    pub outcomes: Vec<ProbeOutcome>,
    /// max ρ / min ρ across the scales.
    pub spread: f64,
    pub pass: bool,
}

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("probe run failed at step {at_step}: {message}")]
    RunFailed { at_step: usize, message: String },
    #[error(transparent)]
    Step(#[from] integrator::StepError),
}

impl From<&integrator::RunFailure> for ProbeError {
    fn from(f: &integrator::RunFailure) -> Self {
        ProbeError::RunFailed { at_step: f.at_step, message: f.message.clone() }
    }
}

/// Continuous-dependence probe: run the base scenario and, for each scale s,
/// the scenario perturbed by (s·du₀, s·dμ); the ratio
///
/// ρ(s) = max_t(‖Δu‖ + ‖Δw‖ + ‖Δμ‖_∇) / (s·(‖du₀‖ + max_t ‖dμ‖))
///
/// must stay within a factor 3 across scales for a stable solution map.
pub fn continuous_dependence_probe(
    model: &Model,
    schedule: &Schedule,
    base_signal: &TimeSeries,
    u0: &Field,
    du0: &Field,
    dmu: &TimeSeries,
    scales: &[f64],
) -> Result<ProbeReport, ProbeError> {
    let base = integrator::run(model, schedule, &BoundaryDatum::Uniform(base_signal.clone()), u0)?;
    if let Some(f) = &base.error {
        return Err(f.into());
    }
    // perturbation size in the trajectory norms
    let du0_norm = grid::l2_norm(du0);
    let dmu_norm = base
        .states
        .iter()
        .map(|s| grid::l2_norm(&Field::constant(&model.grid, dmu.eval(s.t))))
        .fold(0.0f64, f64::max);
    let denom_unit = du0_norm + dmu_norm;

    let outcomes: Result<Vec<ProbeOutcome>, ProbeError> = scales
        .par_iter()
        .map(|&s| {
            let u0_pert = u0.add_scaled(s, du0).expect("same grid");
            let signal = base_signal.add(dmu, s);
            let out =
                integrator::run(model, schedule, &BoundaryDatum::Uniform(signal), &u0_pert)?;
            if let Some(f) = &out.error {
                return Err(f.into());
            }
            let mut worst = 0.0f64;
            for (a, b) in base.states.iter().zip(&out.states) {
                let du = b.u.sub(&a.u).expect("same grid");
                let dw = b.w.sub(&a.w).expect("same grid");
                let dmu_f = b.mu.sub(&a.mu).expect("same grid");
                let v_norm = grid::grad_energy(&dmu_f).sqrt();
                worst = worst.max(grid::l2_norm(&du) + grid::l2_norm(&dw) + v_norm);
            }
            let denom = s * denom_unit;
            let rho = if denom > 0.0 { worst / denom } else { 0.0 };
            Ok(ProbeOutcome { scale: s, rho })
        })
        .collect();
    let outcomes = outcomes?;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for o in &outcomes {
        lo = lo.min(o.rho);
        hi = hi.max(o.rho);
    }
    let spread = if lo > 0.0 { hi / lo } else if hi == 0.0 { 1.0 } else { f64::INFINITY };
    Ok(ProbeReport { outcomes, spread, pass: spread <= 3.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::integrator::Scheme;
    use crate::potentials::Potential;
    use std::sync::Arc;

    fn model(grid: &Arc<Grid>, graph: MonotoneGraph) -> Model {
        Model {
            grid: grid.clone(),
            graph,
            psi_star: Potential::Quadratic { k: 1.0 }.truncate(-1.0, 1.0).unwrap(),
            elliptic_tol: 1e-12,
            elliptic_max_outer: 200,
        }
    }

    fn run_scenario(
        model: &Model,
        signal: TimeSeries,
        u0: Field,
        tau: f64,
        t_end: f64,
    ) -> integrator::RunOutput {
        let schedule = Schedule::new(
            t_end,
            tau,
            Scheme::PicardImplicit,
            1e-12,
            300,
            model.psi_star.lipschitz(),
        )
        .unwrap();
        integrator::run(model, &schedule, &BoundaryDatum::Uniform(signal), &u0).unwrap()
    }

    #[test]
    fn zero_trajectory_passes_everything() {
        let grid = Grid::new_1d(15, 1.0).unwrap();
        let m = model(&grid, MonotoneGraph::scaled_sign(0.5).unwrap());
        let out = run_scenario(&m, TimeSeries::constant(0.0), Field::zeros(&grid), 0.1, 1.0);
        assert!(out.error.is_none());
        let e = energy_check(&out.records);
        assert!(e.pass);
        assert_eq!(e.min_dissipation, 0.0);
        let b = zeta_star_budget_check(&out.records, 0.0, &m.graph);
        assert!(b.pass && !b.skipped);
        assert_eq!(mu_linf_check(&out.records).sup, 0.0);
    }

    #[test]
    fn pure_dissipation_decays_energy() {
        // β = Zero, quadratic ψ, μ♭ = 0: the energy is strictly nonincreasing
        let grid = Grid::new_1d(31, 1.0).unwrap();
        let m = model(&grid, MonotoneGraph::Zero);
        let u0 = Field::from_fn(&grid, |x, _| (std::f64::consts::PI * x).sin());
        let out = run_scenario(&m, TimeSeries::constant(0.0), u0, 0.05, 1.0);
        assert!(out.error.is_none());
        for pair in out.records.windows(2) {
            assert!(pair[1].energy <= pair[0].energy + 1e-12);
        }
        assert!(energy_check(&out.records).pass);
        // budget check is skipped for the zero graph
        assert!(zeta_star_budget_check(&out.records, 0.0, &m.graph).skipped);
    }

    #[test]
    fn sign_graph_dissipation_nonnegative() {
        let grid = Grid::new_1d(21, 1.0).unwrap();
        let m = model(&grid, MonotoneGraph::scaled_sign(0.2).unwrap());
        let u0 = Field::from_fn(&grid, |x, _| 0.3 * (2.0 * std::f64::consts::PI * x).sin());
        let signal = TimeSeries::new(vec![0.0, 1.0], vec![0.0, 0.7]).unwrap();
        let out = run_scenario(&m, signal, u0, 0.05, 1.0);
        assert!(out.error.is_none());
        let e = energy_check(&out.records);
        assert!(e.pass, "worst margin {}", e.worst_margin);
        // step states carry the sign-exact selection; t = 0 only to residual
        for r in &out.records[1..] {
            assert!(r.min_dissipation >= 0.0);
        }
        assert!(e.min_dissipation >= -1e-9);
        let b = zeta_star_budget_check(&out.records, 0.0, &m.graph);
        assert!(b.pass, "budget margin {}", b.worst_margin);
    }

    #[test]
    fn interval_budget_is_finite() {
        let grid = Grid::new_1d(21, 1.0).unwrap();
        let m = model(&grid, MonotoneGraph::indicator_interval(-0.2, 0.3).unwrap());
        let u0 = Field::zeros(&grid);
        let signal = TimeSeries::new(vec![0.0, 0.5, 1.0], vec![0.0, 1.5, -1.0]).unwrap();
        let out = run_scenario(&m, signal, u0, 0.05, 1.0);
        assert!(out.error.is_none());
        for r in &out.records {
            assert!(r.zeta_star.is_some(), "interval zeta* is finite everywhere");
            assert!(r.zeta_star.unwrap() >= 0.0);
        }
        assert!(zeta_star_budget_check(&out.records, 0.0, &m.graph).pass);
    }

    #[test]
    fn ledger_closes_to_solver_tolerance() {
        let grid = Grid::new_1d(25, 1.0).unwrap();
        let m = model(&grid, MonotoneGraph::scaled_sign(0.1).unwrap());
        let u0 = Field::from_fn(&grid, |x, _| 0.2 * (3.0 * x).sin());
        let signal = TimeSeries::new(vec![0.0, 1.0], vec![0.2, 0.6]).unwrap();
        let out = run_scenario(&m, signal, u0, 0.1, 1.0);
        assert!(out.error.is_none());
        for r in &out.records[1..] {
            assert!(r.ledger_residual <= 1e-9, "ledger defect {}", r.ledger_residual);
        }
    }

    #[test]
    fn max_principle_scalar_oracle() {
        // scalar analogue: u' = R(μ̄ − ψ'(u)) with |μ̄| ≤ M never crosses the
        // thresholds where |ψ'| ≥ M
        let p = Potential::DoubleWell { k: 1.0 };
        let m_bound = 0.8;
        let (k_lo, k_hi) = p.thresholds(m_bound).unwrap();
        let graph = MonotoneGraph::scaled_sign(0.05).unwrap();
        let tau = 1e-3;
        for mu_bar in [m_bound, -m_bound, 0.5 * m_bound] {
            let mut u = 0.5f64;
            for _ in 0..20_000 {
                u += tau * graph.resolvent(1.0, mu_bar - p.prime(u).unwrap());
                assert!(u >= k_lo - 1e-8 && u <= k_hi + 1e-8, "scalar orbit escaped");
            }
            // the rate vanishes (or points inward) past the thresholds
            let beyond = k_hi + 0.1;
            assert!(graph.resolvent(1.0, mu_bar - p.prime(beyond).unwrap()) <= 0.0);
            let below = k_lo - 0.1;
            assert!(graph.resolvent(1.0, mu_bar - p.prime(below).unwrap()) >= 0.0);
            // starting exactly on the threshold: the rate has the confining sign
            assert!(graph.resolvent(1.0, mu_bar - p.prime(k_hi).unwrap()) <= 1e-12);
            assert!(graph.resolvent(1.0, mu_bar - p.prime(k_lo).unwrap()) >= -1e-12);
        }
    }

    #[test]
    fn max_principle_check_reports_violation() {
        let grid = Grid::new_1d(9, 1.0).unwrap();
        let m = model(&grid, MonotoneGraph::Zero);
        let out = run_scenario(&m, TimeSeries::constant(0.0), Field::zeros(&grid), 0.1, 0.5);
        let mut records = out.records;
        records[2].u_max = 5.0; // injected fault
        let report = max_principle_check(&records, -1.0, 1.0);
        assert!(!report.pass);
        assert!(report.high_margin < 0.0);
    }

    #[test]
    fn refinement_stability_helper() {
        assert!(mu_linf_refinement_stable(1.0, 1.05));
        assert!(!mu_linf_refinement_stable(1.0, 1.2));
        assert!(mu_linf_refinement_stable(0.0, 0.0));
    }

    #[test]
    fn probe_linear_case_is_scale_free() {
        let grid = Grid::new_1d(15, 1.0).unwrap();
        let m = model(&grid, MonotoneGraph::Zero);
        let schedule = Schedule::new(0.5, 0.05, Scheme::PicardImplicit, 1e-13, 300, 1.0).unwrap();
        let base = TimeSeries::new(vec![0.0, 0.5], vec![0.0, 0.3]).unwrap();
        let u0 = Field::from_fn(&grid, |x, _| 0.4 * (std::f64::consts::PI * x).sin());
        let du0 = Field::from_fn(&grid, |x, _| (2.0 * std::f64::consts::PI * x).sin());
        let dmu = TimeSeries::new(vec![0.0, 0.5], vec![0.1, -0.1]).unwrap();
        let report = continuous_dependence_probe(
            &m,
            &schedule,
            &base,
            &u0,
            &du0,
            &dmu,
            &[1e-1, 1e-2, 1e-3],
        )
        .unwrap();
        assert!(report.pass);
        let rhos: Vec<f64> = report.outcomes.iter().map(|o| o.rho).collect();
        for r in &rhos {
            assert!((r - rhos[0]).abs() <= 1e-6 * rhos[0], "rho not scale-free: {rhos:?}");
        }
    }

    #[test]
    fn probe_zero_perturbation_defines_zero() {
        let grid = Grid::new_1d(9, 1.0).unwrap();
        let m = model(&grid, MonotoneGraph::Zero);
        let schedule = Schedule::new(0.2, 0.05, Scheme::PicardImplicit, 1e-12, 300, 1.0).unwrap();
        let base = TimeSeries::constant(0.0);
        let u0 = Field::zeros(&grid);
        let report = continuous_dependence_probe(
            &m,
            &schedule,
            &base,
            &u0,
            &Field::zeros(&grid),
            &TimeSeries::constant(0.0),
            &[0.1, 0.01],
        )
        .unwrap();
        for o in &report.outcomes {
            assert_eq!(o.rho, 0.0);
        }
        assert!(report.pass);
    }

    #[test]
    fn rebuild_matches_recorded_physics() {
        let grid = Grid::new_1d(13, 1.0).unwrap();
        let m = model(&grid, MonotoneGraph::scaled_sign(0.3).unwrap());
        let u0 = Field::from_fn(&grid, |x, _| 0.2 * (4.0 * x).sin());
        let signal = TimeSeries::new(vec![0.0, 1.0], vec![0.1, 0.5]).unwrap();
        let out = run_scenario(&m, signal, u0, 0.1, 1.0);
        let rebuilt = rebuild_records(&out.states, &m);
        assert_eq!(rebuilt.len(), out.records.len());
        for (a, b) in out.records.iter().zip(&rebuilt) {
            assert_eq!(a.t, b.t);
            assert_eq!(a.energy, b.energy);
            assert_eq!(a.rate_cum, b.rate_cum);
            assert_eq!(a.source_cum, b.source_cum);
            assert_eq!(a.zeta_star, b.zeta_star);
            assert_eq!(a.min_dissipation, b.min_dissipation);
            assert_eq!(a.mu_flat_dot_norm, b.mu_flat_dot_norm);
        }
    }
}
