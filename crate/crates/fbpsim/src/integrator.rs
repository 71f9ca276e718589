//! Implicit Euler time stepping for the coupled system
//!
//! ```text
//!   ∂ₜu + A μ = 0,      μ = ∂ₜu + ξ + μ♭ + ψ*'(u),      ξ ∈ β(∂ₜu).
//! ```
//!
//! Each step solves the coupled system by a fixed-point iteration that
//! freezes the argument of ψ*': given vʲ, solve the per-instant elliptic
//! problem with datum g = μ♭ⁿ⁺¹ + ψ*'(vʲ), then update vʲ⁺¹ = uⁿ + τ·w.
//! The iteration map is a contraction with constant τ·L in the h-weighted
//! L² norm, where L is the Lipschitz constant of ψ*'; the schedule rejects
//! τ·L ≥ 1 at construction. A one-pass semi-implicit variant freezes ψ*'
//! at uⁿ.

use std::sync::Arc;

use thiserror::Error;

use crate::diagnostics::{self, DiagnosticsRecord};
use crate::elliptic::{self, EllipticError, EllipticProblem};
use crate::graphs::MonotoneGraph;
use crate::grid::{self, Field, Grid, GridError};
use crate::potentials::TruncatedPotential;
use crate::signal::TimeSeries;

#[derive(Debug, Error)]
pub enum StepError {
    #[error("Picard iteration stalled after {iterations} passes: gap {gap:.3e} with tau*L = {tau_l:.3}; reduce the time step")]
    PicardNonConvergence {
        iterations: usize,
        gap: f64,
        tau_l: f64,
    },
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("tau must be positive, got {0}")]
    BadTau(f64),
    #[error("t_end must be positive, got {0}")]
    BadHorizon(f64),
    #[error("contraction bound violated: tau*L = {tau_l} must be < 1 for the Picard scheme")]
    ContractionBound { tau_l: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    PicardImplicit,
    SemiImplicit,
}

#[derive(Debug, Clone)]
pub struct Schedule {
    pub t_end: f64,
    pub tau: f64,
    pub scheme: Scheme,
    pub picard_tol: f64,
    pub picard_max: usize,
}

impl Schedule {
    /// `lipschitz` is the L of ψ*'; the Picard scheme requires τ·L < 1.
    pub fn new(
        t_end: f64,
        tau: f64,
        scheme: Scheme,
        picard_tol: f64,
        picard_max: usize,
        lipschitz: f64,
    ) -> Result<Schedule, ScheduleError> {
        if !(tau > 0.0) {
            return Err(ScheduleError::BadTau(tau));
        }
        if !(t_end > 0.0) {
            return Err(ScheduleError::BadHorizon(t_end));
        }
        if scheme == Scheme::PicardImplicit && !(tau * lipschitz < 1.0) {
            return Err(ScheduleError::ContractionBound { tau_l: tau * lipschitz });
        }
        Ok(Schedule { t_end, tau, scheme, picard_tol, picard_max })
    }

    pub fn step_count(&self) -> usize {
        (self.t_end / self.tau).round().max(1.0) as usize
    }
}

/// Frozen problem data shared by every step of a run.
#[derive(Debug, Clone)]
pub struct Model {
    pub grid: Arc<Grid>,
    pub graph: MonotoneGraph,
    pub psi_star: TruncatedPotential,
    pub elliptic_tol: f64,
    pub elliptic_max_outer: usize,
}

/// Boundary datum μ♭: a spatially uniform time signal, or a time series of
/// boundary traces that are harmonically extended once per step.
#[derive(Debug, Clone)]
pub enum BoundaryDatum {
    Uniform(TimeSeries),
    Trace { times: Vec<f64>, traces: Vec<Vec<f64>> },
}

impl BoundaryDatum {
    pub fn eval(&self, t: f64, grid: &Arc<Grid>, tol: f64) -> Result<Field, GridError> {
        match self {
            BoundaryDatum::Uniform(series) => Ok(Field::constant(grid, series.eval(t))),
            BoundaryDatum::Trace { times, traces } => {
                let trace = interp_trace(times, traces, t);
                grid::harmonic_extend(grid, &trace, tol)
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            BoundaryDatum::Uniform(series) => series.max_abs(),
            BoundaryDatum::Trace { traces, .. } => traces
                .iter()
                .flat_map(|t| t.iter())
                .fold(0.0f64, |m, v| m.max(v.abs())),
        }
    }
}

fn interp_trace(times: &[f64], traces: &[Vec<f64>], t: f64) -> Vec<f64> {
    let n = times.len();
    if t <= times[0] || n == 1 {
        return traces[0].clone();
    }
    if t >= times[n - 1] {
        return traces[n - 1].clone();
    }
    let hi = times.partition_point(|&s| s <= t);
    let lo = hi - 1;
    let theta = (t - times[lo]) / (times[hi] - times[lo]);
    traces[lo]
        .iter()
        .zip(&traces[hi])
        .map(|(a, b)| a + theta * (b - a))
        .collect()
}

/// State of the simulation at one time level.
#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    pub u: Field,
    pub mu: Field,
    /// Rate w = ∂ₜu, the resolvent output of the last elliptic solve
    /// (equal to −Aμ up to the solver residual).
    pub w: Field,
    /// Graph selection ξ ∈ β(w).
    pub xi: Field,
    pub mu_flat: Field,
}

#[derive(Debug, Clone, Default)]
pub struct StepStats {
    pub picard_iterations: usize,
    /// Iterate gaps ‖vʲ⁺¹ − vʲ‖ in the h-weighted L² norm, one per pass.
    pub picard_gaps: Vec<f64>,
    pub newton_iterations: usize,
    pub elliptic_residual_max: f64,
    pub fallback_used: bool,
}

/// Advance one time level.
pub fn step(
    state: &SimState,
    model: &Model,
    schedule: &Schedule,
    datum: &BoundaryDatum,
) -> Result<(SimState, StepStats), StepError> {
    let tau = schedule.tau;
    let t_next = state.t + tau;
    let mu_flat_next = datum.eval(t_next, &model.grid, model.elliptic_tol)?;
    let mut stats = StepStats::default();

    let mut v = state.u.clone();
    let mut warm = state.mu.clone();
    let single_pass = schedule.scheme == Scheme::SemiImplicit;

    loop {
        stats.picard_iterations += 1;
        let g = Field::from_values(
            &model.grid,
            v.values()
                .iter()
                .zip(mu_flat_next.values())
                .map(|(&vv, &mf)| mf + model.psi_star.prime(vv))
                .collect(),
        )
        .expect("same grid");
        let problem = EllipticProblem {
            grid: &model.grid,
            graph: model.graph,
            g: &g,
            tol: model.elliptic_tol,
            max_outer: model.elliptic_max_outer,
        };
        let sol = elliptic::solve_chemical_potential(&problem, Some(&warm))?;
        stats.newton_iterations += sol.stats.outer_iterations;
        stats.elliptic_residual_max = stats.elliptic_residual_max.max(sol.stats.final_residual);
        stats.fallback_used |= sol.stats.fallback_used;

        let v_next = state.u.add_scaled(tau, &sol.w)?;
        let gap_field = v_next.sub(&v)?;
        let gap_inf = grid::linf_norm(&gap_field);

        if single_pass {
            return Ok((
                finish_step(model, t_next, v_next, sol.mu, sol.w, &g, mu_flat_next),
                stats,
            ));
        }

        stats.picard_gaps.push(grid::l2_norm(&gap_field));
        if gap_inf <= schedule.picard_tol {
            return Ok((
                finish_step(model, t_next, v_next, sol.mu, sol.w, &g, mu_flat_next),
                stats,
            ));
        }
        if stats.picard_iterations >= schedule.picard_max {
            return Err(StepError::PicardNonConvergence {
                iterations: stats.picard_iterations,
                gap: gap_inf,
                tau_l: tau * model.psi_star.lipschitz(),
            });
        }
        v = v_next;
        warm = sol.mu;
    }
}

fn finish_step(
    model: &Model,
    t_next: f64,
    u_next: Field,
    mu: Field,
    w: Field,
    g: &Field,
    mu_flat_next: Field,
) -> SimState {
    // ξ = (μ − g) − R(μ − g), taken through the graph's closed form so the
    // selection is sign-exact nodewise
    let xi = Field::from_values(
        &model.grid,
        mu.values()
            .iter()
            .zip(g.values())
            .map(|(&m, &gv)| model.graph.yosida(1.0, m - gv))
            .collect(),
    )
    .expect("same grid");
    SimState { t: t_next, u: u_next, mu, w, xi, mu_flat: mu_flat_next }
}

/// Outcome of a full run; on a step failure the trajectory computed so far is
/// kept and the failure is recorded instead of discarded.
pub struct RunOutput {
    pub states: Vec<SimState>,
    pub records: Vec<DiagnosticsRecord>,
    pub error: Option<RunFailure>,
}

#[derive(Debug, Clone)]
pub struct RunFailure {
    pub at_step: usize,
    pub message: String,
}

/// Drive a full trajectory from u₀: initialize by the nonlinear elliptic
/// problem at t = 0, then march `schedule.step_count()` implicit steps,
/// recording diagnostics per level.
pub fn run(
    model: &Model,
    schedule: &Schedule,
    datum: &BoundaryDatum,
    u0: &Field,
) -> Result<RunOutput, StepError> {
    let mu_flat0 = datum.eval(0.0, &model.grid, model.elliptic_tol)?;
    let init = elliptic::initial_state(
        &model.grid,
        model.graph,
        &model.psi_star,
        u0,
        &mu_flat0,
        model.elliptic_tol,
        model.elliptic_max_outer,
    )?;
    let mut states = vec![SimState {
        t: 0.0,
        u: u0.clone(),
        mu: init.mu0,
        w: init.w0,
        xi: init.xi0,
        mu_flat: mu_flat0,
    }];
    let mut records = vec![diagnostics::record_initial(&states[0], model)];

    let n_steps = schedule.step_count();
    let mut error = None;
    for i in 0..n_steps {
        let current = states.last().expect("nonempty");
        match step(current, model, schedule, datum) {
            Ok((mut next, stats)) => {
                // keep the time axis exact: t = (i+1)·τ
                next.t = (i + 1) as f64 * schedule.tau;
                let record = diagnostics::record_step(
                    records.last().expect("nonempty"),
                    current,
                    &next,
                    &stats,
                    model,
                );
                states.push(next);
                records.push(record);
            }
            Err(e) => {
                error = Some(RunFailure { at_step: i + 1, message: e.to_string() });
                break;
            }
        }
    }
    Ok(RunOutput { states, records, error })
}

/// Characteristic scales of the dimensional problem: T₀ = α, L₀ = √(m/α).
///
/// Rescaling t̃ = t/T₀, x̃ = x/L₀ absorbs the viscosity α and mobility m into
/// the nondimensional system; the rate graph transforms as β̃(r) = β(r/T₀).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalScales {
    pub alpha: f64,
    pub m: f64,
}

impl PhysicalScales {
    pub fn t0(&self) -> f64 {
        self.alpha
    }

    pub fn l0(&self) -> f64 {
        (self.m / self.alpha).sqrt()
    }
}
