//! Rate-independent limit experiments.
//!
//! For a quadratic free energy ½ku² and the scaled sign graph, driving the
//! boundary datum slowly (signal f(t/τ_c) with τ_c large) makes the bulk
//! chemical potential quasi-static. The concentration then obeys the scalar
//! inclusion f(s) ∈ β₀·sign(∂ₛu) + k·u, the classical stop construction: k·u
//! tracks f inside a band of half-width β₀ and sticks otherwise. This module
//! provides the exact scalar reference (an incremental projection that is
//! rate independent by construction) and the ladder experiment that measures
//! how fast the PDE approaches it as τ_c grows.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graphs::MonotoneGraph;
use crate::grid::{Field, Grid, GridShape};
use crate::integrator::{self, BoundaryDatum, Model, Schedule, Scheme, StepError};
use crate::potentials::Potential;
use crate::signal::TimeSeries;

#[derive(Debug, Error)]
pub enum HysteresisError {
    #[error("initial state outside the band: |f(0) - k*u_init| = {gap} > beta0 = {beta0}")]
    BandViolation { gap: f64, beta0: f64 },
    #[error("slow-driving experiment requires {0}")]
    BadConfig(String),
    #[error("PDE rung failed at step {at_step}: {message}")]
    RunFailed { at_step: usize, message: String },
    #[error(transparent)]
    Step(#[from] StepError),
}

/// Exact stop recursion on the signal's own samples:
/// u_{i+1} = clamp(u_i, (f_{i+1} − β₀)/k, (f_{i+1} + β₀)/k).
///
/// Exact for piecewise-linear signals because the projection commutes with
/// monotone sub-sampling; refining the partition moves shared samples by
/// roundoff only.
pub fn stop_operator(
    signal: &TimeSeries,
    k: f64,
    beta0: f64,
    u_init: f64,
) -> Result<Vec<(f64, f64)>, HysteresisError> {
    let samples = signal.times().to_vec();
    let u = stop_on_partition(signal, k, beta0, u_init, &samples)?;
    Ok(samples.into_iter().zip(u).collect())
}

/// Stop output sampled on a caller partition. The recursion runs on the
/// union of the partition with the signal breakpoints, then restricts.
pub fn stop_on_partition(
    signal: &TimeSeries,
    k: f64,
    beta0: f64,
    u_init: f64,
    samples: &[f64],
) -> Result<Vec<f64>, HysteresisError> {
    assert!(k > 0.0 && beta0 > 0.0);
    let f0 = signal.eval(*samples.first().unwrap_or(&signal.times()[0]));
    let gap = (f0 - k * u_init).abs();
    if gap > beta0 {
        return Err(HysteresisError::BandViolation { gap, beta0 });
    }
    let mut grid: Vec<f64> = samples.iter().chain(signal.times()).copied().collect();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();
    let lo = samples.first().copied().unwrap_or(grid[0]);
    let hi = samples.last().copied().unwrap_or(grid[grid.len() - 1]);
    grid.retain(|&s| s >= lo && s <= hi);

    let mut u = u_init;
    let mut on_grid = Vec::with_capacity(grid.len());
    for &s in &grid {
        let f = signal.eval(s);
        u = u.clamp((f - beta0) / k, (f + beta0) / k);
        on_grid.push(u);
    }
    // restrict to the requested samples
    let mut out = Vec::with_capacity(samples.len());
    let mut j = 0usize;
    for &s in samples {
        while grid[j] < s {
            j += 1;
        }
        out.push(on_grid[j]);
    }
    Ok(out)
}

/// Triangle wave over `periods` periods of the unit interval:
/// 0 → amplitude → −amplitude → 0 with breakpoints at quarter periods.
pub fn triangle_wave(amplitude: f64, periods: usize) -> TimeSeries {
    let mut times = Vec::with_capacity(4 * periods + 1);
    let mut values = Vec::with_capacity(4 * periods + 1);
    times.push(0.0);
    values.push(0.0);
    for p in 0..periods {
        let base = p as f64;
        times.extend([base + 0.25, base + 0.75, base + 1.0]);
        values.extend([amplitude, -amplitude, 0.0]);
    }
    TimeSeries::new(times, values).expect("strictly increasing by construction")
}

/// One point of a hysteresis loop: the drive f and both responses at the
/// dimensionless time s.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoopSample {
    pub s: f64,
    pub f: f64,
    pub ku_pde: f64,
    pub ku_stop: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LadderRung {
    pub tau_char: f64,
    /// sup over s of |k·u_PDE(probe) − k·u_stop|.
    pub distance: f64,
    /// sup over s of the spatial non-uniformity of μ.
    pub mu_uniformity_defect: f64,
    pub steps: usize,
    pub loop_samples: Vec<LoopSample>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LadderReport {
    pub rungs: Vec<LadderRung>,
    pub distances_nonincreasing: bool,
    pub distances_strictly_decreasing: bool,
}

/// Configuration of the slow-driving ladder.
#[derive(Debug, Clone)]
pub struct SlowDrivingExperiment {
    /// Interior node count of the 1D grid.
    pub n: usize,
    pub extent: f64,
    /// Stiffness of the quadratic free energy ½ku².
    pub k: f64,
    pub beta0: f64,
    /// Driving signal over the dimensionless time s.
    pub signal: TimeSeries,
    pub u_init: f64,
    /// Characteristic times, increasing.
    pub tau_chars: Vec<f64>,
    /// Baseline resolution per linear signal segment.
    pub steps_per_segment: usize,
    pub picard_tol: f64,
    pub elliptic_tol: f64,
}

impl Default for SlowDrivingExperiment {
    fn default() -> Self {
        SlowDrivingExperiment {
            n: 31,
            extent: 1.0,
            k: 1.0,
            beta0: 0.3,
            signal: triangle_wave(1.0, 1),
            u_init: 0.0,
            tau_chars: vec![10.0, 100.0, 1000.0],
            steps_per_segment: 256,
            picard_tol: 1e-11,
            elliptic_tol: 1e-12,
        }
    }
}

impl SlowDrivingExperiment {
    /// Run the ladder; rungs execute concurrently.
    ///
    /// In the simulated system the datum enters the chemical relation as
    /// μ = ∂ₜu + ξ + μ♭ + ψ'(u) with μ = 0 on the boundary, so the
    /// quasi-static limit reads −μ♭ ∈ β₀·sign(∂ₛu) + k·u. A drive f is
    /// therefore imposed as μ♭ = −f, which realizes the stop inclusion
    /// f ∈ β₀·sign(∂ₛu) + k·u that the scalar reference integrates.
    pub fn run(&self) -> Result<LadderReport, HysteresisError> {
        if self.tau_chars.windows(2).any(|p| p[1] <= p[0]) || self.tau_chars.is_empty() {
            return Err(HysteresisError::BadConfig(
                "an increasing, nonempty tau_char ladder".into(),
            ));
        }
        if self.n % 2 == 0 {
            return Err(HysteresisError::BadConfig(
                "an odd interior node count, so a center probe node exists".into(),
            ));
        }
        let rungs: Result<Vec<LadderRung>, HysteresisError> = self
            .tau_chars
            .par_iter()
            .map(|&tau_char| self.run_rung(tau_char))
            .collect();
        let rungs = rungs?;
        let distances_nonincreasing = rungs.windows(2).all(|p| p[1].distance <= p[0].distance);
        let distances_strictly_decreasing =
            rungs.windows(2).all(|p| p[1].distance < p[0].distance);
        Ok(LadderReport { rungs, distances_nonincreasing, distances_strictly_decreasing })
    }

    fn run_rung(&self, tau_char: f64) -> Result<LadderRung, HysteresisError> {
        let grid = Grid::new_1d(self.n, self.extent).map_err(StepError::Grid)?;
        let GridShape::OneD { n, .. } = *grid.shape() else { unreachable!() };
        let probe = (n - 1) / 2;

        let s_times = self.signal.times();
        let s_span = s_times[s_times.len() - 1] - s_times[0];
        let min_segment = s_times
            .windows(2)
            .map(|p| p[1] - p[0])
            .fold(f64::INFINITY, f64::min);
        // uniform step honoring both the per-segment resolution and the
        // contraction bound tau*L <= 1/2
        let n_resolution =
            (s_span / min_segment * self.steps_per_segment as f64).ceil() as usize;
        let n_contraction = (tau_char * s_span * self.k / 0.5).ceil() as usize;
        let n_steps = n_resolution.max(n_contraction).max(1);
        let tau = tau_char * s_span / n_steps as f64;

        let psi_star = Potential::Quadratic { k: self.k }
            .truncate(-1.0, 1.0)
            .expect("quadratic truncation is total");
        let model = Model {
            grid: grid.clone(),
            graph: MonotoneGraph::scaled_sign(self.beta0).map_err(|e| {
                HysteresisError::BadConfig(e.to_string())
            })?,
            psi_star,
            elliptic_tol: self.elliptic_tol,
            elliptic_max_outer: 200,
        };
        let schedule = Schedule::new(
            tau_char * s_span,
            tau,
            Scheme::PicardImplicit,
            self.picard_tol,
            500,
            self.k,
        )
        .expect("step choice keeps tau*L at 1/2");
        // drive: mu_flat(t) = -f(t / tau_char)
        let drive = TimeSeries::new(
            s_times.iter().map(|s| s * tau_char).collect(),
            self.signal.sample_values().iter().map(|v| -v).collect(),
        )
        .expect("breakpoints stay increasing");
        let datum = BoundaryDatum::Uniform(drive);
        let u0 = Field::constant(&grid, self.u_init);

        let out = integrator::run(&model, &schedule, &datum, &u0)?;
        if let Some(f) = out.error {
            return Err(HysteresisError::RunFailed { at_step: f.at_step, message: f.message });
        }

        let s_samples: Vec<f64> = out.states.iter().map(|st| st.t / tau_char).collect();
        let u_stop = stop_on_partition(&self.signal, self.k, self.beta0, self.u_init, &s_samples)?;

        let mut distance = 0.0f64;
        let mut uniformity = 0.0f64;
        let mut loop_samples = Vec::with_capacity(out.states.len());
        for (idx, state) in out.states.iter().enumerate() {
            let s = s_samples[idx];
            let ku_pde = self.k * state.u.values()[probe];
            let ku_stop = self.k * u_stop[idx];
            distance = distance.max((ku_pde - ku_stop).abs());
            let mean = state.mu.values().iter().sum::<f64>() / n as f64;
            let defect = state
                .mu
                .values()
                .iter()
                .fold(0.0f64, |m, &v| m.max((v - mean).abs()));
            uniformity = uniformity.max(defect);
            loop_samples.push(LoopSample { s, f: self.signal.eval(s), ku_pde, ku_stop });
        }
        Ok(LadderRung {
            tau_char,
            distance,
            mu_uniformity_defect: uniformity,
            steps: n_steps,
            loop_samples,
        })
    }
}
