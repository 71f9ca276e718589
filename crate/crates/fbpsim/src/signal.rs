//! Piecewise-linear scalar signals over time.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SignalError {
    #[error("a signal needs at least one sample")]
    Empty,
    #[error("sample times must be strictly increasing ({prev} then {next})")]
    NotIncreasing { prev: f64, next: f64 },
    #[error("times and values disagree in length ({times} vs {values})")]
    LengthMismatch { times: usize, values: usize },
    #[error("signal values must be finite")]
    NonFinite,
}

/// Piecewise-linear interpolant through (tᵢ, fᵢ) samples with strictly
/// increasing tᵢ; constant extrapolation beyond the ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<TimeSeries, SignalError> {
        if times.is_empty() {
            return Err(SignalError::Empty);
        }
        if times.len() != values.len() {
            return Err(SignalError::LengthMismatch {
                times: times.len(),
                values: values.len(),
            });
        }
        for pair in times.windows(2) {
            if !(pair[1] > pair[0]) {
                return Err(SignalError::NotIncreasing { prev: pair[0], next: pair[1] });
            }
        }
        if values.iter().any(|v| !v.is_finite()) || times.iter().any(|t| !t.is_finite()) {
            return Err(SignalError::NonFinite);
        }
        Ok(TimeSeries { times, values })
    }

    pub fn constant(value: f64) -> TimeSeries {
        TimeSeries { times: vec![0.0], values: vec![value] }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn sample_values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.values[0];
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1];
        }
        // partition_point gives the first index with time > t
        let hi = self.times.partition_point(|&s| s <= t);
        let lo = hi - 1;
        let (t0, t1) = (self.times[lo], self.times[hi]);
        let (f0, f1) = (self.values[lo], self.values[hi]);
        f0 + (f1 - f0) * (t - t0) / (t1 - t0)
    }

    /// Signal rescaled in time: samples at (tᵢ·scale, fᵢ).
    pub fn time_scaled(&self, scale: f64) -> TimeSeries {
        TimeSeries {
            times: self.times.iter().map(|t| t * scale).collect(),
            values: self.values.clone(),
        }
    }

    /// Pointwise sum with another signal, sampled on the union of breakpoints
    /// (exact for piecewise-linear summands).
    pub fn add(&self, other: &TimeSeries, scale: f64) -> TimeSeries {
        let mut times: Vec<f64> = self.times.iter().chain(other.times.iter()).copied().collect();
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        times.dedup();
        let values = times.iter().map(|&t| self.eval(t) + scale * other.eval(t)).collect();
        TimeSeries { times, values }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}
