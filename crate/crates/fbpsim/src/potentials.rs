//! Coarse-grain free energies ψ and their quadratic-tail truncations ψ*.
//!
//! The catalog covers a double-well polynomial, a plain quadratic, and a
//! logarithmic potential on (0, 1). Every variant satisfies ψ ≥ 0 and a
//! semiconvexity bound ψ'' ≥ −K₁. The truncation replaces ψ outside a kept
//! interval [K_low, K_high] by the matching second-order Taylor quadratics,
//! which makes ψ*' globally Lipschitz with constant L = max |ψ*''|; L gates
//! the implicit stepper's contraction bound τ·L < 1.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PotentialError {
    #[error("argument {r} outside the potential domain ({lo}, {hi})")]
    Domain { r: f64, lo: f64, hi: f64 },
    #[error("negative curvature psi''({r}) = {value} at a truncation junction")]
    Curvature { r: f64, value: f64 },
    #[error("truncation interval invalid: K_low = {lo} must be below K_high = {hi} and inside the domain")]
    BadInterval { lo: f64, hi: f64 },
    #[error("psi' never reaches {target} while scanning for a threshold")]
    NotFound { target: f64 },
}

/// A coarse-grain free energy from the catalog.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Potential {
    /// ψ(u) = k·u²(u−1)², the double well with minima at 0 and 1.
    DoubleWell { k: f64 },
    /// ψ(u) = ½ k u².
    Quadratic { k: f64 },
    /// ψ(u) = θ(u ln u + (1−u) ln(1−u)) + θ ln 2 on (0, 1).
    ///
    /// The θ ln 2 offset makes ψ ≥ 0 without changing ψ'.
    Logarithmic { theta: f64 },
}

impl Potential {
    /// Open domain (a, b) of the potential; infinite endpoints allowed.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            Potential::Logarithmic { .. } => (0.0, 1.0),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    fn check_domain(&self, r: f64) -> Result<(), PotentialError> {
        let (lo, hi) = self.domain();
        if r > lo && r < hi {
            Ok(())
        } else {
            Err(PotentialError::Domain { r, lo, hi })
        }
    }

    pub fn value(&self, r: f64) -> Result<f64, PotentialError> {
        self.check_domain(r)?;
        Ok(match *self {
            Potential::DoubleWell { k } => k * r * r * (r - 1.0) * (r - 1.0),
            Potential::Quadratic { k } => 0.5 * k * r * r,
            Potential::Logarithmic { theta } => {
                theta * (r * r.ln() + (1.0 - r) * (1.0 - r).ln()) + theta * std::f64::consts::LN_2
            }
        })
    }

    pub fn prime(&self, r: f64) -> Result<f64, PotentialError> {
        self.check_domain(r)?;
        Ok(match *self {
            Potential::DoubleWell { k } => k * (4.0 * r * r * r - 6.0 * r * r + 2.0 * r),
            Potential::Quadratic { k } => k * r,
            Potential::Logarithmic { theta } => theta * (r / (1.0 - r)).ln(),
        })
    }

    pub fn second(&self, r: f64) -> Result<f64, PotentialError> {
        self.check_domain(r)?;
        Ok(match *self {
            Potential::DoubleWell { k } => k * (12.0 * r * r - 12.0 * r + 2.0),
            Potential::Quadratic { k } => k,
            Potential::Logarithmic { theta } => theta / (r * (1.0 - r)),
        })
    }

    /// Smallest K₁ ≥ 0 with ψ'' ≥ −K₁ on the whole domain.
    pub fn curvature_lower_bound(&self) -> f64 {
        match *self {
            // min of k(12u² − 12u + 2) is −k, at u = 1/2
            Potential::DoubleWell { k } => k,
            Potential::Quadratic { .. } => 0.0,
            Potential::Logarithmic { .. } => 0.0,
        }
    }

    /// Threshold pair (k_low, k_high) for a bound M > 0:
    /// ψ' ≤ −M on (a, k_low] and ψ' ≥ M on [k_high, b),
    /// with k_low the largest and k_high the smallest such points.
    ///
    /// Found by bisection to absolute tolerance 1e-10 on the outer monotone
    /// branch of ψ'.
    pub fn thresholds(&self, m: f64) -> Result<(f64, f64), PotentialError> {
        assert!(m > 0.0, "thresholds need M > 0");
        match *self {
            Potential::Quadratic { k } => Ok((-m / k, m / k)),
            Potential::DoubleWell { k } => {
                // psi' = 2k u(u−1)(2u−1) is increasing outside the local
                // extrema at (3 ∓ √3)/6; the threshold roots live on those
                // outer branches.
                let s3 = 3.0f64.sqrt();
                let lo_branch = (3.0 - s3) / 6.0;
                let hi_branch = (3.0 + s3) / 6.0;
                let f = |r: f64| k * (4.0 * r * r * r - 6.0 * r * r + 2.0 * r);
                let k_high = bisect_increasing(f, hi_branch, m)?;
                let k_low = bisect_increasing_left(f, lo_branch, -m)?;
                Ok((k_low, k_high))
            }
            Potential::Logarithmic { theta } => {
                // psi' = θ ln(u/(1−u)) is globally increasing on (0, 1)
                let f = |r: f64| theta * (r / (1.0 - r)).ln();
                let k_high = bisect_on_interval(f, 0.5, 1.0, m)?;
                let k_low = bisect_on_interval(f, 0.0, 0.5, -m)?;
                Ok((k_low, k_high))
            }
        }
    }

    /// Thresholds for M, widened (by raising M geometrically) until they
    /// contain the initial-data range [a0, b0]. Returns the effective M too.
    pub fn thresholds_containing(
        &self,
        m: f64,
        a0: f64,
        b0: f64,
    ) -> Result<(f64, f64, f64), PotentialError> {
        let mut m_eff = m;
        for _ in 0..128 {
            let (lo, hi) = self.thresholds(m_eff)?;
            if lo <= a0 && b0 <= hi {
                return Ok((lo, hi, m_eff));
            }
            m_eff *= 2.0;
        }
        Err(PotentialError::NotFound { target: m_eff })
    }

    /// Truncation bounds: K_low = k_low − δ, K_high = k_high + δ, with δ grown
    /// geometrically until ψ'' ≥ 0 at both junctions (and the bounds stay
    /// inside the domain).
    pub fn pick_truncation_bounds(
        &self,
        k_low: f64,
        k_high: f64,
    ) -> Result<(f64, f64), PotentialError> {
        let (dom_lo, dom_hi) = self.domain();
        // stay strictly inside a bounded domain
        let clamp = |r: f64| -> f64 {
            let mut v = r;
            if dom_lo.is_finite() {
                v = v.max(dom_lo + 1e-12);
            }
            if dom_hi.is_finite() {
                v = v.min(dom_hi - 1e-12);
            }
            v
        };
        let mut delta = 1e-3 * (1.0 + (k_high - k_low).abs());
        for _ in 0..64 {
            let lo = clamp(k_low - delta);
            let hi = clamp(k_high + delta);
            let c_lo = self.second(lo)?;
            let c_hi = self.second(hi)?;
            if c_lo >= 0.0 && c_hi >= 0.0 {
                return Ok((lo, hi));
            }
            delta *= 2.0;
        }
        Err(PotentialError::Curvature {
            r: k_low,
            value: self.second(clamp(k_low))?,
        })
    }

    /// Build ψ*: keep ψ on [k_low, k_high] and glue Taylor quadratics outside.
    pub fn truncate(&self, k_low: f64, k_high: f64) -> Result<TruncatedPotential, PotentialError> {
        let (dom_lo, dom_hi) = self.domain();
        if !(k_low < k_high) || k_low <= dom_lo || k_high >= dom_hi {
            return Err(PotentialError::BadInterval { lo: k_low, hi: k_high });
        }
        for r in [k_low, k_high] {
            let c = self.second(r)?;
            if c < 0.0 {
                return Err(PotentialError::Curvature { r, value: c });
            }
        }
        let low = TailQuadratic {
            at: k_low,
            value: self.value(k_low)?,
            slope: self.prime(k_low)?,
            curvature: self.second(k_low)?,
        };
        let high = TailQuadratic {
            at: k_high,
            value: self.value(k_high)?,
            slope: self.prime(k_high)?,
            curvature: self.second(k_high)?,
        };
        // L = max |ψ*''|: dense sampling of the kept interval joined with the
        // two tail curvatures. Quadratic potentials are exact immediately.
        let lipschitz = match *self {
            Potential::Quadratic { k } => k,
            _ => {
                let step = 1e-4;
                let n = ((k_high - k_low) / step).ceil() as usize;
                let mut max_abs: f64 = low.curvature.max(high.curvature);
                for i in 0..=n {
                    let r = (k_low + i as f64 * step).min(k_high);
                    max_abs = max_abs.max(self.second(r)?.abs());
                }
                max_abs
            }
        };
        Ok(TruncatedPotential {
            base: *self,
            low,
            high,
            lipschitz,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct TailQuadratic {
    at: f64,
    value: f64,
    slope: f64,
    curvature: f64,
}

impl TailQuadratic {
    fn value(&self, r: f64) -> f64 {
        let d = r - self.at;
        self.value + self.slope * d + 0.5 * self.curvature * d * d
    }
    fn prime(&self, r: f64) -> f64 {
        self.slope + self.curvature * (r - self.at)
    }
}

/// ψ with quadratic tails: equals the base potential on [K_low, K_high],
/// C²-glued quadratics outside, defined on the whole real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncatedPotential {
    base: Potential,
    low: TailQuadratic,
    high: TailQuadratic,
    lipschitz: f64,
}

impl TruncatedPotential {
    pub fn base(&self) -> &Potential {
        &self.base
    }

    pub fn kept_interval(&self) -> (f64, f64) {
        (self.low.at, self.high.at)
    }

    /// Lipschitz constant L of ψ*' (the maximum of |ψ*''|).
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn value(&self, r: f64) -> f64 {
        if r < self.low.at {
            self.low.value(r)
        } else if r > self.high.at {
            self.high.value(r)
        } else {
            self.base.value(r).expect("kept interval is inside the domain")
        }
    }

    pub fn prime(&self, r: f64) -> f64 {
        if r < self.low.at {
            self.low.prime(r)
        } else if r > self.high.at {
            self.high.prime(r)
        } else {
            self.base.prime(r).expect("kept interval is inside the domain")
        }
    }

    pub fn second(&self, r: f64) -> f64 {
        if r < self.low.at {
            self.low.curvature
        } else if r > self.high.at {
            self.high.curvature
        } else {
            self.base.second(r).expect("kept interval is inside the domain")
        }
    }
}

/// Bisection for f(r) = target on an increasing branch [branch_start, ∞);
/// the upper bracket is grown geometrically.
fn bisect_increasing(
    f: impl Fn(f64) -> f64,
    branch_start: f64,
    target: f64,
) -> Result<f64, PotentialError> {
    let lo = if branch_start.is_finite() { branch_start } else { 0.0 };
    if f(lo) >= target {
        return Ok(lo);
    }
    let mut hi = lo.abs().max(1.0);
    let mut grown = 0;
    while f(hi) < target {
        hi *= 2.0;
        grown += 1;
        if grown > 200 {
            return Err(PotentialError::NotFound { target });
        }
    }
    Ok(bisect(&f, lo, hi, target))
}

/// Mirror of `bisect_increasing` for the left branch (−∞, branch_end]:
/// finds the largest r with f(r) ≤ target (f increasing).
fn bisect_increasing_left(
    f: impl Fn(f64) -> f64,
    branch_end: f64,
    target: f64,
) -> Result<f64, PotentialError> {
    let hi = branch_end;
    if f(hi) <= target {
        return Ok(hi);
    }
    let mut lo = -hi.abs().max(1.0);
    let mut grown = 0;
    while f(lo) > target {
        lo *= 2.0;
        grown += 1;
        if grown > 200 {
            return Err(PotentialError::NotFound { target });
        }
    }
    Ok(bisect(&f, lo, hi, target))
}

/// Bisection on a fixed open interval with f increasing; endpoints may be
/// outside the domain, the first steps move strictly inside.
fn bisect_on_interval(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    target: f64,
) -> Result<f64, PotentialError> {
    let mut a = lo + 1e-15;
    let mut b = hi - 1e-15;
    if f(a) > target || f(b) < target {
        // the logarithmic derivative diverges at both ends, so the target is
        // always bracketed; anything else is a caller bug
        return Err(PotentialError::NotFound { target });
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if f(mid) < target {
            a = mid;
        } else {
            b = mid;
        }
        if b - a <= 1e-10 {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

fn bisect(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, target: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-10 {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_well_values() {
        let p = Potential::DoubleWell { k: 1.0 };
        assert_eq!(p.value(0.0).unwrap(), 0.0);
        assert_eq!(p.value(1.0).unwrap(), 0.0);
        assert!((p.value(0.5).unwrap() - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn double_well_curvature_bound() {
        let p = Potential::DoubleWell { k: 1.0 };
        // grid oracle for min of 12u² − 12u + 2
        let mut min = f64::INFINITY;
        for i in 0..=200_000 {
            let u = -1.0 + 3.0 * i as f64 / 200_000.0;
            min = min.min(p.second(u).unwrap());
        }
        assert!((min + 1.0).abs() < 1e-8);
        assert_eq!(p.curvature_lower_bound(), 1.0);
        assert_eq!(Potential::Quadratic { k: 3.0 }.curvature_lower_bound(), 0.0);
        // log potential is convex: psi'' > 0 sampled across (0,1)
        let lg = Potential::Logarithmic { theta: 0.8 };
        for i in 1..1000 {
            let u = i as f64 / 1000.0;
            assert!(lg.second(u).unwrap() > 0.0);
        }
        assert_eq!(lg.curvature_lower_bound(), 0.0);
    }

    #[test]
    fn log_domain_error_and_divergence() {
        let p = Potential::Logarithmic { theta: 1.0 };
        assert!(matches!(p.value(-0.1), Err(PotentialError::Domain { .. })));
        assert!(matches!(p.value(1.0), Err(PotentialError::Domain { .. })));
        // psi' diverges beyond any threshold along a sample sequence
        let mut last = 0.0;
        for k in [3, 6, 12, 24, 48, 96, 192] {
            let r = 10f64.powi(-k);
            let d = p.prime(r).unwrap();
            assert!(d < last, "psi'({r}) should keep decreasing");
            last = d;
        }
        assert!(last < -400.0);
        assert!(p.prime(1.0 - 1e-12).unwrap() > 20.0);
        // psi >= 0 thanks to the ln 2 offset
        for i in 1..200 {
            let u = i as f64 / 200.0;
            assert!(p.value(u).unwrap() >= -1e-15);
        }
    }

    #[test]
    fn finite_difference_consistency() {
        let h = 1e-5;
        let pots = [
            Potential::DoubleWell { k: 1.3 },
            Potential::Quadratic { k: 0.7 },
            Potential::Logarithmic { theta: 1.1 },
        ];
        for p in pots {
            let (lo, hi) = p.domain();
            let samples: Vec<f64> = (1..40)
                .map(|i| {
                    let t = i as f64 / 40.0;
                    if lo.is_finite() {
                        lo + (hi - lo) * (0.05 + 0.9 * t)
                    } else {
                        -2.0 + 4.0 * t
                    }
                })
                .collect();
            for &r in &samples {
                let fd1 = (p.value(r + h).unwrap() - p.value(r - h).unwrap()) / (2.0 * h);
                assert!(
                    (fd1 - p.prime(r).unwrap()).abs() <= 1e-5 * (1.0 + p.prime(r).unwrap().abs()),
                    "{p:?} psi' mismatch at {r}"
                );
                let fd2 = (p.prime(r + h).unwrap() - p.prime(r - h).unwrap()) / (2.0 * h);
                assert!(
                    (fd2 - p.second(r).unwrap()).abs() <= 1e-4 * (1.0 + p.second(r).unwrap().abs()),
                    "{p:?} psi'' mismatch at {r}"
                );
            }
        }
    }

    #[test]
    fn thresholds_quadratic_closed_form() {
        let p = Potential::Quadratic { k: 1.0 };
        let (lo, hi) = p.thresholds(2.0).unwrap();
        assert!((lo + 2.0).abs() < 1e-9);
        assert!((hi - 2.0).abs() < 1e-9);
    }

    #[test]
    fn thresholds_double_well_against_polynomial_oracle() {
        let p = Potential::DoubleWell { k: 1.0 };
        let (lo, hi) = p.thresholds(1.0).unwrap();
        // oracle: the outer roots of 4u³ − 6u² + 2u = ±1 by dense scan + refine
        let f = |u: f64| 4.0 * u * u * u - 6.0 * u * u + 2.0 * u;
        assert!((f(hi) - 1.0).abs() < 1e-7, "psi'(k_high) = M");
        assert!((f(lo) + 1.0).abs() < 1e-7, "psi'(k_low) = -M");
        assert!(hi > 1.0 && lo < 0.0);
        // postcondition: psi' >= M on a dense sample to the right
        for i in 0..=2000 {
            let r = hi + 3.0 * i as f64 / 2000.0;
            assert!(p.prime(r).unwrap() >= 1.0 - 1e-8);
        }
        for i in 0..=2000 {
            let r = lo - 3.0 * i as f64 / 2000.0;
            assert!(p.prime(r).unwrap() <= -1.0 + 1e-8);
        }
    }

    #[test]
    fn thresholds_log_closed_form() {
        let p = Potential::Logarithmic { theta: 1.0 };
        let (lo, hi) = p.thresholds(5.0).unwrap();
        // psi'(u) = ln(u/(1-u)) = M  =>  u = 1/(1+e^{-M})
        let expect_hi = 1.0 / (1.0 + (-5.0f64).exp());
        let expect_lo = 1.0 / (1.0 + 5.0f64.exp());
        assert!((hi - expect_hi).abs() < 1e-9);
        assert!((lo - expect_lo).abs() < 1e-9);
    }

    #[test]
    fn thresholds_containment_widens() {
        let p = Potential::Quadratic { k: 1.0 };
        let (lo, hi, m_eff) = p.thresholds_containing(0.1, -1.5, 2.5).unwrap();
        assert!(lo <= -1.5 && hi >= 2.5);
        assert!(m_eff >= 2.5);
    }

    #[test]
    fn truncation_identity_on_kept_interval() {
        let p = Potential::DoubleWell { k: 1.0 };
        let t = p.truncate(-0.5, 1.5).unwrap();
        for i in 0..=100 {
            let r = -0.5 + 2.0 * i as f64 / 100.0;
            assert_eq!(t.value(r), p.value(r).unwrap());
            assert_eq!(t.prime(r), p.prime(r).unwrap());
        }
    }

    #[test]
    fn truncation_quadratic_is_identity() {
        let p = Potential::Quadratic { k: 2.5 };
        let t = p.truncate(-1.0, 1.0).unwrap();
        assert_eq!(t.lipschitz(), 2.5);
        for r in [-7.0, -1.0, 0.3, 4.0] {
            assert!((t.value(r) - p.value(r).unwrap()).abs() < 1e-12);
            assert!((t.prime(r) - p.prime(r).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn truncation_lipschitz_against_grid_oracle() {
        let p = Potential::DoubleWell { k: 1.0 };
        let (lo, hi) = (-0.5, 1.5);
        let t = p.truncate(lo, hi).unwrap();
        let mut oracle: f64 = 0.0;
        let n = 20_000;
        for i in 0..=n {
            let r = lo + (hi - lo) * i as f64 / n as f64;
            oracle = oracle.max(p.second(r).unwrap().abs());
        }
        oracle = oracle.max(p.second(lo).unwrap()).max(p.second(hi).unwrap());
        assert!((t.lipschitz() - oracle).abs() <= 1e-6 * oracle);
    }

    #[test]
    fn truncation_is_c2_at_junctions() {
        let p = Potential::DoubleWell { k: 1.0 };
        let t = p.truncate(-0.5, 1.5).unwrap();
        let h = 1e-6;
        for j in [-0.5, 1.5] {
            let inner = t.second(j);
            // one-sided second differences from both sides
            let from_left = (t.prime(j) - t.prime(j - h)) / h;
            let from_right = (t.prime(j + h) - t.prime(j)) / h;
            assert!((from_left - inner).abs() < 1e-5 * (1.0 + inner.abs()));
            assert!((from_right - inner).abs() < 1e-5 * (1.0 + inner.abs()));
            // one-sided curvatures and the glue agree to 1e-9
            assert!((t.second(j + 1e-12) - t.second(j - 1e-12)).abs() < 1e-9);
            assert!((t.value(j + 1e-12) - t.value(j - 1e-12)).abs() < 1e-9);
            assert!((t.prime(j + 1e-12) - t.prime(j - 1e-12)).abs() < 1e-9);
        }
    }

    #[test]
    fn truncation_rejects_spinodal_junction() {
        let p = Potential::DoubleWell { k: 1.0 };
        // psi''(0.5) = -1 < 0
        assert!(matches!(
            p.truncate(-0.5, 0.5),
            Err(PotentialError::Curvature { .. })
        ));
    }

    #[test]
    fn truncated_prime_is_globally_lipschitz() {
        let p = Potential::DoubleWell { k: 1.0 };
        let t = p.truncate(-0.5, 1.5).unwrap();
        let l = t.lipschitz();
        // deterministic pseudo-random pairs
        let mut x = 0.123456789_f64;
        let mut next = move || {
            x = (x * 9301.0 + 49297.0) % 233280.0;
            x / 233280.0 * 20.0 - 10.0
        };
        for _ in 0..10_000 {
            let (r1, r2) = (next(), next());
            assert!(
                (t.prime(r1) - t.prime(r2)).abs() <= l * (r1 - r2).abs() + 1e-12,
                "Lipschitz violated at {r1}, {r2}"
            );
        }
    }

    #[test]
    fn pick_truncation_bounds_grows_delta() {
        let p = Potential::DoubleWell { k: 1.0 };
        // thresholds that sit inside the spinodal region force delta growth
        let (lo, hi) = p.pick_truncation_bounds(0.3, 0.6).unwrap();
        assert!(p.second(lo).unwrap() >= 0.0);
        assert!(p.second(hi).unwrap() >= 0.0);
        assert!(lo < 0.3 && hi > 0.6);
    }
}
