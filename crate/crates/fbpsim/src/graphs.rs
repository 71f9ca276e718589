//! Catalog of maximal monotone graphs β = ∂ζ with 0 ∈ β(0).
//!
//! Every variant carries a closed-form resolvent `(I + λβ)⁻¹`, its Yosida
//! approximation, and the convex potential pair (ζ, ζ*). The resolvent is the
//! proximal operator of λζ and is total, single-valued and 1-Lipschitz, which
//! is what the implicit time stepper and the per-instant elliptic solver rely
//! on.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Extended-real value: a finite scalar or a tagged +∞.
///
/// ζ and ζ* take the value +∞ outside their effective domains. The tag keeps
/// diagnostic sums well-defined: one infinite term flags a record instead of
/// poisoning a floating-point accumulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extended {
    Finite(f64),
    PosInf,
}

impl Extended {
    pub fn is_finite(self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    /// Finite value, or `None` for +∞.
    pub fn finite(self) -> Option<f64> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::PosInf => None,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("beta0 must be positive, got {0}")]
    NonPositiveBeta0(f64),
    #[error("interval graph requires a <= 0 <= b, got [{a}, {b}]")]
    ZeroNotInInterval { a: f64, b: f64 },
}

/// A maximal monotone graph β = ∂ζ from the catalog, with 0 ∈ β(0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MonotoneGraph {
    /// β ≡ {0}; the purely viscous case.
    Zero,
    /// β(r) = β₀ sign(r), the scaled sign graph (dry-friction threshold).
    ScaledSign { beta0: f64 },
    /// β = ∂I_[a,b]: constrains the rate to the interval [a, b], 0 ∈ [a, b].
    IndicatorInterval { a: f64, b: f64 },
    /// β = ∂I_[0,+∞): the rate cannot be negative (irreversible evolution).
    IndicatorHalfLine,
}

impl MonotoneGraph {
    pub fn scaled_sign(beta0: f64) -> Result<Self, GraphError> {
        if !(beta0 > 0.0) {
            return Err(GraphError::NonPositiveBeta0(beta0));
        }
        Ok(MonotoneGraph::ScaledSign { beta0 })
    }

    pub fn indicator_interval(a: f64, b: f64) -> Result<Self, GraphError> {
        if !(a <= 0.0 && 0.0 <= b) {
            return Err(GraphError::ZeroNotInInterval { a, b });
        }
        Ok(MonotoneGraph::IndicatorInterval { a, b })
    }

    /// Resolvent p = (I + λβ)⁻¹(r), i.e. the unique p with (r − p)/λ ∈ β(p).
    ///
    /// Equivalently p = argmin ½(x − r)² + λζ(x). Total for any λ > 0.
    pub fn resolvent(&self, lambda: f64, r: f64) -> f64 {
        debug_assert!(lambda > 0.0, "resolvent needs lambda > 0");
        match *self {
            MonotoneGraph::Zero => r,
            MonotoneGraph::ScaledSign { beta0 } => {
                // soft shrinkage by λβ₀
                let t = lambda * beta0;
                if r > t {
                    r - t
                } else if r < -t {
                    r + t
                } else {
                    0.0
                }
            }
            MonotoneGraph::IndicatorInterval { a, b } => r.clamp(a, b),
            MonotoneGraph::IndicatorHalfLine => r.max(0.0),
        }
    }

    /// Yosida approximation β_λ(r) = (r − (I + λβ)⁻¹ r)/λ.
    ///
    /// Always an element of β(resolvent(λ, r)); computed through the variant's
    /// closed form so the selection is sign-exact in floating point.
    pub fn yosida(&self, lambda: f64, r: f64) -> f64 {
        debug_assert!(lambda > 0.0, "yosida needs lambda > 0");
        match *self {
            MonotoneGraph::Zero => 0.0,
            MonotoneGraph::ScaledSign { beta0 } => (r / lambda).clamp(-beta0, beta0),
            MonotoneGraph::IndicatorInterval { a, b } => {
                if r > b {
                    (r - b) / lambda
                } else if r < a {
                    (r - a) / lambda
                } else {
                    0.0
                }
            }
            MonotoneGraph::IndicatorHalfLine => {
                if r < 0.0 {
                    r / lambda
                } else {
                    0.0
                }
            }
        }
    }

    /// Convex potential ζ with β = ∂ζ, ζ(0) = 0, ζ ≥ 0.
    pub fn zeta(&self, r: f64) -> Extended {
        match *self {
            MonotoneGraph::Zero => Extended::Finite(0.0),
            MonotoneGraph::ScaledSign { beta0 } => Extended::Finite(beta0 * r.abs()),
            MonotoneGraph::IndicatorInterval { a, b } => {
                if r >= a && r <= b {
                    Extended::Finite(0.0)
                } else {
                    Extended::PosInf
                }
            }
            MonotoneGraph::IndicatorHalfLine => {
                if r >= 0.0 {
                    Extended::Finite(0.0)
                } else {
                    Extended::PosInf
                }
            }
        }
    }

    /// Legendre-Fenchel transform ζ*(w) = sup_v (v·w − ζ(v)); non-negative.
    pub fn zeta_star(&self, w: f64) -> Extended {
        match *self {
            MonotoneGraph::Zero => {
                if w == 0.0 {
                    Extended::Finite(0.0)
                } else {
                    Extended::PosInf
                }
            }
            MonotoneGraph::ScaledSign { beta0 } => {
                if w.abs() <= beta0 {
                    Extended::Finite(0.0)
                } else {
                    Extended::PosInf
                }
            }
            MonotoneGraph::IndicatorInterval { a, b } => {
                // sup over v in [a,b] of v*w
                Extended::Finite(if w >= 0.0 { b * w } else { a * w })
            }
            MonotoneGraph::IndicatorHalfLine => {
                if w <= 0.0 {
                    Extended::Finite(0.0)
                } else {
                    Extended::PosInf
                }
            }
        }
    }

    /// ζ* evaluated with a tolerance on the effective-domain membership.
    ///
    /// Arguments within `tol` of the domain are projected onto it before
    /// evaluation; this absorbs solver-level membership defects (the caller
    /// passes a tolerance tied to its residual bound). Arguments further out
    /// still map to +∞.
    pub fn zeta_star_tol(&self, w: f64, tol: f64) -> Extended {
        match *self {
            MonotoneGraph::Zero => {
                if w.abs() <= tol {
                    Extended::Finite(0.0)
                } else {
                    Extended::PosInf
                }
            }
            MonotoneGraph::ScaledSign { beta0 } => {
                if w.abs() <= beta0 + tol {
                    Extended::Finite(0.0)
                } else {
                    Extended::PosInf
                }
            }
            MonotoneGraph::IndicatorInterval { .. } => self.zeta_star(w),
            MonotoneGraph::IndicatorHalfLine => {
                if w <= tol {
                    Extended::Finite(0.0)
                } else {
                    Extended::PosInf
                }
            }
        }
    }

    /// Generalized derivative of the resolvent (λ = 1) at r, a scalar in {0, 1}.
    ///
    /// 0 on clamped pieces, 1 on identity pieces, and 1 at kinks so the
    /// Newton matrix A + D stays invertible.
    pub fn resolvent_derivative(&self, r: f64) -> f64 {
        match *self {
            MonotoneGraph::Zero => 1.0,
            MonotoneGraph::ScaledSign { beta0 } => {
                if r.abs() >= beta0 {
                    1.0
                } else {
                    0.0
                }
            }
            MonotoneGraph::IndicatorInterval { a, b } => {
                if r >= a && r <= b {
                    1.0
                } else {
                    0.0
                }
            }
            MonotoneGraph::IndicatorHalfLine => {
                if r >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Membership test v ∈ β(w) up to `tol` on the defining relations.
    pub fn contains(&self, w: f64, v: f64, tol: f64) -> bool {
        match *self {
            MonotoneGraph::Zero => v.abs() <= tol,
            MonotoneGraph::ScaledSign { beta0 } => {
                if w > tol {
                    (v - beta0).abs() <= tol
                } else if w < -tol {
                    (v + beta0).abs() <= tol
                } else {
                    v.abs() <= beta0 + tol
                }
            }
            MonotoneGraph::IndicatorInterval { a, b } => {
                if w < a - tol || w > b + tol {
                    false
                } else if (w - a).abs() <= tol {
                    v <= tol
                } else if (w - b).abs() <= tol {
                    v >= -tol
                } else {
                    v.abs() <= tol
                }
            }
            MonotoneGraph::IndicatorHalfLine => {
                if w < -tol {
                    false
                } else if w <= tol {
                    v <= tol
                } else {
                    v.abs() <= tol
                }
            }
        }
    }

    /// Image of the graph under the time rescaling β̃(r) = β(r/T₀).
    ///
    /// sign, half-line and zero graphs are invariant; the interval bounds
    /// scale with T₀.
    pub fn time_rescaled(&self, t0: f64) -> MonotoneGraph {
        match *self {
            MonotoneGraph::IndicatorInterval { a, b } => {
                MonotoneGraph::IndicatorInterval { a: t0 * a, b: t0 * b }
            }
            g => g,
        }
    }
}
