//! Simulator for a viscous diffusion system with a maximal monotone
//! constraint on the rate of concentration change.
//!
//! The evolving system couples a mass balance ∂ₜu = Δμ with the pointwise
//! inclusion μ ∈ ∂ₜu + β(∂ₜu) + μ♭ + ψ'(u), where ψ is a possibly non-convex
//! free energy and β is a maximal monotone graph acting on the rate (a
//! dry-friction threshold, a rate box, or an irreversibility half-line).
//! Every time step reduces to resolvent evaluations of β, which exist in
//! closed form for the whole catalog, so the nonsmooth dynamics are resolved
//! exactly: rate constraints hold nodewise without tolerance.
//!
//! The crate exposes the building blocks (graphs, potentials, grid operators,
//! the per-instant elliptic solver, the implicit stepper), a diagnostics
//! layer that turns the model's dissipation and confinement estimates into
//! runtime-checked reports, a rate-independent stop-operator reference for
//! slow-driving experiments, and a config-driven CLI.

pub mod diagnostics;
pub mod elliptic;
pub mod expr;
pub mod graphs;
pub mod grid;
pub mod hysteresis;
pub mod integrator;
pub mod orchestrate;
pub mod output;
pub mod potentials;
pub mod scenario;
pub mod signal;

pub use graphs::{Extended, MonotoneGraph};
pub use grid::{Field, Grid};
pub use integrator::{BoundaryDatum, Model, Schedule, Scheme, SimState};
pub use potentials::{Potential, TruncatedPotential};
pub use scenario::{parse_and_validate, prepare, ScenarioConfig};
