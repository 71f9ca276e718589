//! The per-instant nonlinear solve: find μ with A μ + (I+β)⁻¹(μ − g) = 0.
//!
//! Here g collects the boundary datum and the frozen free-energy gradient,
//! g = μ♭ + ψ*'(v). The equation is strongly monotone (A is SPD and the
//! resolvent R = (I+β)⁻¹ is monotone and 1-Lipschitz), so the solution is
//! unique. R is piecewise affine for the whole graph catalog, which makes
//! semismooth Newton exact away from kinks: the generalized derivative of R
//! at each node is a scalar in {0, 1}, giving Newton systems (A + D)δ = −F
//! with a diagonal D ⪰ 0. A damped, A⁻¹-preconditioned fixed-point iteration
//! serves as fallback when the line search stalls.

use std::sync::Arc;

use thiserror::Error;

use crate::graphs::MonotoneGraph;
use crate::grid::{self, Field, Grid, GridError, GridShape};
use crate::potentials::TruncatedPotential;

#[derive(Debug, Error)]
pub enum EllipticError {
    #[error("nonlinear solve did not converge after {iterations} iterations (residual {residual:.3e}, target {target:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        target: f64,
    },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// One per-instant problem: A μ + R(μ − g) = 0 on `grid`.
pub struct EllipticProblem<'a> {
    pub grid: &'a Arc<Grid>,
    pub graph: MonotoneGraph,
    /// Combined datum μ♭ + ψ*'(v); must be finite at every node.
    pub g: &'a Field,
    /// Relative residual tolerance: ‖Aμ + R(μ−g)‖₂ ≤ tol·(1 + ‖g‖₂).
    pub tol: f64,
    /// Outer iteration cap.
    pub max_outer: usize,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SolveStats {
    pub outer_iterations: usize,
    pub final_residual: f64,
    pub fallback_used: bool,
}

/// Solution of the per-instant problem: the chemical potential together with
/// the candidate rate w = R(μ − g) (equal to −Aμ up to the residual).
pub struct EllipticSolution {
    pub mu: Field,
    pub w: Field,
    pub stats: SolveStats,
}

fn residual(problem: &EllipticProblem, mu: &Field) -> (Field, Field) {
    let w = mu
        .values()
        .iter()
        .zip(problem.g.values())
        .map(|(&m, &g)| problem.graph.resolvent(1.0, m - g))
        .collect::<Vec<_>>();
    let w = Field::from_values(problem.grid, w).expect("same grid");
    let amu = grid::apply_a(mu);
    let res = amu.add_scaled(1.0, &w).expect("same grid");
    (res, w)
}

/// Solve A μ + R(μ − g) = 0 by semismooth Newton with line search.
///
/// `warm_start`, when given, seeds the iteration (the previous time level's
/// μ); otherwise the iteration starts from zero.
pub fn solve_chemical_potential(
    problem: &EllipticProblem,
    warm_start: Option<&Field>,
) -> Result<EllipticSolution, EllipticError> {
    let n = problem.grid.node_count();
    debug_assert_eq!(problem.g.len(), n);
    debug_assert!(problem.g.values().iter().all(|v| v.is_finite()));

    let target = problem.tol * (1.0 + grid::norm2(problem.g.values()));
    let mut mu = warm_start.cloned().unwrap_or_else(|| Field::zeros(problem.grid));
    let (mut res, mut w) = residual(problem, &mu);
    let mut res_norm = grid::norm2(res.values());
    let mut stats = SolveStats::default();
    let mut failed_newton_steps = 0usize;

    while res_norm > target {
        if stats.outer_iterations >= problem.max_outer {
            return Err(EllipticError::NonConvergence {
                iterations: stats.outer_iterations,
                residual: res_norm,
                target,
            });
        }
        stats.outer_iterations += 1;

        let improved = if failed_newton_steps < problem.max_outer / 2 {
            // Newton direction: (A + D)δ = −F(μ) with D the diagonal of
            // generalized resolvent derivatives at μ − g.
            let d: Vec<f64> = mu
                .values()
                .iter()
                .zip(problem.g.values())
                .map(|(&m, &g)| problem.graph.resolvent_derivative(m - g))
                .collect();
            let neg_res: Vec<f64> = res.values().iter().map(|v| -v).collect();
            let inner_tol = (problem.tol * 1e-2).clamp(1e-14, 1e-10);
            let delta = match problem.grid.shape() {
                GridShape::OneD { .. } => grid::solve_tridiag_1d(problem.grid, &d, &neg_res),
                GridShape::TwoD { .. } => grid::solve_cg(problem.grid, &d, &neg_res, inner_tol)?,
            };
            let delta = Field::from_values(problem.grid, delta).expect("same grid");
            // halve the step until the residual norm decreases
            let mut step = 1.0;
            let mut improved = false;
            for _ in 0..40 {
                let trial = mu.add_scaled(step, &delta).expect("same grid");
                let (trial_res, trial_w) = residual(problem, &trial);
                let trial_norm = grid::norm2(trial_res.values());
                if trial_norm < res_norm {
                    mu = trial;
                    res = trial_res;
                    w = trial_w;
                    res_norm = trial_norm;
                    improved = true;
                    break;
                }
                step *= 0.5;
            }
            improved
        } else {
            false
        };

        if !improved {
            failed_newton_steps += 1;
            // damped fixed point: μ ← μ − ω A⁻¹ F(μ)
            stats.fallback_used = true;
            let precond = grid::solve_a(&res, problem.tol.min(1e-10))?;
            mu = mu.add_scaled(-0.5, &precond).expect("same grid");
            let (r, ww) = residual(problem, &mu);
            res = r;
            w = ww;
            res_norm = grid::norm2(res.values());
        }
    }
    stats.final_residual = res_norm;
    Ok(EllipticSolution { mu, w, stats })
}

/// Initial triplet (μ₀, w₀, ξ₀) from the datum g₀ = μ♭(0) + ψ*'(u₀).
///
/// μ₀ solves the per-instant problem, w₀ = −A μ₀ is the initial rate, and
/// ξ₀ = μ₀ − w₀ − g₀ belongs to β(w₀) up to the solver residual.
pub struct InitialState {
    pub mu0: Field,
    pub w0: Field,
    pub xi0: Field,
    pub stats: SolveStats,
}

pub fn initial_state(
    grid_ref: &Arc<Grid>,
    graph: MonotoneGraph,
    psi_star: &TruncatedPotential,
    u0: &Field,
    mu_flat0: &Field,
    tol: f64,
    max_outer: usize,
) -> Result<InitialState, EllipticError> {
    let (k_low, k_high) = psi_star.kept_interval();
    let (lo, hi) = (u0.min(), u0.max());
    if lo < k_low || hi > k_high {
        log::warn!(
            "initial data range [{lo}, {hi}] leaves the truncation interval [{k_low}, {k_high}]; \
             the free energy seen by the solver is the quadratic tail there"
        );
    }
    let g = Field::from_values(
        grid_ref,
        u0.values()
            .iter()
            .zip(mu_flat0.values())
            .map(|(&u, &mf)| mf + psi_star.prime(u))
            .collect(),
    )
    .expect("same grid");
    let problem = EllipticProblem {
        grid: grid_ref,
        graph,
        g: &g,
        tol,
        max_outer,
    };
    let sol = solve_chemical_potential(&problem, None)?;
    let w0 = grid::apply_a(&sol.mu).map(|v| -v);
    let xi0 = Field::from_values(
        grid_ref,
        sol.mu
            .values()
            .iter()
            .zip(w0.values())
            .zip(g.values())
            .map(|((&m, &w), &gv)| m - w - gv)
            .collect(),
    )
    .expect("same grid");
    Ok(InitialState {
        mu0: sol.mu,
        w0,
        xi0,
        stats: sol.stats,
    })
}
