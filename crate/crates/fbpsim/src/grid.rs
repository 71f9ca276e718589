//! Uniform-grid finite differences on an interval or a rectangle.
//!
//! `A` is the standard 3-point / 5-point negative Laplacian with homogeneous
//! Dirichlet condition (missing neighbors contribute zero), symmetric positive
//! definite on the interior nodes. The module also provides its inverse solve
//! (direct tridiagonal in 1D, conjugate gradients in 2D), the induced dual
//! norm ‖w‖*² = ⟨w, A⁻¹w⟩, harmonic extension of boundary traces, and the
//! h-weighted quadrature inner products used by every diagnostic.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("interior node count must be >= 2 per axis, got {0}")]
    TooFewNodes(usize),
    #[error("extent must be positive, got {0}")]
    BadExtent(f64),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("boundary trace has {got} values, grid has {expected} boundary nodes")]
    TraceLength { got: usize, expected: usize },
    #[error("conjugate gradients exceeded {cap} iterations (residual {residual:.3e})")]
    SolverBreakdown { cap: usize, residual: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GridShape {
    OneD { n: usize, extent: f64 },
    TwoD { nx: usize, ny: usize, extent_x: f64, extent_y: f64 },
}

/// Uniform grid of strictly interior nodes; boundary values are implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    shape: GridShape,
}

impl Grid {
    pub fn new_1d(n: usize, extent: f64) -> Result<Arc<Grid>, GridError> {
        if n < 2 {
            return Err(GridError::TooFewNodes(n));
        }
        if !(extent > 0.0) {
            return Err(GridError::BadExtent(extent));
        }
        Ok(Arc::new(Grid { shape: GridShape::OneD { n, extent } }))
    }

    pub fn new_2d(nx: usize, ny: usize, extent_x: f64, extent_y: f64) -> Result<Arc<Grid>, GridError> {
        if nx < 2 || ny < 2 {
            return Err(GridError::TooFewNodes(nx.min(ny)));
        }
        if !(extent_x > 0.0) {
            return Err(GridError::BadExtent(extent_x));
        }
        if !(extent_y > 0.0) {
            return Err(GridError::BadExtent(extent_y));
        }
        Ok(Arc::new(Grid {
            shape: GridShape::TwoD { nx, ny, extent_x, extent_y },
        }))
    }

    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        match self.shape {
            GridShape::OneD { .. } => 1,
            GridShape::TwoD { .. } => 2,
        }
    }

    pub fn node_count(&self) -> usize {
        match self.shape {
            GridShape::OneD { n, .. } => n,
            GridShape::TwoD { nx, ny, .. } => nx * ny,
        }
    }

    /// Boundary nodes adjacent to the interior: 2 in 1D; the four open edges
    /// in 2D, ordered bottom, top, left, right (corners are not used by the
    /// 5-point stencil).
    pub fn boundary_count(&self) -> usize {
        match self.shape {
            GridShape::OneD { .. } => 2,
            GridShape::TwoD { nx, ny, .. } => 2 * (nx + ny),
        }
    }

    /// Mesh widths (hx, hy); hy is 0 for a 1D grid.
    pub fn h(&self) -> (f64, f64) {
        match self.shape {
            GridShape::OneD { n, extent } => (extent / (n as f64 + 1.0), 0.0),
            GridShape::TwoD { nx, ny, extent_x, extent_y } => (
                extent_x / (nx as f64 + 1.0),
                extent_y / (ny as f64 + 1.0),
            ),
        }
    }

    /// Quadrature weight per interior node: h in 1D, hx·hy in 2D.
    pub fn cell_weight(&self) -> f64 {
        let (hx, hy) = self.h();
        match self.shape {
            GridShape::OneD { .. } => hx,
            GridShape::TwoD { .. } => hx * hy,
        }
    }

    /// Coordinates of interior node `idx` (row-major, idx = i + j·nx in 2D).
    pub fn coords(&self, idx: usize) -> (f64, f64) {
        let (hx, hy) = self.h();
        match self.shape {
            GridShape::OneD { .. } => ((idx as f64 + 1.0) * hx, 0.0),
            GridShape::TwoD { nx, .. } => {
                let i = idx % nx;
                let j = idx / nx;
                ((i as f64 + 1.0) * hx, (j as f64 + 1.0) * hy)
            }
        }
    }
}

/// Nodal scalar field on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Field {
    pub fn constant(grid: &Arc<Grid>, value: f64) -> Field {
        Field {
            grid: grid.clone(),
            values: vec![value; grid.node_count()],
        }
    }

    pub fn zeros(grid: &Arc<Grid>) -> Field {
        Field::constant(grid, 0.0)
    }

    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Field, GridError> {
        if values.len() != grid.node_count() {
            return Err(GridError::GridMismatch);
        }
        Ok(Field { grid: grid.clone(), values })
    }

    pub fn from_fn(grid: &Arc<Grid>, mut f: impl FnMut(f64, f64) -> f64) -> Field {
        let values = (0..grid.node_count())
            .map(|i| {
                let (x, y) = grid.coords(i);
                f(x, y)
            })
            .collect();
        Field { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid == other.grid
    }

    /// self + scale · other
    pub fn add_scaled(&self, scale: f64, other: &Field) -> Result<Field, GridError> {
        if !self.same_grid(other) {
            return Err(GridError::GridMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + scale * b)
            .collect();
        Ok(Field { grid: self.grid.clone(), values })
    }

    pub fn sub(&self, other: &Field) -> Result<Field, GridError> {
        self.add_scaled(-1.0, other)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Apply the negative-Laplacian stencil A (homogeneous Dirichlet).
pub fn apply_a(f: &Field) -> Field {
    let mut out = vec![0.0; f.len()];
    apply_a_raw(f.grid(), &[], f.values(), &mut out);
    Field { grid: f.grid().clone(), values: out }
}

/// Euclidean dot product of raw nodal vectors (solver-internal).
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Thomas algorithm for the 1D operator A + diag(d); `d` may be empty for A
/// itself. The system is strictly diagonally dominant, no pivoting needed.
pub(crate) fn solve_tridiag_1d(grid: &Grid, d: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let (hx, _) = grid.h();
    let c = 1.0 / (hx * hx);
    let off = -c;
    let mut diag: Vec<f64> = (0..n)
        .map(|i| 2.0 * c + if d.is_empty() { 0.0 } else { d[i] })
        .collect();
    let mut x = rhs.to_vec();
    // forward elimination
    for i in 1..n {
        let m = off / diag[i - 1];
        diag[i] -= m * off;
        x[i] -= m * x[i - 1];
    }
    // back substitution
    x[n - 1] /= diag[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = (x[i] - off * x[i + 1]) / diag[i];
    }
    x
}

/// Stencil application on raw slices: out = (A + diag(d)) v.
pub(crate) fn apply_a_raw(grid: &Grid, d: &[f64], v: &[f64], out: &mut [f64]) {
    let (hx, hy) = grid.h();
    match *grid.shape() {
        GridShape::OneD { n, .. } => {
            let c = 1.0 / (hx * hx);
            for i in 0..n {
                let left = if i > 0 { v[i - 1] } else { 0.0 };
                let right = if i + 1 < n { v[i + 1] } else { 0.0 };
                out[i] = c * (2.0 * v[i] - left - right);
            }
        }
        GridShape::TwoD { nx, ny, .. } => {
            let cx = 1.0 / (hx * hx);
            let cy = 1.0 / (hy * hy);
            let diag = 2.0 * (cx + cy);
            for j in 0..ny {
                let row = j * nx;
                for i in 0..nx {
                    let idx = row + i;
                    let mut acc = diag * v[idx];
                    if i > 0 {
                        acc -= cx * v[idx - 1];
                    }
                    if i + 1 < nx {
                        acc -= cx * v[idx + 1];
                    }
                    if j > 0 {
                        acc -= cy * v[idx - nx];
                    }
                    if j + 1 < ny {
                        acc -= cy * v[idx + nx];
                    }
                    out[idx] = acc;
                }
            }
        }
    }
    if !d.is_empty() {
        for i in 0..out.len() {
            out[i] += d[i] * v[i];
        }
    }
}

/// Conjugate gradients for (A + diag(d)) x = rhs with relative tolerance
/// `tol` on the residual: ‖rhs − (A+D)x‖₂ ≤ tol·(1 + ‖rhs‖₂).
pub(crate) fn solve_cg(
    grid: &Arc<Grid>,
    d: &[f64],
    rhs: &[f64],
    tol: f64,
) -> Result<Vec<f64>, GridError> {
    let n = rhs.len();
    let cap = 10 * n;
    let target = tol * (1.0 + norm2(rhs));
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut rr = dot(&r, &r);
    if rr.sqrt() <= target {
        return Ok(x);
    }
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    for _ in 0..cap {
        apply_a_raw(grid, d, &p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= target {
            return Ok(x);
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    Err(GridError::SolverBreakdown { cap, residual: rr.sqrt() })
}

/// Solve A μ = rhs with ‖A μ − rhs‖₂ ≤ tol·(1 + ‖rhs‖₂).
pub fn solve_a(rhs: &Field, tol: f64) -> Result<Field, GridError> {
    debug_assert!(tol > 0.0);
    let grid = rhs.grid();
    let values = match grid.shape() {
        GridShape::OneD { .. } => solve_tridiag_1d(grid, &[], rhs.values()),
        GridShape::TwoD { .. } => solve_cg(grid, &[], rhs.values(), tol)?,
    };
    Ok(Field { grid: grid.clone(), values })
}

/// h-weighted L² inner product.
pub fn l2_inner(f: &Field, g: &Field) -> Result<f64, GridError> {
    if !f.same_grid(g) {
        return Err(GridError::GridMismatch);
    }
    Ok(f.grid().cell_weight() * dot(f.values(), g.values()))
}

/// h-weighted L² norm.
pub fn l2_norm(f: &Field) -> f64 {
    (f.grid().cell_weight() * dot(f.values(), f.values())).sqrt()
}

pub fn linf_norm(f: &Field) -> f64 {
    f.values().iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Discrete Dirichlet energy ∫|∇f|² = ⟨f, A f⟩ (summation by parts); clamped
/// at zero against roundoff.
pub fn grad_energy(f: &Field) -> f64 {
    let af = apply_a(f);
    l2_inner(f, &af).expect("same grid by construction").max(0.0)
}

/// Dual norm ‖w‖* = ⟨w, A⁻¹w⟩^½.
pub fn dual_norm(w: &Field, tol: f64) -> Result<f64, GridError> {
    let aw = solve_a(w, tol)?;
    Ok(l2_inner(w, &aw)?.max(0.0).sqrt())
}

/// Discrete-harmonic extension of a boundary trace.
///
/// Trace layout: `[left, right]` in 1D; bottom row (i = 0..nx), top row,
/// left column (j = 0..ny), right column in 2D. The result has zero stencil
/// residual at every interior node when the boundary neighbors take the
/// trace values. A spatially uniform trace extends to the exact constant.
pub fn harmonic_extend(grid: &Arc<Grid>, trace: &[f64], tol: f64) -> Result<Field, GridError> {
    if trace.len() != grid.boundary_count() {
        return Err(GridError::TraceLength {
            got: trace.len(),
            expected: grid.boundary_count(),
        });
    }
    let first = trace[0];
    if trace.iter().all(|&v| v == first) {
        return Ok(Field::constant(grid, first));
    }
    let (hx, hy) = grid.h();
    let mut rhs = vec![0.0; grid.node_count()];
    match *grid.shape() {
        GridShape::OneD { n, .. } => {
            let c = 1.0 / (hx * hx);
            rhs[0] += c * trace[0];
            rhs[n - 1] += c * trace[1];
        }
        GridShape::TwoD { nx, ny, .. } => {
            let cx = 1.0 / (hx * hx);
            let cy = 1.0 / (hy * hy);
            let (bottom, rest) = trace.split_at(nx);
            let (top, rest) = rest.split_at(nx);
            let (left, right) = rest.split_at(ny);
            for i in 0..nx {
                rhs[i] += cy * bottom[i];
                rhs[i + (ny - 1) * nx] += cy * top[i];
            }
            for j in 0..ny {
                rhs[j * nx] += cx * left[j];
                rhs[nx - 1 + j * nx] += cx * right[j];
            }
        }
    }
    let rhs = Field { grid: grid.clone(), values: rhs };
    solve_a(&rhs, tol)
}
