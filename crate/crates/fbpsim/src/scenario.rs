//! Scenario ingestion and validation.
//!
//! A scenario is a TOML document describing the grid, the free energy, the
//! rate graph, the time schedule, initial and boundary data, and optional
//! physical scales. `parse_and_validate` reports every violated rule at once;
//! `prepare` derives the constants the solver needs (curvature bound K₁,
//! thresholds, truncation interval, Lipschitz constant L, resolved step size)
//! and assembles the run-ready objects.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::Expr;
use crate::graphs::MonotoneGraph;
use crate::grid::{Field, Grid};
use crate::integrator::{BoundaryDatum, Model, PhysicalScales, Schedule, Scheme};
use crate::potentials::{Potential, TruncatedPotential};
use crate::signal::TimeSeries;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Violation {
    pub key: String,
    pub value: String,
    pub rule: String,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{} validation error(s):\n{}", .0.len(), format_violations(.0))]
    Validation(Vec<Violation>),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| format!("  {} = {}: {}", x.key, x.value, x.rule))
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub n: Vec<usize>,
    pub extent: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub kind: String,
    pub k: Option<f64>,
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    pub kind: String,
    pub beta0: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_end: f64,
    pub tau: Option<f64>,
    #[serde(default = "default_scheme")]
    pub scheme: String,
}

fn default_scheme() -> String {
    "picard".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardConfig {
    #[serde(default = "default_picard_tol")]
    pub tol: f64,
    #[serde(default = "default_picard_max")]
    pub max: usize,
}

fn default_picard_tol() -> f64 {
    1e-10
}
fn default_picard_max() -> usize {
    200
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig { tol: default_picard_tol(), max: default_picard_max() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EllipticConfig {
    #[serde(default = "default_elliptic_tol")]
    pub tol: f64,
    #[serde(default = "default_elliptic_max")]
    pub max_outer: usize,
}

fn default_elliptic_tol() -> f64 {
    1e-9
}
fn default_elliptic_max() -> usize {
    200
}

impl Default for EllipticConfig {
    fn default() -> Self {
        EllipticConfig { tol: default_elliptic_tol(), max_outer: default_elliptic_max() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub kind: String,
    pub value: Option<f64>,
    pub expr: Option<String>,
    pub path: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    #[serde(default = "default_boundary_kind")]
    pub kind: String,
    pub times: Option<Vec<f64>>,
    pub values: Option<Vec<f64>>,
    pub traces: Option<Vec<Vec<f64>>>,
}

fn default_boundary_kind() -> String {
    "uniform".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalConfig {
    pub alpha: f64,
    pub m: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationConfig {
    /// Provisional bound for the threshold computation; checked a posteriori
    /// against the observed sup of ‖μ − μ♭‖∞.
    pub m_pre: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_subsample")]
    pub subsample: usize,
    /// Output directory used when the CLI is not given --out.
    pub dir: Option<String>,
}

fn default_subsample() -> usize {
    1
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { subsample: default_subsample(), dir: None }
    }
}

fn default_true() -> bool {
    true
}

/// Which invariant checks gate the run verdict. Reports are always computed;
/// a disabled check is informational only.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsToggles {
    #[serde(default = "default_true")]
    pub energy: bool,
    #[serde(default = "default_true")]
    pub max_principle: bool,
    #[serde(default = "default_true")]
    pub zeta_star: bool,
    #[serde(default = "default_true")]
    pub mu_linf: bool,
}

impl Default for DiagnosticsToggles {
    fn default() -> Self {
        DiagnosticsToggles { energy: true, max_principle: true, zeta_star: true, mu_linf: true }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub key: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axes: Vec<SweepAxis>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HysteresisConfig {
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    pub tau_chars: Vec<f64>,
    #[serde(default = "default_steps_per_segment")]
    pub steps_per_segment: usize,
}

fn default_amplitude() -> f64 {
    1.0
}
fn default_steps_per_segment() -> usize {
    256
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub grid: GridConfig,
    pub potential: PotentialConfig,
    pub graph: GraphConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub picard: PicardConfig,
    #[serde(default)]
    pub elliptic: EllipticConfig,
    pub initial: InitialConfig,
    pub boundary: Option<BoundaryConfig>,
    pub physical: Option<PhysicalConfig>,
    pub truncation: Option<TruncationConfig>,
    #[serde(default)]
    pub diagnostics: DiagnosticsToggles,
    #[serde(default)]
    pub output: OutputConfig,
    pub sweep: Option<SweepConfig>,
    pub hysteresis: Option<HysteresisConfig>,
    #[serde(default)]
    pub seed: u64,
}

/// Constants derived during preparation; echoed into the run manifest so a
/// stored run carries every number needed to reproduce it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub k1: f64,
    pub m_pre: f64,
    pub m_effective: f64,
    pub kstar_low: f64,
    pub kstar_high: f64,
    pub trunc_low: f64,
    pub trunc_high: f64,
    pub lipschitz: f64,
    pub tau: f64,
    pub steps: usize,
    pub u0_min: f64,
    pub u0_max: f64,
    pub t0: f64,
    pub l0: f64,
}

/// A validated, run-ready scenario.
#[derive(Debug)]
pub struct Prepared {
    pub config: ScenarioConfig,
    pub model: Model,
    pub schedule: Schedule,
    pub datum: BoundaryDatum,
    pub u0: Field,
    pub derived: DerivedConstants,
}

pub fn parse_and_validate(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let config: ScenarioConfig = toml::from_str(&text).map_err(|e| ScenarioError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    // surface structural violations immediately; prepare() re-validates
    validate_shallow(&config)?;
    Ok(config)
}

fn violation(out: &mut Vec<Violation>, key: &str, value: impl ToString, rule: &str) {
    out.push(Violation {
        key: key.to_string(),
        value: value.to_string(),
        rule: rule.to_string(),
    });
}

/// Structural checks that need no derived constants.
fn validate_shallow(config: &ScenarioConfig) -> Result<(), ScenarioError> {
    let mut v = Vec::new();

    match config.grid.dim {
        1 | 2 => {
            if config.grid.n.len() != config.grid.dim {
                violation(&mut v, "grid.n", format!("{:?}", config.grid.n), "one entry per axis");
            }
            if config.grid.extent.len() != config.grid.dim {
                violation(
                    &mut v,
                    "grid.extent",
                    format!("{:?}", config.grid.extent),
                    "one entry per axis",
                );
            }
        }
        d => violation(&mut v, "grid.dim", d, "dim must be 1 or 2"),
    }
    for &n in &config.grid.n {
        if n < 2 {
            violation(&mut v, "grid.n", n, "at least 2 interior nodes per axis");
        }
    }
    for &e in &config.grid.extent {
        if !(e > 0.0) {
            violation(&mut v, "grid.extent", e, "extent must be positive");
        }
    }

    match config.potential.kind.as_str() {
        "doublewell" | "quadratic" => {
            match config.potential.k {
                Some(k) if k > 0.0 => {}
                other => violation(
                    &mut v,
                    "potential.k",
                    format!("{other:?}"),
                    "a positive k is required for this potential",
                ),
            }
        }
        "log" => match config.potential.theta {
            Some(t) if t > 0.0 => {}
            other => violation(
                &mut v,
                "potential.theta",
                format!("{other:?}"),
                "a positive theta is required for the logarithmic potential",
            ),
        },
        k => violation(
            &mut v,
            "potential.kind",
            k,
            "kind must be one of: doublewell, quadratic, log",
        ),
    }

    match config.graph.kind.as_str() {
        "zero" | "halfline" => {}
        "sign" => match config.graph.beta0 {
            Some(b) if b > 0.0 => {}
            other => violation(
                &mut v,
                "graph.beta0",
                format!("{other:?}"),
                "the sign graph needs beta0 > 0",
            ),
        },
        "interval" => match (config.graph.a, config.graph.b) {
            (Some(a), Some(b)) => {
                if !(a <= 0.0 && 0.0 <= b) {
                    violation(
                        &mut v,
                        "graph.a, graph.b",
                        format!("[{a}, {b}]"),
                        "the interval graph requires 0 in [a, b]",
                    );
                }
            }
            other => violation(
                &mut v,
                "graph.a, graph.b",
                format!("{other:?}"),
                "the interval graph needs both bounds",
            ),
        },
        k => violation(
            &mut v,
            "graph.kind",
            k,
            "kind must be one of: zero, sign, interval, halfline",
        ),
    }

    if !(config.time.t_end > 0.0) {
        violation(&mut v, "time.t_end", config.time.t_end, "t_end must be positive");
    }
    if let Some(tau) = config.time.tau {
        if !(tau > 0.0) {
            violation(&mut v, "time.tau", tau, "tau must be positive");
        }
    }
    if !matches!(config.time.scheme.as_str(), "picard" | "semi") {
        violation(&mut v, "time.scheme", &config.time.scheme, "scheme must be picard or semi");
    }
    if !(config.picard.tol > 0.0) {
        violation(&mut v, "picard.tol", config.picard.tol, "tolerance must be positive");
    }
    if config.picard.max == 0 {
        violation(&mut v, "picard.max", config.picard.max, "at least one pass");
    }
    if !(config.elliptic.tol > 0.0) {
        violation(&mut v, "elliptic.tol", config.elliptic.tol, "tolerance must be positive");
    }
    if config.output.subsample == 0 {
        violation(&mut v, "output.subsample", 0, "subsample must be >= 1");
    }

    match config.initial.kind.as_str() {
        "constant" => {
            if config.initial.value.is_none() {
                violation(&mut v, "initial.value", "missing", "constant initial data needs value");
            }
        }
        "expression" => match &config.initial.expr {
            None => violation(&mut v, "initial.expr", "missing", "expression initial data needs expr"),
            Some(e) => {
                if let Err(err) = Expr::parse(e) {
                    violation(&mut v, "initial.expr", e, &err.to_string());
                }
            }
        },
        "csv" => {
            if config.initial.path.is_none() {
                violation(&mut v, "initial.path", "missing", "csv initial data needs path");
            }
        }
        k => violation(
            &mut v,
            "initial.kind",
            k,
            "kind must be one of: constant, expression, csv",
        ),
    }

    if let Some(b) = &config.boundary {
        match b.kind.as_str() {
            "uniform" => match (&b.times, &b.values) {
                (Some(times), Some(values)) => {
                    if TimeSeries::new(times.clone(), values.clone()).is_err() {
                        violation(
                            &mut v,
                            "boundary.times",
                            format!("{times:?}"),
                            "times must be strictly increasing and match values in length",
                        );
                    }
                }
                _ => violation(
                    &mut v,
                    "boundary",
                    "missing times/values",
                    "uniform boundary data needs times and values",
                ),
            },
            "trace" => match (&b.times, &b.traces) {
                (Some(times), Some(traces)) => {
                    if times.len() != traces.len() || times.windows(2).any(|p| p[1] <= p[0]) {
                        violation(
                            &mut v,
                            "boundary.times",
                            format!("{times:?}"),
                            "times must be strictly increasing, one trace per time",
                        );
                    }
                }
                _ => violation(
                    &mut v,
                    "boundary",
                    "missing times/traces",
                    "trace boundary data needs times and traces",
                ),
            },
            k => violation(&mut v, "boundary.kind", k, "kind must be uniform or trace"),
        }
    }

    if let Some(p) = &config.physical {
        if !(p.alpha > 0.0) {
            violation(&mut v, "physical.alpha", p.alpha, "alpha must be positive");
        }
        if !(p.m > 0.0) {
            violation(&mut v, "physical.m", p.m, "mobility must be positive");
        }
    }

    if let Some(h) = &config.hysteresis {
        if h.tau_chars.is_empty() || h.tau_chars.windows(2).any(|p| p[1] <= p[0]) {
            violation(
                &mut v,
                "hysteresis.tau_chars",
                format!("{:?}", h.tau_chars),
                "an increasing, nonempty ladder is required",
            );
        }
    }

    if v.is_empty() {
        Ok(())
    } else {
        Err(ScenarioError::Validation(v))
    }
}

pub fn potential_from_config(config: &PotentialConfig) -> Potential {
    match config.kind.as_str() {
        "doublewell" => Potential::DoubleWell { k: config.k.expect("validated") },
        "quadratic" => Potential::Quadratic { k: config.k.expect("validated") },
        "log" => Potential::Logarithmic { theta: config.theta.expect("validated") },
        _ => unreachable!("validated"),
    }
}

pub fn graph_from_config(config: &GraphConfig) -> MonotoneGraph {
    match config.kind.as_str() {
        "zero" => MonotoneGraph::Zero,
        "sign" => MonotoneGraph::scaled_sign(config.beta0.expect("validated")).expect("validated"),
        "interval" => MonotoneGraph::indicator_interval(
            config.a.expect("validated"),
            config.b.expect("validated"),
        )
        .expect("validated"),
        "halfline" => MonotoneGraph::IndicatorHalfLine,
        _ => unreachable!("validated"),
    }
}

/// Apply the nondimensional rescaling induced by the physical block: time by
/// T₀ = α, lengths by L₀ = √(m/α), and the graph by β̃(r) = β(r/T₀). Returns
/// the scaled config (physical block removed) and the scales used.
pub fn nondimensionalize(config: &ScenarioConfig) -> (ScenarioConfig, PhysicalScales) {
    let Some(ref phys) = config.physical else {
        return (config.clone(), PhysicalScales { alpha: 1.0, m: 1.0 });
    };
    let scales = PhysicalScales { alpha: phys.alpha, m: phys.m };
    let t0 = scales.t0();
    let l0 = scales.l0();
    let mut scaled = config.clone();
    scaled.physical = None;
    scaled.time.t_end /= t0;
    if let Some(tau) = scaled.time.tau.as_mut() {
        *tau /= t0;
    }
    for e in scaled.grid.extent.iter_mut() {
        *e /= l0;
    }
    if let Some(b) = scaled.boundary.as_mut() {
        if let Some(times) = b.times.as_mut() {
            for t in times.iter_mut() {
                *t /= t0;
            }
        }
    }
    if scaled.graph.kind == "interval" {
        scaled.graph.a = scaled.graph.a.map(|a| t0 * a);
        scaled.graph.b = scaled.graph.b.map(|b| t0 * b);
    }
    (scaled, scales)
}

fn build_grid(config: &GridConfig) -> Result<Arc<Grid>, ScenarioError> {
    let grid = if config.dim == 1 {
        Grid::new_1d(config.n[0], config.extent[0])
    } else {
        Grid::new_2d(config.n[0], config.n[1], config.extent[0], config.extent[1])
    };
    grid.map_err(|e| {
        ScenarioError::Validation(vec![Violation {
            key: "grid".into(),
            value: format!("{config:?}"),
            rule: e.to_string(),
        }])
    })
}

fn build_u0(
    config: &ScenarioConfig,
    grid: &Arc<Grid>,
    config_dir: &Path,
) -> Result<Field, ScenarioError> {
    match config.initial.kind.as_str() {
        "constant" => Ok(Field::constant(grid, config.initial.value.expect("validated"))),
        "expression" => {
            let expr = Expr::parse(config.initial.expr.as_ref().expect("validated"))
                .expect("validated");
            Ok(Field::from_fn(grid, |x, y| expr.eval(x, y)))
        }
        "csv" => {
            let rel = config.initial.path.as_ref().expect("validated");
            let path = config_dir.join(rel);
            let values = crate::output::read_field_csv(&path).map_err(|e| {
                ScenarioError::Validation(vec![Violation {
                    key: "initial.path".into(),
                    value: rel.clone(),
                    rule: e.to_string(),
                }])
            })?;
            Field::from_values(grid, values).map_err(|_| {
                ScenarioError::Validation(vec![Violation {
                    key: "initial.path".into(),
                    value: rel.clone(),
                    rule: "value count must match the grid's interior node count".into(),
                }])
            })
        }
        _ => unreachable!("validated"),
    }
}

fn build_datum(
    config: &ScenarioConfig,
    grid: &Arc<Grid>,
) -> Result<BoundaryDatum, ScenarioError> {
    match &config.boundary {
        None => Ok(BoundaryDatum::Uniform(TimeSeries::constant(0.0))),
        Some(b) if b.kind == "uniform" => Ok(BoundaryDatum::Uniform(
            TimeSeries::new(
                b.times.clone().expect("validated"),
                b.values.clone().expect("validated"),
            )
            .expect("validated"),
        )),
        Some(b) => {
            let traces = b.traces.clone().expect("validated");
            for t in &traces {
                if t.len() != grid.boundary_count() {
                    return Err(ScenarioError::Validation(vec![Violation {
                        key: "boundary.traces".into(),
                        value: format!("{} values", t.len()),
                        rule: format!(
                            "each trace needs {} boundary values for this grid",
                            grid.boundary_count()
                        ),
                    }]));
                }
            }
            Ok(BoundaryDatum::Trace { times: b.times.clone().expect("validated"), traces })
        }
    }
}

/// Provisional bound on ‖μ − μ♭‖∞ used to place the thresholds before the
/// run: a safety factor over the boundary signal size plus the largest |ψ'|
/// along the initial data range.
fn provisional_mu_bound(potential: &Potential, datum: &BoundaryDatum, u0: &Field) -> f64 {
    let (lo, hi) = (u0.min(), u0.max());
    let mut dpsi_max = 0.0f64;
    for i in 0..=256 {
        let r = lo + (hi - lo) * i as f64 / 256.0;
        if let Ok(d) = potential.prime(r) {
            dpsi_max = dpsi_max.max(d.abs());
        }
    }
    (2.0 * (datum.max_abs() + dpsi_max)).max(1.0)
}

/// Validate a parsed config against the derived constants and assemble the
/// run-ready scenario. Violations are collected, not short-circuited.
pub fn prepare(config: &ScenarioConfig, config_dir: &Path) -> Result<Prepared, ScenarioError> {
    validate_shallow(config)?;
    let (scaled, scales) = nondimensionalize(config);
    let grid = build_grid(&scaled.grid)?;
    let u0 = build_u0(&scaled, &grid, config_dir)?;
    let datum = build_datum(&scaled, &grid)?;
    let potential = potential_from_config(&scaled.potential);

    let mut violations = Vec::new();

    // initial data must stay strictly inside the potential domain
    let (dom_lo, dom_hi) = potential.domain();
    let (u0_min, u0_max) = (u0.min(), u0.max());
    if u0_min <= dom_lo || u0_max >= dom_hi {
        violation(
            &mut violations,
            "initial",
            format!("range [{u0_min}, {u0_max}]"),
            &format!("initial data must lie inside the potential domain ({dom_lo}, {dom_hi})"),
        );
    }
    if !violations.is_empty() {
        return Err(ScenarioError::Validation(violations));
    }

    let k1 = potential.curvature_lower_bound();
    let m_pre = scaled
        .truncation
        .as_ref()
        .and_then(|t| t.m_pre)
        .unwrap_or_else(|| provisional_mu_bound(&potential, &datum, &u0));
    let (kstar_low, kstar_high, m_effective) = potential
        .thresholds_containing(m_pre, u0_min, u0_max)
        .map_err(|e| {
            ScenarioError::Validation(vec![Violation {
                key: "truncation.m_pre".into(),
                value: m_pre.to_string(),
                rule: e.to_string(),
            }])
        })?;
    let (trunc_low, trunc_high) = potential
        .pick_truncation_bounds(kstar_low, kstar_high)
        .map_err(|e| {
            ScenarioError::Validation(vec![Violation {
                key: "truncation".into(),
                value: format!("[{kstar_low}, {kstar_high}]"),
                rule: e.to_string(),
            }])
        })?;
    let psi_star: TruncatedPotential =
        potential.truncate(trunc_low, trunc_high).map_err(|e| {
            ScenarioError::Validation(vec![Violation {
                key: "truncation".into(),
                value: format!("[{trunc_low}, {trunc_high}]"),
                rule: e.to_string(),
            }])
        })?;
    let lipschitz = psi_star.lipschitz();

    // resolve the step: default tau targets tau*L = 1/2 and divides t_end
    let t_end = scaled.time.t_end;
    let tau = match scaled.time.tau {
        Some(tau) => {
            let ratio = t_end / tau;
            if (ratio - ratio.round()).abs() > 1e-8 * ratio.max(1.0) {
                violation(
                    &mut violations,
                    "time.tau",
                    tau,
                    "t_end must be an integer multiple of tau",
                );
            }
            tau
        }
        None => {
            let steps = (t_end * lipschitz / 0.5).ceil().max(1.0);
            t_end / steps
        }
    };
    let scheme = match scaled.time.scheme.as_str() {
        "picard" => Scheme::PicardImplicit,
        _ => Scheme::SemiImplicit,
    };
    if scheme == Scheme::PicardImplicit && !(tau * lipschitz < 1.0) {
        violation(
            &mut violations,
            "time.tau",
            tau,
            &format!(
                "contraction bound violated: tau*L = {} must be < 1 (L = {lipschitz})",
                tau * lipschitz
            ),
        );
    }
    if !violations.is_empty() {
        return Err(ScenarioError::Validation(violations));
    }

    let schedule = Schedule::new(t_end, tau, scheme, config.picard.tol, config.picard.max, lipschitz)
        .expect("checked above");
    let steps = schedule.step_count();
    let model = Model {
        grid,
        graph: graph_from_config(&scaled.graph),
        psi_star,
        elliptic_tol: scaled.elliptic.tol,
        elliptic_max_outer: scaled.elliptic.max_outer,
    };

    Ok(Prepared {
        config: config.clone(),
        model,
        schedule,
        datum,
        u0,
        derived: DerivedConstants {
            k1,
            m_pre,
            m_effective,
            kstar_low,
            kstar_high,
            trunc_low,
            trunc_high,
            lipschitz,
            tau,
            steps,
            u0_min,
            u0_max,
            t0: scales.t0(),
            l0: scales.l0(),
        },
    })
}

/// Apply one sweep override (dotted key, numeric value) to a config copy.
pub fn apply_override(
    config: &ScenarioConfig,
    key: &str,
    value: f64,
) -> Result<ScenarioConfig, ScenarioError> {
    let mut c = config.clone();
    match key {
        "time.tau" => c.time.tau = Some(value),
        "time.t_end" => c.time.t_end = value,
        "potential.k" => c.potential.k = Some(value),
        "potential.theta" => c.potential.theta = Some(value),
        "graph.beta0" => c.graph.beta0 = Some(value),
        "graph.a" => c.graph.a = Some(value),
        "graph.b" => c.graph.b = Some(value),
        "initial.value" => c.initial.value = Some(value),
        "picard.tol" => c.picard.tol = value,
        "elliptic.tol" => c.elliptic.tol = value,
        _ => {
            return Err(ScenarioError::Validation(vec![Violation {
                key: "sweep.axes.key".into(),
                value: key.into(),
                rule: "sweepable keys: time.tau, time.t_end, potential.k, potential.theta, \
                       graph.beta0, graph.a, graph.b, initial.value, picard.tol, elliptic.tol"
                    .into(),
            }]))
        }
    }
    Ok(c)
}
