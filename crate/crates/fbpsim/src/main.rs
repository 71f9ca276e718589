use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fbpsim::orchestrate::{self, OrchestrateError};
use fbpsim::scenario;

#[derive(Parser)]
#[command(
    name = "fbpsim",
    version,
    about = "Diffusion with a monotone rate constraint: config-driven runs, sweeps, \
             hysteresis ladders, and offline re-checking"
)]
struct Cli {
    /// Suppress progress output
    #[arg(long, global = true)]
    quiet: bool,
    /// Worker threads for sweeps/ladders (fallback: FBPSIM_WORKERS, then all cores)
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario: snapshots, diagnostics CSV, manifest, reports
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (falls back to the config's output.dir)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Keep every K-th snapshot (default from the config)
        #[arg(long)]
        subsample: Option<usize>,
    },
    /// Run the override matrix from the config's [sweep] block, one directory per cell
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Slow-driving ladder from the config's [hysteresis] block
    Hysteresis {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run diagnostics on a stored run directory (no simulation)
    Check {
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let workers = cli.workers.or_else(|| {
        std::env::var("FBPSIM_WORKERS").ok().and_then(|v| v.parse().ok())
    });
    if let Some(n) = workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }

    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, message) = classify(&e);
            eprintln!(
                "{}",
                serde_json::json!({ "error": { "kind": kind, "message": message } })
            );
            ExitCode::FAILURE
        }
    }
}

fn classify(e: &OrchestrateError) -> (&'static str, String) {
    let kind = match e {
        OrchestrateError::Scenario(scenario::ScenarioError::Validation(_)) => "validation",
        OrchestrateError::Scenario(scenario::ScenarioError::Parse { .. }) => "parse",
        OrchestrateError::Scenario(scenario::ScenarioError::Io { .. }) => "io",
        OrchestrateError::Output(_) => "io",
        OrchestrateError::Step(_) => "solver",
        OrchestrateError::Hysteresis(_) => "hysteresis",
        OrchestrateError::BadRequest(_) => "usage",
        OrchestrateError::CheckFailed(_) => "check",
    };
    (kind, e.to_string())
}

fn dispatch(cli: &Cli) -> Result<(), OrchestrateError> {
    match &cli.command {
        Command::Run { config, out, subsample } => {
            let cfg = scenario::parse_and_validate(config)?;
            let dir = config_dir(config);
            let artifacts = orchestrate::run_to_dir(&cfg, &dir, out, *subsample, "run")?;
            if !cli.quiet {
                print_reports(&artifacts.reports);
                println!("artifacts written to {}", out.display());
            }
            if let Some(err) = &artifacts.error {
                return Err(OrchestrateError::BadRequest(format!(
                    "run stopped at step {}: {} (partial trajectory stored)",
                    err.at_step, err.message
                )));
            }
            if !artifacts.reports.all_pass {
                return Err(OrchestrateError::CheckFailed(failing_checks(&artifacts.reports)));
            }
            Ok(())
        }
        Command::Sweep { config, out } => {
            let cfg = scenario::parse_and_validate(config)?;
            let dir = config_dir(config);
            let report = orchestrate::sweep_to_dir(&cfg, &dir, out)?;
            let mut failed = Vec::new();
            for cell in &report.cells {
                if !cli.quiet {
                    println!(
                        "cell {:03} {:?}: {}",
                        cell.index,
                        cell.overrides,
                        if cell.all_pass { "pass" } else { "FAIL" }
                    );
                }
                if !cell.all_pass || cell.error.is_some() {
                    failed.push(cell.index);
                }
            }
            if let (false, Some(r)) = (cli.quiet, &report.refinement) {
                println!("refinement diffs {:?} ratios {:?}", r.final_diffs, r.ratios);
            }
            if failed.is_empty() {
                Ok(())
            } else {
                Err(OrchestrateError::CheckFailed(format!("failing sweep cells: {failed:?}")))
            }
        }
        Command::Hysteresis { config, out } => {
            let cfg = scenario::parse_and_validate(config)?;
            let summary = orchestrate::hysteresis_to_dir(&cfg, out)?;
            if !cli.quiet {
                for rung in &summary.rungs {
                    println!(
                        "tau_char {:>8}: distance {:.6e} (mu uniformity defect {:.3e}, {} steps)",
                        rung.tau_char, rung.distance, rung.mu_uniformity_defect, rung.steps
                    );
                }
                println!(
                    "stop reference loop closure: {:.3e}; distances strictly decreasing: {}",
                    summary.stop_loop_closure, summary.distances_strictly_decreasing
                );
            }
            if summary.distances_nonincreasing {
                Ok(())
            } else {
                Err(OrchestrateError::CheckFailed(
                    "ladder distances are not nonincreasing".into(),
                ))
            }
        }
        Command::Check { out } => {
            let outcome = orchestrate::check_dir(out)?;
            if !cli.quiet {
                print_reports(&outcome.recomputed);
                println!(
                    "stored reports {}",
                    if outcome.reports_match { "match" } else { "DO NOT MATCH" }
                );
            }
            if !outcome.reports_match {
                return Err(OrchestrateError::CheckFailed(
                    "recomputed reports differ from stored reports.json".into(),
                ));
            }
            if !outcome.all_pass {
                return Err(OrchestrateError::CheckFailed(failing_checks(&outcome.recomputed)));
            }
            Ok(())
        }
    }
}

fn config_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."))
}

fn print_reports(reports: &fbpsim::output::RunReports) {
    let verdict = |ok: bool| if ok { "pass" } else { "FAIL" };
    println!(
        "energy inequality: {} (worst margin {:.3e}, min xi*w {:.3e})",
        verdict(reports.energy.pass),
        reports.energy.worst_margin,
        reports.energy.min_dissipation
    );
    println!(
        "maximum principle: {} (u in [{:.6}, {:.6}], margins {:.3e}/{:.3e})",
        verdict(reports.max_principle.pass),
        reports.max_principle.kstar_low,
        reports.max_principle.kstar_high,
        reports.max_principle.low_margin,
        reports.max_principle.high_margin
    );
    println!("mu bound: sup |mu - mu_flat| = {:.6e}", reports.m_run);
    if reports.zeta_star_budget.skipped {
        println!("zeta* budget: skipped (zero graph)");
    } else {
        println!(
            "zeta* budget: {} (worst margin {:.3e}, flagged steps {})",
            verdict(reports.zeta_star_budget.pass),
            reports.zeta_star_budget.worst_margin,
            reports.zeta_star_budget.flagged_steps
        );
    }
    println!(
        "truncation consistency: {} (m_run {:.3e} vs m_effective {:.3e})",
        verdict(reports.truncation_consistent),
        reports.m_run,
        reports.m_effective
    );
}

fn failing_checks(reports: &fbpsim::output::RunReports) -> String {
    let mut failing = Vec::new();
    if !reports.energy.pass {
        failing.push("energy");
    }
    if !reports.max_principle.pass {
        failing.push("max_principle");
    }
    if !reports.zeta_star_budget.pass {
        failing.push("zeta_star_budget");
    }
    if !reports.mu_linf.all_finite {
        failing.push("mu_linf");
    }
    if !reports.truncation_consistent {
        failing.push("truncation_consistency");
    }
    format!("failing checks: {}", failing.join(", "))
}
