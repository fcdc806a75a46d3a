//! The three commands, each returning its process exit code.

use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use stlcfs::{plan, verify, PlanStatus, Scenario};

use crate::artifacts;
use crate::overrides;

/// Margin tolerance used when re-checking trajectories, matching the
/// planner's own acceptance threshold.
const VERIFY_TOL: f64 = 1e-6;

/// Plans `scenario_path` and writes the run artifacts into `out_dir`.
/// Exit 0 on a converged and verified plan, 2 when the result failed exact
/// verification or the iteration budget ran out, 3 when the scenario is
/// infeasible, 1 on input or I/O trouble.
pub fn cmd_plan(scenario_path: &Path, out_dir: &Path, sets: &[String]) -> i32 {
    match run_plan(scenario_path, out_dir, sets) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn run_plan(scenario_path: &Path, out_dir: &Path, sets: &[String]) -> Result<i32> {
    let text = fs::read_to_string(scenario_path)
        .with_context(|| format!("reading {}", scenario_path.display()))?;
    let loaded: Scenario = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", scenario_path.display()))?;
    // overrides apply to the defaults-completed tree, so every settable key
    // exists and typos are caught instead of ignored
    let mut tree = serde_json::to_value(&loaded)?;
    for setting in sets {
        overrides::apply(&mut tree, setting)?;
    }
    let scenario: Scenario = serde_json::from_value(tree).context("applying overrides")?;

    let started = Instant::now();
    let result = plan(&scenario).context("planning failed")?;
    let plan_time_s = started.elapsed().as_secs_f64();
    log::info!(
        "{}: {} in {} iterations, exact objective {:.6}, {:.3}s",
        scenario_path.display(),
        artifacts::status_label(result.status),
        result.iterations.len(),
        result.exact_objective,
        plan_time_s
    );

    artifacts::write_run_artifacts(
        out_dir,
        &result,
        plan_time_s,
        sets,
        &scenario_path.display().to_string(),
    )?;
    Ok(match result.status {
        PlanStatus::Converged if result.report.pass => 0,
        PlanStatus::Infeasible => 3,
        _ => 2,
    })
}

/// Re-checks a trajectory CSV against a scenario under the exact semantics
/// and prints the resulting report as JSON. Exit 0 when every check passes,
/// 4 when any margin is violated, 1 on unreadable input.
pub fn cmd_verify(scenario_path: &Path, trajectory_csv: &Path) -> i32 {
    let report = match run_verify(scenario_path, trajectory_csv) {
        Ok(report) => report,
        Err(e) => {
            eprintln!("error: {e:#}");
            return 1;
        }
    };
    if report.pass {
        0
    } else {
        4
    }
}

fn run_verify(scenario_path: &Path, trajectory_csv: &Path) -> Result<stlcfs::VerificationReport> {
    let scenario = stlcfs::load_scenario(scenario_path)
        .with_context(|| format!("loading {}", scenario_path.display()))?;
    let trajectory = artifacts::read_trajectory_csv(trajectory_csv)?;
    let report = verify(&scenario, &trajectory, VERIFY_TOL);
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(report)
}

/// Emits the four figure-data files from a completed run directory.
pub fn cmd_report(dir: &Path) -> i32 {
    match artifacts::write_fig_data(dir) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
