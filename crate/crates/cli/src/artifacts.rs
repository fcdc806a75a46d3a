//! Readers and writers for the run directory.
//!
//! Every number is printed through Rust's shortest round-trip `f64` display,
//! so reloading an artifact reproduces the written values bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use nalgebra::Vector3;
use serde::Serialize;
use stlcfs::{IterationRecord, PlanResult, PlanStatus, RobustnessTrace, Trajectory};

pub const TRAJECTORY_HEADER: &str = "t,x,y,z,vx,vy,vz,ax,ay,az";
pub const ROBUSTNESS_HEADER: &str = "t,k,rho_exact,mu";
pub const ITERATIONS_HEADER: &str = "iter,exact_obj,surrogate_obj,step_inf_norm,solver_status,solve_time_s";

/// One reloaded row of iterations.csv.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRow {
    pub iter: usize,
    pub exact_obj: f64,
    pub surrogate_obj: f64,
    pub step_inf_norm: f64,
    pub solver_status: String,
    pub solve_time_s: f64,
}

/// Run header written next to the raw report: outcome plus what produced it.
#[derive(Debug, Serialize)]
pub struct Summary {
    pub status: &'static str,
    pub pass: bool,
    pub iterations: usize,
    pub exact_objective: f64,
    pub plan_time_s: f64,
    pub overrides: Vec<String>,
    pub scenario: String,
}

pub fn status_label(status: PlanStatus) -> &'static str {
    match status {
        PlanStatus::Converged => "converged",
        PlanStatus::MaxIters => "max_iters",
        PlanStatus::Unverified => "unverified",
        PlanStatus::Infeasible => "infeasible",
    }
}

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let steps = traj.positions.len();
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for t in 1..=steps {
        let p = &traj.positions[t - 1];
        let v = &traj.velocities[t - 1];
        write!(out, "{t},{},{},{},{},{},{}", p.x, p.y, p.z, v.x, v.y, v.z).unwrap();
        if t < steps {
            let a = &traj.accelerations[t - 1];
            writeln!(out, ",{},{},{}", a.x, a.y, a.z).unwrap();
        } else {
            // no control is applied on the final step
            out.push_str(",,,\n");
        }
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn read_trajectory_csv(path: &Path) -> Result<Trajectory> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().context("trajectory file is empty")?;
    if header.trim() != TRAJECTORY_HEADER {
        bail!("line 1: expected header {TRAJECTORY_HEADER:?}, found {:?}", header.trim());
    }
    let mut positions = Vec::new();
    let mut velocities = Vec::new();
    let mut accelerations = Vec::new();
    let mut terminal_seen = false;
    for (i, line) in lines.enumerate() {
        let row = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        if terminal_seen {
            bail!("line {row}: data continues after the terminal row");
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            bail!("line {row}: expected 10 columns, found {}", fields.len());
        }
        let num = |col: usize| -> Result<f64> {
            fields[col].trim().parse().with_context(|| {
                format!("line {row}, column {}: bad number {:?}", col + 1, fields[col])
            })
        };
        let t: usize = fields[0]
            .trim()
            .parse()
            .with_context(|| format!("line {row}, column 1: bad step {:?}", fields[0]))?;
        if t != positions.len() + 1 {
            bail!("line {row}: step {t} out of order (expected {})", positions.len() + 1);
        }
        positions.push(Vector3::new(num(1)?, num(2)?, num(3)?));
        velocities.push(Vector3::new(num(4)?, num(5)?, num(6)?));
        if fields[7..].iter().all(|f| f.trim().is_empty()) {
            terminal_seen = true;
        } else {
            accelerations.push(Vector3::new(num(7)?, num(8)?, num(9)?));
        }
    }
    if positions.is_empty() {
        bail!("trajectory file has no data rows");
    }
    if !terminal_seen {
        bail!("missing terminal row with blank accelerations");
    }
    Ok(Trajectory { positions, velocities, accelerations })
}

pub fn write_robustness_csv(path: &Path, trace: &RobustnessTrace) -> Result<()> {
    let mut out = String::from(ROBUSTNESS_HEADER);
    out.push('\n');
    for (k, window) in trace.windows.iter().enumerate() {
        for (j, (&rho, &mu)) in trace.rho[k].iter().zip(&trace.mu[k]).enumerate() {
            writeln!(out, "{},{k},{rho},{mu}", window[0] + j).unwrap();
        }
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Reloads robustness.csv as `(t, k, rho_exact, mu)` rows.
pub fn read_robustness_csv(path: &Path) -> Result<Vec<(usize, usize, f64, f64)>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().context("robustness file is empty")?;
    if header.trim() != ROBUSTNESS_HEADER {
        bail!("line 1: expected header {ROBUSTNESS_HEADER:?}, found {:?}", header.trim());
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            bail!("line {row}: expected 4 columns, found {}", fields.len());
        }
        let t = fields[0].trim().parse().with_context(|| format!("line {row}: bad step"))?;
        let k = fields[1].trim().parse().with_context(|| format!("line {row}: bad goal"))?;
        let rho: f64 =
            fields[2].trim().parse().with_context(|| format!("line {row}: bad rho"))?;
        let mu: f64 = fields[3].trim().parse().with_context(|| format!("line {row}: bad mu"))?;
        rows.push((t, k, rho, mu));
    }
    Ok(rows)
}

pub fn write_iterations_csv(path: &Path, records: &[IterationRecord]) -> Result<()> {
    let mut out = String::from(ITERATIONS_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.iteration,
            r.exact_objective,
            r.surrogate_objective,
            r.step_inf_norm,
            r.solver_status,
            r.solve_time_s
        )
        .unwrap();
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn read_iterations_csv(path: &Path) -> Result<Vec<IterationRow>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().context("iterations file is empty")?;
    if header.trim() != ITERATIONS_HEADER {
        bail!("line 1: expected header {ITERATIONS_HEADER:?}, found {:?}", header.trim());
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            bail!("line {row}: expected 6 columns, found {}", fields.len());
        }
        let num = |col: usize| -> Result<f64> {
            fields[col]
                .trim()
                .parse()
                .with_context(|| format!("line {row}, column {}: bad number", col + 1))
        };
        rows.push(IterationRow {
            iter: fields[0].trim().parse().with_context(|| format!("line {row}: bad iter"))?,
            exact_obj: num(1)?,
            surrogate_obj: num(2)?,
            step_inf_norm: num(3)?,
            solver_status: fields[4].trim().to_string(),
            solve_time_s: num(5)?,
        });
    }
    Ok(rows)
}

/// Writes the five plan artifacts into `dir`, creating it if needed.
pub fn write_run_artifacts(
    dir: &Path,
    result: &PlanResult,
    plan_time_s: f64,
    overrides: &[String],
    scenario_path: &str,
) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_trajectory_csv(&dir.join("trajectory.csv"), &result.trajectory)?;
    write_robustness_csv(&dir.join("robustness.csv"), &result.trace)?;
    write_iterations_csv(&dir.join("iterations.csv"), &result.iterations)?;
    let report = serde_json::to_string_pretty(&result.report)?;
    fs::write(dir.join("report.json"), report + "\n")?;
    let summary = Summary {
        status: status_label(result.status),
        pass: result.report.pass,
        iterations: result.iterations.len(),
        exact_objective: result.exact_objective,
        plan_time_s,
        overrides: overrides.to_vec(),
        scenario: scenario_path.to_string(),
    };
    let summary = serde_json::to_string_pretty(&summary)?;
    fs::write(dir.join("summary.json"), summary + "\n")?;
    Ok(())
}

/// Derives the four whitespace-delimited figure files from a run directory's
/// CSV artifacts: the flight path, the objective history, the per-iteration
/// solve times, and the per-goal running-max robustness traces (padded with
/// NaN outside each window so plotting tools leave gaps).
pub fn write_fig_data(dir: &Path) -> Result<()> {
    let traj = read_trajectory_csv(&dir.join("trajectory.csv"))?;
    let iterations = read_iterations_csv(&dir.join("iterations.csv"))?;
    let robustness = read_robustness_csv(&dir.join("robustness.csv"))?;

    let mut fig1 = String::from("# t x y z\n");
    for (i, p) in traj.positions.iter().enumerate() {
        writeln!(fig1, "{} {} {} {}", i + 1, p.x, p.y, p.z).unwrap();
    }
    fs::write(dir.join("fig1_path.dat"), fig1)?;

    let mut fig2 = String::from("# iter exact_obj surrogate_obj\n");
    let mut fig3 = String::from("# iter solve_time_s\n");
    for r in &iterations {
        writeln!(fig2, "{} {} {}", r.iter, r.exact_obj, r.surrogate_obj).unwrap();
        writeln!(fig3, "{} {}", r.iter, r.solve_time_s).unwrap();
    }
    fs::write(dir.join("fig2_objective.dat"), fig2)?;
    fs::write(dir.join("fig3_time.dat"), fig3)?;

    let goals = robustness.iter().map(|&(_, k, _, _)| k + 1).max().unwrap_or(0);
    let mut mu_at = vec![std::collections::HashMap::new(); goals];
    for &(t, k, _, mu) in &robustness {
        mu_at[k].insert(t, mu);
    }
    let mut fig4 = String::from("# t");
    for k in 1..=goals {
        write!(fig4, " mu_{k}").unwrap();
    }
    fig4.push('\n');
    for t in 1..=traj.positions.len() {
        write!(fig4, "{t}").unwrap();
        for traces in &mu_at {
            match traces.get(&t) {
                Some(mu) => write!(fig4, " {mu}").unwrap(),
                None => write!(fig4, " NaN").unwrap(),
            }
        }
        fig4.push('\n');
    }
    fs::write(dir.join("fig4_mu.dat"), fig4)?;
    Ok(())
}
