//! Exact feasibility and goal checks, independent of every relaxation used
//! while planning.
//!
//! Each check reports a margin: the worst-case slack of its constraint over
//! the whole trajectory. Nonnegative means satisfied, and a check passes when
//! its margin is at least `-tol`. A margin of `+inf` marks a vacuous check
//! (no obstacles, say) and serializes as JSON null.

use crate::dynamics::Trajectory;
use crate::geometry::signed_distance;
use crate::scenario::{Goal, Scenario};
use crate::stl::{rho_exact, window_robustness_exact};
use serde::{Serialize, Serializer};

fn serialize_margin<S: Serializer>(v: &f64, ser: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        ser.serialize_f64(*v)
    } else {
        ser.serialize_none()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    /// Worst-case slack; `+inf` (serialized as null) when vacuous.
    #[serde(serialize_with = "serialize_margin")]
    pub margin: f64,
    /// 1-based time step attaining the margin.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
    /// Index into the scenario's obstacle or goal list.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub pass: bool,
    pub tol: f64,
    pub checks: Vec<CheckResult>,
    /// True when some segment's endpoints are clear of every obstacle by
    /// less than half the segment length, so the continuous path between
    /// samples could still clip a corner. Informational only.
    pub inter_sample_risk: bool,
}

/// Running maximum of the exact robustness over the goal's window: entry `j`
/// is the best robustness achieved up to the `j`-th window step.
pub fn stl_margin_trace(traj: &Trajectory, goal: &Goal) -> Vec<f64> {
    let mut best = f64::NEG_INFINITY;
    (goal.tau_start()..=goal.tau_end())
        .map(|t| {
            best = best.max(rho_exact(traj.position(t), goal));
            best
        })
        .collect()
}

fn check(
    name: &'static str,
    margin: f64,
    tol: f64,
    step: Option<usize>,
    index: Option<usize>,
) -> CheckResult {
    CheckResult { name, pass: margin >= -tol, margin, step, index }
}

/// Checks a trajectory against the exact scenario semantics. `tol` is the
/// numerical slack granted to every margin.
pub fn verify(s: &Scenario, traj: &Trajectory, tol: f64) -> VerificationReport {
    if traj.positions.len() != s.steps
        || traj.velocities.len() != s.steps
        || traj.accelerations.len() + 1 != s.steps
    {
        return VerificationReport {
            pass: false,
            tol,
            checks: vec![CheckResult {
                name: "trajectory_shape",
                pass: false,
                margin: f64::NEG_INFINITY,
                step: None,
                index: None,
            }],
            inter_sample_risk: false,
        };
    }

    let mut checks = Vec::with_capacity(6);

    // worst Euler residual over all transitions
    let mut residual = 0.0_f64;
    let mut residual_t = 1;
    for t in 1..s.steps {
        let rx = (traj.position(t + 1) - traj.position(t) - traj.velocity(t) * s.dt).abs().max();
        let rv =
            (traj.velocity(t + 1) - traj.velocity(t) - traj.acceleration(t) * s.dt).abs().max();
        let r = rx.max(rv);
        if r > residual {
            residual = r;
            residual_t = t;
        }
    }
    checks.push(check("dynamics_residual", -residual, tol, Some(residual_t), None));

    let init_err = (traj.position(1) - s.x_init)
        .abs()
        .max()
        .max((traj.velocity(1) - s.v_init).abs().max());
    checks.push(check("initial_state", -init_err, tol, Some(1), None));

    let (mut speed_margin, mut speed_t) = (f64::INFINITY, 1);
    for t in 1..=s.steps {
        let v = traj.velocity(t);
        let m = s.v_max - v.xy().norm();
        if m < speed_margin {
            speed_margin = m;
            speed_t = t;
        }
    }
    checks.push(check("planar_speed", speed_margin, tol, Some(speed_t), None));

    let (mut accel_margin, mut accel_t) = (f64::INFINITY, 1);
    for t in 1..s.steps {
        let m = s.a_max - traj.acceleration(t).abs().max();
        if m < accel_margin {
            accel_margin = m;
            accel_t = t;
        }
    }
    checks.push(check("acceleration_bounds", accel_margin, tol, Some(accel_t), None));

    let mut clearance = f64::INFINITY;
    let mut clearance_loc = None;
    for (m, obstacle) in s.obstacles.iter().enumerate() {
        for t in 1..=s.steps {
            let d = signed_distance(traj.position(t), obstacle);
            if d < clearance {
                clearance = d;
                clearance_loc = Some((t, m));
            }
        }
    }
    checks.push(check(
        "obstacle_clearance",
        clearance,
        tol,
        clearance_loc.map(|(t, _)| t),
        clearance_loc.map(|(_, m)| m),
    ));

    let mut goal_margin = f64::INFINITY;
    let mut goal_loc = None;
    for (k, goal) in s.goals.iter().enumerate() {
        let r = window_robustness_exact(traj, goal);
        if r < goal_margin {
            goal_margin = r;
            // the window step where this goal came closest
            let best_t = (goal.tau_start()..=goal.tau_end())
                .max_by(|&a, &b| {
                    rho_exact(traj.position(a), goal)
                        .partial_cmp(&rho_exact(traj.position(b), goal))
                        .unwrap()
                })
                .unwrap();
            goal_loc = Some((best_t, k));
        }
    }
    checks.push(check(
        "goal_windows",
        goal_margin,
        tol,
        goal_loc.map(|(t, _)| t),
        goal_loc.map(|(_, k)| k),
    ));

    let mut inter_sample_risk = false;
    if !s.obstacles.is_empty() {
        for t in 1..s.steps {
            let p0 = traj.position(t);
            let p1 = traj.position(t + 1);
            let half = 0.5 * (p1 - p0).norm();
            let clear = s
                .obstacles
                .iter()
                .map(|o| signed_distance(p0, o).min(signed_distance(p1, o)))
                .fold(f64::INFINITY, f64::min);
            if clear >= 0.0 && clear < half {
                inter_sample_risk = true;
                break;
            }
        }
    }

    let pass = checks.iter().all(|c| c.pass);
    VerificationReport { pass, tol, checks, inter_sample_risk }
}
