//! Discrete double-integrator kinematics and its constraint blocks.
//!
//! States are 1-based: positions and velocities at t = 1..=T, accelerations at
//! t = 1..=T-1, with forward-Euler updates
//!
//! ```text
//!     x[t+1] = x[t] + v[t] * dt
//!     v[t+1] = v[t] + a[t] * dt
//! ```
//!
//! The stacked decision vector used by the convex subproblem orders variables
//! as (x, v, a) before any goal or slack variables; [`col_x`], [`col_v`] and
//! [`col_a`] define that convention in one place.

use crate::scenario::Scenario;
use nalgebra::Vector3;

/// A discrete trajectory; consistent with the kinematics when built by
/// [`propagate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub positions: Vec<Vector3<f64>>,
    pub velocities: Vec<Vector3<f64>>,
    pub accelerations: Vec<Vector3<f64>>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.positions.len()
    }

    /// Position at 1-based step `t`.
    pub fn position(&self, t: usize) -> &Vector3<f64> {
        &self.positions[t - 1]
    }

    /// Velocity at 1-based step `t`.
    pub fn velocity(&self, t: usize) -> &Vector3<f64> {
        &self.velocities[t - 1]
    }

    /// Acceleration applied over [t, t+1], 1-based, t <= steps - 1.
    pub fn acceleration(&self, t: usize) -> &Vector3<f64> {
        &self.accelerations[t - 1]
    }
}

/// Rolls the kinematics forward from the initial state under the given
/// acceleration sequence (one entry per step transition).
pub fn propagate(
    x_init: &Vector3<f64>,
    v_init: &Vector3<f64>,
    accelerations: &[Vector3<f64>],
    dt: f64,
) -> Trajectory {
    let steps = accelerations.len() + 1;
    let mut positions = Vec::with_capacity(steps);
    let mut velocities = Vec::with_capacity(steps);
    positions.push(*x_init);
    velocities.push(*v_init);
    for a in accelerations {
        let x = positions.last().unwrap();
        let v = velocities.last().unwrap();
        positions.push(x + v * dt);
        velocities.push(velocities.last().unwrap() + a * dt);
    }
    Trajectory { positions, velocities, accelerations: accelerations.to_vec() }
}

/// Column of position axis `axis` at step `t` in the stacked vector.
pub fn col_x(t: usize, axis: usize) -> usize {
    3 * (t - 1) + axis
}

/// Column of velocity axis `axis` at step `t`.
pub fn col_v(steps: usize, t: usize, axis: usize) -> usize {
    3 * steps + 3 * (t - 1) + axis
}

/// Column of acceleration axis `axis` at step `t` (t <= steps - 1).
pub fn col_a(steps: usize, t: usize, axis: usize) -> usize {
    6 * steps + 3 * (t - 1) + axis
}

/// Number of stacked kinematic variables (positions, velocities, accelerations).
pub fn kinematic_vars(steps: usize) -> usize {
    9 * steps - 3
}

/// Stacks a trajectory into the (x, v, a) prefix of a decision vector.
pub fn stack_trajectory(traj: &Trajectory) -> Vec<f64> {
    let steps = traj.steps();
    let mut z = vec![0.0; kinematic_vars(steps)];
    for t in 1..=steps {
        for axis in 0..3 {
            z[col_x(t, axis)] = traj.position(t)[axis];
            z[col_v(steps, t, axis)] = traj.velocity(t)[axis];
        }
    }
    for t in 1..steps {
        for axis in 0..3 {
            z[col_a(steps, t, axis)] = traj.acceleration(t)[axis];
        }
    }
    z
}

/// One affine row over the stacked decision vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl LinearRow {
    /// The affine left-hand side `sum coeffs . z`.
    pub fn eval(&self, z: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(c, v)| v * z[c]).sum()
    }
}

/// Rows grouped by the cone their slack lives in.
///
/// * `equalities`: `sum = rhs`
/// * `inequalities`: `sum <= rhs`
/// * `soc_blocks`: the vector with entries `rhs_i - sum_i` lies in a second-order cone
#[derive(Debug, Clone, Default)]
pub struct ConstraintBlock {
    pub equalities: Vec<LinearRow>,
    pub inequalities: Vec<LinearRow>,
    pub soc_blocks: Vec<Vec<LinearRow>>,
}

/// Initial-state pins and the forward-Euler recursion as equality rows.
/// Row order: x(1), v(1), then per transition the position rows followed by
/// the velocity rows — 6 + 6(T-1) rows total.
pub fn dynamics_constraints(s: &Scenario) -> ConstraintBlock {
    let steps = s.steps;
    let mut equalities = Vec::with_capacity(6 * steps);
    for axis in 0..3 {
        equalities.push(LinearRow { coeffs: vec![(col_x(1, axis), 1.0)], rhs: s.x_init[axis] });
    }
    for axis in 0..3 {
        equalities.push(LinearRow { coeffs: vec![(col_v(steps, 1, axis), 1.0)], rhs: s.v_init[axis] });
    }
    for t in 1..steps {
        for axis in 0..3 {
            equalities.push(LinearRow {
                coeffs: vec![
                    (col_x(t + 1, axis), 1.0),
                    (col_x(t, axis), -1.0),
                    (col_v(steps, t, axis), -s.dt),
                ],
                rhs: 0.0,
            });
        }
        for axis in 0..3 {
            equalities.push(LinearRow {
                coeffs: vec![
                    (col_v(steps, t + 1, axis), 1.0),
                    (col_v(steps, t, axis), -1.0),
                    (col_a(steps, t, axis), -s.dt),
                ],
                rhs: 0.0,
            });
        }
    }
    ConstraintBlock { equalities, ..Default::default() }
}

/// Flight-envelope constraints: one planar-speed cone per step (vertical speed
/// deliberately unconstrained) and interval bounds per acceleration axis.
pub fn limit_constraints(s: &Scenario) -> ConstraintBlock {
    let steps = s.steps;
    let mut soc_blocks = Vec::with_capacity(steps);
    for t in 1..=steps {
        soc_blocks.push(vec![
            LinearRow { coeffs: vec![], rhs: s.v_max },
            LinearRow { coeffs: vec![(col_v(steps, t, 0), -1.0)], rhs: 0.0 },
            LinearRow { coeffs: vec![(col_v(steps, t, 1), -1.0)], rhs: 0.0 },
        ]);
    }
    let mut inequalities = Vec::with_capacity(6 * (steps - 1));
    for t in 1..steps {
        for axis in 0..3 {
            inequalities.push(LinearRow { coeffs: vec![(col_a(steps, t, axis), 1.0)], rhs: s.a_max });
            inequalities.push(LinearRow { coeffs: vec![(col_a(steps, t, axis), -1.0)], rhs: s.a_max });
        }
    }
    ConstraintBlock { inequalities, soc_blocks, ..Default::default() }
}
