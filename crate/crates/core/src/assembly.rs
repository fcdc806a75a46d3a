//! Turns a scenario plus a reference trajectory into one convex subproblem.
//!
//! Decision vector, in order: positions, velocities, accelerations, one
//! robustness variable per goal per window step, one running-max variable per
//! goal per window step after the first, and (when the clearance weight is
//! positive) one hinge slack per obstacle per step. The running max at the
//! window start is not a separate variable; its column *is* the first
//! robustness column.
//!
//! Constraint rows are laid out to match the solver's cone order: all
//! equalities, then all one-sided inequalities, then the second-order cone
//! blocks (planar speed first, then the robustness epigraphs).

use crate::dynamics::{
    col_x, dynamics_constraints, kinematic_vars, limit_constraints, stack_trajectory, LinearRow,
    Trajectory,
};
use crate::geometry::{align_penetrating_cuts, linearize_obstacles, signed_distance};
use crate::scenario::Scenario;
use crate::solver::sparse::CscMatrix;
use crate::solver::{Cone, ConicProgram};
use crate::stl::build_mu_chain;

/// Column bookkeeping for one subproblem.
#[derive(Debug, Clone)]
pub struct VariableLayout {
    pub steps: usize,
    pub num_goals: usize,
    pub num_obstacles: usize,
    pub num_vars: usize,
    window_lens: Vec<usize>,
    rho_offsets: Vec<usize>,
    mu_offsets: Vec<usize>,
    slack_offset: Option<usize>,
}

impl VariableLayout {
    pub fn from_scenario(s: &Scenario) -> Self {
        let steps = s.steps;
        let window_lens: Vec<usize> = s.goals.iter().map(|g| g.window_len()).collect();
        let mut next = kinematic_vars(steps);
        let mut rho_offsets = Vec::with_capacity(s.goals.len());
        for &len in &window_lens {
            rho_offsets.push(next);
            next += len;
        }
        let mut mu_offsets = Vec::with_capacity(s.goals.len());
        for &len in &window_lens {
            mu_offsets.push(next);
            next += len - 1;
        }
        let slack_offset = if s.weights.w3 > 0.0 && !s.obstacles.is_empty() {
            let off = next;
            next += s.obstacles.len() * steps;
            Some(off)
        } else {
            None
        };
        VariableLayout {
            steps,
            num_goals: s.goals.len(),
            num_obstacles: s.obstacles.len(),
            num_vars: next,
            window_lens,
            rho_offsets,
            mu_offsets,
            slack_offset,
        }
    }

    pub fn col_x(&self, t: usize, axis: usize) -> usize {
        col_x(t, axis)
    }

    pub fn col_v(&self, t: usize, axis: usize) -> usize {
        crate::dynamics::col_v(self.steps, t, axis)
    }

    pub fn col_a(&self, t: usize, axis: usize) -> usize {
        crate::dynamics::col_a(self.steps, t, axis)
    }

    pub fn window_len(&self, k: usize) -> usize {
        self.window_lens[k]
    }

    /// Robustness column of goal `k` at window position `j` (0-based).
    pub fn rho_col(&self, k: usize, j: usize) -> usize {
        assert!(j < self.window_lens[k]);
        self.rho_offsets[k] + j
    }

    /// Running-max column of goal `k` at window position `j >= 1`.
    pub fn mu_col(&self, k: usize, j: usize) -> usize {
        assert!(j >= 1 && j < self.window_lens[k]);
        self.mu_offsets[k] + j - 1
    }

    /// The column holding the running max at window position `j`; position 0
    /// is the robustness column itself.
    pub fn chain_col(&self, k: usize, j: usize) -> usize {
        if j == 0 {
            self.rho_col(k, 0)
        } else {
            self.mu_col(k, j)
        }
    }

    /// The column whose value the objective rewards: the running max at the
    /// window end.
    pub fn terminal_col(&self, k: usize) -> usize {
        self.chain_col(k, self.window_lens[k] - 1)
    }

    /// Hinge slack column for obstacle `m` at step `t`, when slacks exist.
    pub fn slack_col(&self, m: usize, t: usize) -> Option<usize> {
        self.slack_offset.map(|off| off + m * self.steps + (t - 1))
    }

    pub fn has_slacks(&self) -> bool {
        self.slack_offset.is_some()
    }
}

struct RowStack {
    triplets: Vec<(usize, usize, f64)>,
    rhs: Vec<f64>,
}

impl RowStack {
    fn push(&mut self, row: &LinearRow) {
        let r = self.rhs.len();
        for &(c, v) in &row.coeffs {
            self.triplets.push((r, c, v));
        }
        self.rhs.push(row.rhs);
    }
}

/// Builds the convex subproblem linearized around `reference`.
///
/// `rho_ref[k][j]` and `mu_ref[k][j]` are the robustness and running-max
/// linearization references over goal `k`'s window; the planner derives both
/// from the reference trajectory, which makes the linearized recursion exact
/// at the reference. `mu_ref[k][0]` must equal `rho_ref[k][0]`.
pub fn build_subproblem(
    s: &Scenario,
    reference: &Trajectory,
    rho_ref: &[Vec<f64>],
    mu_ref: &[Vec<f64>],
) -> (ConicProgram, VariableLayout) {
    assert_eq!(reference.steps(), s.steps, "reference horizon mismatch");
    assert_eq!(rho_ref.len(), s.goals.len());
    assert_eq!(mu_ref.len(), s.goals.len());
    let layout = VariableLayout::from_scenario(s);
    let steps = s.steps;
    let mut stack = RowStack { triplets: Vec::new(), rhs: Vec::new() };

    // equality rows: kinematics, then the linearized running-max recursions
    let dyn_block = dynamics_constraints(s);
    for row in &dyn_block.equalities {
        stack.push(row);
    }
    for (k, goal) in s.goals.iter().enumerate() {
        debug_assert!(
            (mu_ref[k][0] - rho_ref[k][0]).abs() <= 1e-9,
            "running-max reference must start at the robustness reference"
        );
        let chain = build_mu_chain(goal.window, &mu_ref[k], &rho_ref[k], s.params.alpha);
        for row in &chain.rows {
            let j = row.t - goal.tau_start();
            stack.push(&LinearRow {
                coeffs: vec![
                    (layout.chain_col(k, j), 1.0),
                    (layout.chain_col(k, j - 1), -row.coeffs.c_mu),
                    (layout.rho_col(k, j), -row.coeffs.c_rho),
                ],
                rhs: row.coeffs.c_0,
            });
        }
    }
    let num_zero = stack.rhs.len();

    // one-sided rows: acceleration bounds, hard clearance cuts, hinge pairs,
    // then the terminal sign requirement per goal
    let lim_block = limit_constraints(s);
    for row in &lim_block.inequalities {
        stack.push(row);
    }
    let mut cuts = linearize_obstacles(&s.obstacles, &reference.positions);
    align_penetrating_cuts(&s.obstacles, &reference.positions, &mut cuts);
    debug_assert_eq!(cuts.len(), s.obstacles.len() * steps);
    for cut in &cuts {
        // a reference point inside the obstacle only forbids going deeper:
        // consecutive interior points can linearize against opposite faces,
        // and demanding full clearance of both planes at once may outrun the
        // speed limit. The relaxation vanishes as the iterates pull free.
        stack.push(&LinearRow {
            coeffs: (0..3).map(|i| (col_x(cut.t, i), -cut.normal[i])).collect(),
            rhs: cut.offset - cut.reference_clearance.min(0.0),
        });
    }
    if layout.has_slacks() {
        for m in 0..s.obstacles.len() {
            for t in 1..=steps {
                let e = layout.slack_col(m, t).unwrap();
                let cut = &cuts[m * steps + (t - 1)];
                stack.push(&LinearRow { coeffs: vec![(e, -1.0)], rhs: 0.0 });
                let mut coeffs = vec![(e, -1.0)];
                coeffs.extend((0..3).map(|i| (col_x(t, i), -cut.normal[i])));
                stack.push(&LinearRow { coeffs, rhs: cut.offset - s.weights.d_safe });
            }
        }
    }
    for k in 0..s.goals.len() {
        stack.push(&LinearRow { coeffs: vec![(layout.terminal_col(k), -1.0)], rhs: 0.0 });
    }
    let num_nonneg = stack.rhs.len() - num_zero;

    let mut cones = vec![Cone::zero(num_zero), Cone::nonneg(num_nonneg)];
    for block in &lim_block.soc_blocks {
        for row in block {
            stack.push(row);
        }
        cones.push(Cone::soc(3));
    }
    for (k, goal) in s.goals.iter().enumerate() {
        for j in 0..layout.window_len(k) {
            let t = goal.tau_start() + j;
            stack.push(&LinearRow { coeffs: vec![(layout.rho_col(k, j), 1.0)], rhs: goal.epsilon });
            for i in 0..3 {
                stack.push(&LinearRow {
                    coeffs: vec![(col_x(t, i), -1.0)],
                    rhs: -goal.center[i],
                });
            }
            cones.push(Cone::soc(4));
        }
    }

    let n = layout.num_vars;
    let num_rows = stack.rhs.len();
    let p_triplets: Vec<(usize, usize, f64)> = (1..steps)
        .flat_map(|t| (0..3).map(move |axis| (t, axis)))
        .map(|(t, axis)| {
            let c = layout.col_a(t, axis);
            (c, c, 2.0 * s.weights.w2)
        })
        .collect();
    let mut q = vec![0.0; n];
    for k in 0..s.goals.len() {
        q[layout.terminal_col(k)] = -s.weights.w1;
    }
    if layout.has_slacks() {
        for m in 0..s.obstacles.len() {
            for t in 1..=steps {
                q[layout.slack_col(m, t).unwrap()] = s.weights.w3;
            }
        }
    }

    let prog = ConicProgram {
        p: CscMatrix::from_triplets(n, n, &p_triplets),
        q,
        a: CscMatrix::from_triplets(num_rows, n, &stack.triplets),
        b: stack.rhs,
        cones,
    };
    (prog, layout)
}

/// Stacks a trajectory and its robustness references into a full decision
/// vector; hinge slacks are set to their exact values at the reference. The
/// result is the natural warm start for the subproblem built at `reference`.
pub fn stack_reference(
    s: &Scenario,
    layout: &VariableLayout,
    reference: &Trajectory,
    rho_ref: &[Vec<f64>],
    mu_ref: &[Vec<f64>],
) -> Vec<f64> {
    let mut z = vec![0.0; layout.num_vars];
    z[..kinematic_vars(s.steps)].copy_from_slice(&stack_trajectory(reference));
    for k in 0..s.goals.len() {
        for j in 0..layout.window_len(k) {
            z[layout.rho_col(k, j)] = rho_ref[k][j];
            if j >= 1 {
                z[layout.mu_col(k, j)] = mu_ref[k][j];
            }
        }
    }
    if layout.has_slacks() {
        for (m, obs) in s.obstacles.iter().enumerate() {
            for t in 1..=s.steps {
                let phi = signed_distance(reference.position(t), obs);
                z[layout.slack_col(m, t).unwrap()] = (s.weights.d_safe - phi).max(0.0);
            }
        }
    }
    z
}

/// The exact planning objective of a trajectory: weighted reach reward (sign
/// flipped so lower is better), quadratic control effort, and the true hinge
/// clearance penalty.
pub fn objective_value_exact(s: &Scenario, traj: &Trajectory) -> f64 {
    let reach: f64 =
        s.goals.iter().map(|g| crate::stl::window_robustness_exact(traj, g)).sum();
    let effort: f64 = traj.accelerations.iter().map(|a| a.norm_squared()).sum();
    let mut hinge = 0.0;
    for obs in &s.obstacles {
        for t in 1..=s.steps {
            hinge += (s.weights.d_safe - signed_distance(traj.position(t), obs)).max(0.0);
        }
    }
    s.weights.w1 * (-reach) + s.weights.w2 * effort + s.weights.w3 * hinge
}
