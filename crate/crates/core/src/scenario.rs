//! Scenario configuration: horizon, drone limits, goal windows, no-fly boxes.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// A planning instance loaded from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Number of discrete time steps; states are indexed t = 1..=steps.
    #[serde(rename = "T")]
    pub steps: usize,
    /// Step duration in seconds.
    pub dt: f64,
    /// Start position [m].
    pub x_init: Vector3<f64>,
    /// Start velocity [m/s]; hover start when omitted.
    #[serde(default = "Vector3::zeros")]
    pub v_init: Vector3<f64>,
    /// Planar (xy) speed limit [m/s].
    pub v_max: f64,
    /// Per-axis acceleration limit [m/s^2].
    pub a_max: f64,
    pub goals: Vec<Goal>,
    pub obstacles: Vec<BoxObstacle>,
    #[serde(default)]
    pub weights: Weights,
    #[serde(default)]
    pub params: AlgorithmParams,
}

/// A delivery target: reach the epsilon-ball around `center` at some step
/// inside `window` (1-based, inclusive both ends).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub center: Vector3<f64>,
    pub window: [usize; 2],
    pub epsilon: f64,
}

impl Goal {
    pub fn tau_start(&self) -> usize {
        self.window[0]
    }

    pub fn tau_end(&self) -> usize {
        self.window[1]
    }

    /// Number of steps in the window (inclusive bounds).
    pub fn window_len(&self) -> usize {
        self.window[1] - self.window[0] + 1
    }
}

/// Axis-aligned no-fly box, `lower` strictly below `upper` on every axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxObstacle {
    pub lower: Vector3<f64>,
    pub upper: Vector3<f64>,
}

impl BoxObstacle {
    /// True when `p` is strictly inside the open box.
    pub fn contains_strict(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| self.lower[i] < p[i] && p[i] < self.upper[i])
    }
}

/// Objective weights and the soft clearance radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    /// Reach-robustness weight.
    #[serde(default = "default_w1")]
    pub w1: f64,
    /// Control-effort weight.
    #[serde(default = "default_w2")]
    pub w2: f64,
    /// Soft clearance-hinge weight; zero drops the hinge entirely.
    #[serde(default = "default_w3")]
    pub w3: f64,
    /// Preferred obstacle standoff [m] for the hinge term.
    #[serde(default = "default_d_safe")]
    pub d_safe: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights { w1: default_w1(), w2: default_w2(), w3: default_w3(), d_safe: default_d_safe() }
    }
}

fn default_w1() -> f64 {
    10.0
}
fn default_w2() -> f64 {
    0.1
}
fn default_w3() -> f64 {
    1.0
}
fn default_d_safe() -> f64 {
    0.5
}

/// Outer-loop and solver tuning knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmParams {
    /// Smooth-max sharpness; the smoothed max exceeds the true max by at most alpha/2 per step.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_max_outer_iters")]
    pub max_outer_iters: usize,
    /// Outer-loop stop: position change (inf-norm) below this...
    #[serde(default = "default_step_tol")]
    pub step_tol: f64,
    /// ...and relative exact-objective change below this.
    #[serde(default = "default_cost_rel_tol")]
    pub cost_rel_tol: f64,
    /// Relative residual target for the embedded conic solver.
    #[serde(default = "default_solver_tol")]
    pub solver_tol: f64,
}

impl Default for AlgorithmParams {
    fn default() -> Self {
        AlgorithmParams {
            alpha: default_alpha(),
            max_outer_iters: default_max_outer_iters(),
            step_tol: default_step_tol(),
            cost_rel_tol: default_cost_rel_tol(),
            solver_tol: default_solver_tol(),
        }
    }
}

fn default_alpha() -> f64 {
    0.1
}
fn default_max_outer_iters() -> usize {
    20
}
fn default_step_tol() -> f64 {
    1e-3
}
fn default_cost_rel_tol() -> f64 {
    1e-3
}
fn default_solver_tol() -> f64 {
    1e-6
}

/// One validation failure; `code` is stable and machine-readable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub code: &'static str,
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({}): {}", self.code, self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("failed to read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse scenario JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("scenario invalid: {}", format_violations(.0))]
    Validation(Vec<Violation>),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

impl Scenario {
    /// Checks every structural invariant; empty result means the scenario is usable.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |code: &'static str, field: String, message: String| {
            out.push(Violation { code, field, message });
        };

        if self.steps < 2 {
            push("horizon_too_short", "T".into(), format!("need at least 2 steps, got {}", self.steps));
        }
        if !(self.dt > 0.0) {
            push("nonpositive_dt", "dt".into(), format!("dt must be positive, got {}", self.dt));
        }
        if !(self.v_max > 0.0) {
            push("nonpositive_v_max", "v_max".into(), format!("v_max must be positive, got {}", self.v_max));
        }
        if !(self.a_max > 0.0) {
            push("nonpositive_a_max", "a_max".into(), format!("a_max must be positive, got {}", self.a_max));
        }

        for (k, g) in self.goals.iter().enumerate() {
            let field = format!("goals[{k}]");
            if g.window[0] < 1 || g.window[0] > g.window[1] || g.window[1] > self.steps {
                push(
                    "invalid_window",
                    format!("{field}.window"),
                    format!("window [{}, {}] must satisfy 1 <= start <= end <= {}", g.window[0], g.window[1], self.steps),
                );
            }
            if !(g.epsilon > 0.0) {
                push("nonpositive_epsilon", format!("{field}.epsilon"), format!("epsilon must be positive, got {}", g.epsilon));
            }
            for (m, o) in self.obstacles.iter().enumerate() {
                if o.contains_strict(&g.center) {
                    push(
                        "goal_inside_obstacle",
                        format!("{field}.center"),
                        format!("goal center lies strictly inside obstacles[{m}]"),
                    );
                }
            }
        }

        for (m, o) in self.obstacles.iter().enumerate() {
            if !(0..3).all(|i| o.lower[i] < o.upper[i]) {
                push(
                    "degenerate_obstacle",
                    format!("obstacles[{m}]"),
                    "degenerate obstacle: lower must be strictly below upper on every axis".into(),
                );
            }
        }

        let w = &self.weights;
        for (name, val) in [("w1", w.w1), ("w2", w.w2), ("w3", w.w3)] {
            if val < 0.0 {
                push("negative_weight", format!("weights.{name}"), format!("{name} must be nonnegative, got {val}"));
            }
        }
        if w.d_safe < 0.0 {
            push("negative_d_safe", "weights.d_safe".into(), format!("d_safe must be nonnegative, got {}", w.d_safe));
        }

        let p = &self.params;
        if !(p.alpha > 0.0) {
            push("nonpositive_alpha", "params.alpha".into(), format!("alpha must be positive, got {}", p.alpha));
        }
        if p.max_outer_iters == 0 {
            push("zero_max_outer_iters", "params.max_outer_iters".into(), "need at least one outer iteration".into());
        }
        for (name, val) in [("step_tol", p.step_tol), ("cost_rel_tol", p.cost_rel_tol), ("solver_tol", p.solver_tol)] {
            if !(val > 0.0) {
                push("nonpositive_tolerance", format!("params.{name}"), format!("{name} must be positive, got {val}"));
            }
        }

        // NaN/inf anywhere would silently poison the optimizer; reject up front.
        for (field, value) in self.numeric_fields() {
            if !value.is_finite() {
                push("nonfinite_value", field, format!("value {value} is not finite"));
            }
        }

        out
    }

    fn numeric_fields(&self) -> Vec<(String, f64)> {
        let mut fields = vec![
            ("dt".to_string(), self.dt),
            ("v_max".to_string(), self.v_max),
            ("a_max".to_string(), self.a_max),
            ("weights.w1".to_string(), self.weights.w1),
            ("weights.w2".to_string(), self.weights.w2),
            ("weights.w3".to_string(), self.weights.w3),
            ("weights.d_safe".to_string(), self.weights.d_safe),
            ("params.alpha".to_string(), self.params.alpha),
            ("params.step_tol".to_string(), self.params.step_tol),
            ("params.cost_rel_tol".to_string(), self.params.cost_rel_tol),
            ("params.solver_tol".to_string(), self.params.solver_tol),
        ];
        for i in 0..3 {
            fields.push((format!("x_init[{i}]"), self.x_init[i]));
            fields.push((format!("v_init[{i}]"), self.v_init[i]));
        }
        for (k, g) in self.goals.iter().enumerate() {
            fields.push((format!("goals[{k}].epsilon"), g.epsilon));
            for i in 0..3 {
                fields.push((format!("goals[{k}].center[{i}]"), g.center[i]));
            }
        }
        for (m, o) in self.obstacles.iter().enumerate() {
            for i in 0..3 {
                fields.push((format!("obstacles[{m}].lower[{i}]"), o.lower[i]));
                fields.push((format!("obstacles[{m}].upper[{i}]"), o.upper[i]));
            }
        }
        fields
    }
}

/// Parses and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    let scenario: Scenario = serde_json::from_str(&text)?;
    let violations = scenario.validate();
    if violations.is_empty() {
        Ok(scenario)
    } else {
        Err(ScenarioError::Validation(violations))
    }
}

/// Writes a scenario with every field explicit; numbers survive a round trip bit-exactly.
pub fn save_scenario(path: impl AsRef<Path>, scenario: &Scenario) -> Result<(), ScenarioError> {
    let text = serde_json::to_string_pretty(scenario)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}
