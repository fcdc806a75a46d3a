//! Trajectory planning for time-windowed delivery runs in cluttered airspace.
//!
//! A scenario gives a drone a start state, axis-aligned no-fly boxes, and a
//! list of goal regions that must each be reached somewhere inside its own
//! time window.  Planning runs sequential convexification: each round
//! linearizes the smoothed reach objective and the obstacle clearances around
//! the previous trajectory, hands the resulting conic-quadratic program to the
//! embedded operator-splitting solver, and adopts the solution as the next
//! reference.  Every candidate is re-checked under the exact (non-smoothed)
//! semantics before it is reported as a plan.

pub mod assembly;
pub mod dynamics;
pub mod geometry;
pub mod planner;
pub mod scenario;
pub mod solver;
pub mod stl;
pub mod verify;

pub use assembly::{build_subproblem, objective_value_exact, VariableLayout};
pub use dynamics::Trajectory;
pub use geometry::{linearize_obstacles, sd_gradient, signed_distance, LinearizedObstacleConstraint};
pub use planner::{plan, IterationRecord, PlanResult, PlanStatus, RobustnessTrace};
pub use scenario::{load_scenario, save_scenario, AlgorithmParams, BoxObstacle, Goal, Scenario, Weights};
pub use solver::{cone_project, solve, Cone, ConeKind, ConicProgram, SolveResult, SolveStatus};
pub use stl::{rho_exact, smooth_max, smooth_max_coeffs, window_robustness_exact};
pub use verify::{stl_margin_trace, verify, CheckResult, VerificationReport};
