//! Command-line surface of the planner: the `plan`, `verify`, and `report`
//! commands plus the file formats they exchange.
//!
//! Commands return process exit codes instead of calling `exit` themselves so
//! tests can drive them in-process: 0 success, 1 usage or I/O trouble,
//! 2 a plan that finished without passing exact verification, 3 a provably
//! infeasible scenario, 4 a verification run that found violations.

pub mod artifacts;
pub mod commands;
pub mod overrides;

pub use commands::{cmd_plan, cmd_report, cmd_verify};
