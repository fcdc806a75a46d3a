use std::path::PathBuf;

use clap::{Parser, Subcommand};

/// Plans collision-free delivery trajectories that reach every goal region
/// inside its time window.
#[derive(Parser)]
#[command(name = "stlcfs", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan a scenario and write the run artifacts.
    Plan {
        /// Scenario JSON file.
        scenario: PathBuf,
        /// Directory receiving trajectory.csv, robustness.csv,
        /// iterations.csv, report.json, and summary.json.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Dotted-path setting override, e.g. `--set weights.w3=0`
        /// (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Re-check a trajectory CSV against a scenario under exact semantics.
    Verify {
        /// Scenario JSON file.
        scenario: PathBuf,
        /// Trajectory CSV to check.
        trajectory: PathBuf,
    },
    /// Emit plot-ready figure data from a completed run directory.
    Report {
        /// Run directory holding the plan artifacts.
        dir: PathBuf,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("STL_CFS_LOG", "error"))
        .init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Plan { scenario, out, set } => stlcfs_cli::cmd_plan(&scenario, &out, &set),
        Command::Verify { scenario, trajectory } => {
            stlcfs_cli::cmd_verify(&scenario, &trajectory)
        }
        Command::Report { dir } => stlcfs_cli::cmd_report(&dir),
    };
    std::process::exit(code);
}
