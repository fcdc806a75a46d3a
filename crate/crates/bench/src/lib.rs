//! Shared fixtures for the benchmark targets.

use std::path::Path;

use stlcfs::planner::initial_reference;
use stlcfs::stl::smoothed_chain_values;
use stlcfs::{rho_exact, Scenario, Trajectory};

/// The bundled three-goal urban scenario.
pub fn urban_scenario() -> Scenario {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/urban_three_goals.json");
    stlcfs::load_scenario(path).expect("bundled scenario must load")
}

/// Robustness profiles and smoothed running maxima along `traj`, as the
/// planner would seed them before the first subproblem.
pub fn linearization_references(s: &Scenario, traj: &Trajectory) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut rho_ref = Vec::new();
    let mut mu_ref = Vec::new();
    for goal in &s.goals {
        let rho: Vec<f64> = (goal.tau_start()..=goal.tau_end())
            .map(|t| rho_exact(traj.position(t), goal))
            .collect();
        mu_ref.push(smoothed_chain_values(&rho, s.params.alpha));
        rho_ref.push(rho);
    }
    (rho_ref, mu_ref)
}

/// First linearization point for the urban scenario.
pub fn urban_seed() -> (Scenario, Trajectory, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let s = urban_scenario();
    let reference = initial_reference(&s);
    let (rho_ref, mu_ref) = linearization_references(&s, &reference);
    (s, reference, rho_ref, mu_ref)
}
