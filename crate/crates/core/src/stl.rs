//! Reach robustness over time windows and its smooth convex surrogate.
//!
//! A goal contributes the per-step robustness
//!
//! ```text
//!     rho(t) = epsilon - |x_t - center|
//! ```
//!
//! and the window score `max_{t in window} rho(t)`: positive iff the ball is
//! entered somewhere inside the window.  The planner replaces the hard max by
//! the running recursion `mu(t) = G(mu(t-1), rho(t))` with the smoothed pairwise
//! max
//!
//! ```text
//!     G(m, r) = ((m + r) + sqrt((m - r)^2 + alpha^2)) / 2
//! ```
//!
//! which over-estimates `max(m, r)` by at most `alpha / 2`, is convex, and has
//! the closed-form partial derivatives used for the per-round linearization.

use crate::dynamics::Trajectory;
use crate::scenario::Goal;
use nalgebra::Vector3;

/// Per-step reach robustness `epsilon - |p - center|`.
pub fn rho_exact(p: &Vector3<f64>, goal: &Goal) -> f64 {
    goal.epsilon - (p - goal.center).norm()
}

/// Exact window score: max of [`rho_exact`] over the goal's window.
pub fn window_robustness_exact(traj: &Trajectory, goal: &Goal) -> f64 {
    (goal.tau_start()..=goal.tau_end())
        .map(|t| rho_exact(traj.position(t), goal))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Smoothed pairwise max; `max(m, r) < G <= max(m, r) + alpha / 2`.
pub fn smooth_max(m: f64, r: f64, alpha: f64) -> f64 {
    0.5 * (m + r + ((m - r) * (m - r) + alpha * alpha).sqrt())
}

/// First-order expansion of [`smooth_max`] around a reference pair.
///
/// `G(m, r) ~= c_mu * m + c_rho * r + c_0`.  Both partials are in (0, 1) and
/// sum to one, and because `G` is convex the expansion never over-estimates it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothMaxCoeffs {
    pub c_mu: f64,
    pub c_rho: f64,
    pub c_0: f64,
}

/// Linearization coefficients of [`smooth_max`] at `(m_ref, r_ref)`.
pub fn smooth_max_coeffs(m_ref: f64, r_ref: f64, alpha: f64) -> SmoothMaxCoeffs {
    let d = m_ref - r_ref;
    let root = (d * d + alpha * alpha).sqrt();
    let c_mu = 0.5 * (1.0 + d / root);
    let c_rho = 0.5 * (1.0 - d / root);
    let c_0 = smooth_max(m_ref, r_ref, alpha) - c_mu * m_ref - c_rho * r_ref;
    SmoothMaxCoeffs { c_mu, c_rho, c_0 }
}

/// One linearized recursion step: `mu(t) = c_mu * mu(t-1) + c_rho * rho(t) + c_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct MuChainRow {
    /// Time step this row defines (1-based); the first row has `t = window start + 1`.
    pub t: usize,
    pub coeffs: SmoothMaxCoeffs,
}

/// Linearized running-max recursion over one goal window.
///
/// The chain seeds with `mu(start) = rho(start)` (no separate variable), adds
/// one equality row per later window step, and finishes with the terminal
/// requirement `mu(end) >= 0`.  A single-step window has no rows: the terminal
/// requirement degenerates to `rho(start) >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct MuChain {
    pub window: [usize; 2],
    pub rows: Vec<MuChainRow>,
}

/// Builds the linearized recursion for a window given references over it;
/// `mu_ref[0]`/`rho_ref[0]` correspond to the window start.
pub fn build_mu_chain(window: [usize; 2], mu_ref: &[f64], rho_ref: &[f64], alpha: f64) -> MuChain {
    let len = window[1] - window[0] + 1;
    assert_eq!(mu_ref.len(), len, "mu reference must cover the window");
    assert_eq!(rho_ref.len(), len, "rho reference must cover the window");
    let rows = (1..len)
        .map(|j| MuChainRow {
            t: window[0] + j,
            coeffs: smooth_max_coeffs(mu_ref[j - 1], rho_ref[j], alpha),
        })
        .collect();
    MuChain { window, rows }
}

impl MuChain {
    /// Unrolls the chain into terminal weights: `mu(end) = sum_j w[j] * rho(start + j) + c`.
    /// All weights are nonnegative products of partials, so raising any
    /// in-window robustness never lowers the terminal value.
    pub fn unrolled_weights(&self) -> (Vec<f64>, f64) {
        let len = self.window[1] - self.window[0] + 1;
        let mut weights = vec![0.0; len];
        let mut constant = 0.0;
        // Weight of rho(start): the seed carried through every c_mu.
        weights[0] = 1.0;
        for (j, row) in self.rows.iter().enumerate() {
            for w in weights.iter_mut().take(j + 1) {
                *w *= row.coeffs.c_mu;
            }
            constant = constant * row.coeffs.c_mu + row.coeffs.c_0;
            weights[j + 1] = row.coeffs.c_rho;
        }
        (weights, constant)
    }

    /// Evaluates the linearized recursion on a robustness profile over the window.
    pub fn eval(&self, rho: &[f64]) -> f64 {
        let (weights, constant) = self.unrolled_weights();
        weights.iter().zip(rho).map(|(w, r)| w * r).sum::<f64>() + constant
    }
}

/// Runs the exact smoothed recursion (no linearization) over a profile.
pub fn smoothed_chain(rho: &[f64], alpha: f64) -> f64 {
    *smoothed_chain_values(rho, alpha).last().unwrap()
}

/// Every intermediate value of the smoothed recursion: `out[0] = rho[0]`,
/// `out[j] = smooth_max(out[j-1], rho[j], alpha)`. These are the natural
/// linearization references for the next convex subproblem.
pub fn smoothed_chain_values(rho: &[f64], alpha: f64) -> Vec<f64> {
    assert!(!rho.is_empty());
    let mut out = Vec::with_capacity(rho.len());
    out.push(rho[0]);
    for &r in &rho[1..] {
        let prev = *out.last().unwrap();
        out.push(smooth_max(prev, r, alpha));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::propagate;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn goal(center: [f64; 3], window: [usize; 2]) -> Goal {
        Goal { center: Vector3::new(center[0], center[1], center[2]), window, epsilon: 0.2 }
    }

    #[test]
    fn rho_at_center_is_epsilon() {
        let g = goal([17.0, 18.0, 5.0], [4, 15]);
        assert_eq!(rho_exact(&g.center, &g), 0.2);
    }

    #[test]
    fn rho_on_ball_boundary_is_zero() {
        let g = goal([17.0, 18.0, 5.0], [4, 15]);
        let p = g.center + Vector3::new(0.2, 0.0, 0.0);
        assert_relative_eq!(rho_exact(&p, &g), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn rho_from_scenario_start() {
        let g = goal([17.0, 18.0, 5.0], [4, 15]);
        let p = Vector3::new(0.0, 0.0, 5.0);
        // Planar offset (17, 18): distance sqrt(613).
        assert_relative_eq!(rho_exact(&p, &g), 0.2 - 613.0_f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn window_score_of_hover_is_the_pointwise_value() {
        let g = goal([17.0, 18.0, 5.0], [2, 6]);
        let hover = propagate(
            &Vector3::new(0.0, 0.0, 5.0),
            &Vector3::zeros(),
            &vec![Vector3::zeros(); 7],
            1.0,
        );
        assert_relative_eq!(window_robustness_exact(&hover, &g), 0.2 - 613.0_f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn window_score_picks_the_best_step() {
        // Drive through the goal center: the max is epsilon even though later
        // steps move away again.
        let g = goal([2.0, 0.0, 0.0], [1, 5]);
        let accel = vec![Vector3::new(1.0, 0.0, 0.0); 4];
        let traj = propagate(&Vector3::zeros(), &Vector3::zeros(), &accel, 1.0);
        // Positions: 0, 0, 1, 3, 6 on the x axis; best is x=3 at distance 1.
        assert_relative_eq!(window_robustness_exact(&traj, &g), 0.2 - 1.0, epsilon = 1e-12);
    }

    #[test]
    fn single_step_window_is_that_step() {
        let g = goal([0.0, 0.0, 1.0], [3, 3]);
        let hover = propagate(&Vector3::zeros(), &Vector3::zeros(), &vec![Vector3::zeros(); 4], 1.0);
        assert_relative_eq!(window_robustness_exact(&hover, &g), 0.2 - 1.0, epsilon = 1e-15);
    }

    #[test]
    fn smooth_max_at_equal_arguments() {
        // G(a, a) = a + alpha/2 exactly.
        for a in [-3.0, 0.0, 1.5, 20.0] {
            assert_relative_eq!(smooth_max(a, a, 0.1), a + 0.05, epsilon = 1e-15);
        }
    }

    #[test]
    fn smooth_max_frozen_value() {
        assert_relative_eq!(smooth_max(0.0, 3.0, 0.1), 0.5 * (3.0 + 9.01_f64.sqrt()), epsilon = 1e-15);
        // ~3.00083310, just above max(0, 3).
        assert!(smooth_max(0.0, 3.0, 0.1) > 3.0);
        assert!(smooth_max(0.0, 3.0, 0.1) < 3.0 + 0.05);
    }

    #[test]
    fn smooth_max_tightens_as_alpha_shrinks() {
        let (m, r) = (1.0, -0.5);
        let mut prev = smooth_max(m, r, 1.0);
        for alpha in [0.5, 0.1, 0.01, 1e-4] {
            let g = smooth_max(m, r, alpha);
            assert!(g < prev);
            prev = g;
        }
        assert_relative_eq!(smooth_max(m, r, 1e-8), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn coeffs_symmetric_point() {
        let c = smooth_max_coeffs(2.0, 2.0, 0.1);
        assert_relative_eq!(c.c_mu, 0.5, epsilon = 1e-15);
        assert_relative_eq!(c.c_rho, 0.5, epsilon = 1e-15);
        assert_relative_eq!(c.c_0, 0.05, epsilon = 1e-15);
    }

    #[test]
    fn coeffs_frozen_value() {
        let c = smooth_max_coeffs(1.0, 0.0, 0.1);
        let expected = 0.5 * (1.0 + 1.0 / 1.01_f64.sqrt());
        assert_relative_eq!(c.c_mu, expected, epsilon = 1e-15);
        assert_relative_eq!(c.c_rho, 1.0 - expected, epsilon = 1e-15);
        // ~0.9975186: strongly favors the larger argument.
        assert!(c.c_mu > 0.99 && c.c_mu < 1.0);
    }

    #[test]
    fn coeffs_saturate_toward_the_larger_argument() {
        let c = smooth_max_coeffs(10.0, -10.0, 0.1);
        assert!(c.c_mu > 0.999_99);
        let c = smooth_max_coeffs(-10.0, 10.0, 0.1);
        assert!(c.c_rho > 0.999_99);
    }

    #[test]
    fn over_approximation_band_holds_randomly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20_000 {
            let m = rng.gen_range(-20.0..20.0);
            let r = rng.gen_range(-20.0..20.0);
            let alpha = rng.gen_range(0.01..1.0);
            let gap = smooth_max(m, r, alpha) - m.max(r);
            assert!(gap > 0.0, "smoothed max must strictly dominate ({m}, {r}, {alpha})");
            assert!(gap <= alpha / 2.0 + 1e-15, "gap {gap} above alpha/2 ({m}, {r}, {alpha})");
        }
    }

    #[test]
    fn coeffs_form_a_convex_combination() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20_000 {
            let c = smooth_max_coeffs(
                rng.gen_range(-20.0..20.0),
                rng.gen_range(-20.0..20.0),
                rng.gen_range(0.01..1.0),
            );
            assert!((c.c_mu + c.c_rho - 1.0).abs() <= 1e-12);
            assert!(c.c_mu > 0.0 && c.c_mu < 1.0);
            assert!(c.c_rho > 0.0 && c.c_rho < 1.0);
        }
    }

    #[test]
    fn coeffs_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5_000 {
            let m = rng.gen_range(-20.0..20.0);
            let r = rng.gen_range(-20.0..20.0);
            let alpha = rng.gen_range(0.05..1.0);
            let c = smooth_max_coeffs(m, r, alpha);
            let h = 1e-6 * m.abs().max(r.abs()).max(1.0);
            let fd_mu = (smooth_max(m + h, r, alpha) - smooth_max(m - h, r, alpha)) / (2.0 * h);
            let fd_rho = (smooth_max(m, r + h, alpha) - smooth_max(m, r - h, alpha)) / (2.0 * h);
            assert_relative_eq!(c.c_mu, fd_mu, epsilon = 1e-6);
            assert_relative_eq!(c.c_rho, fd_rho, epsilon = 1e-6);
        }
    }

    #[test]
    fn linearization_never_overestimates_g() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..10_000 {
            let alpha = rng.gen_range(0.01..1.0);
            let (m0, r0) = (rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0));
            let (m1, r1) = (rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0));
            let c = smooth_max_coeffs(m0, r0, alpha);
            let lin = c.c_mu * m1 + c.c_rho * r1 + c.c_0;
            assert!(lin <= smooth_max(m1, r1, alpha) + 1e-9);
        }
    }

    #[test]
    fn chain_row_count_matches_window_length() {
        let refs = vec![0.0; 12];
        let chain = build_mu_chain([4, 15], &refs, &refs, 0.1);
        assert_eq!(chain.rows.len(), 11);
        assert_eq!(chain.rows[0].t, 5);
        assert_eq!(chain.rows.last().unwrap().t, 15);
    }

    #[test]
    fn single_step_window_has_no_rows() {
        let chain = build_mu_chain([7, 7], &[0.3], &[0.3], 0.1);
        assert!(chain.rows.is_empty());
        let (w, c) = chain.unrolled_weights();
        assert_eq!(w, vec![1.0]);
        assert_eq!(c, 0.0);
    }

    #[test]
    fn equal_references_give_symmetric_rows() {
        let refs = vec![1.0; 5];
        let chain = build_mu_chain([1, 5], &refs, &refs, 0.1);
        for row in &chain.rows {
            assert_relative_eq!(row.coeffs.c_mu, 0.5, epsilon = 1e-15);
            assert_relative_eq!(row.coeffs.c_rho, 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn unrolled_weights_are_positive_and_chain_evaluates_consistently() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..500 {
            let len = rng.gen_range(1..12usize);
            let window = [3, 3 + len - 1];
            let mu_ref: Vec<f64> = (0..len).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let rho_ref: Vec<f64> = (0..len).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let chain = build_mu_chain(window, &mu_ref, &rho_ref, 0.1);
            let (weights, constant) = chain.unrolled_weights();
            assert!(weights.iter().all(|&w| w > 0.0));

            // Fold the rows forward and compare against the unrolled form.
            let rho: Vec<f64> = (0..len).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let mut mu = rho[0];
            for (j, row) in chain.rows.iter().enumerate() {
                mu = row.coeffs.c_mu * mu + row.coeffs.c_rho * rho[j + 1] + row.coeffs.c_0;
            }
            let unrolled: f64 = weights.iter().zip(&rho).map(|(w, r)| w * r).sum::<f64>() + constant;
            assert_relative_eq!(mu, unrolled, epsilon = 1e-9);
            assert_relative_eq!(chain.eval(&rho), mu, epsilon = 1e-9);
        }
    }

    #[test]
    fn chained_references_reproduce_the_smoothed_recursion() {
        // When the mu references are themselves the smoothed chain of the rho
        // references, the linearization is exact along that profile.
        let rho_ref = [0.4, -1.0, 2.0, 1.5, -0.2];
        let alpha = 0.1;
        let mut mu_ref = vec![rho_ref[0]];
        for &r in &rho_ref[1..] {
            let prev = *mu_ref.last().unwrap();
            mu_ref.push(smooth_max(prev, r, alpha));
        }
        let chain = build_mu_chain([1, 5], &mu_ref, &rho_ref, alpha);
        assert_relative_eq!(chain.eval(&rho_ref), smoothed_chain(&rho_ref, alpha), epsilon = 1e-12);
    }
}
