//! Signed distance to axis-aligned boxes and tangent half-space linearization.
//!
//! The signed distance is Euclidean outside the box and the negated nearest-face
//! depth inside, which makes it a convex function of the query point.  Its
//! first-order expansion therefore never over-estimates the true distance, so a
//! point satisfying the linearized clearance constraint is genuinely clear of
//! the box.

use crate::scenario::BoxObstacle;
use nalgebra::Vector3;

/// Signed distance from `p` to the box: positive outside, negative inside,
/// zero on the boundary.
pub fn signed_distance(p: &Vector3<f64>, obs: &BoxObstacle) -> f64 {
    let mut excess_sq = 0.0;
    for i in 0..3 {
        let e = (obs.lower[i] - p[i]).max(p[i] - obs.upper[i]).max(0.0);
        excess_sq += e * e;
    }
    if excess_sq > 0.0 {
        return excess_sq.sqrt();
    }
    // Inside (or on the boundary): depth to the nearest face.
    let mut depth = f64::INFINITY;
    for i in 0..3 {
        depth = depth.min(p[i] - obs.lower[i]).min(obs.upper[i] - p[i]);
    }
    -depth
}

/// Unit subgradient of [`signed_distance`] at `p`.
///
/// Outside the box this is the exact gradient `(p - closest) / distance`.
/// Inside and on the boundary it is the outward normal of the nearest face;
/// ties go to the lowest axis (x, y, z) and, within an axis, to the
/// negative-facing side, so the choice is deterministic everywhere.
pub fn sd_gradient(p: &Vector3<f64>, obs: &BoxObstacle) -> Vector3<f64> {
    let mut excess_sq = 0.0;
    for i in 0..3 {
        let e = (obs.lower[i] - p[i]).max(p[i] - obs.upper[i]).max(0.0);
        excess_sq += e * e;
    }
    if excess_sq > 0.0 {
        let closest = Vector3::new(
            p[0].clamp(obs.lower[0], obs.upper[0]),
            p[1].clamp(obs.lower[1], obs.upper[1]),
            p[2].clamp(obs.lower[2], obs.upper[2]),
        );
        return (p - closest) / excess_sq.sqrt();
    }
    let mut best_dist = f64::INFINITY;
    let mut normal = Vector3::zeros();
    for i in 0..3 {
        // Negative-facing side first within each axis.
        for (dist, sign) in [(p[i] - obs.lower[i], -1.0), (obs.upper[i] - p[i], 1.0)] {
            if dist < best_dist {
                best_dist = dist;
                normal = Vector3::zeros();
                normal[i] = sign;
            }
        }
    }
    normal
}

/// Tangent half-space `normal . x + offset >= 0` approximating clearance from
/// one obstacle around one reference position.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedObstacleConstraint {
    /// Obstacle index (0-based).
    pub obstacle: usize,
    /// Time step (1-based).
    pub t: usize,
    pub normal: Vector3<f64>,
    pub offset: f64,
    /// Signed distance of the reference position itself; negative when the
    /// reference penetrates the obstacle, in which case demanding full
    /// clearance of the linearized plane can contradict the dynamics and the
    /// constraint should instead only forbid going deeper.
    pub reference_clearance: f64,
}

impl LinearizedObstacleConstraint {
    /// Linearized clearance at `x`; a lower bound on the true signed distance.
    pub fn eval(&self, x: &Vector3<f64>) -> f64 {
        self.normal.dot(x) + self.offset
    }
}

/// Linearizes every obstacle around every reference position, obstacle-major.
/// `positions[0]` is time step 1.
pub fn linearize_obstacles(
    obstacles: &[BoxObstacle],
    positions: &[Vector3<f64>],
) -> Vec<LinearizedObstacleConstraint> {
    let mut out = Vec::with_capacity(obstacles.len() * positions.len());
    for (m, obs) in obstacles.iter().enumerate() {
        for (i, p) in positions.iter().enumerate() {
            let phi = signed_distance(p, obs);
            let g = sd_gradient(p, obs);
            out.push(LinearizedObstacleConstraint {
                obstacle: m,
                t: i + 1,
                normal: g,
                offset: phi - g.dot(p),
                reference_clearance: phi,
            });
        }
    }
    out
}

/// Redirects the cuts of each run of consecutive penetrating reference samples
/// through one shared obstacle face, so the whole run agrees on an escape
/// direction.
///
/// A reference that tunnels through a box gets nearest-face cuts whose normals
/// flip sign mid-obstacle; the hinge gradients then pull the buried samples
/// toward opposite faces and the iteration stalls inside. Any single face
/// plane is a global under-estimator of the box signed distance, so swapping
/// the run's cuts for the plane of one face keeps them sound while making the
/// escape gradients consistent. Faces on the run's dominant travel axis are
/// skipped — leaving forward or backward along the path would need the two
/// samples bracketing the box to move apart faster than the speed limit
/// allows — and among the remaining faces the one needing the least total
/// displacement wins, ties broken by axis order x, y, z, lower face first.
pub fn align_penetrating_cuts(
    obstacles: &[BoxObstacle],
    positions: &[Vector3<f64>],
    cuts: &mut [LinearizedObstacleConstraint],
) {
    let steps = positions.len();
    for (m, obs) in obstacles.iter().enumerate() {
        let base = m * steps;
        let mut i = 0;
        while i < steps {
            if cuts[base + i].reference_clearance >= 0.0 {
                i += 1;
                continue;
            }
            let mut j = i;
            while j + 1 < steps && cuts[base + j + 1].reference_clearance < 0.0 {
                j += 1;
            }
            let entry = positions[i.saturating_sub(1)];
            let exit = positions[(j + 1).min(steps - 1)];
            let travel = exit - entry;
            let mut travel_axis = 0;
            for axis in 1..3 {
                if travel[axis].abs() > travel[travel_axis].abs() {
                    travel_axis = axis;
                }
            }
            let mut best: Option<(f64, usize, f64)> = None;
            for axis in 0..3 {
                if axis == travel_axis && travel != Vector3::zeros() {
                    continue;
                }
                for sign in [-1.0, 1.0] {
                    let plane = if sign > 0.0 { obs.upper[axis] } else { obs.lower[axis] };
                    let total: f64 =
                        (i..=j).map(|idx| sign * (plane - positions[idx][axis])).sum();
                    if best.is_none_or(|(b, _, _)| total < b) {
                        best = Some((total, axis, sign));
                    }
                }
            }
            let (_, axis, sign) = best.unwrap();
            let plane = if sign > 0.0 { obs.upper[axis] } else { obs.lower[axis] };
            for idx in i..=j {
                let cut = &mut cuts[base + idx];
                cut.normal = Vector3::zeros();
                cut.normal[axis] = sign;
                cut.offset = -sign * plane;
                cut.reference_clearance = sign * (positions[idx][axis] - plane);
            }
            i = j + 1;
        }
    }
}
