//! Embedded first-order solver for sparse conic quadratic programs
//!
//! ```text
//!     minimize    (1/2) z' P z + q' z
//!     subject to  A z + s = b,    s in K,
//! ```
//!
//! where `K` is a product of zero cones, nonnegative orthants and second-order
//! cones, in that order. The solver is an operator-splitting (ADMM) scheme: the
//! quasi-definite step system
//!
//! ```text
//!     [ P + sigma*I   A' ] [ x ]   [ rhs_x ]
//!     [ A       -1/rho*I ] [ v ] = [ rhs_v ]
//! ```
//!
//! is factored once with a cached sparse LDL' and reused every iteration, the
//! iterates are projected onto `b - K`, and Ruiz equilibration plus an adaptive
//! penalty keep the scheme well conditioned. Termination is decided on the
//! *unscaled* residuals, so reported accuracy refers to the original data.
//! Everything is plain deterministic floating point: same inputs, same output
//! bits, no threads.

pub mod sparse;

mod ldl;

use ldl::LdlFactorization;
use serde::Serialize;
use sparse::CscMatrix;
use std::path::Path;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConeKind {
    /// s = 0 (equality rows).
    Zero,
    /// s >= 0 elementwise.
    NonNeg,
    /// s = (t, u) with ||u|| <= t.
    Soc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Cone {
    pub kind: ConeKind,
    pub dim: usize,
}

impl Cone {
    pub fn zero(dim: usize) -> Self {
        Cone { kind: ConeKind::Zero, dim }
    }
    pub fn nonneg(dim: usize) -> Self {
        Cone { kind: ConeKind::NonNeg, dim }
    }
    pub fn soc(dim: usize) -> Self {
        Cone { kind: ConeKind::Soc, dim }
    }
}

/// A conic quadratic program in standard form. `p` holds the full symmetric
/// Hessian (both triangles).
#[derive(Debug, Clone, Serialize)]
pub struct ConicProgram {
    pub p: CscMatrix,
    pub q: Vec<f64>,
    pub a: CscMatrix,
    pub b: Vec<f64>,
    pub cones: Vec<Cone>,
}

#[derive(Debug, Error)]
pub enum ProgramError {
    #[error("dimension mismatch: {0}")]
    Dimensions(String),
    #[error("objective matrix is not symmetric")]
    NotSymmetric,
    #[error("objective matrix failed the positive-semidefiniteness spot check")]
    NotPsd,
    #[error("bad cone layout: {0}")]
    Cones(String),
}

impl ConicProgram {
    pub fn num_vars(&self) -> usize {
        self.q.len()
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    /// (1/2) z'Pz + q'z
    pub fn objective_value(&self, z: &[f64]) -> f64 {
        0.5 * self.p.quad_form(z) + dot(&self.q, z)
    }

    /// Structural sanity checks plus a deterministic sampled test for symmetry
    /// and positive semidefiniteness of `p` (a spot check, not a proof).
    pub fn validate(&self) -> Result<(), ProgramError> {
        let n = self.num_vars();
        let m = self.num_rows();
        if self.p.nrows != n || self.p.ncols != n {
            return Err(ProgramError::Dimensions(format!(
                "p is {}x{}, expected {n}x{n}",
                self.p.nrows, self.p.ncols
            )));
        }
        if self.a.nrows != m || self.a.ncols != n {
            return Err(ProgramError::Dimensions(format!(
                "a is {}x{}, expected {m}x{n}",
                self.a.nrows, self.a.ncols
            )));
        }
        if !self.p.is_symmetric(1e-10) {
            return Err(ProgramError::NotSymmetric);
        }
        let cone_dim: usize = self.cones.iter().map(|c| c.dim).sum();
        if cone_dim != m {
            return Err(ProgramError::Cones(format!("cone dims sum to {cone_dim}, expected {m}")));
        }
        for cone in &self.cones {
            match cone.kind {
                ConeKind::Soc if cone.dim < 2 => {
                    return Err(ProgramError::Cones(format!(
                        "second-order cone of dimension {}",
                        cone.dim
                    )));
                }
                _ if cone.dim == 0 => {
                    return Err(ProgramError::Cones("zero-dimensional cone".into()));
                }
                _ => {}
            }
        }
        // Rayleigh-quotient spot check on fixed pseudo-random directions.
        let mut state = 0x9E37_79B9_7F4A_7C15u64;
        let mut next_unit = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        for _ in 0..16 {
            let x: Vec<f64> = (0..n).map(|_| next_unit()).collect();
            let nrm2 = dot(&x, &x);
            if self.p.quad_form(&x) < -1e-8 * nrm2 {
                return Err(ProgramError::NotPsd);
            }
        }
        Ok(())
    }

    /// Writes the whole program as JSON, for offline inspection of a
    /// misbehaving solve.
    pub fn write_debug_dump(&self, path: &Path) -> std::io::Result<()> {
        let json = serde_json::to_string_pretty(self).expect("program serializes");
        std::fs::write(path, json + "\n")
    }
}

/// Projects `v` in place onto the product cone.
pub fn cone_project(cones: &[Cone], v: &mut [f64]) {
    let mut off = 0;
    for cone in cones {
        let seg = &mut v[off..off + cone.dim];
        match cone.kind {
            ConeKind::Zero => seg.fill(0.0),
            ConeKind::NonNeg => {
                for x in seg {
                    *x = x.max(0.0);
                }
            }
            ConeKind::Soc => project_soc(seg),
        }
        off += cone.dim;
    }
}

/// Projects `v` in place onto the dual cone (zero rows become free).
fn dual_cone_project(cones: &[Cone], v: &mut [f64]) {
    let mut off = 0;
    for cone in cones {
        let seg = &mut v[off..off + cone.dim];
        match cone.kind {
            ConeKind::Zero => {}
            ConeKind::NonNeg => {
                for x in seg {
                    *x = x.max(0.0);
                }
            }
            ConeKind::Soc => project_soc(seg),
        }
        off += cone.dim;
    }
}

fn project_soc(seg: &mut [f64]) {
    let t = seg[0];
    let nrm = seg[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
    if nrm <= t {
        return;
    }
    if nrm <= -t {
        seg.fill(0.0);
        return;
    }
    let half = 0.5 * (1.0 + t / nrm);
    seg[0] = 0.5 * (t + nrm);
    for x in &mut seg[1..] {
        *x *= half;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Optimal,
    MaxIters,
    InfeasibleDetected,
    NumericalFailure,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::MaxIters => "max_iters",
            SolveStatus::InfeasibleDetected => "infeasible",
            SolveStatus::NumericalFailure => "numerical_failure",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Primal solution (unscaled). For an infeasible problem, the last iterate.
    pub z: Vec<f64>,
    /// Dual solution (unscaled), one multiplier per constraint row. For an
    /// infeasible problem, the normalized infeasibility certificate.
    pub y: Vec<f64>,
    /// ||Az - w||_inf / (1 + ||b||_inf) at the returned iterate.
    pub rel_prim_residual: f64,
    /// ||Pz + q + A'y||_inf / (1 + ||q||_inf).
    pub rel_dual_residual: f64,
    /// |z'Pz + q'z + b'y| (primal minus dual objective), unnormalized.
    pub duality_gap: f64,
    pub iterations: usize,
    pub solve_time_s: f64,
    /// Primal objective at `z`; NaN when infeasibility was detected.
    pub objective: f64,
}

/// Starting point for a solve; duals are optional.
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub primal: Vec<f64>,
    pub dual: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SolverSettings {
    /// Relative accuracy required of primal residual, dual residual and gap.
    pub tol: f64,
    pub max_iters: usize,
    /// Proximal regularization on the primal step.
    pub sigma: f64,
    /// Over-relaxation coefficient.
    pub relax: f64,
    /// Initial penalty; equality rows get `rho_eq_scale` times this.
    pub rho0: f64,
    pub rho_eq_scale: f64,
    /// Termination and adaptation are evaluated every this many iterations.
    pub check_interval: usize,
    /// Rebalance the penalty from the residual ratio (triggers a refactor).
    pub adaptive_rho: bool,
    /// Relative tolerance of the infeasibility certificate test.
    pub eps_infeas: f64,
    /// Equilibration sweeps.
    pub ruiz_iters: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol: 1e-6,
            max_iters: 50_000,
            sigma: 1e-6,
            relax: 1.6,
            rho0: 0.1,
            rho_eq_scale: 1e3,
            check_interval: 25,
            adaptive_rho: true,
            eps_infeas: 1e-7,
            ruiz_iters: 10,
        }
    }
}

/// Solves with default settings at the given accuracy and iteration budget.
pub fn solve(
    prog: &ConicProgram,
    tol: f64,
    max_iters: usize,
    warm: Option<&WarmStart>,
) -> SolveResult {
    let settings = SolverSettings { tol, max_iters, ..Default::default() };
    solve_with_settings(prog, &settings, warm)
}

struct Scaling {
    d: Vec<f64>,
    e: Vec<f64>,
    c: f64,
}

fn inv_sqrt_scale(nrm: f64) -> f64 {
    if nrm < 1e-8 {
        1.0
    } else {
        (1.0 / nrm.sqrt()).clamp(1e-5, 1e5)
    }
}

/// Modified Ruiz equilibration of the stacked [P A'; A 0] data, with a scalar
/// cost scaling folded in. Rows of one second-order cone share a scale (their
/// geometric mean) so the cone is preserved.
fn ruiz_equilibrate(
    p: &mut CscMatrix,
    q: &mut [f64],
    a: &mut CscMatrix,
    cones: &[Cone],
    iters: usize,
) -> Scaling {
    let n = q.len();
    let m = a.nrows;
    let mut d = vec![1.0; n];
    let mut e = vec![1.0; m];
    let mut c = 1.0;
    let mut pc = vec![0.0; n];
    let mut ac = vec![0.0; n];
    let mut ar = vec![0.0; m];
    let mut dw = vec![1.0; n];
    let mut ew = vec![1.0; m];
    for _ in 0..iters {
        p.col_inf_norms(&mut pc);
        a.col_inf_norms(&mut ac);
        for i in 0..n {
            dw[i] = inv_sqrt_scale(pc[i].max(ac[i]));
        }
        a.row_inf_norms(&mut ar);
        for j in 0..m {
            ew[j] = inv_sqrt_scale(ar[j]);
        }
        let mut off = 0;
        for cone in cones {
            if cone.kind == ConeKind::Soc {
                let mean =
                    (ew[off..off + cone.dim].iter().map(|w| w.ln()).sum::<f64>() / cone.dim as f64).exp();
                ew[off..off + cone.dim].fill(mean);
            }
            off += cone.dim;
        }
        p.scale_cols(&dw);
        p.scale_rows(&dw);
        a.scale_cols(&dw);
        a.scale_rows(&ew);
        for i in 0..n {
            q[i] *= dw[i];
            d[i] *= dw[i];
        }
        for j in 0..m {
            e[j] *= ew[j];
        }
        // scalar cost scaling keeps the objective comparable to the constraints
        p.col_inf_norms(&mut pc);
        let mean_p = if n == 0 { 0.0 } else { pc.iter().sum::<f64>() / n as f64 };
        let q_inf = inf_norm(q);
        let denom = mean_p.max(q_inf);
        let gamma = if denom < 1e-8 { 1.0 } else { (1.0 / denom).clamp(1e-5, 1e5) };
        for v in &mut p.nzval {
            *v *= gamma;
        }
        for v in q.iter_mut() {
            *v *= gamma;
        }
        c *= gamma;
    }
    Scaling { d, e, c }
}

fn rho_vector(cones: &[Cone], rho_bar: f64, eq_scale: f64) -> Vec<f64> {
    let mut rho = Vec::new();
    for cone in cones {
        let value = match cone.kind {
            ConeKind::Zero => rho_bar * eq_scale,
            _ => rho_bar,
        };
        rho.extend(std::iter::repeat(value).take(cone.dim));
    }
    rho
}

/// Builds the upper triangle of the step KKT matrix and remembers where the
/// penalty diagonal landed so adaptation can patch values in place.
fn build_kkt(
    p: &CscMatrix,
    a: &CscMatrix,
    sigma: f64,
    rho: &[f64],
) -> (CscMatrix, Vec<usize>, Vec<f64>) {
    let n = p.ncols;
    let m = a.nrows;
    let dim = n + m;
    let mut trips = Vec::with_capacity(p.nnz() + a.nnz() + dim);
    for cidx in 0..n {
        for ptr in p.colptr[cidx]..p.colptr[cidx + 1] {
            let r = p.rowval[ptr];
            if r <= cidx {
                trips.push((r, cidx, p.nzval[ptr]));
            }
        }
    }
    for i in 0..n {
        trips.push((i, i, sigma));
    }
    for cidx in 0..n {
        for ptr in a.colptr[cidx]..a.colptr[cidx + 1] {
            trips.push((cidx, n + a.rowval[ptr], a.nzval[ptr]));
        }
    }
    for j in 0..m {
        trips.push((n + j, n + j, -1.0 / rho[j]));
    }
    let kkt = CscMatrix::from_triplets(dim, dim, &trips);
    let rho_positions: Vec<usize> =
        (0..m).map(|j| kkt.position(n + j, n + j).expect("penalty diagonal present")).collect();
    let mut signs = vec![1.0; dim];
    signs[n..].fill(-1.0);
    (kkt, rho_positions, signs)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn solve_with_settings(
    prog: &ConicProgram,
    settings: &SolverSettings,
    warm: Option<&WarmStart>,
) -> SolveResult {
    let start = Instant::now();
    let n = prog.num_vars();
    let m = prog.num_rows();
    assert!(settings.max_iters >= 1);
    let check_every = settings.check_interval.max(1);

    // scale a private copy of the data
    let mut ph = prog.p.clone();
    let mut qh = prog.q.clone();
    let mut ah = prog.a.clone();
    let scaling = ruiz_equilibrate(&mut ph, &mut qh, &mut ah, &prog.cones, settings.ruiz_iters);
    let bh: Vec<f64> = prog.b.iter().zip(&scaling.e).map(|(b, e)| b * e).collect();

    let mut rho_bar = settings.rho0;
    let mut rho = rho_vector(&prog.cones, rho_bar, settings.rho_eq_scale);
    let (mut kkt, rho_positions, signs) = build_kkt(&ph, &ah, settings.sigma, &rho);
    let fail = |status: SolveStatus, elapsed: f64| SolveResult {
        status,
        z: vec![f64::NAN; n],
        y: vec![f64::NAN; m],
        rel_prim_residual: f64::NAN,
        rel_dual_residual: f64::NAN,
        duality_gap: f64::NAN,
        iterations: 0,
        solve_time_s: elapsed,
        objective: f64::NAN,
    };
    let mut fact = match LdlFactorization::new(&kkt, &signs) {
        Ok(f) => f,
        Err(_) => return fail(SolveStatus::NumericalFailure, start.elapsed().as_secs_f64()),
    };
    // quasi-definiteness check: the regularized KKT matrix must keep exactly
    // one positive pivot per primal variable
    if fact.positive_pivots() != n {
        return fail(SolveStatus::NumericalFailure, start.elapsed().as_secs_f64());
    }

    // scaled iterates
    let mut x = vec![0.0; n];
    let mut y = vec![0.0; m];
    let mut w = vec![0.0; m];
    if let Some(ws) = warm {
        assert_eq!(ws.primal.len(), n);
        for i in 0..n {
            x[i] = ws.primal[i] / scaling.d[i];
        }
        ah.mul_vec(&x, &mut w);
        if let Some(dual) = &ws.dual {
            assert_eq!(dual.len(), m);
            for j in 0..m {
                y[j] = dual[j] * scaling.c / scaling.e[j];
            }
        }
    }

    let mut rhs = vec![0.0; n + m];
    let mut w_tilde = vec![0.0; m];
    let mut w_relax = vec![0.0; m];
    let mut proj = vec![0.0; m];
    let mut y_prev = vec![0.0; m];
    // unscaled views and residual scratch
    let mut ux = vec![0.0; n];
    let mut uy = vec![0.0; m];
    let mut uw = vec![0.0; m];
    let mut ax = vec![0.0; m];
    let mut px = vec![0.0; n];
    let mut aty = vec![0.0; n];
    let mut dy = vec![0.0; m];
    let mut dy_proj = vec![0.0; m];

    let b_inf = inf_norm(&prog.b);
    let q_inf = inf_norm(&prog.q);

    let mut status = SolveStatus::MaxIters;
    let mut iterations = settings.max_iters;
    let mut rel_p = f64::NAN;
    let mut rel_d = f64::NAN;
    let mut gap = f64::NAN;
    let mut objective = f64::NAN;

    for iter in 1..=settings.max_iters {
        for i in 0..n {
            rhs[i] = settings.sigma * x[i] - qh[i];
        }
        for j in 0..m {
            rhs[n + j] = w[j] - y[j] / rho[j];
        }
        fact.solve_in_place(&mut rhs);
        for j in 0..m {
            w_tilde[j] = w[j] + (rhs[n + j] - y[j]) / rho[j];
        }
        y_prev.copy_from_slice(&y);
        let alpha = settings.relax;
        for i in 0..n {
            x[i] = alpha * rhs[i] + (1.0 - alpha) * x[i];
        }
        for j in 0..m {
            w_relax[j] = alpha * w_tilde[j] + (1.0 - alpha) * w[j];
            proj[j] = bh[j] - (w_relax[j] + y[j] / rho[j]);
        }
        cone_project(&prog.cones, &mut proj);
        for j in 0..m {
            let w_new = bh[j] - proj[j];
            y[j] += rho[j] * (w_relax[j] - w_new);
            w[j] = w_new;
        }

        if iter % check_every != 0 && iter != settings.max_iters {
            continue;
        }

        // everything below runs on unscaled quantities and original data
        for i in 0..n {
            ux[i] = scaling.d[i] * x[i];
        }
        for j in 0..m {
            uy[j] = scaling.e[j] * y[j] / scaling.c;
            uw[j] = w[j] / scaling.e[j];
        }
        prog.a.mul_vec(&ux, &mut ax);
        prog.p.mul_vec(&ux, &mut px);
        prog.a.tr_mul_vec(&uy, &mut aty);
        let r_prim = (0..m).fold(0.0f64, |acc, j| acc.max((ax[j] - uw[j]).abs()));
        let r_dual = (0..n).fold(0.0f64, |acc, i| acc.max((px[i] + prog.q[i] + aty[i]).abs()));
        if !r_prim.is_finite() || !r_dual.is_finite() {
            status = SolveStatus::NumericalFailure;
            iterations = iter;
            rel_p = f64::NAN;
            rel_d = f64::NAN;
            break;
        }
        let xpx = dot(&ux, &px);
        let qx = dot(&prog.q, &ux);
        let bty = dot(&prog.b, &uy);
        let pobj = 0.5 * xpx + qx;
        let dobj = -0.5 * xpx - bty;
        rel_p = r_prim / (1.0 + b_inf);
        rel_d = r_dual / (1.0 + q_inf);
        gap = (xpx + qx + bty).abs();
        objective = pobj;
        let gap_ok = gap <= settings.tol * (1.0 + pobj.abs() + dobj.abs());
        if rel_p <= settings.tol && rel_d <= settings.tol && gap_ok {
            status = SolveStatus::Optimal;
            iterations = iter;
            break;
        }

        // primal infeasibility certificate from the dual step direction
        for j in 0..m {
            dy[j] = (y[j] - y_prev[j]) * scaling.e[j] / scaling.c;
        }
        let dy_inf = inf_norm(&dy);
        if dy_inf > 1e-12 {
            prog.a.tr_mul_vec(&dy, &mut aty);
            if inf_norm(&aty) <= settings.eps_infeas * dy_inf {
                dy_proj.copy_from_slice(&dy);
                dual_cone_project(&prog.cones, &mut dy_proj);
                let cone_dist =
                    (0..m).fold(0.0f64, |acc, j| acc.max((dy_proj[j] - dy[j]).abs()));
                if cone_dist <= settings.eps_infeas * dy_inf
                    && dot(&prog.b, &dy) <= -settings.eps_infeas * dy_inf
                {
                    status = SolveStatus::InfeasibleDetected;
                    iterations = iter;
                    for j in 0..m {
                        uy[j] = dy[j] / dy_inf;
                    }
                    objective = f64::NAN;
                    break;
                }
            }
        }

        if settings.adaptive_rho && iter < settings.max_iters {
            let prim_scale = inf_norm(&ax).max(inf_norm(&uw)).max(1e-10);
            let dual_scale = inf_norm(&px).max(q_inf).max({
                prog.a.tr_mul_vec(&uy, &mut aty);
                inf_norm(&aty)
            });
            let rel_prim = r_prim / prim_scale;
            let rel_dual = r_dual / dual_scale.max(1e-10);
            let candidate = (rho_bar * (rel_prim / rel_dual.max(1e-12)).sqrt()).clamp(1e-6, 1e6);
            if candidate > 5.0 * rho_bar || candidate < rho_bar / 5.0 {
                rho_bar = candidate;
                rho = rho_vector(&prog.cones, rho_bar, settings.rho_eq_scale);
                for j in 0..m {
                    kkt.nzval[rho_positions[j]] = -1.0 / rho[j];
                }
                fact.update_values(&kkt.nzval);
                if fact.refactor().is_err() {
                    status = SolveStatus::NumericalFailure;
                    iterations = iter;
                    break;
                }
            }
        }
    }

    SolveResult {
        status,
        z: ux,
        y: uy,
        rel_prim_residual: rel_p,
        rel_dual_residual: rel_d,
        duality_gap: gap,
        iterations,
        solve_time_s: start.elapsed().as_secs_f64(),
        objective,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn diag(n: usize, v: f64) -> CscMatrix {
        CscMatrix::from_triplets(n, n, &(0..n).map(|i| (i, i, v)).collect::<Vec<_>>())
    }

    #[test]
    fn soc_projection_cases() {
        let cones = [Cone::soc(3)];
        let mut v = [0.0, 1.0, 0.0];
        cone_project(&cones, &mut v);
        assert_eq!(v, [0.5, 0.5, 0.0]);

        let mut inside = [5.0, 3.0, 4.0];
        cone_project(&cones, &mut inside);
        assert_eq!(inside, [5.0, 3.0, 4.0]);

        let mut polar = [-5.0, 3.0, -4.0];
        cone_project(&cones, &mut polar);
        assert_eq!(polar, [0.0, 0.0, 0.0]);
    }

    #[test]
    fn projection_is_idempotent_and_blockwise() {
        let cones = [Cone::zero(2), Cone::nonneg(2), Cone::soc(3)];
        let mut v = [3.0, -1.0, 0.5, -0.5, 1.0, 2.0, -2.0];
        cone_project(&cones, &mut v);
        let once = v;
        cone_project(&cones, &mut v);
        assert_eq!(v, once);
        assert_eq!(&once[0..2], &[0.0, 0.0]);
        assert_eq!(&once[2..4], &[0.5, 0.0]);
        // soc part must lie in the cone
        let t = once[4];
        let tail = (once[5] * once[5] + once[6] * once[6]).sqrt();
        assert!(tail <= t + 1e-12);
    }

    #[test]
    fn minimizes_a_bound_constrained_scalar_quadratic() {
        // min x^2  s.t. x >= 1
        let prog = ConicProgram {
            p: diag(1, 2.0),
            q: vec![0.0],
            a: CscMatrix::from_triplets(1, 1, &[(0, 0, -1.0)]),
            b: vec![-1.0],
            cones: vec![Cone::nonneg(1)],
        };
        prog.validate().unwrap();
        let res = solve(&prog, 1e-9, 50_000, None);
        assert_eq!(res.status, SolveStatus::Optimal);
        assert_relative_eq!(res.z[0], 1.0, epsilon = 1e-6);
        assert_relative_eq!(res.objective, 1.0, epsilon = 1e-6);
        // multiplier of the active bound: stationarity 2x - y = 0
        assert_relative_eq!(res.y[0], 2.0, epsilon = 1e-5);
    }

    #[test]
    fn minimizes_over_a_second_order_cone() {
        // min t  s.t.  (t, u1, u2) in soc,  u1 = 3, u2 = 4   =>   t* = 5
        let prog = ConicProgram {
            p: CscMatrix::zeros(3, 3),
            q: vec![1.0, 0.0, 0.0],
            a: CscMatrix::from_triplets(
                5,
                3,
                &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, -1.0), (3, 1, -1.0), (4, 2, -1.0)],
            ),
            b: vec![3.0, 4.0, 0.0, 0.0, 0.0],
            cones: vec![Cone::zero(2), Cone::soc(3)],
        };
        prog.validate().unwrap();
        let res = solve(&prog, 1e-10, 50_000, None);
        assert_eq!(res.status, SolveStatus::Optimal);
        assert_relative_eq!(res.z[0], 5.0, epsilon = 1e-8);
        assert_relative_eq!(res.z[1], 3.0, epsilon = 1e-8);
        assert_relative_eq!(res.z[2], 4.0, epsilon = 1e-8);
        // dual of the cone row is (1, -3/5, -4/5) and the gap closes
        assert_relative_eq!(res.y[2], 1.0, epsilon = 1e-6);
        assert_relative_eq!(res.y[3], -0.6, epsilon = 1e-6);
        assert_relative_eq!(res.y[4], -0.8, epsilon = 1e-6);
        assert!(res.duality_gap < 1e-8);
    }

    #[test]
    fn solves_an_equality_constrained_quadratic_exactly() {
        // min (x1-1)^2 + (x2+2)^2  s.t.  x1 + x2 = 1
        // KKT: x = (2, -1)
        let prog = ConicProgram {
            p: diag(2, 2.0),
            q: vec![-2.0, 4.0],
            a: CscMatrix::from_triplets(1, 2, &[(0, 0, 1.0), (0, 1, 1.0)]),
            b: vec![1.0],
            cones: vec![Cone::zero(1)],
        };
        prog.validate().unwrap();
        let res = solve(&prog, 1e-9, 50_000, None);
        assert_eq!(res.status, SolveStatus::Optimal);
        assert_relative_eq!(res.z[0], 2.0, epsilon = 1e-7);
        assert_relative_eq!(res.z[1], -1.0, epsilon = 1e-7);
    }

    #[test]
    fn detects_contradictory_inequalities() {
        // x >= 1 and x <= 0
        let prog = ConicProgram {
            p: diag(1, 2.0),
            q: vec![0.0],
            a: CscMatrix::from_triplets(2, 1, &[(0, 0, -1.0), (1, 0, 1.0)]),
            b: vec![-1.0, 0.0],
            cones: vec![Cone::nonneg(2)],
        };
        prog.validate().unwrap();
        let res = solve(&prog, 1e-6, 50_000, None);
        assert_eq!(res.status, SolveStatus::InfeasibleDetected);
        // certificate: y in the dual cone with A'y ~ 0 and b'y < 0
        let cert = &res.y;
        assert!(cert.iter().all(|&v| v >= -1e-9));
        assert!((-cert[0] + cert[1]).abs() <= 1e-6);
        assert!(dot(&prog.b, cert) < 0.0);
    }

    #[test]
    fn warm_start_from_the_solution_terminates_at_first_check() {
        let prog = ConicProgram {
            p: diag(2, 2.0),
            q: vec![-2.0, 4.0],
            a: CscMatrix::from_triplets(1, 2, &[(0, 0, 1.0), (0, 1, 1.0)]),
            b: vec![1.0],
            cones: vec![Cone::zero(1)],
        };
        let cold = solve(&prog, 1e-9, 50_000, None);
        assert_eq!(cold.status, SolveStatus::Optimal);
        let warm = WarmStart { primal: cold.z.clone(), dual: Some(cold.y.clone()) };
        let hot = solve(&prog, 1e-9, 50_000, Some(&warm));
        assert_eq!(hot.status, SolveStatus::Optimal);
        assert!(hot.iterations <= SolverSettings::default().check_interval);
        assert!(hot.iterations <= cold.iterations);
    }

    #[test]
    fn identical_calls_produce_identical_bits() {
        let prog = ConicProgram {
            p: diag(3, 2.0),
            q: vec![1.0, -0.5, 0.25],
            a: CscMatrix::from_triplets(
                4,
                3,
                &[(0, 0, 1.0), (0, 1, 1.0), (1, 1, 1.0), (2, 2, -1.0), (3, 0, 0.5)],
            ),
            b: vec![1.0, 2.0, 0.0, 3.0],
            cones: vec![Cone::zero(1), Cone::nonneg(3)],
        };
        let a = solve(&prog, 1e-8, 50_000, None);
        let b = solve(&prog, 1e-8, 50_000, None);
        assert_eq!(a.status, b.status);
        assert_eq!(a.iterations, b.iterations);
        assert!(a.z.iter().zip(&b.z).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert!(a.y.iter().zip(&b.y).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn validate_catches_structural_mistakes() {
        let good = ConicProgram {
            p: diag(2, 1.0),
            q: vec![0.0, 0.0],
            a: CscMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (1, 1, 1.0)]),
            b: vec![0.0, 0.0],
            cones: vec![Cone::nonneg(2)],
        };
        good.validate().unwrap();

        let mut wrong_cones = good.clone();
        wrong_cones.cones = vec![Cone::nonneg(3)];
        assert!(wrong_cones.validate().is_err());

        let mut tiny_soc = good.clone();
        tiny_soc.cones = vec![Cone::nonneg(1), Cone::soc(1)];
        assert!(tiny_soc.validate().is_err());

        let mut asym = good.clone();
        asym.p = CscMatrix::from_triplets(2, 2, &[(0, 1, 1.0)]);
        assert!(asym.validate().is_err());

        let mut indefinite = good;
        indefinite.p = diag(2, -1.0);
        assert!(indefinite.validate().is_err());
    }

    #[test]
    fn debug_dump_round_trips_through_json() {
        let prog = ConicProgram {
            p: diag(1, 2.0),
            q: vec![0.0],
            a: CscMatrix::from_triplets(1, 1, &[(0, 0, -1.0)]),
            b: vec![-1.0],
            cones: vec![Cone::nonneg(1)],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dump.json");
        prog.write_debug_dump(&path).unwrap();
        let value: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(value["q"].as_array().unwrap().len(), 1);
        assert_eq!(value["cones"][0]["dim"], 1);
        assert!(value["a"]["nzval"].is_array());
    }
}
