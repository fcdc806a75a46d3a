//! Sparse LDL' factorization of symmetric quasi-definite matrices.
//!
//! The matrix is reordered with reverse Cuthill-McKee (the KKT systems we
//! factor are banded in time, so bandwidth reduction is a good fit), then
//! factored up-looking without numerical pivoting. Quasi-definiteness makes
//! that safe; a tiny sign-directed regularization guards the pivots. The
//! symbolic analysis is done once and reused when only values change.

use super::sparse::CscMatrix;
use std::collections::VecDeque;
use thiserror::Error;

const NONE: usize = usize::MAX;

/// Pivot-sign regularization thresholds: a pivot whose signed value drops
/// below `REG_EPS` is replaced by `sign * REG_DELTA`.
const REG_EPS: f64 = 1e-13;
const REG_DELTA: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum LdlError {
    #[error("matrix must be square upper-triangular with a full structural diagonal")]
    BadStructure,
    #[error("zero pivot at column {0}")]
    ZeroPivot(usize),
}

/// Undirected adjacency of a symmetric matrix given by its upper triangle.
fn adjacency(upper: &CscMatrix) -> Vec<Vec<usize>> {
    let n = upper.ncols;
    let mut adj = vec![Vec::new(); n];
    for c in 0..n {
        for p in upper.colptr[c]..upper.colptr[c + 1] {
            let r = upper.rowval[p];
            if r != c {
                adj[r].push(c);
                adj[c].push(r);
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

/// BFS from `start` over unvisited nodes; returns a deepest node (minimum
/// degree among the last level) and the depth reached.
fn bfs_farthest(start: usize, adj: &[Vec<usize>], visited: &[bool]) -> (usize, usize) {
    let mut seen = visited.to_vec();
    let mut frontier = vec![start];
    seen[start] = true;
    let mut depth = 0;
    let mut last_level = vec![start];
    loop {
        let mut next = Vec::new();
        for &u in &frontier {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    next.push(v);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        depth += 1;
        last_level = next.clone();
        frontier = next;
    }
    let far = *last_level.iter().min_by_key(|&&v| (adj[v].len(), v)).unwrap();
    (far, depth)
}

/// Reverse Cuthill-McKee over all connected components; `perm[k]` is the
/// original index placed at position `k`.
fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    loop {
        let Some(seed) = (0..n).filter(|&i| !visited[i]).min_by_key(|&i| (adj[i].len(), i)) else {
            break;
        };
        // walk towards a pseudo-peripheral node to get long, thin level sets
        let mut start = seed;
        let mut ecc = 0;
        loop {
            let (far, depth) = bfs_farthest(start, adj, &visited);
            if depth <= ecc {
                break;
            }
            ecc = depth;
            start = far;
        }
        visited[start] = true;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut nbrs: Vec<usize> = adj[u].iter().copied().filter(|&v| !visited[v]).collect();
            nbrs.sort_unstable_by_key(|&v| (adj[v].len(), v));
            for v in nbrs {
                visited[v] = true;
                queue.push_back(v);
            }
        }
    }
    order.reverse();
    order
}

/// Applies a symmetric permutation to an upper-triangular matrix, keeping the
/// result upper-triangular. Also returns the map from input entry index to
/// output entry index so later value updates can skip the symbolic work.
fn permute_symmetric(a: &CscMatrix, iperm: &[usize]) -> (CscMatrix, Vec<usize>) {
    let n = a.ncols;
    let nnz = a.nnz();
    let mut counts = vec![0usize; n];
    for c in 0..n {
        for p in a.colptr[c]..a.colptr[c + 1] {
            let col = iperm[a.rowval[p]].max(iperm[c]);
            counts[col] += 1;
        }
    }
    let mut colptr = vec![0usize; n + 1];
    for c in 0..n {
        colptr[c + 1] = colptr[c] + counts[c];
    }
    let mut next = colptr[..n].to_vec();
    let mut rowval = vec![0usize; nnz];
    let mut nzval = vec![0.0; nnz];
    let mut map = vec![0usize; nnz];
    for c in 0..n {
        for p in a.colptr[c]..a.colptr[c + 1] {
            let (pr, pc) = (iperm[a.rowval[p]], iperm[c]);
            let (row, col) = if pr <= pc { (pr, pc) } else { (pc, pr) };
            let pos = next[col];
            next[col] += 1;
            rowval[pos] = row;
            nzval[pos] = a.nzval[p];
            map[p] = pos;
        }
    }
    (CscMatrix { nrows: n, ncols: n, colptr, rowval, nzval }, map)
}

/// Elimination tree and per-column factor counts of an upper-triangular CSC
/// matrix. Row indices inside columns need not be sorted.
fn elimination_tree(a: &CscMatrix) -> Result<(Vec<usize>, Vec<usize>), LdlError> {
    let n = a.ncols;
    let mut etree = vec![NONE; n];
    let mut lnz = vec![0usize; n];
    let mut work = vec![NONE; n];
    for j in 0..n {
        work[j] = j;
        for p in a.colptr[j]..a.colptr[j + 1] {
            let mut i = a.rowval[p];
            if i > j {
                return Err(LdlError::BadStructure);
            }
            while work[i] != j {
                if etree[i] == NONE {
                    etree[i] = j;
                }
                lnz[i] += 1;
                work[i] = j;
                i = etree[i];
            }
        }
    }
    Ok((etree, lnz))
}

/// An LDL' factorization that can be refreshed in place when the matrix
/// values (not the pattern) change.
pub struct LdlFactorization {
    n: usize,
    perm: Vec<usize>,
    pap: CscMatrix,
    a_to_pap: Vec<usize>,
    etree: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
    dinv: Vec<f64>,
    dsigns: Vec<f64>,
    positive_pivots: usize,
    // workspaces reused across refactorizations and solves
    y_vals: Vec<f64>,
    y_markers: Vec<bool>,
    y_idx: Vec<usize>,
    elim: Vec<usize>,
    next_colspace: Vec<usize>,
    scratch: Vec<f64>,
}

impl LdlFactorization {
    /// Orders, analyzes and factors `a_upper` (the upper triangle of a
    /// symmetric matrix, structural diagonal present). `signs[i]` is the
    /// expected sign of pivot `i`: +1 for rows of a positive-definite block,
    /// -1 for a negative-definite one.
    pub fn new(a_upper: &CscMatrix, signs: &[f64]) -> Result<Self, LdlError> {
        let n = a_upper.ncols;
        assert_eq!(a_upper.nrows, n);
        assert_eq!(signs.len(), n);
        let perm = reverse_cuthill_mckee(&adjacency(a_upper));
        let mut iperm = vec![0usize; n];
        for (k, &orig) in perm.iter().enumerate() {
            iperm[orig] = k;
        }
        let (pap, a_to_pap) = permute_symmetric(a_upper, &iperm);
        for k in 0..n {
            if pap.position_unsorted(k, k).is_none() {
                return Err(LdlError::BadStructure);
            }
        }
        let (etree, lnz) = elimination_tree(&pap)?;
        let lnz_total: usize = lnz.iter().sum();
        let mut lp = vec![0usize; n + 1];
        for i in 0..n {
            lp[i + 1] = lp[i] + lnz[i];
        }
        let mut dsigns = vec![0.0; n];
        for i in 0..n {
            dsigns[iperm[i]] = signs[i];
        }
        let mut fact = LdlFactorization {
            n,
            perm,
            pap,
            a_to_pap,
            etree,
            lp,
            li: vec![0; lnz_total],
            lx: vec![0.0; lnz_total],
            d: vec![0.0; n],
            dinv: vec![0.0; n],
            dsigns,
            positive_pivots: 0,
            y_vals: vec![0.0; n],
            y_markers: vec![false; n],
            y_idx: vec![0; n],
            elim: vec![0; n],
            next_colspace: vec![0; n],
            scratch: vec![0.0; n],
        };
        fact.refactor()?;
        Ok(fact)
    }

    /// Replaces the matrix values (same pattern, original entry order); call
    /// [`Self::refactor`] afterwards.
    pub fn update_values(&mut self, nzval: &[f64]) {
        assert_eq!(nzval.len(), self.a_to_pap.len());
        for (p, &v) in nzval.iter().enumerate() {
            self.pap.nzval[self.a_to_pap[p]] = v;
        }
    }

    /// Recomputes the numeric factorization using the existing symbolic analysis.
    pub fn refactor(&mut self) -> Result<(), LdlError> {
        let n = self.n;
        for i in 0..n {
            self.y_vals[i] = 0.0;
            self.y_markers[i] = false;
            self.next_colspace[i] = self.lp[i];
        }
        let ap = &self.pap.colptr;
        let ai = &self.pap.rowval;
        let ax = &self.pap.nzval;
        let mut positive = 0usize;

        // column 0 of an upper triangle holds only the diagonal
        if ap[1] != 1 || ai[0] != 0 {
            return Err(LdlError::BadStructure);
        }
        self.d[0] = regularized(ax[0], self.dsigns[0]);
        if self.d[0] == 0.0 {
            return Err(LdlError::ZeroPivot(0));
        }
        if self.d[0] > 0.0 {
            positive += 1;
        }
        self.dinv[0] = 1.0 / self.d[0];

        for k in 1..n {
            let mut nnz_y = 0usize;
            self.d[k] = 0.0;
            for p in ap[k]..ap[k + 1] {
                let bidx = ai[p];
                if bidx == k {
                    self.d[k] = ax[p];
                    continue;
                }
                self.y_vals[bidx] = ax[p];
                // record the elimination path from bidx towards the root,
                // stopping at k or at a node already on the stack
                let mut node = bidx;
                if !self.y_markers[node] {
                    self.y_markers[node] = true;
                    self.elim[0] = node;
                    let mut nnz_e = 1usize;
                    node = self.etree[node];
                    while node != NONE && node < k {
                        if self.y_markers[node] {
                            break;
                        }
                        self.y_markers[node] = true;
                        self.elim[nnz_e] = node;
                        nnz_e += 1;
                        node = self.etree[node];
                    }
                    // reversing here makes the final y_idx sweep topological
                    while nnz_e > 0 {
                        nnz_e -= 1;
                        self.y_idx[nnz_y] = self.elim[nnz_e];
                        nnz_y += 1;
                    }
                }
            }
            for i in (0..nnz_y).rev() {
                let cidx = self.y_idx[i];
                let tmp = self.next_colspace[cidx];
                let yv = self.y_vals[cidx];
                for j in self.lp[cidx]..tmp {
                    self.y_vals[self.li[j]] -= self.lx[j] * yv;
                }
                let l_kc = yv * self.dinv[cidx];
                self.li[tmp] = k;
                self.lx[tmp] = l_kc;
                self.d[k] -= yv * l_kc;
                self.next_colspace[cidx] = tmp + 1;
                self.y_vals[cidx] = 0.0;
                self.y_markers[cidx] = false;
            }
            self.d[k] = regularized(self.d[k], self.dsigns[k]);
            if self.d[k] == 0.0 {
                return Err(LdlError::ZeroPivot(k));
            }
            if self.d[k] > 0.0 {
                positive += 1;
            }
            self.dinv[k] = 1.0 / self.d[k];
        }
        self.positive_pivots = positive;
        Ok(())
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&mut self, b: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        for k in 0..n {
            self.scratch[k] = b[self.perm[k]];
        }
        let (lp, li, lx, dinv) = (&self.lp, &self.li, &self.lx, &self.dinv);
        let x = &mut self.scratch;
        for i in 0..n {
            let xi = x[i];
            if xi != 0.0 {
                for j in lp[i]..lp[i + 1] {
                    x[li[j]] -= lx[j] * xi;
                }
            }
        }
        for i in 0..n {
            x[i] *= dinv[i];
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in lp[i]..lp[i + 1] {
                acc -= lx[j] * x[li[j]];
            }
            x[i] = acc;
        }
        for k in 0..n {
            b[self.perm[k]] = self.scratch[k];
        }
    }

    /// Number of positive pivots; for a quasi-definite KKT matrix this equals
    /// the dimension of the positive block.
    pub fn positive_pivots(&self) -> usize {
        self.positive_pivots
    }
}

fn regularized(pivot: f64, sign: f64) -> f64 {
    if pivot * sign < REG_EPS {
        REG_DELTA * sign
    } else {
        pivot
    }
}

impl CscMatrix {
    /// Linear-scan entry lookup that tolerates unsorted rows within a column.
    fn position_unsorted(&self, r: usize, c: usize) -> Option<usize> {
        (self.colptr[c]..self.colptr[c + 1]).find(|&p| self.rowval[p] == r)
    }
}
