//! Compressed-sparse-column matrices; just the operations the solver needs.

use serde::Serialize;

/// Sparse matrix in CSC storage. Row indices are sorted within each column
/// and duplicate entries have been summed when built via [`CscMatrix::from_triplets`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CscMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub colptr: Vec<usize>,
    pub rowval: Vec<usize>,
    pub nzval: Vec<f64>,
}

impl CscMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CscMatrix { nrows, ncols, colptr: vec![0; ncols + 1], rowval: vec![], nzval: vec![] }
    }

    /// Builds from (row, col, value) triplets, summing duplicates. Explicit
    /// zeros are kept so entry positions stay stable under later value updates.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_unstable_by_key(|&i| {
            let (r, c, _) = triplets[i];
            (c, r)
        });
        let mut counts = vec![0usize; ncols];
        let mut rowval = Vec::with_capacity(triplets.len());
        let mut nzval: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last = None;
        for &i in &order {
            let (r, c, v) = triplets[i];
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *nzval.last_mut().unwrap() += v;
            } else {
                rowval.push(r);
                nzval.push(v);
                counts[c] += 1;
                last = Some((r, c));
            }
        }
        let mut colptr = vec![0usize; ncols + 1];
        for c in 0..ncols {
            colptr[c + 1] = colptr[c] + counts[c];
        }
        CscMatrix { nrows, ncols, colptr, rowval, nzval }
    }

    pub fn nnz(&self) -> usize {
        self.nzval.len()
    }

    fn col_range(&self, c: usize) -> std::ops::Range<usize> {
        self.colptr[c]..self.colptr[c + 1]
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for c in 0..self.ncols {
            let xc = x[c];
            if xc != 0.0 {
                for p in self.col_range(c) {
                    y[self.rowval[p]] += self.nzval[p] * xc;
                }
            }
        }
    }

    /// y = A' x
    pub fn tr_mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for c in 0..self.ncols {
            let mut acc = 0.0;
            for p in self.col_range(c) {
                acc += self.nzval[p] * x[self.rowval[p]];
            }
            y[c] = acc;
        }
    }

    /// x' A x (for symmetric A this is the quadratic form).
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for c in 0..self.ncols {
            let xc = x[c];
            if xc != 0.0 {
                for p in self.col_range(c) {
                    acc += x[self.rowval[p]] * self.nzval[p] * xc;
                }
            }
        }
        acc
    }

    /// Per-column infinity norms.
    pub fn col_inf_norms(&self, out: &mut [f64]) {
        out.fill(0.0);
        for c in 0..self.ncols {
            for p in self.col_range(c) {
                out[c] = out[c].max(self.nzval[p].abs());
            }
        }
    }

    /// Per-row infinity norms.
    pub fn row_inf_norms(&self, out: &mut [f64]) {
        out.fill(0.0);
        for p in 0..self.nnz() {
            let r = self.rowval[p];
            out[r] = out[r].max(self.nzval[p].abs());
        }
    }

    /// A <- diag(d) A
    pub fn scale_rows(&mut self, d: &[f64]) {
        for p in 0..self.nzval.len() {
            self.nzval[p] *= d[self.rowval[p]];
        }
    }

    /// A <- A diag(d)
    pub fn scale_cols(&mut self, d: &[f64]) {
        for c in 0..self.ncols {
            for p in self.col_range(c) {
                self.nzval[p] *= d[c];
            }
        }
    }

    /// Index into `nzval` of entry (r, c), if structurally present.
    pub fn position(&self, r: usize, c: usize) -> Option<usize> {
        let range = self.col_range(c);
        let slice = &self.rowval[range.clone()];
        slice.binary_search(&r).ok().map(|i| range.start + i)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.nrows != self.ncols {
            return false;
        }
        for c in 0..self.ncols {
            for p in self.col_range(c) {
                let r = self.rowval[p];
                let mirrored = self.position(c, r).map_or(0.0, |i| self.nzval[i]);
                if (self.nzval[p] - mirrored).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// The entries with row <= col, as a new matrix.
    pub fn upper_triangle(&self) -> CscMatrix {
        let mut trips = Vec::new();
        for c in 0..self.ncols {
            for p in self.col_range(c) {
                if self.rowval[p] <= c {
                    trips.push((self.rowval[p], c, self.nzval[p]));
                }
            }
        }
        CscMatrix::from_triplets(self.nrows, self.ncols, &trips)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.ncols]; self.nrows];
        for c in 0..self.ncols {
            for p in self.col_range(c) {
                dense[self.rowval[p]][c] += self.nzval[p];
            }
        }
        dense
    }
}
