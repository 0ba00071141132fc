use alloc::vec;
use alloc::vec::Vec;

use super::Dense;

/// Coordinate-format sparse matrix. Duplicate entries are summed.
///
/// Symmetric matrices (Hessians) store only the lower triangle, `row >= col`;
/// use [`Triplets::sym_to_dense`] and [`Triplets::sym_mul_vec`] for them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Triplets {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(rows: usize, cols: usize) -> Self {
        Triplets {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(rows: usize, cols: usize, cap: usize) -> Self {
        Triplets {
            rows,
            cols,
            entries: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols, "({i},{j}) out of {}x{}", self.rows, self.cols);
        self.entries.push((i, j, v));
    }

    /// Adds a symmetric entry, stored in the lower triangle.
    #[inline]
    pub fn push_sym(&mut self, i: usize, j: usize, v: f64) {
        if i >= j {
            self.push(i, j, v);
        } else {
            self.push(j, i, v);
        }
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn scale(&mut self, s: f64) {
        for e in &mut self.entries {
            e.2 *= s;
        }
    }

    pub fn to_dense(&self) -> Dense {
        let mut d = Dense::zeros(self.rows, self.cols);
        for &(i, j, v) in &self.entries {
            d[(i, j)] += v;
        }
        d
    }

    /// Dense symmetric matrix from lower-triangle storage.
    pub fn sym_to_dense(&self) -> Dense {
        let mut d = Dense::zeros(self.rows, self.cols);
        for &(i, j, v) in &self.entries {
            d[(i, j)] += v;
            if i != j {
                d[(j, i)] += v;
            }
        }
        d
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for &(i, j, v) in &self.entries {
            out[i] += v * x[j];
        }
        out
    }

    pub fn tmul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for &(i, j, v) in &self.entries {
            out[j] += v * x[i];
        }
        out
    }

    pub fn sym_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        for &(i, j, v) in &self.entries {
            out[i] += v * x[j];
            if i != j {
                out[j] += v * x[i];
            }
        }
        out
    }

    pub fn all_finite(&self) -> bool {
        self.entries.iter().all(|e| e.2.is_finite())
    }
}
