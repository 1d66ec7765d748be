//! Coordinate-format sparse matrices and a sparse LU solve backed by faer.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};

use crate::error::{HdgError, Result};

/// Sparse matrix with entries sorted by (row, col) and no duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    /// Sums duplicate entries in input order, so equal inputs give
    /// bit-identical matrices.
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut trips: Vec<(usize, usize, f64)>) -> Self {
        trips.sort_by_key(|&(r, c, _)| (r, c));
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(trips.len());
        for (r, c, v) in trips {
            match entries.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => entries.push((r, c, v)),
            }
        }
        SparseMatrix { n_rows, n_cols, entries }
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        match self.entries.binary_search_by_key(&(r, c), |&(a, b, _)| (a, b)) {
            Ok(i) => self.entries[i].2,
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
        y
    }

    pub fn transpose(&self) -> SparseMatrix {
        let trips = self.entries.iter().map(|&(r, c, v)| (c, r, v)).collect();
        SparseMatrix::from_triplets(self.n_cols, self.n_rows, trips)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n_rows, self.n_cols);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, e| m.max(e.2.abs()))
    }

    /// Largest entrywise difference between two matrices of equal shape.
    pub fn max_abs_diff(&self, other: &SparseMatrix) -> f64 {
        let mut trips: Vec<(usize, usize, f64)> = self.entries.clone();
        trips.extend(other.entries.iter().map(|&(r, c, v)| (r, c, -v)));
        SparseMatrix::from_triplets(self.n_rows, self.n_cols, trips).max_abs()
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Relative residual ||A x - b|| / max(||b||, ||A|| ||x||).
pub fn relative_residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let r: Vec<f64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
    let scale = norm2(b).max(a.max_abs() * norm2(x)).max(1e-300);
    norm2(&r) / scale
}

/// Solves A x = b by sparse LU with a fill-reducing ordering, followed by
/// up to three steps of iterative refinement. Fails if the relative
/// residual stays above `tol`.
pub fn sparse_solve(a: &SparseMatrix, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    if a.n_rows != a.n_cols || a.n_rows != b.len() {
        return Err(HdgError::LinearSolve("dimension mismatch".into()));
    }
    let n = a.n_rows;
    if n == 0 {
        return Ok(Vec::new());
    }
    let trips: Vec<Triplet<usize, usize, f64>> =
        a.entries.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips)
        .map_err(|e| HdgError::LinearSolve(format!("{e:?}")))?;
    let lu = mat.as_ref().sp_lu().map_err(|e| HdgError::LinearSolve(format!("{e:?}")))?;
    let solve = |rhs: &[f64]| {
        let mut m = faer::Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
        lu.solve_in_place(m.as_mut());
        (0..n).map(|i| m[(i, 0)]).collect::<Vec<f64>>()
    };
    let mut x = solve(b);
    for _ in 0..3 {
        if relative_residual(a, &x, b) <= tol * 1e-2 {
            break;
        }
        let ax = a.matvec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let d = solve(&r);
        for (xi, di) in x.iter_mut().zip(&d) {
            *xi += di;
        }
    }
    let res = relative_residual(a, &x, b);
    if !(res <= tol) {
        return Err(HdgError::LinearSolve(format!("relative residual {res:.3e} exceeds {tol:.1e}")));
    }
    Ok(x)
}
