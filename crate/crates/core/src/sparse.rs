//! Symmetric sparse matrices and a direct Cholesky solver.
//!
//! Matrices are stored as the lower triangle (row >= col) in compressed
//! sparse column form. Factorization goes through faer's supernodal
//! Cholesky with its fill-reducing ordering; everything runs sequentially
//! so repeated solves are bit-identical.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{MatMut, Side};

/// Lower triangle of a symmetric matrix in CSC layout.
#[derive(Debug, Clone)]
pub struct SymmetricCsc {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SymmetricCsc {
    /// Builds the matrix from `(row, col, value)` triplets. Entries in the
    /// upper triangle are mirrored into the lower one and duplicates are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; n + 1];
        for &(r, c, _) in triplets {
            let (r, c) = if r >= c { (r, c) } else { (c, r) };
            debug_assert!(r < n);
            counts[c + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut rows = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            let (r, c) = if r >= c { (r, c) } else { (c, r) };
            let k = next[c];
            rows[k] = r;
            vals[k] = v;
            next[c] += 1;
        }

        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        col_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for c in 0..n {
            scratch.clear();
            scratch.extend((counts[c]..counts[c + 1]).map(|k| (rows[k], vals[k])));
            scratch.sort_by_key(|&(r, _)| r);
            for &(r, v) in &scratch {
                if row_idx.len() > col_ptr[c] && *row_idx.last().unwrap() == r {
                    *values.last_mut().unwrap() += v;
                } else {
                    row_idx.push(r);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        Self { n, col_ptr, row_idx, values }
    }

    /// Wraps raw lower-triangular CSC arrays. Row indices must be sorted
    /// within each column and satisfy `row >= col`.
    pub fn from_raw(n: usize, col_ptr: Vec<usize>, row_idx: Vec<usize>, values: Vec<f64>) -> Self {
        assert_eq!(col_ptr.len(), n + 1);
        assert_eq!(row_idx.len(), values.len());
        assert_eq!(*col_ptr.last().unwrap(), row_idx.len());
        Self { n, col_ptr, row_idx, values }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for c in 0..self.n {
            let start = self.col_ptr[c];
            if start < self.col_ptr[c + 1] && self.row_idx[start] == c {
                d[c] = self.values[start];
            }
        }
        d
    }

    /// Returns a matrix with the same pattern and values `a*self + b*other`.
    /// Both operands must share the sparsity pattern.
    pub fn linear_combination(&self, a: f64, other: &Self, b: f64) -> Self {
        assert_eq!(self.col_ptr, other.col_ptr);
        assert_eq!(self.row_idx, other.row_idx);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Self { n: self.n, col_ptr: self.col_ptr.clone(), row_idx: self.row_idx.clone(), values }
    }

    /// y = A x using the symmetric expansion of the stored triangle.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.iter_mut().for_each(|v| *v = 0.0);
        for c in 0..self.n {
            let xc = x[c];
            let mut acc = 0.0;
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                let r = self.row_idx[k];
                let v = self.values[k];
                y[r] += v * xc;
                if r != c {
                    acc += v * x[r];
                }
            }
            y[c] += acc;
        }
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let mut y = vec![0.0; self.n];
        self.mul_vec(x, &mut y);
        dot(x, &y)
    }

    fn to_faer(&self) -> SparseColMat<usize, f64> {
        let symbolic = SymbolicSparseColMat::new_checked(
            self.n,
            self.n,
            self.col_ptr.clone(),
            None,
            self.row_idx.clone(),
        );
        SparseColMat::new(symbolic, self.values.clone())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NotPositiveDefinite;

/// Runs every factorization and dense eigen kernel on the calling thread.
/// Results then do not depend on the size of any enclosing thread pool.
pub fn use_sequential_kernels() {
    faer::set_global_parallelism(faer::Par::Seq);
}

/// Symbolic analysis that can be reused across matrices sharing a pattern.
#[derive(Debug, Clone)]
pub struct CholeskyPattern {
    symbolic: SymbolicLlt<usize>,
}

impl CholeskyPattern {
    pub fn analyze(matrix: &SymmetricCsc) -> Self {
        let a = matrix.to_faer();
        let symbolic = SymbolicLlt::try_new(a.symbolic(), Side::Lower)
            .expect("symbolic Cholesky analysis failed");
        Self { symbolic }
    }
}

/// Numeric Cholesky factor `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    llt: Llt<usize, f64>,
}

impl Cholesky {
    pub fn factor(matrix: &SymmetricCsc) -> Result<Self, NotPositiveDefinite> {
        Self::factor_with(&CholeskyPattern::analyze(matrix), matrix)
    }

    pub fn factor_with(pattern: &CholeskyPattern, matrix: &SymmetricCsc) -> Result<Self, NotPositiveDefinite> {
        let a = matrix.to_faer();
        let llt = Llt::try_new_with_symbolic(pattern.symbolic.clone(), a.as_ref(), Side::Lower)
            .map_err(|_| NotPositiveDefinite)?;
        Ok(Self { n: matrix.dim(), llt })
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        assert_eq!(rhs.len(), self.n);
        let mat = MatMut::from_column_major_slice_mut(rhs, self.n, 1);
        self.llt.solve_in_place(mat);
    }

    /// Solves for `ncols` right-hand sides stored column-major in `rhs`.
    pub fn solve_columns_in_place(&self, rhs: &mut [f64], ncols: usize) {
        assert_eq!(rhs.len(), self.n * ncols);
        let mat = MatMut::from_column_major_slice_mut(rhs, self.n, ncols);
        self.llt.solve_in_place(mat);
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> SymmetricCsc {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        SymmetricCsc::from_triplets(n, &t)
    }

    #[test]
    fn duplicates_are_summed_and_mirrored() {
        let a = SymmetricCsc::from_triplets(2, &[(0, 0, 1.0), (0, 0, 2.0), (0, 1, 5.0)]);
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.values(), &[3.0, 5.0]);
        let mut y = vec![0.0; 2];
        a.mul_vec(&[1.0, 1.0], &mut y);
        assert_eq!(y, vec![8.0, 5.0]);
    }

    #[test]
    fn solves_laplacian() {
        let a = laplacian(50);
        let b: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let x = Cholesky::factor(&a).unwrap().solve(&b);
        let mut r = vec![0.0; 50];
        a.mul_vec(&x, &mut r);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let a = SymmetricCsc::from_triplets(2, &[(0, 0, 1.0), (1, 1, -1.0)]);
        assert!(Cholesky::factor(&a).is_err());
    }
}
