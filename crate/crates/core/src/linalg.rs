//! Thin helpers over `faer` sparse and dense storage.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, MatMut, Par};

use crate::{Error, Result};

pub type SparseMat = SparseColMat<usize, f64>;

/// Builds a CSC matrix, summing duplicate entries.
pub fn from_triplets(nrows: usize, ncols: usize, entries: &[(usize, usize, f64)]) -> SparseMat {
    let trips: Vec<Triplet<usize, usize, f64>> = entries
        .iter()
        .map(|&(r, c, v)| Triplet::new(r, c, v))
        .collect();
    SparseColMat::try_new_from_triplets(nrows, ncols, &trips)
        .expect("triplet indices are in range by construction")
}

/// All stored entries as `(row, col, value)` in column-major order.
pub fn triplets(a: &SparseMat) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::with_capacity(a.compute_nnz());
    for j in 0..a.ncols() {
        for (&i, &v) in a.row_idx_of_col_raw(j).iter().zip(a.val_of_col(j)) {
            out.push((i, j, v));
        }
    }
    out
}

pub fn zeros(nrows: usize, ncols: usize) -> SparseMat {
    from_triplets(nrows, ncols, &[])
}

pub fn transpose(a: &SparseMat) -> SparseMat {
    let t: Vec<_> = triplets(a).into_iter().map(|(i, j, v)| (j, i, v)).collect();
    from_triplets(a.ncols(), a.nrows(), &t)
}

/// `sum_k scale_k * block_k` placed at the given offsets of an
/// `nrows x ncols` matrix.
pub fn compose_blocks(
    nrows: usize,
    ncols: usize,
    blocks: &[(&SparseMat, usize, usize, f64)],
) -> SparseMat {
    let mut t = Vec::new();
    for &(b, r0, c0, s) in blocks {
        if s == 0.0 {
            continue;
        }
        t.extend(triplets(b).into_iter().map(|(i, j, v)| (r0 + i, c0 + j, s * v)));
    }
    from_triplets(nrows, ncols, &t)
}

/// Sparse product `A B`.
pub fn matmul(a: &SparseMat, b: &SparseMat) -> SparseMat {
    faer::sparse::linalg::matmul::sparse_sparse_matmul(a.as_ref(), b.as_ref(), 1.0, Par::Seq)
        .expect("sparse product allocation")
}

/// `y = A x`.
pub fn matvec(a: &SparseMat, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; a.nrows()];
    matvec_acc(a, x, 1.0, &mut y);
    y
}

/// `y += s * A x`.
pub fn matvec_acc(a: &SparseMat, x: &[f64], s: f64, y: &mut [f64]) {
    debug_assert_eq!(x.len(), a.ncols());
    debug_assert_eq!(y.len(), a.nrows());
    for (j, &xj) in x.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        let sx = s * xj;
        for (&i, &v) in a.row_idx_of_col_raw(j).iter().zip(a.val_of_col(j)) {
            y[i] += v * sx;
        }
    }
}

/// `x^T A y`.
pub fn bilinear(a: &SparseMat, x: &[f64], y: &[f64]) -> f64 {
    dot(x, &matvec(a, y))
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Restriction `A[rows, cols]` where `row_map[i]`/`col_map[j]` give the local
/// index of a global row/column or `None` when it is dropped.
pub fn restrict(
    a: &SparseMat,
    row_map: &[Option<usize>],
    n_rows: usize,
    col_map: &[Option<usize>],
    n_cols: usize,
) -> SparseMat {
    let mut t = Vec::new();
    for j in 0..a.ncols() {
        let Some(lj) = col_map[j] else { continue };
        for (&i, &v) in a.row_idx_of_col_raw(j).iter().zip(a.val_of_col(j)) {
            if let Some(li) = row_map[i] {
                t.push((li, lj, v));
            }
        }
    }
    from_triplets(n_rows, n_cols, &t)
}

/// Sparse LU with partial pivoting, factorized once and reused.
pub struct SparseLu {
    lu: Lu<usize, f64>,
    n: usize,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLu").field("n", &self.n).finish()
    }
}

impl SparseLu {
    pub fn new(a: &SparseMat, context: &str) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{context}: {}x{} is not square",
                a.nrows(),
                a.ncols()
            )));
        }
        let lu = a.sp_lu().map_err(|e| Error::Factorization {
            context: context.to_string(),
            reason: format!("{e:?}"),
        })?;
        Ok(Self { lu, n: a.nrows() })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let rhs = MatMut::from_column_major_slice_mut(b, self.n, 1);
        self.lu.solve_in_place(rhs);
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_many_in_place(&self, b: &mut Mat<f64>) {
        self.lu.solve_in_place(b.as_mut());
    }
}

/// Dense LU with partial pivoting and a relative pivot check.
#[derive(Debug)]
pub struct DenseLu {
    lu: PartialPivLu<f64>,
    n: usize,
}

impl DenseLu {
    /// Fails when the smallest pivot is below `1e-14` times the largest.
    pub fn new(a: &Mat<f64>, context: &str) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{context}: {}x{} is not square",
                a.nrows(),
                a.ncols()
            )));
        }
        let n = a.nrows();
        let lu = a.partial_piv_lu();
        let u = lu.U();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            let d = u[(i, i)].abs();
            lo = lo.min(d);
            hi = hi.max(d);
        }
        if n > 0 && (!lo.is_finite() || lo <= 1e-14 * hi) {
            return Err(Error::Factorization {
                context: context.to_string(),
                reason: format!("pivot ratio {:.3e}", lo / hi),
            });
        }
        Ok(Self { lu, n })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        let rhs = MatMut::from_column_major_slice_mut(&mut x, self.n, 1);
        self.lu.solve_in_place(rhs);
        x
    }

    pub fn solve_many_in_place(&self, b: &mut Mat<f64>) {
        self.lu.solve_in_place(b.as_mut());
    }
}

/// Sparse row vector with increasing indices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseVec {
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl SparseVec {
    pub fn nnz(&self) -> usize {
        self.idx.len()
    }

    pub fn dot_dense(&self, x: &[f64]) -> f64 {
        self.idx.iter().zip(&self.val).map(|(&i, &v)| v * x[i]).sum()
    }

    pub fn axpy_into(&self, s: f64, y: &mut [f64]) {
        for (&i, &v) in self.idx.iter().zip(&self.val) {
            y[i] += s * v;
        }
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut y = vec![0.0; n];
        self.axpy_into(1.0, &mut y);
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let a = from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, -1.0), (1, 1, 4.0)]);
        let d = a.to_dense();
        assert_eq!(d[(0, 0)], 3.0);
        assert_eq!(d[(1, 0)], -1.0);
        assert_eq!(d[(0, 1)], 0.0);
    }

    #[test]
    fn sparse_lu_solves_nonsymmetric() {
        let a = from_triplets(
            3,
            3,
            &[(0, 0, 4.0), (0, 1, -1.0), (1, 0, 2.0), (1, 1, 5.0), (1, 2, 1.0), (2, 1, -3.0), (2, 2, 6.0)],
        );
        let lu = SparseLu::new(&a, "test").unwrap();
        let x = [1.0, -2.0, 0.5];
        let b = matvec(&a, &x);
        let y = lu.solve(&b);
        for (p, q) in x.iter().zip(&y) {
            assert!((p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn dense_lu_flags_singular() {
        let mut a = Mat::<f64>::zeros(2, 2);
        a[(0, 0)] = 1.0;
        a[(0, 1)] = 2.0;
        a[(1, 0)] = 2.0;
        a[(1, 1)] = 4.0;
        assert!(DenseLu::new(&a, "singular").is_err());
    }

    #[test]
    fn restriction_and_transpose() {
        let a = from_triplets(3, 3, &[(0, 0, 1.0), (0, 2, 2.0), (2, 0, 3.0), (1, 1, 4.0)]);
        let map = [Some(0), None, Some(1)];
        let r = restrict(&a, &map, 2, &map, 2).to_dense();
        assert_eq!((r[(0, 0)], r[(0, 1)], r[(1, 0)], r[(1, 1)]), (1.0, 2.0, 3.0, 0.0));
        let t = transpose(&a).to_dense();
        assert_eq!(t[(2, 0)], 2.0);
        assert_eq!(t[(0, 2)], 3.0);
    }
}
