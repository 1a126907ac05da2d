//! Thin wrappers over faer's dense and sparse LU factorizations with
//! singularity detection.

use faer::linalg::solvers::PartialPivLu;
use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu as SparseLuFactor;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Error, Result};

/// Relative pivot threshold for full-size model matrices.
pub const MODEL_PIVOT_TOL: f64 = 1e-13;
/// Relative pivot threshold for the small inner systems of low-rank updates.
pub const INNER_PIVOT_TOL: f64 = 1e-10;

/// Dense LU with partial pivoting.
pub struct DenseLu {
    lu: PartialPivLu<f64>,
    dim: usize,
}

impl std::fmt::Debug for DenseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DenseLu").field("dim", &self.dim).finish()
    }
}

impl DenseLu {
    pub fn factor(a: &Mat<f64>, rel_tol: f64, what: &str) -> Result<Self> {
        assert_eq!(a.nrows(), a.ncols(), "LU of a non-square matrix");
        let dim = a.nrows();
        let lu = a.partial_piv_lu();
        if dim > 0 {
            let diag = lu.U().diagonal();
            let mut max = 0.0f64;
            let mut min = f64::INFINITY;
            for k in 0..dim {
                let v = diag[k].abs();
                if !v.is_finite() {
                    return Err(Error::Singular(format!("{what}: non-finite pivot")));
                }
                max = max.max(v);
                min = min.min(v);
            }
            let scale = max.max(a.norm_max());
            if min <= rel_tol * scale {
                return Err(Error::Singular(format!("{what}: pivot {min:.3e} relative to scale {scale:.3e}")));
            }
        }
        Ok(DenseLu { lu, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.dim);
        let rhs = ColRef::from_slice(b);
        let x = self.lu.solve(rhs);
        x.iter().copied().collect()
    }

    pub fn solve_mat(&self, b: &Mat<f64>) -> Mat<f64> {
        self.lu.solve(b)
    }
}

/// Sparse LU built from (row, col, value) triplets; duplicates are summed.
pub struct SparseLu {
    lu: SparseLuFactor<usize, f64>,
    dim: usize,
}

impl SparseLu {
    pub fn factor(dim: usize, entries: &[(usize, usize, f64)], what: &str) -> Result<Self> {
        let triplets: Vec<Triplet<usize, usize, f64>> =
            entries.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(dim, dim, &triplets)
            .map_err(|e| Error::Singular(format!("{what}: {e:?}")))?;
        let lu = mat.sp_lu().map_err(|e| Error::Singular(format!("{what}: {e}")))?;
        Ok(SparseLu { lu, dim })
    }

    pub fn solve(&self, b: &[f64], what: &str) -> Result<Vec<f64>> {
        assert_eq!(b.len(), self.dim);
        let x = self.lu.solve(ColRef::from_slice(b));
        let out: Vec<f64> = x.iter().copied().collect();
        if out.iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(Error::Singular(format!("{what}: non-finite solution")))
        }
    }
}

pub fn dense_from_triplets(dim: usize, entries: &[(usize, usize, f64)]) -> Mat<f64> {
    let mut m = Mat::<f64>::zeros(dim, dim);
    for &(r, c, v) in entries {
        m[(r, c)] += v;
    }
    m
}

pub fn mat_vec(a: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    let y = a * ColRef::from_slice(x);
    y.iter().copied().collect()
}

pub fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |acc, (p, q)| acc.max((p - q).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_solve_and_singularity() {
        let a = Mat::<f64>::from_fn(3, 3, |i, j| if i == j { 4.0 } else { 1.0 });
        let lu = DenseLu::factor(&a, MODEL_PIVOT_TOL, "test").unwrap();
        let x = lu.solve(&[1.0, 2.0, 3.0]);
        let back = mat_vec(&a, &x);
        assert!(max_abs_diff(&back, &[1.0, 2.0, 3.0]) < 1e-14);

        let s = Mat::<f64>::from_fn(2, 2, |_, _| 1.0);
        assert!(matches!(DenseLu::factor(&s, MODEL_PIVOT_TOL, "s"), Err(Error::Singular(_))));
    }

    #[test]
    fn sparse_matches_dense() {
        let entries = vec![(0, 0, 4.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 4.0), (2, 2, 2.0), (1, 2, 0.5), (1, 1, 1.0)];
        let sp = SparseLu::factor(3, &entries, "t").unwrap();
        let dense = dense_from_triplets(3, &entries);
        let lu = DenseLu::factor(&dense, MODEL_PIVOT_TOL, "t").unwrap();
        let b = [1.0, -2.0, 0.25];
        assert!(max_abs_diff(&sp.solve(&b, "t").unwrap(), &lu.solve(&b)) < 1e-14);
    }
}
