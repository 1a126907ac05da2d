use std::fmt;
use std::sync::Arc;

use faer::Mat;
use log::debug;

use crate::error::{Error, Result};
use crate::linalg::{DenseLu, INNER_PIVOT_TOL, MODEL_PIVOT_TOL};

/// Default stack depth beyond which [`InverseHandle::push_layer`] refactors.
pub const DEFAULT_MAX_DEPTH: usize = 8;

/// The action of an inverse matrix, represented as a base factorization plus
/// a stack of low-rank corrections and coordinate maps.
///
/// A correction layer computes `y = H x; result = y + U C⁻¹ (A x + P y)`
/// where `H` is the handle below it.
#[derive(Clone)]
pub struct InverseHandle {
    node: Arc<Node>,
    dim: usize,
    depth: usize,
    max_depth: usize,
}

enum Node {
    Base {
        lu: DenseLu,
        matrix: Arc<Mat<f64>>,
    },
    Layer {
        inner: InverseHandle,
        u: Mat<f64>,
        c: DenseLu,
        a: Option<Mat<f64>>,
        p: Mat<f64>,
        known: Known,
    },
    /// `lift(H contract(x))`; `source[i]` is the inner coordinate copied to `i`.
    Pad {
        inner: InverseHandle,
        source: Vec<usize>,
    },
    /// `select(H embed(x))`; `pos[j]` is the inner coordinate for outer `j`.
    Restrict {
        inner: InverseHandle,
        pos: Vec<usize>,
    },
}

/// What is known about the matrix whose inverse a layer represents.
pub(crate) enum Known {
    /// inner matrix + `s r`
    LowRank { s: Mat<f64>, r: Mat<f64> },
    Dense(Arc<Mat<f64>>),
    /// A limit with no finite matrix (closed switch).
    Unknown,
}

impl fmt::Debug for InverseHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InverseHandle").field("dim", &self.dim).field("depth", &self.depth).finish()
    }
}

impl InverseHandle {
    pub fn factor(matrix: Arc<Mat<f64>>) -> Result<Self> {
        let lu = DenseLu::factor(&matrix, MODEL_PIVOT_TOL, "model matrix")?;
        let dim = matrix.nrows();
        Ok(InverseHandle { node: Arc::new(Node::Base { lu, matrix }), dim, depth: 0, max_depth: DEFAULT_MAX_DEPTH })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of layers stacked on the base factorization.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn with_max_depth(mut self, max_depth: usize) -> Self {
        self.max_depth = max_depth;
        self
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim, "inverse handle applied to a vector of the wrong length");
        match &*self.node {
            Node::Base { lu, .. } => lu.solve(x),
            Node::Layer { inner, u, c, a, p, .. } => {
                let mut y = inner.apply(x);
                let r = c.dim();
                let mut t = vec![0.0; r];
                for (k, tk) in t.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for j in 0..self.dim {
                        acc += p[(k, j)] * y[j];
                    }
                    if let Some(a) = a {
                        for j in 0..self.dim {
                            acc += a[(k, j)] * x[j];
                        }
                    }
                    *tk = acc;
                }
                let z = c.solve(&t);
                for (k, zk) in z.iter().enumerate() {
                    for i in 0..self.dim {
                        y[i] += u[(i, k)] * zk;
                    }
                }
                y
            }
            Node::Pad { inner, source } => {
                let mut xm = vec![0.0; inner.dim];
                for (i, &s) in source.iter().enumerate() {
                    xm[s] += x[i];
                }
                let ym = inner.apply(&xm);
                source.iter().map(|&s| ym[s]).collect()
            }
            Node::Restrict { inner, pos } => {
                let mut xc = vec![0.0; inner.dim];
                for (j, &p) in pos.iter().enumerate() {
                    xc[p] = x[j];
                }
                let yc = inner.apply(&xc);
                pos.iter().map(|&p| yc[p]).collect()
            }
        }
    }

    /// Applies the handle to every column of `x`.
    pub fn apply_mat(&self, x: &Mat<f64>) -> Mat<f64> {
        assert_eq!(x.nrows(), self.dim);
        match &*self.node {
            Node::Base { lu, .. } => lu.solve_mat(x),
            Node::Layer { inner, u, c, a, p, .. } => {
                let y = inner.apply_mat(x);
                let mut t = p * &y;
                if let Some(a) = a {
                    t += a * x;
                }
                let z = c.solve_mat(&t);
                &y + u * &z
            }
            _ => {
                let mut out = Mat::<f64>::zeros(self.dim, x.ncols());
                for j in 0..x.ncols() {
                    let col: Vec<f64> = (0..self.dim).map(|i| x[(i, j)]).collect();
                    for (i, v) in self.apply(&col).into_iter().enumerate() {
                        out[(i, j)] = v;
                    }
                }
                out
            }
        }
    }

    /// Dense matrix of the inverse action (testing and small grids only).
    pub fn to_dense(&self) -> Mat<f64> {
        self.apply_mat(&Mat::<f64>::identity(self.dim, self.dim))
    }

    /// The finite matrix this handle inverts, if one is known.
    pub fn matrix(&self) -> Option<Mat<f64>> {
        match &*self.node {
            Node::Base { matrix, .. } => Some((**matrix).clone()),
            Node::Layer { inner, known, .. } => match known {
                Known::LowRank { s, r } => inner.matrix().map(|m| m + s * r),
                Known::Dense(m) => Some((**m).clone()),
                Known::Unknown => None,
            },
            Node::Pad { .. } | Node::Restrict { .. } => None,
        }
    }

    /// Refactors from scratch, collapsing the stack into a new base.
    pub fn compact(&self) -> Result<InverseHandle> {
        let matrix = self.matrix().ok_or(Error::NotCompactable)?;
        Ok(InverseHandle::factor(Arc::new(matrix))?.with_max_depth(self.max_depth))
    }

    /// Stacks a correction layer, factoring the `r × r` inner matrix `c`.
    pub(crate) fn push_layer(
        &self,
        u: Mat<f64>,
        c: Mat<f64>,
        a: Option<Mat<f64>>,
        p: Mat<f64>,
        known: Known,
    ) -> Result<InverseHandle> {
        let r = c.nrows();
        assert!(u.nrows() == self.dim && u.ncols() == r && p.nrows() == r && p.ncols() == self.dim);
        let c = DenseLu::factor(&c, INNER_PIVOT_TOL, "inner low-rank system")?;
        let handle = InverseHandle {
            node: Arc::new(Node::Layer { inner: self.clone(), u, c, a, p, known }),
            dim: self.dim,
            depth: self.depth + 1,
            max_depth: self.max_depth,
        };
        if handle.depth > handle.max_depth {
            match handle.compact() {
                Ok(h) => return Ok(h),
                Err(Error::NotCompactable) => debug!("handle depth {} exceeds {}, not compactable", handle.depth, handle.max_depth),
                Err(e) => return Err(e),
            }
        }
        Ok(handle)
    }

    /// Padding: the inverse over a larger coordinate set in which several
    /// outer coordinates share one inner coordinate.
    pub fn pad(&self, source: Vec<usize>) -> InverseHandle {
        assert!(source.iter().all(|&s| s < self.dim));
        InverseHandle {
            dim: source.len(),
            node: Arc::new(Node::Pad { inner: self.clone(), source }),
            depth: self.depth + 1,
            max_depth: self.max_depth,
        }
    }

    /// Restriction to a subset of coordinates (embed with zeros, select).
    pub fn restrict(&self, pos: Vec<usize>) -> InverseHandle {
        assert!(pos.iter().all(|&p| p < self.dim));
        InverseHandle {
            dim: pos.len(),
            node: Arc::new(Node::Restrict { inner: self.clone(), pos }),
            depth: self.depth + 1,
            max_depth: self.max_depth,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    fn sample(dim: usize) -> Arc<Mat<f64>> {
        Arc::new(Mat::from_fn(dim, dim, |i, j| if i == j { 5.0 + i as f64 } else { 1.0 / (1.0 + (i + 2 * j) as f64) }))
    }

    #[test]
    fn base_handle_solves() {
        let m = sample(6);
        let h = InverseHandle::factor(m.clone()).unwrap();
        let x = vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.5];
        let y = h.apply(&x);
        assert!(max_abs_diff(&crate::linalg::mat_vec(&m, &y), &x) < 1e-13);
    }

    #[test]
    fn pad_then_contract_reproduces_inner_action() {
        let h = InverseHandle::factor(sample(4)).unwrap();
        let padded = h.pad(vec![0, 1, 2, 3, 1]);
        let x = vec![0.3, -1.0, 2.0, 0.7];
        let mut xp = x.clone();
        xp.push(0.0);
        let y = padded.apply(&xp);
        assert!(max_abs_diff(&y[..4], &h.apply(&x)) < 1e-15);
        assert_eq!(y[4], y[1]);
        // splitting an injection across the duplicated coordinates changes nothing
        let split = vec![0.3, -0.4, 2.0, 0.7, -0.6];
        assert!(max_abs_diff(&padded.apply(&split), &y) < 1e-15);
        assert!(matches!(padded.compact(), Err(Error::NotCompactable)));
    }

    #[test]
    fn deep_stacks_are_compacted() {
        let dim = 5;
        let mut h = InverseHandle::factor(sample(dim)).unwrap().with_max_depth(3);
        let mut dense = (*sample(dim)).clone();
        for k in 0..5 {
            let s = Mat::from_fn(dim, 1, |i, _| if i == k { 0.5 } else { 0.0 });
            let r = Mat::from_fn(1, dim, |_, j| if j == (k + 1) % dim { 1.0 } else { 0.0 });
            let hs = h.apply_mat(&s);
            let c = Mat::<f64>::identity(1, 1) + &r * &hs;
            let u = -&hs;
            dense += &s * &r;
            h = h.push_layer(u, c, None, r.clone(), Known::LowRank { s, r }).unwrap();
            assert!(h.depth() <= 3);
        }
        let want = crate::linalg::DenseLu::factor(&dense, 1e-13, "t").unwrap();
        let x = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        assert!(max_abs_diff(&h.apply(&x), &want.solve(&x)) < 1e-12);
    }
}
