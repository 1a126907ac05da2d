use faer::Mat;

use super::handle::{InverseHandle, Known};
use super::update::{selector_vec, LowRankUpdate, SparseVec};
use crate::error::{Error, Result};
use crate::gridio::BranchParams;
use crate::indexing::{Selector, StateIndexer};
use crate::linearizer::branch_block;

/// Singular values below this fraction of the largest are treated as zero
/// when factoring the coupler block.
const RANK_TOL: f64 = 1e-10;

/// Rank-revealing factorization `S R` of the block of a coupler with unit
/// series susceptance between `f` and `t` at the given reference.
///
/// The coefficients are taken in the row basis `(η_f, η_t, ζ_f, ζ_t)` and
/// the column basis `(μ_ft, ζ_f, ζ_t)`. At `θ̂ = 0` and equal voltages the
/// block is `v̂²(μμᵀ + ννᵀ)`, which has rank 2, so the factorization drops
/// directions with vanishing singular value.
pub fn unit_coupler_factors(ix: &StateIndexer, f: usize, t: usize, v_f: f64, v_t: f64, theta_e: f64) -> (Vec<SparseVec>, Vec<SparseVec>) {
    let unit = BranchParams { r: 0.0, x: 1.0, b_charging: 0.0, tau: 1.0, alpha: 0.0 };
    let blk = branch_block(&unit, v_f, v_t, theta_e);
    let (a, b) = (&blk.from, &blk.to);
    let rows: [(Selector, [f64; 3]); 4] = [
        (ix.eta_or_zero(f), [a.p_theta, a.p_u_self, a.p_u_other]),
        (ix.eta_or_zero(t), [-b.p_theta, b.p_u_other, b.p_u_self]),
        (ix.zeta(f), [a.q_theta, a.q_u_self, a.q_u_other]),
        (ix.zeta(t), [-b.q_theta, b.q_u_other, b.q_u_self]),
    ];
    let cols = [ix.mu(f, t), ix.zeta(f), ix.zeta(t)];
    let keep_rows: Vec<usize> = (0..4).filter(|&i| !rows[i].0.is_zero()).collect();
    let keep_cols: Vec<usize> = (0..3).filter(|&j| !cols[j].is_zero()).collect();
    let k = Mat::<f64>::from_fn(keep_rows.len(), keep_cols.len(), |i, j| rows[keep_rows[i]].1[keep_cols[j]]);
    if k.nrows() == 0 || k.ncols() == 0 {
        return (Vec::new(), Vec::new());
    }
    let svd = k.thin_svd().expect("SVD of a small coupler block");
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    let smax = (0..s.nrows()).fold(0.0f64, |m, i| m.max(s[i]));
    let mut s_cols = Vec::new();
    let mut r_rows = Vec::new();
    for r in 0..s.nrows() {
        if s[r] <= RANK_TOL * smax {
            continue;
        }
        let mut col = SparseVec::new();
        for (ii, &i) in keep_rows.iter().enumerate() {
            for &(p, c) in rows[i].0.entries() {
                col.push((p, c * u[(ii, r)] * s[r]));
            }
        }
        let mut row = SparseVec::new();
        for (jj, &j) in keep_cols.iter().enumerate() {
            for (p, c) in selector_vec(cols[j]) {
                row.push((p, c * v[(jj, r)]));
            }
        }
        s_cols.push(col);
        r_rows.push(row);
    }
    (s_cols, r_rows)
}

/// Finite coupler of series susceptance `b`: `ΔM = b · (unit coupler block)`.
pub fn coupler_update(ix: &StateIndexer, f: usize, t: usize, v_f: f64, v_t: f64, theta_e: f64, b: f64) -> LowRankUpdate {
    let (s, r) = unit_coupler_factors(ix, f, t, v_f, v_t, theta_e);
    let s = s.into_iter().map(|c| c.into_iter().map(|(p, v)| (p, b * v)).collect()).collect();
    LowRankUpdate { dim: ix.dim(), s, r, ..Default::default() }
}

/// Closing a zero-impedance coupler between `f` and `t`: the `b → ∞` limit
/// `M_c⁻¹ = M_o⁻¹ − M_o⁻¹ S (R M_o⁻¹ S)⁻¹ R M_o⁻¹`.
pub fn close_switch(
    handle_o: &InverseHandle,
    ix: &StateIndexer,
    f: usize,
    t: usize,
    v_f: f64,
    v_t: f64,
    theta_e: f64,
) -> Result<InverseHandle> {
    if f == t {
        return Err(Error::InvalidTopology("coupler endpoints coincide".into()));
    }
    if (v_f - v_t).abs() > 1e-9 * v_f.abs().max(1.0) {
        return Err(Error::InvalidTopology(format!("coupler needs equal reference voltages, got {v_f} and {v_t}")));
    }
    let (s, r) = unit_coupler_factors(ix, f, t, v_f, v_t, theta_e);
    let up = LowRankUpdate { dim: ix.dim(), s, r, ..Default::default() };
    if up.rank() == 0 {
        return Err(Error::InvalidTopology("coupler joins two slack-like coordinates".into()));
    }
    let s = up.s_dense();
    let r = up.r_dense();
    let hs = handle_o.apply_mat(&s);
    let c = &r * &hs;
    handle_o.push_layer(-hs, c, None, r, Known::Unknown)
}
