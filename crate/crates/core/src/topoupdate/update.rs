use std::collections::HashSet;

use faer::Mat;

use super::handle::{InverseHandle, Known};
use crate::dcplus::LinState;
use crate::error::{Error, Result};
use crate::gridio::{connectivity_check, BranchParams, Connectivity, IndexedGrid};
use crate::indexing::{Selector, StateIndexer};
use crate::linearizer::{branch_block, BranchBlock, LinearModel};

/// Sparse vector as `(position, value)` pairs.
pub type SparseVec = Vec<(usize, f64)>;

fn push(v: &mut SparseVec, pos: Option<usize>, val: f64) {
    if let Some(p) = pos {
        v.push((p, val));
    }
}

pub(crate) fn selector_vec(sel: Selector) -> SparseVec {
    sel.entries().to_vec()
}

/// `ΔM = S R` with offset changes `(Δp̂; Δq̂)`.
#[derive(Clone, Debug, Default)]
pub struct LowRankUpdate {
    pub dim: usize,
    /// Columns of `S`.
    pub s: Vec<SparseVec>,
    /// Rows of `R`.
    pub r: Vec<SparseVec>,
    /// `(Δp̂; Δq̂)` in state positions.
    pub d_offset: SparseVec,
    /// Branch blocks after the modification, for flow recovery.
    pub blocks: Vec<(usize, Option<BranchBlock>)>,
}

impl LowRankUpdate {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn s_dense(&self) -> Mat<f64> {
        let mut m = Mat::<f64>::zeros(self.dim, self.rank());
        for (k, col) in self.s.iter().enumerate() {
            for &(i, v) in col {
                m[(i, k)] += v;
            }
        }
        m
    }

    pub fn r_dense(&self) -> Mat<f64> {
        let mut m = Mat::<f64>::zeros(self.rank(), self.dim);
        for (k, row) in self.r.iter().enumerate() {
            for &(j, v) in row {
                m[(k, j)] += v;
            }
        }
        m
    }

    /// Dense `S R`.
    pub fn delta_matrix(&self) -> Mat<f64> {
        self.s_dense() * self.r_dense()
    }

    /// `ΔM x` in `O(nnz)`.
    pub fn apply_delta(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (col, row) in self.s.iter().zip(&self.r) {
            let rx: f64 = row.iter().map(|&(j, v)| v * x[j]).sum();
            for &(i, v) in col {
                out[i] += v * rx;
            }
        }
        out
    }

    pub fn d_offset_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, v) in &self.d_offset {
            out[i] += v;
        }
        out
    }

    /// Horizontal/vertical concatenation of several updates.
    pub fn concat(parts: Vec<LowRankUpdate>) -> LowRankUpdate {
        let dim = parts.first().map_or(0, |p| p.dim);
        let mut out = LowRankUpdate { dim, ..Default::default() };
        for p in parts {
            assert_eq!(p.dim, dim);
            out.s.extend(p.s);
            out.r.extend(p.r);
            out.d_offset.extend(p.d_offset);
            out.blocks.extend(p.blocks);
        }
        out
    }
}

/// Rank-3 factorization of the change of one branch block at the model's
/// reference. `new_params = None` takes the branch out of service.
///
/// Rows of `R` that vanish (voltage selectors of PV or slack endpoints) are
/// dropped, so the rank is `1 +` the number of PQ endpoints.
pub fn branch_delta(
    grid: &IndexedGrid,
    model: &LinearModel,
    branch: usize,
    new_params: Option<BranchParams>,
) -> Result<LowRankUpdate> {
    let br = grid
        .branches
        .get(branch)
        .ok_or_else(|| Error::InvalidTopology(format!("branch index {branch} out of range")))?;
    let ix = model.indexer;
    let reference = &model.reference;
    let old = model.blocks[branch].unwrap_or_default();
    let new = new_params.map(|p| branch_block(&p, reference.v_hat[br.from], reference.v_hat[br.to], reference.theta_ft[branch]));
    let d = new.unwrap_or_default().minus(&old);
    Ok(block_delta(&ix, br.from, br.to, &d, vec![(branch, new)]))
}

/// Low-rank form of a block difference `d` scattered between buses `f` and `t`.
pub fn block_delta(
    ix: &StateIndexer,
    f: usize,
    t: usize,
    d: &BranchBlock,
    blocks: Vec<(usize, Option<BranchBlock>)>,
) -> LowRankUpdate {
    let (pf, pt, qf, qt) = (ix.theta_pos(f), ix.theta_pos(t), ix.u_pos(f), ix.u_pos(t));
    let (fr, to) = (&d.from, &d.to);

    let mut s_ft = SparseVec::new();
    push(&mut s_ft, pf, fr.p_theta);
    push(&mut s_ft, pt, -to.p_theta);
    push(&mut s_ft, qf, fr.q_theta);
    push(&mut s_ft, qt, -to.q_theta);
    let mut s_f = SparseVec::new();
    push(&mut s_f, pf, fr.p_u_self);
    push(&mut s_f, pt, to.p_u_other);
    push(&mut s_f, qf, fr.q_u_self);
    push(&mut s_f, qt, to.q_u_other);
    let mut s_t = SparseVec::new();
    push(&mut s_t, pf, fr.p_u_other);
    push(&mut s_t, pt, to.p_u_self);
    push(&mut s_t, qf, fr.q_u_other);
    push(&mut s_t, qt, to.q_u_self);

    let mut s = vec![s_ft];
    let mut r = vec![selector_vec(ix.mu(f, t))];
    if let Some(q) = qf {
        s.push(s_f);
        r.push(vec![(q, 1.0)]);
    }
    if let Some(q) = qt {
        s.push(s_t);
        r.push(vec![(q, 1.0)]);
    }

    let mut d_offset = SparseVec::new();
    push(&mut d_offset, pf, fr.p_hat);
    push(&mut d_offset, pt, to.p_hat);
    push(&mut d_offset, qf, fr.q_hat);
    push(&mut d_offset, qt, to.q_hat);
    LowRankUpdate { dim: ix.dim(), s, r, d_offset, blocks }
}

/// Rank-`3k` update for `k` simultaneous branch modifications.
pub fn multi_branch_delta(
    grid: &IndexedGrid,
    model: &LinearModel,
    changes: &[(usize, Option<BranchParams>)],
) -> Result<LowRankUpdate> {
    let mut seen = HashSet::new();
    for &(k, _) in changes {
        if !seen.insert(k) {
            return Err(Error::InvalidTopology(format!("branch {} listed twice", grid.branches[k].key)));
        }
    }
    let parts = changes.iter().map(|&(k, p)| branch_delta(grid, model, k, p)).collect::<Result<Vec<_>>>()?;
    Ok(LowRankUpdate::concat(parts))
}

/// `(M + S R)⁻¹ = H − H S (1 + R H S)⁻¹ R H`, stacked as a correction layer.
///
/// A singular inner matrix is reported as [`Error::Singular`].
pub fn woodbury_update(handle: &InverseHandle, update: &LowRankUpdate) -> Result<InverseHandle> {
    if update.dim != handle.dim() {
        return Err(Error::Dimension { expected: handle.dim(), got: update.dim });
    }
    let s = update.s_dense();
    let r = update.r_dense();
    let hs = handle.apply_mat(&s);
    let c = Mat::<f64>::identity(update.rank(), update.rank()) + &r * &hs;
    handle.push_layer(-hs, c, None, r.clone(), Known::LowRank { s, r })
}

/// Post-modification deltas `(ψ; σ) = −(M + ΔM)⁻¹ [(Δp̂; Δq̂) + ΔM (θ; u)]`.
pub fn state_delta(updated: &InverseHandle, update: &LowRankUpdate, base: &LinState) -> LinState {
    let x = base.to_vec();
    let mut rhs = update.apply_delta(&x);
    for &(i, v) in &update.d_offset {
        rhs[i] += v;
    }
    let delta: Vec<f64> = updated.apply(&rhs).into_iter().map(|v| -v).collect();
    LinState::from_vec(base.theta.len(), &delta)
}

/// A checked topology modification: the update, its inverse handle and the
/// post-modification state.
#[derive(Clone, Debug)]
pub struct Modification {
    pub update: LowRankUpdate,
    pub handle: InverseHandle,
    pub state: LinState,
}

/// Applies branch changes with islanding pre-check: disconnection yields
/// [`Error::Islanded`], a singular inner matrix on a connected graph yields
/// [`Error::Degenerate`].
pub fn apply_modification(
    grid: &IndexedGrid,
    model: &LinearModel,
    handle: &InverseHandle,
    base: &LinState,
    changes: &[(usize, Option<BranchParams>)],
) -> Result<Modification> {
    let removed: Vec<usize> = changes.iter().filter(|c| c.1.is_none()).map(|c| c.0).collect();
    if let Connectivity::Islanded(buses) = connectivity_check(grid, &removed) {
        return Err(Error::Islanded(buses));
    }
    let update = multi_branch_delta(grid, model, changes)?;
    let updated = match woodbury_update(handle, &update) {
        Err(Error::Singular(msg)) => return Err(Error::Degenerate(msg)),
        other => other?,
    };
    let delta = state_delta(&updated, &update, base);
    Ok(Modification { state: base.plus(&delta), update, handle: updated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acref::{ac_solve, Init};
    use crate::dcplus::solve;
    use crate::linalg::{dense_from_triplets, max_abs, max_abs_diff};
    use crate::linearizer::{assemble, assemble_parts, cold_ref, hot_ref, ReferenceState};
    use crate::testing::{load_fixture, random_vectors};

    fn hot(grid: &IndexedGrid) -> (LinearModel, LinState) {
        let ac = ac_solve(grid, Init::Flat, 1e-10, 30).unwrap();
        let model = assemble(grid, &hot_ref(grid, &ac).unwrap()).unwrap();
        let base = solve(&model, &grid.p_injections(), &grid.q_injections()).unwrap();
        (model, base)
    }

    fn rebuilt_matrix(grid: &IndexedGrid, reference: &ReferenceState) -> Mat<f64> {
        let parts = assemble_parts(grid, reference).unwrap();
        dense_from_triplets(parts.indexer.dim(), &parts.triplets)
    }

    #[test]
    fn identity_modification_is_zero() {
        let grid = load_fixture("case14");
        let model = assemble(&grid, &cold_ref(&grid)).unwrap();
        let k = grid.find_branch_between(2, 3, 1).unwrap();
        let up = branch_delta(&grid, &model, k, Some(grid.branches[k].params)).unwrap();
        assert_eq!(up.delta_matrix().norm_max(), 0.0);
        assert!(up.d_offset.iter().all(|e| e.1 == 0.0));
        let h = woodbury_update(model.handle(), &up).unwrap();
        let x = random_vectors(model.dim(), 1, 3).remove(0);
        assert!(max_abs_diff(&h.apply(&x), &model.handle().apply(&x)) < 1e-14);
    }

    #[test]
    fn outage_delta_matches_matrix_difference() {
        let grid = load_fixture("case14");
        let (model, _) = hot(&grid);
        for k in grid.in_service_branches() {
            let up = branch_delta(&grid, &model, k, None).unwrap();
            let diff = rebuilt_matrix(&grid.without_branches(&[k]), &model.reference) - model.matrix();
            assert!((&diff - up.delta_matrix()).norm_max() < 1e-12, "{}", grid.branches[k].key);
            assert!(up.rank() <= 3);
        }
    }

    #[test]
    fn phase_shift_change_matches_rebuild() {
        let grid = load_fixture("case14");
        let model = assemble(&grid, &cold_ref(&grid)).unwrap();
        let k = grid.find_branch_between(4, 7, 1).unwrap();
        let params = BranchParams { alpha: grid.branches[k].params.alpha + 0.05, ..grid.branches[k].params };
        let up = branch_delta(&grid, &model, k, Some(params)).unwrap();
        let diff = rebuilt_matrix(&grid.with_branch_params(k, params), &model.reference) - model.matrix();
        assert!((&diff - up.delta_matrix()).norm_max() < 1e-12);
        // bus 4 and bus 7 are both PQ
        assert_eq!(up.rank(), 3);
        assert!(max_abs(&up.d_offset_dense()) > 0.0);
    }

    #[test]
    fn woodbury_matches_dense_reinversion_for_all_outages() {
        let grid = load_fixture("case14");
        let (model, _) = hot(&grid);
        let bridge = grid.find_branch_between(7, 8, 1).unwrap();
        let xs = random_vectors(model.dim(), 20, 11);
        for k in grid.in_service_branches().filter(|&k| k != bridge) {
            let up = branch_delta(&grid, &model, k, None).unwrap();
            let h = woodbury_update(model.handle(), &up).unwrap();
            let dense = crate::linalg::DenseLu::factor(&rebuilt_matrix(&grid.without_branches(&[k]), &model.reference), 1e-13, "t").unwrap();
            for x in &xs {
                let want = dense.solve(x);
                assert!(max_abs_diff(&h.apply(x), &want) <= 1e-8 * max_abs(&want));
            }
        }
        let up = branch_delta(&grid, &model, bridge, None).unwrap();
        assert!(matches!(woodbury_update(model.handle(), &up), Err(Error::Singular(_))));
    }

    #[test]
    fn state_delta_matches_rebuild_solve() {
        let grid = load_fixture("case14");
        let (model, base) = hot(&grid);
        let k = grid.find_branch_between(2, 3, 1).unwrap();
        let up = branch_delta(&grid, &model, k, None).unwrap();
        let h = woodbury_update(model.handle(), &up).unwrap();
        let post = base.plus(&state_delta(&h, &up, &base));
        let reduced = grid.without_branches(&[k]);
        let rebuilt = assemble(&reduced, &model.reference).unwrap();
        let direct = solve(&rebuilt, &grid.p_injections(), &grid.q_injections()).unwrap();
        assert!(max_abs_diff(&post.to_vec(), &direct.to_vec()) < 1e-10);

        let zero = LowRankUpdate { dim: model.dim(), ..Default::default() };
        assert_eq!(max_abs(&state_delta(model.handle(), &zero, &base).to_vec()), 0.0);
    }

    #[test]
    fn double_outage_and_islanding() {
        let grid = load_fixture("case14");
        let (model, base) = hot(&grid);
        let a = grid.find_branch_between(1, 5, 1).unwrap();
        let b = grid.find_branch_between(2, 4, 1).unwrap();
        let m = apply_modification(&grid, &model, model.handle(), &base, &[(a, None), (b, None)]).unwrap();
        assert_eq!(m.update.rank(), 4); // bus 1 is the slack, bus 2 is PV
        let rebuilt = assemble(&grid.without_branches(&[a, b]), &model.reference).unwrap();
        let direct = solve(&rebuilt, &grid.p_injections(), &grid.q_injections()).unwrap();
        assert!(max_abs_diff(&m.state.to_vec(), &direct.to_vec()) < 1e-10);

        let single = multi_branch_delta(&grid, &model, &[(a, None)]).unwrap();
        let direct = branch_delta(&grid, &model, a, None).unwrap();
        assert_eq!(single.delta_matrix(), direct.delta_matrix());

        let bridge = grid.find_branch_between(7, 8, 1).unwrap();
        let err = apply_modification(&grid, &model, model.handle(), &base, &[(a, None), (bridge, None)]).unwrap_err();
        assert!(matches!(err, Error::Islanded(b) if b == vec![8]));
        assert!(matches!(multi_branch_delta(&grid, &model, &[(a, None), (a, None)]), Err(Error::InvalidTopology(_))));
    }
}
