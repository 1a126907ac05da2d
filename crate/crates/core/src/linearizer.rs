//! The DC+ linear model: per-branch blocks, shunt blocks and assembly of
//! `(p; q) = (p̂; q̂) + M (θ; u)` around a reference state.

use std::io::{self, Write};
use std::sync::Arc;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::acref::AcState;
use crate::error::{Error, Result};
use crate::gridio::{BranchAdmittance, BranchParams, IndexedGrid};
use crate::indexing::StateIndexer;
use crate::linalg::dense_from_triplets;
use crate::topoupdate::InverseHandle;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RefKind {
    Cold,
    Hot,
}

/// Expansion point of the linearization.
///
/// Angle differences are stored per branch so that a cold start can place
/// phase shifters at `θ̂_ft = α` while ordinary branches sit at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceState {
    pub kind: RefKind,
    pub v_hat: Vec<f64>,
    pub theta_hat: Vec<f64>,
    pub theta_ft: Vec<f64>,
}

impl ReferenceState {
    /// Reference with per-branch differences taken from bus angles.
    pub fn from_bus_values(grid: &IndexedGrid, kind: RefKind, v_hat: Vec<f64>, theta_hat: Vec<f64>) -> Self {
        let theta_ft = grid.branches.iter().map(|b| theta_hat[b.from] - theta_hat[b.to]).collect();
        ReferenceState { kind, v_hat, theta_hat, theta_ft }
    }

    /// Same reference with every bus angle shifted by `offset`.
    pub fn shifted(&self, offset: f64) -> Self {
        let mut out = self.clone();
        out.theta_hat.iter_mut().for_each(|t| *t += offset);
        out
    }

    fn check(&self, grid: &IndexedGrid) -> Result<()> {
        if self.v_hat.len() != grid.bus_count() || self.theta_hat.len() != grid.bus_count() {
            return Err(Error::Dimension { expected: grid.bus_count(), got: self.v_hat.len() });
        }
        if self.theta_ft.len() != grid.branches.len() {
            return Err(Error::Dimension { expected: grid.branches.len(), got: self.theta_ft.len() });
        }
        if let Some(i) = self.v_hat.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::InvalidCase(format!("reference voltage at bus {} is not positive", grid.buses[i].id)));
        }
        Ok(())
    }
}

/// Flat reference: `v̂ = 1` at PQ buses, `v̂ = v_set` elsewhere, zero angle
/// differences except `θ̂_ft = α` across phase shifters.
pub fn cold_ref(grid: &IndexedGrid) -> ReferenceState {
    let v_hat = grid.buses.iter().map(|b| b.v_set.unwrap_or(1.0)).collect();
    ReferenceState {
        kind: RefKind::Cold,
        v_hat,
        theta_hat: vec![0.0; grid.bus_count()],
        theta_ft: grid.branches.iter().map(|b| b.params.alpha).collect(),
    }
}

/// Reference copied from a converged AC solution, slack angle moved to zero.
pub fn hot_ref(grid: &IndexedGrid, state: &AcState) -> Result<ReferenceState> {
    if !state.converged {
        return Err(Error::NotConvergedReference);
    }
    if state.v.len() != grid.bus_count() {
        return Err(Error::Dimension { expected: grid.bus_count(), got: state.v.len() });
    }
    let slack = state.theta[grid.slack()];
    let theta = state.theta.iter().map(|t| t - slack).collect();
    Ok(ReferenceState::from_bus_values(grid, RefKind::Hot, state.v.clone(), theta))
}

/// Linearized injection at one branch end `a` towards `b`:
/// `p ≈ p̂ + p_theta (θ_a − θ_b) + p_u_self u_a + p_u_other u_b`, same for `q`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EndBlock {
    pub p_hat: f64,
    pub q_hat: f64,
    pub p_theta: f64,
    pub q_theta: f64,
    pub p_u_self: f64,
    pub p_u_other: f64,
    pub q_u_self: f64,
    pub q_u_other: f64,
}

impl EndBlock {
    /// Evaluates the end seen through `adm` (self = `f` slot, other = `t` slot).
    pub fn new(adm: &BranchAdmittance, va: f64, vb: f64, theta_ab: f64) -> Self {
        let (s, c) = theta_ab.sin_cos();
        let vv = va * vb;
        let cos_part = adm.g_ft * c + adm.b_ft * s;
        let sin_part = adm.g_ft * s - adm.b_ft * c;
        let p_theta = vv * (-adm.g_ft * s + adm.b_ft * c);
        let q_theta = vv * (adm.b_ft * s + adm.g_ft * c);
        let p = va * va * adm.g_ff + vv * cos_part;
        let q = -va * va * adm.b_ff + vv * sin_part;
        EndBlock {
            p_hat: p - p_theta * theta_ab,
            q_hat: q - q_theta * theta_ab,
            p_theta,
            q_theta,
            p_u_self: 2.0 * va * va * adm.g_ff + vv * cos_part,
            p_u_other: vv * cos_part,
            q_u_self: -2.0 * va * va * adm.b_ff + vv * sin_part,
            q_u_other: vv * sin_part,
        }
    }

    pub fn flows(&self, dtheta: f64, u_self: f64, u_other: f64) -> (f64, f64) {
        (
            self.p_hat + self.p_theta * dtheta + self.p_u_self * u_self + self.p_u_other * u_other,
            self.q_hat + self.q_theta * dtheta + self.q_u_self * u_self + self.q_u_other * u_other,
        )
    }

    fn minus(&self, o: &EndBlock) -> EndBlock {
        EndBlock {
            p_hat: self.p_hat - o.p_hat,
            q_hat: self.q_hat - o.q_hat,
            p_theta: self.p_theta - o.p_theta,
            q_theta: self.q_theta - o.q_theta,
            p_u_self: self.p_u_self - o.p_u_self,
            p_u_other: self.p_u_other - o.p_u_other,
            q_u_self: self.q_u_self - o.q_u_self,
            q_u_other: self.q_u_other - o.q_u_other,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BranchBlock {
    pub from: EndBlock,
    pub to: EndBlock,
}

impl BranchBlock {
    /// Element-wise difference `self − other`.
    pub fn minus(&self, other: &BranchBlock) -> BranchBlock {
        BranchBlock { from: self.from.minus(&other.from), to: self.to.minus(&other.to) }
    }

    /// Linearized `(p_f, q_f, p_t, q_t)` for the given state values.
    pub fn flows(&self, theta_f: f64, theta_t: f64, u_f: f64, u_t: f64) -> [f64; 4] {
        let (pf, qf) = self.from.flows(theta_f - theta_t, u_f, u_t);
        let (pt, qt) = self.to.flows(theta_t - theta_f, u_t, u_f);
        [pf, qf, pt, qt]
    }
}

pub fn branch_block(params: &BranchParams, v_f: f64, v_t: f64, theta_ft: f64) -> BranchBlock {
    let adm = params.admittance();
    BranchBlock {
        from: EndBlock::new(&adm, v_f, v_t, theta_ft),
        to: EndBlock::new(&adm.flipped(), v_t, v_f, -theta_ft),
    }
}

/// Shunt withdrawal `p = v²g`, `q = −v²b`, linearized in `u`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ShuntBlock {
    pub p_hat: f64,
    pub q_hat: f64,
    pub n_pu: f64,
    pub n_qu: f64,
}

pub fn shunt_block(g: f64, b: f64, v_hat: f64) -> ShuntBlock {
    let v2 = v_hat * v_hat;
    ShuntBlock { p_hat: v2 * g, q_hat: -v2 * b, n_pu: 2.0 * v2 * g, n_qu: -2.0 * v2 * b }
}

/// Scatters one branch block into `(row, col, value)` triplets.
pub fn scatter_branch(ix: &StateIndexer, f: usize, t: usize, block: &BranchBlock, out: &mut Vec<(usize, usize, f64)>) {
    scatter_end(ix, f, t, &block.from, out);
    scatter_end(ix, t, f, &block.to, out);
}

fn scatter_end(ix: &StateIndexer, a: usize, b: usize, e: &EndBlock, out: &mut Vec<(usize, usize, f64)>) {
    let theta = [(ix.theta_pos(a), 1.0), (ix.theta_pos(b), -1.0)];
    let us = [(ix.u_pos(a), true), (ix.u_pos(b), false)];
    if let Some(row) = ix.theta_pos(a) {
        for &(col, sign) in &theta {
            if let Some(col) = col {
                out.push((row, col, sign * e.p_theta));
            }
        }
        for &(col, own) in &us {
            if let Some(col) = col {
                out.push((row, col, if own { e.p_u_self } else { e.p_u_other }));
            }
        }
    }
    if let Some(row) = ix.u_pos(a) {
        for &(col, sign) in &theta {
            if let Some(col) = col {
                out.push((row, col, sign * e.q_theta));
            }
        }
        for &(col, own) in &us {
            if let Some(col) = col {
                out.push((row, col, if own { e.q_u_self } else { e.q_u_other }));
            }
        }
    }
}

pub fn scatter_shunt(ix: &StateIndexer, i: usize, sh: &ShuntBlock, out: &mut Vec<(usize, usize, f64)>) {
    if let Some(col) = ix.u_pos(i) {
        out.push((i, col, sh.n_pu));
        out.push((col, col, sh.n_qu));
    }
}

/// Blocks, offsets and the triplet form of `M` before factorization.
#[derive(Clone, Debug)]
pub struct ModelParts {
    pub indexer: StateIndexer,
    pub blocks: Vec<Option<BranchBlock>>,
    pub shunts: Vec<ShuntBlock>,
    pub triplets: Vec<(usize, usize, f64)>,
    /// Offsets for every bus, slack included.
    pub p_hat_bus: Vec<f64>,
    pub q_hat_bus: Vec<f64>,
}

pub fn assemble_parts(grid: &IndexedGrid, reference: &ReferenceState) -> Result<ModelParts> {
    reference.check(grid)?;
    let ix = StateIndexer::new(grid.n, grid.m);
    let nb = grid.bus_count();
    let mut triplets = Vec::with_capacity(16 * grid.branches.len() + 2 * nb);
    let mut p_hat_bus = vec![0.0; nb];
    let mut q_hat_bus = vec![0.0; nb];
    let mut blocks = Vec::with_capacity(grid.branches.len());
    for (k, br) in grid.branches.iter().enumerate() {
        if !br.in_service {
            blocks.push(None);
            continue;
        }
        let blk = branch_block(&br.params, reference.v_hat[br.from], reference.v_hat[br.to], reference.theta_ft[k]);
        scatter_branch(&ix, br.from, br.to, &blk, &mut triplets);
        p_hat_bus[br.from] += blk.from.p_hat;
        q_hat_bus[br.from] += blk.from.q_hat;
        p_hat_bus[br.to] += blk.to.p_hat;
        q_hat_bus[br.to] += blk.to.q_hat;
        blocks.push(Some(blk));
    }
    let mut shunts = Vec::with_capacity(nb);
    for (i, bus) in grid.buses.iter().enumerate() {
        let sh = shunt_block(bus.g_shunt, bus.b_shunt, reference.v_hat[i]);
        if sh != ShuntBlock::default() {
            scatter_shunt(&ix, i, &sh, &mut triplets);
        }
        p_hat_bus[i] += sh.p_hat;
        q_hat_bus[i] += sh.q_hat;
        shunts.push(sh);
    }
    Ok(ModelParts { indexer: ix, blocks, shunts, triplets, p_hat_bus, q_hat_bus })
}

/// The assembled and factored linear model.
#[derive(Clone, Debug)]
pub struct LinearModel {
    pub indexer: StateIndexer,
    pub reference: ReferenceState,
    pub blocks: Vec<Option<BranchBlock>>,
    pub shunts: Vec<ShuntBlock>,
    pub p_hat_bus: Vec<f64>,
    pub q_hat_bus: Vec<f64>,
    matrix: Arc<Mat<f64>>,
    handle: InverseHandle,
}

pub fn assemble(grid: &IndexedGrid, reference: &ReferenceState) -> Result<LinearModel> {
    let parts = assemble_parts(grid, reference)?;
    let dim = parts.indexer.dim();
    let matrix = Arc::new(dense_from_triplets(dim, &parts.triplets));
    let handle = InverseHandle::factor(matrix.clone())?;
    Ok(LinearModel {
        indexer: parts.indexer,
        reference: reference.clone(),
        blocks: parts.blocks,
        shunts: parts.shunts,
        p_hat_bus: parts.p_hat_bus,
        q_hat_bus: parts.q_hat_bus,
        matrix,
        handle,
    })
}

impl LinearModel {
    pub fn dim(&self) -> usize {
        self.indexer.dim()
    }

    pub fn matrix(&self) -> &Mat<f64> {
        &self.matrix
    }

    pub fn matrix_arc(&self) -> Arc<Mat<f64>> {
        self.matrix.clone()
    }

    /// Inverse handle of the unmodified model.
    pub fn handle(&self) -> &InverseHandle {
        &self.handle
    }

    /// `p̂` over the non-slack buses.
    pub fn p_hat(&self) -> &[f64] {
        &self.p_hat_bus[..self.indexer.n + self.indexer.m]
    }

    /// `q̂` over the PQ buses.
    pub fn q_hat(&self) -> &[f64] {
        &self.q_hat_bus[..self.indexer.n]
    }

    /// Stacked offset vector `(p̂; q̂)`.
    pub fn offsets(&self) -> Vec<f64> {
        let mut out = self.p_hat().to_vec();
        out.extend_from_slice(self.q_hat());
        out
    }

    /// Right-hand side `(p − p̂; q − q̂)`.
    pub fn rhs(&self, p: &[f64], q: &[f64]) -> Result<Vec<f64>> {
        let (np, nq) = (self.indexer.n + self.indexer.m, self.indexer.n);
        if p.len() != np {
            return Err(Error::Dimension { expected: np, got: p.len() });
        }
        if q.len() != nq {
            return Err(Error::Dimension { expected: nq, got: q.len() });
        }
        Ok(p.iter().zip(self.p_hat()).chain(q.iter().zip(self.q_hat())).map(|(a, b)| a - b).collect())
    }

    /// Writes `M` as `row,col,value` triplets followed by the offsets.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "kind,row,col,value")?;
        let m = &*self.matrix;
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let v = m[(i, j)];
                if v != 0.0 {
                    writeln!(w, "M,{i},{j},{v:.12e}")?;
                }
            }
        }
        for (i, v) in self.p_hat().iter().enumerate() {
            writeln!(w, "p_hat,{i},,{v:.12e}")?;
        }
        for (i, v) in self.q_hat().iter().enumerate() {
            writeln!(w, "q_hat,{i},,{v:.12e}")?;
        }
        Ok(())
    }
}
