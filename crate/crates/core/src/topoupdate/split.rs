use std::collections::HashSet;
use std::sync::Arc;

use faer::Mat;
use serde::{Deserialize, Serialize};

use super::handle::{InverseHandle, Known};
use crate::dcplus::LinState;
use crate::error::{Error, Result};
use crate::gridio::{connectivity_check, BranchKey, BusKind, Connectivity, IndexedGrid};
use crate::indexing::StateIndexer;
use crate::linalg::dense_from_triplets;
use crate::linearizer::{assemble_parts, LinearModel, ReferenceState};

/// `A` keeps the original bus id, `B` is the new busbar.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Busbar {
    A,
    B,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchAssignment {
    pub branch: BranchKey,
    pub busbar: Busbar,
}

/// Which busbar every element connected to the split bus ends up on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub bus: u32,
    pub branches: Vec<BranchAssignment>,
    /// Busbar receiving the bus's net injection; required when it is nonzero.
    #[serde(default)]
    pub injection: Option<Busbar>,
}

/// Everything needed to evaluate a bus split from the merged model.
#[derive(Clone, Debug)]
pub struct SplitContext {
    /// Re-wired grid with both busbars and no coupler.
    pub open: IndexedGrid,
    pub new_id: u32,
    /// Internal indices of busbar A and B in `open`.
    pub f: usize,
    pub t: usize,
    pub merged_dim: usize,
    pub indexer: StateIndexer,
    /// Reference of `open`: the merged reference with busbar B copying the split bus.
    pub reference: ReferenceState,
    /// Open-grid coordinate → merged coordinate.
    pub source: Vec<usize>,
    /// Padded merged inverse, i.e. the closed-coupler inverse `M_c⁻¹`.
    pub padded: InverseHandle,
    /// Directly assembled open-grid matrix and offsets.
    pub m_open: Arc<Mat<f64>>,
    pub p_hat_open: Vec<f64>,
    pub q_hat_open: Vec<f64>,
}

fn validate(grid: &IndexedGrid, a: &SplitAssignment) -> Result<(usize, Vec<usize>)> {
    let bus = grid
        .internal(a.bus)
        .ok_or_else(|| Error::UnknownBus { what: "split assignment".into(), bus: a.bus })?;
    let rec = &grid.buses[bus];
    if rec.kind != BusKind::Pq {
        return Err(Error::InvalidTopology(format!("bus {} is {:?}; only PQ buses can be split", a.bus, rec.kind)));
    }
    if rec.g_shunt != 0.0 || rec.b_shunt != 0.0 {
        return Err(Error::InvalidTopology(format!("bus {} carries a shunt; split busbars must be shunt-free", a.bus)));
    }
    let incident: HashSet<usize> = grid.branches_at(bus).into_iter().collect();
    let mut seen = HashSet::new();
    let mut to_b = Vec::new();
    for ba in &a.branches {
        let k = grid
            .find_branch(ba.branch)
            .ok_or_else(|| Error::InvalidTopology(format!("unknown branch {}", ba.branch)))?;
        if !incident.contains(&k) {
            return Err(Error::InvalidTopology(format!("branch {} is not connected to bus {}", ba.branch, a.bus)));
        }
        if !seen.insert(k) {
            return Err(Error::InvalidTopology(format!("branch {} assigned twice", ba.branch)));
        }
        if ba.busbar == Busbar::B {
            to_b.push(k);
        }
    }
    let mut missing: Vec<usize> = incident.difference(&seen).copied().collect();
    missing.sort_unstable();
    if let Some(&k) = missing.first() {
        return Err(Error::InvalidTopology(format!("branch {} is not assigned to a busbar", grid.branches[k].key)));
    }
    if a.injection.is_none() && (rec.p_inj != 0.0 || rec.q_inj != 0.0) {
        return Err(Error::InvalidTopology(format!("injection at bus {} is not assigned to a busbar", a.bus)));
    }
    Ok((bus, to_b))
}

/// Builds the padded closed-coupler inverse and the directly assembled open
/// model for splitting one PQ bus.
pub fn pad_for_split(
    grid: &IndexedGrid,
    model: &LinearModel,
    handle_m: &InverseHandle,
    assignment: &SplitAssignment,
) -> Result<SplitContext> {
    let (bus, to_b) = validate(grid, assignment)?;
    let (n, m) = (grid.n, grid.m);
    let new_id = grid.buses.iter().map(|b| b.id).max().unwrap_or(0) + 1;
    let (p, q) = match assignment.injection {
        Some(Busbar::B) => (grid.buses[bus].p_inj, grid.buses[bus].q_inj),
        _ => (0.0, 0.0),
    };
    let open = grid.split_bus(bus, new_id, &to_b, p, q);

    let mut v_hat = model.reference.v_hat.clone();
    let mut theta_hat = model.reference.theta_hat.clone();
    v_hat.insert(n, v_hat[bus]);
    theta_hat.insert(n, theta_hat[bus]);
    let reference = ReferenceState { kind: model.reference.kind, v_hat, theta_hat, theta_ft: model.reference.theta_ft.clone() };

    let merged_bus = |i: usize| match i.cmp(&n) {
        std::cmp::Ordering::Less => i,
        std::cmp::Ordering::Equal => bus,
        std::cmp::Ordering::Greater => i - 1,
    };
    let mut source: Vec<usize> = (0..n + 1 + m).map(merged_bus).collect();
    source.extend((0..n + 1).map(|j| n + m + merged_bus(j)));

    let parts = assemble_parts(&open, &reference)?;
    let indexer = parts.indexer;
    let m_open = Arc::new(dense_from_triplets(indexer.dim(), &parts.triplets));
    let ns = n + 1 + m;
    Ok(SplitContext {
        f: bus,
        t: n,
        new_id,
        merged_dim: handle_m.dim(),
        indexer,
        reference,
        padded: handle_m.pad(source.clone()),
        source,
        p_hat_open: parts.p_hat_bus[..ns].to_vec(),
        q_hat_open: parts.q_hat_bus[..n + 1].to_vec(),
        m_open,
        open,
    })
}

impl SplitContext {
    /// `B = (μ_e, ν_e)` for the coupler between the busbars.
    pub fn coupler_basis(&self) -> Mat<f64> {
        let dim = self.indexer.dim();
        let mu = self.indexer.mu(self.f, self.t).to_dense(dim);
        let nu = self.indexer.nu(self.f, self.t).to_dense(dim);
        Mat::from_fn(dim, 2, |i, j| if j == 0 { mu[i] } else { nu[i] })
    }

    /// Merged state expressed in open-grid coordinates (both busbars equal).
    pub fn lift_state(&self, merged: &LinState) -> LinState {
        let x = merged.to_vec();
        let lifted: Vec<f64> = self.source.iter().map(|&s| x[s]).collect();
        LinState::from_vec(self.indexer.n + self.indexer.m, &lifted)
    }

    /// Solves the open topology with its own injections.
    pub fn solve(&self, handle_o: &InverseHandle) -> LinState {
        let mut rhs: Vec<f64> =
            self.open.p_injections().iter().zip(&self.p_hat_open).map(|(p, h)| p - h).collect();
        rhs.extend(self.open.q_injections().iter().zip(&self.q_hat_open).map(|(q, h)| q - h));
        LinState::from_vec(self.indexer.n + self.indexer.m, &handle_o.apply(&rhs))
    }
}

/// Opens the coupler: `M_o⁻¹ = M_c⁻¹ + (1 − M_c⁻¹M_o) B G⁻¹ Bᵀ (1 − M_o M_c⁻¹)`
/// with `G = Bᵀ M_o (1 − M_c⁻¹ M_o) B`. Only the padded inverse and the
/// finite open matrix enter; no coupler susceptance appears.
pub fn open_split(ctx: &SplitContext) -> Result<InverseHandle> {
    if let Connectivity::Islanded(buses) = connectivity_check(&ctx.open, &[]) {
        return Err(Error::Islanded(buses));
    }
    match split_layer(&ctx.padded, &ctx.m_open, &ctx.coupler_basis()) {
        Err(Error::Singular(msg)) => Err(Error::Degenerate(msg)),
        other => other,
    }
}

/// The correction layer of [`open_split`] for an arbitrary basis `B`.
/// A singular `G` is reported as [`Error::Singular`].
pub fn split_layer(padded: &InverseHandle, m_open: &Arc<Mat<f64>>, b: &Mat<f64>) -> Result<InverseHandle> {
    let mob = &**m_open * b;
    let btmo = b.transpose() * &**m_open;
    let hmob = padded.apply_mat(&mob);
    let l = b - &hmob;
    let g = &btmo * b - &btmo * &hmob;
    padded.push_layer(l, g, Some(b.transpose().to_owned()), -btmo, Known::Dense(m_open.clone()))
}

/// Re-merges the busbars of a closed-coupler inverse: injections enter at
/// busbar A, and the A copy of every coordinate is read back.
pub fn merge_contraction(handle_c: &InverseHandle, ctx: &SplitContext) -> InverseHandle {
    let mut pos = vec![usize::MAX; ctx.merged_dim];
    let skip = [ctx.indexer.theta_pos(ctx.t), ctx.indexer.u_pos(ctx.t)];
    for (i, &s) in ctx.source.iter().enumerate() {
        if !skip.contains(&Some(i)) {
            pos[s] = i;
        }
    }
    handle_c.restrict(pos)
}
