use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{BranchParams, BusKind, GridCase};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct IndexedBus {
    pub id: u32,
    pub kind: BusKind,
    pub v_set: Option<f64>,
    /// Net real injection (generation minus load), pu.
    pub p_inj: f64,
    /// Net reactive injection (generation minus load), pu.
    pub q_inj: f64,
    /// Shunt admittance to ground, pu (`b` positive for capacitors).
    pub g_shunt: f64,
    pub b_shunt: f64,
    pub base_kv: f64,
    /// Voltage magnitude and angle (rad) recorded in the case file.
    pub vm_file: f64,
    pub va_file: f64,
}

/// Stable branch identity: external endpoints plus the 1-based position
/// among parallel branches between the same pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BranchKey {
    pub from: u32,
    pub to: u32,
    pub ordinal: u32,
}

impl fmt::Display for BranchKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}#{}", self.from, self.to, self.ordinal)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IndexedBranch {
    pub key: BranchKey,
    pub from: usize,
    pub to: usize,
    pub params: BranchParams,
    pub in_service: bool,
}

/// A case with buses renumbered PQ first, then PV, then the slack.
#[derive(Clone, Debug, PartialEq)]
pub struct IndexedGrid {
    pub name: String,
    pub base_mva: f64,
    /// Number of PQ buses.
    pub n: usize,
    /// Number of PV buses.
    pub m: usize,
    pub buses: Vec<IndexedBus>,
    pub branches: Vec<IndexedBranch>,
    internal: HashMap<u32, usize>,
}

/// Orders buses PQ, PV, slack (ascending external id inside each group) and
/// converts injections and shunts to per unit.
pub fn index_grid(case: &GridCase) -> Result<IndexedGrid> {
    let slacks = case.buses.iter().filter(|b| b.kind == BusKind::Slack).count();
    if slacks != 1 {
        return Err(Error::SlackCount(slacks));
    }
    let base = case.base_mva;
    let mut gen_p: HashMap<u32, f64> = HashMap::new();
    let mut gen_q: HashMap<u32, f64> = HashMap::new();
    for g in case.gens.iter().filter(|g| g.in_service) {
        *gen_p.entry(g.bus).or_default() += g.p_mw;
        *gen_q.entry(g.bus).or_default() += g.q_mvar;
    }

    let mut order: Vec<&super::BusRecord> = case.buses.iter().collect();
    order.sort_by_key(|b| (b.kind, b.id));

    let buses: Vec<IndexedBus> = order
        .iter()
        .map(|b| IndexedBus {
            id: b.id,
            kind: b.kind,
            v_set: b.v_set,
            p_inj: (gen_p.get(&b.id).copied().unwrap_or(0.0) - b.p_load_mw) / base,
            q_inj: (gen_q.get(&b.id).copied().unwrap_or(0.0) - b.q_load_mvar) / base,
            g_shunt: b.g_shunt_mw / base,
            b_shunt: b.b_shunt_mvar / base,
            base_kv: b.base_kv,
            vm_file: b.vm,
            va_file: b.va_deg.to_radians(),
        })
        .collect();
    let internal: HashMap<u32, usize> = buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
    let n = buses.iter().filter(|b| b.kind == BusKind::Pq).count();
    let m = buses.iter().filter(|b| b.kind == BusKind::Pv).count();

    let mut ordinals: HashMap<(u32, u32), u32> = HashMap::new();
    let mut branches = Vec::with_capacity(case.branches.len());
    for (k, rec) in case.branches.iter().enumerate() {
        let lookup = |bus: u32| {
            internal.get(&bus).copied().ok_or_else(|| Error::UnknownBus { what: format!("branch {}", k + 1), bus })
        };
        let ordinal = ordinals.entry((rec.from_bus, rec.to_bus)).or_default();
        *ordinal += 1;
        branches.push(IndexedBranch {
            key: BranchKey { from: rec.from_bus, to: rec.to_bus, ordinal: *ordinal },
            from: lookup(rec.from_bus)?,
            to: lookup(rec.to_bus)?,
            params: BranchParams::from_record(rec),
            in_service: rec.in_service,
        });
    }

    Ok(IndexedGrid { name: case.name.clone(), base_mva: base, n, m, buses, branches, internal })
}

impl IndexedGrid {
    pub fn bus_count(&self) -> usize {
        self.buses.len()
    }

    pub fn slack(&self) -> usize {
        self.n + self.m
    }

    /// Dimension of the linear state `(theta, u)`.
    pub fn state_dim(&self) -> usize {
        2 * self.n + self.m
    }

    pub fn internal(&self, id: u32) -> Option<usize> {
        self.internal.get(&id).copied()
    }

    pub fn find_branch(&self, key: BranchKey) -> Option<usize> {
        self.branches.iter().position(|b| b.key == key)
    }

    /// Looks a branch up by its external endpoints in either orientation.
    pub fn find_branch_between(&self, a: u32, b: u32, ordinal: u32) -> Option<usize> {
        self.branches.iter().position(|br| {
            br.key.ordinal == ordinal && ((br.key.from == a && br.key.to == b) || (br.key.from == b && br.key.to == a))
        })
    }

    pub fn in_service_branches(&self) -> impl Iterator<Item = usize> + '_ {
        self.branches.iter().enumerate().filter(|(_, b)| b.in_service).map(|(k, _)| k)
    }

    /// Copy of the grid with the given branches taken out of service.
    pub fn without_branches(&self, removed: &[usize]) -> IndexedGrid {
        let mut grid = self.clone();
        for &k in removed {
            grid.branches[k].in_service = false;
        }
        grid
    }

    pub fn with_branch_params(&self, branch: usize, params: BranchParams) -> IndexedGrid {
        let mut grid = self.clone();
        grid.branches[branch].params = params;
        grid
    }

    /// Net real injections of all non-slack buses, pu.
    pub fn p_injections(&self) -> Vec<f64> {
        self.buses[..self.n + self.m].iter().map(|b| b.p_inj).collect()
    }

    /// Net reactive injections of the PQ buses, pu.
    pub fn q_injections(&self) -> Vec<f64> {
        self.buses[..self.n].iter().map(|b| b.q_inj).collect()
    }

    pub fn branches_at(&self, bus: usize) -> Vec<usize> {
        self.in_service_branches()
            .filter(|&k| self.branches[k].from == bus || self.branches[k].to == bus)
            .collect()
    }

    /// Splits PQ bus `bus` into two busbars. The new busbar gets external id
    /// `new_id` and becomes the last PQ bus (internal index `n`); the branches
    /// in `to_new` are re-attached to it, and its injection is `(p, q)` taken
    /// from the original bus. Branch keys are kept.
    pub fn split_bus(&self, bus: usize, new_id: u32, to_new: &[usize], p: f64, q: f64) -> IndexedGrid {
        assert!(bus < self.n, "only PQ buses can be split");
        let n = self.n;
        let remap = |i: usize| if i < n { i } else { i + 1 };
        let mut buses = self.buses.clone();
        buses[bus].p_inj -= p;
        buses[bus].q_inj -= q;
        let mut new_bus = buses[bus].clone();
        new_bus.id = new_id;
        new_bus.p_inj = p;
        new_bus.q_inj = q;
        new_bus.g_shunt = 0.0;
        new_bus.b_shunt = 0.0;
        buses.insert(n, new_bus);
        let branches = self
            .branches
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let mut b = b.clone();
                b.from = remap(b.from);
                b.to = remap(b.to);
                if to_new.contains(&k) {
                    if b.from == bus {
                        b.from = n;
                    } else if b.to == bus {
                        b.to = n;
                    }
                }
                b
            })
            .collect();
        let internal = buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
        IndexedGrid { name: self.name.clone(), base_mva: self.base_mva, n: n + 1, m: self.m, buses, branches, internal }
    }
}
