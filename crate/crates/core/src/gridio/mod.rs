//! Case ingestion: MATPOWER parsing, the validated [`GridCase`] model, the
//! PQ/PV/slack ordered [`IndexedGrid`] and graph connectivity queries.
//!
//! Records keep MATPOWER's native units (MW, MVAr, degrees) so that a case
//! survives a parse/serialize/parse cycle bit for bit. Per-unit values are
//! derived in [`IndexedGrid`].

mod connectivity;
mod index;
mod matpower;

use serde::{Deserialize, Serialize};

pub use connectivity::{connectivity_check, find_bridges, Connectivity};
pub use index::{index_grid, BranchKey, IndexedBranch, IndexedBus, IndexedGrid};
pub use matpower::{parse_matpower, to_matpower};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    Pq,
    Pv,
    Slack,
}

impl BusKind {
    pub fn from_code(bus: u32, code: i64) -> Result<Self> {
        match code {
            1 => Ok(BusKind::Pq),
            2 => Ok(BusKind::Pv),
            3 => Ok(BusKind::Slack),
            _ => Err(Error::UnknownBusType { bus, code }),
        }
    }

    pub fn code(self) -> i64 {
        match self {
            BusKind::Pq => 1,
            BusKind::Pv => 2,
            BusKind::Slack => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BusRecord {
    pub id: u32,
    pub kind: BusKind,
    pub p_load_mw: f64,
    pub q_load_mvar: f64,
    /// Shunt conductance, MW consumed at 1 pu voltage.
    pub g_shunt_mw: f64,
    /// Shunt susceptance, MVAr injected at 1 pu voltage (capacitive positive).
    pub b_shunt_mvar: f64,
    /// Voltage magnitude stored in the file (initial guess or prior solution).
    pub vm: f64,
    pub va_deg: f64,
    pub base_kv: f64,
    /// Voltage set point, taken from the first in-service generator.
    pub v_set: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchRecord {
    pub from_bus: u32,
    pub to_bus: u32,
    pub r: f64,
    pub x: f64,
    /// Total line charging susceptance, split evenly over both ends.
    pub b_charging: f64,
    pub tau: f64,
    pub shift_deg: f64,
    pub in_service: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenRecord {
    pub bus: u32,
    pub p_mw: f64,
    pub q_mvar: f64,
    pub v_set: f64,
    pub in_service: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCase {
    pub name: String,
    pub base_mva: f64,
    pub buses: Vec<BusRecord>,
    pub branches: Vec<BranchRecord>,
    pub gens: Vec<GenRecord>,
}

impl GridCase {
    /// Checks the structural invariants every downstream module relies on.
    pub fn validate(&self) -> Result<()> {
        if !(self.base_mva > 0.0) {
            return Err(Error::InvalidCase(format!("base_mva must be positive, got {}", self.base_mva)));
        }
        let mut seen = std::collections::HashSet::new();
        for bus in &self.buses {
            if !seen.insert(bus.id) {
                return Err(Error::DuplicateBus(bus.id));
            }
            if bus.kind != BusKind::Pq && !bus.v_set.is_some_and(|v| v > 0.0) {
                return Err(Error::InvalidCase(format!("bus {} needs a positive voltage set point", bus.id)));
            }
        }
        let slacks = self.buses.iter().filter(|b| b.kind == BusKind::Slack).count();
        if slacks != 1 {
            return Err(Error::SlackCount(slacks));
        }
        for (k, br) in self.branches.iter().enumerate() {
            for bus in [br.from_bus, br.to_bus] {
                if !seen.contains(&bus) {
                    return Err(Error::UnknownBus { what: format!("branch {}", k + 1), bus });
                }
            }
            if !(br.tau > 0.0) {
                return Err(Error::InvalidCase(format!("branch {}: tap ratio must be positive", k + 1)));
            }
            if br.in_service && br.r * br.r + br.x * br.x <= 0.0 {
                return Err(Error::InvalidCase(format!("branch {}: zero series impedance", k + 1)));
            }
        }
        for (k, gen) in self.gens.iter().enumerate() {
            if !seen.contains(&gen.bus) {
                return Err(Error::UnknownBus { what: format!("generator {}", k + 1), bus: gen.bus });
            }
        }
        Ok(())
    }

    /// Joins bus `b` into bus `a` as if a zero-impedance coupler were closed:
    /// loads and shunts add up, branches at `b` move to `a`. Both buses must
    /// be PQ and not directly connected by a branch.
    pub fn merge_buses(&self, a: u32, b: u32) -> Result<GridCase> {
        let find = |id: u32| {
            self.buses
                .iter()
                .position(|bus| bus.id == id)
                .ok_or_else(|| Error::UnknownBus { what: "bus merge".into(), bus: id })
        };
        let (ia, ib) = (find(a)?, find(b)?);
        if ia == ib {
            return Err(Error::InvalidTopology(format!("cannot merge bus {a} with itself")));
        }
        for i in [ia, ib] {
            if self.buses[i].kind != BusKind::Pq {
                return Err(Error::InvalidTopology(format!("bus {} is not PQ; only PQ buses can be merged", self.buses[i].id)));
            }
        }
        let direct = |br: &BranchRecord| (br.from_bus == a && br.to_bus == b) || (br.from_bus == b && br.to_bus == a);
        if self.branches.iter().any(|br| br.in_service && direct(br)) {
            return Err(Error::InvalidTopology(format!("buses {a} and {b} are joined by a branch")));
        }
        let mut out = self.clone();
        let gone = out.buses.remove(ib);
        let keep = &mut out.buses[if ib < ia { ia - 1 } else { ia }];
        keep.p_load_mw += gone.p_load_mw;
        keep.q_load_mvar += gone.q_load_mvar;
        keep.g_shunt_mw += gone.g_shunt_mw;
        keep.b_shunt_mvar += gone.b_shunt_mvar;
        out.branches.retain(|br| !direct(br));
        for br in &mut out.branches {
            if br.from_bus == b {
                br.from_bus = a;
            }
            if br.to_bus == b {
                br.to_bus = a;
            }
        }
        Ok(out)
    }

    /// Canonical JSON dump. Key order follows field declaration order.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("GridCase serializes")
    }
}

/// Electrical parameters of a π-model branch in per unit and radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchParams {
    pub r: f64,
    pub x: f64,
    pub b_charging: f64,
    pub tau: f64,
    pub alpha: f64,
}

/// The four complex entries of the branch admittance matrix, split into
/// real and imaginary parts.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BranchAdmittance {
    pub g_ff: f64,
    pub b_ff: f64,
    pub g_ft: f64,
    pub b_ft: f64,
    pub g_tf: f64,
    pub b_tf: f64,
    pub g_tt: f64,
    pub b_tt: f64,
}

impl BranchParams {
    pub fn from_record(rec: &BranchRecord) -> Self {
        BranchParams {
            r: rec.r,
            x: rec.x,
            b_charging: rec.b_charging,
            tau: rec.tau,
            alpha: rec.shift_deg.to_radians(),
        }
    }

    /// Series admittance `1 / (r + jx)` as `(g, b)`.
    pub fn series(&self) -> (f64, f64) {
        let z2 = self.r * self.r + self.x * self.x;
        (self.r / z2, -self.x / z2)
    }

    pub fn admittance(&self) -> BranchAdmittance {
        let (gs, bs) = self.series();
        let bc = 0.5 * self.b_charging;
        let tau2 = self.tau * self.tau;
        let (sa, ca) = self.alpha.sin_cos();
        // -y_s e^{+j alpha} / tau
        let g_ft = -(gs * ca - bs * sa) / self.tau;
        let b_ft = -(gs * sa + bs * ca) / self.tau;
        // -y_s e^{-j alpha} / tau
        let g_tf = -(gs * ca + bs * sa) / self.tau;
        let b_tf = -(bs * ca - gs * sa) / self.tau;
        BranchAdmittance {
            g_ff: gs / tau2,
            b_ff: (bs + bc) / tau2,
            g_ft,
            b_ft,
            g_tf,
            b_tf,
            g_tt: gs,
            b_tt: bs + bc,
        }
    }
}

impl BranchAdmittance {
    /// Admittance seen from the `t` end: every `f`/`t` label swapped.
    pub fn flipped(&self) -> Self {
        BranchAdmittance {
            g_ff: self.g_tt,
            b_ff: self.b_tt,
            g_ft: self.g_tf,
            b_ft: self.b_tf,
            g_tf: self.g_ft,
            b_tf: self.b_ft,
            g_tt: self.g_ff,
            b_tt: self.b_ff,
        }
    }
}
