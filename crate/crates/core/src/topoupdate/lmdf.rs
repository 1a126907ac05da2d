use log::warn;
use serde::{Deserialize, Serialize};

use super::handle::InverseHandle;
use super::update::{selector_vec, LowRankUpdate};
use crate::error::{Error, Result};
use crate::gridio::IndexedGrid;
use crate::indexing::StateIndexer;
use crate::linearizer::LinearModel;

pub type Mat2 = [[f64; 2]; 2];

/// Limits of the small-angle, equal-voltage simplification behind the 2×2 factors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmdfTolerance {
    pub max_angle: f64,
    pub max_voltage_gap: f64,
}

impl Default for LmdfTolerance {
    fn default() -> Self {
        LmdfTolerance { max_angle: 0.05, max_voltage_gap: 0.02 }
    }
}

/// 2×2 sensitivity mapping `(θ_f − θ_t, u_f − u_t)` of the modified branch to
/// `(ψ_k − ψ_l, σ_k − σ_l)` of the monitored branch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmdfMatrix(pub Mat2);

impl LmdfMatrix {
    pub fn apply(&self, d_theta: f64, d_u: f64) -> (f64, f64) {
        let m = &self.0;
        (m[0][0] * d_theta + m[0][1] * d_u, m[1][0] * d_theta + m[1][1] * d_u)
    }
}

/// `D = v̂_f v̂_t (−Δb, Δg; −Δg, −Δb)` for a series admittance change `Δg + jΔb`.
pub fn d_matrix(v_f: f64, v_t: f64, dg: f64, db: f64) -> Mat2 {
    let s = v_f * v_t;
    [[-s * db, s * dg], [-s * dg, -s * db]]
}

fn mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn inv(a: &Mat2) -> Option<Mat2> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    if det.abs() <= 1e-12 * scale * scale {
        return None;
    }
    Some([[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]])
}

/// Precomputed `M⁻¹ (μ_ft, ν_ft)` for one modified branch; monitored
/// branches then cost two dot products each.
#[derive(Clone, Debug)]
pub struct LmdfContext {
    ix: StateIndexer,
    f: usize,
    t: usize,
    hb: [Vec<f64>; 2],
    a_self: Mat2,
}

impl LmdfContext {
    pub fn new(handle: &InverseHandle, ix: StateIndexer, f: usize, t: usize) -> Self {
        let dim = ix.dim();
        let hb = [handle.apply(&ix.mu(f, t).to_dense(dim)), handle.apply(&ix.nu(f, t).to_dense(dim))];
        let mut ctx = LmdfContext { ix, f, t, hb, a_self: [[0.0; 2]; 2] };
        ctx.a_self = ctx.a_block(f, t);
        ctx
    }

    /// `A_{kl,ft} = (μ_kl, ν_kl)ᵀ M⁻¹ (μ_ft, ν_ft)`.
    pub fn a_block(&self, k: usize, l: usize) -> Mat2 {
        let rows = [self.ix.mu(k, l), self.ix.nu(k, l)];
        let mut a = [[0.0; 2]; 2];
        for (i, sel) in rows.iter().enumerate() {
            for j in 0..2 {
                a[i][j] = sel.dot(&self.hb[j]);
            }
        }
        a
    }

    /// `LMDF = −A_{kl,ft} (1 + D A_{ft,ft})⁻¹ D`.
    pub fn lmdf(&self, k: usize, l: usize, d: &Mat2) -> Result<LmdfMatrix> {
        let da = mul(d, &self.a_self);
        let inner = [[1.0 + da[0][0], da[0][1]], [da[1][0], 1.0 + da[1][1]]];
        let inner = inv(&inner).ok_or_else(|| {
            Error::Singular(format!("1 + D A for modified branch between internal buses {} and {}", self.f, self.t))
        })?;
        let m = mul(&mul(&self.a_block(k, l), &inner), d);
        Ok(LmdfMatrix([[-m[0][0], -m[0][1]], [-m[1][0], -m[1][1]]]))
    }
}

/// The rank-2 update `ΔM = B D Bᵀ`, `B = (μ_ft, ν_ft)`, with zero offset change:
/// the exact model change the 2×2 factors describe.
pub fn line_modification_update(ix: &StateIndexer, f: usize, t: usize, d: &Mat2) -> LowRankUpdate {
    let mu = selector_vec(ix.mu(f, t));
    let nu = selector_vec(ix.nu(f, t));
    let col = |j: usize| {
        let mut c: Vec<(usize, f64)> = mu.iter().map(|&(p, v)| (p, v * d[0][j])).collect();
        c.extend(nu.iter().map(|&(p, v)| (p, v * d[1][j])));
        c
    };
    LowRankUpdate { dim: ix.dim(), s: vec![col(0), col(1)], r: vec![mu.clone(), nu.clone()], ..Default::default() }
}

/// Checks the simplification assumptions for modifying `branch`, returning
/// human-readable warnings (also logged) instead of failing.
pub fn admissibility_warnings(grid: &IndexedGrid, model: &LinearModel, branch: usize, tol: &LmdfTolerance) -> Vec<String> {
    let br = &grid.branches[branch];
    let r = &model.reference;
    let mut out = Vec::new();
    if r.theta_ft[branch].abs() > tol.max_angle {
        out.push(format!("branch {}: |θ̂_ft| = {:.4} rad exceeds {}", br.key, r.theta_ft[branch].abs(), tol.max_angle));
    }
    let gap = (r.v_hat[br.from] - r.v_hat[br.to]).abs();
    if gap > tol.max_voltage_gap {
        out.push(format!("branch {}: |v̂_f − v̂_t| = {gap:.4} pu exceeds {}", br.key, tol.max_voltage_gap));
    }
    if br.params.tau != 1.0 || br.params.alpha != 0.0 {
        out.push(format!("branch {}: tap or phase shift present", br.key));
    }
    for w in &out {
        warn!("{w}");
    }
    out
}

/// 2×2 factor for monitored branch `monitored` when the series admittance of
/// `modified` changes by `Δg + jΔb` (an outage is `Δ = −y_s`).
pub fn lmdf(
    grid: &IndexedGrid,
    model: &LinearModel,
    handle: &InverseHandle,
    monitored: usize,
    modified: usize,
    dg: f64,
    db: f64,
    tol: &LmdfTolerance,
) -> Result<LmdfMatrix> {
    admissibility_warnings(grid, model, modified, tol);
    let m = &grid.branches[modified];
    let k = &grid.branches[monitored];
    let d = d_matrix(model.reference.v_hat[m.from], model.reference.v_hat[m.to], dg, db);
    LmdfContext::new(handle, model.indexer, m.from, m.to).lmdf(k.from, k.to, &d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acref::{ac_solve, Init};
    use crate::dcplus::{dc_solve, solve};
    use crate::gridio::{find_bridges, index_grid};
    use crate::linearizer::{assemble, cold_ref, hot_ref};
    use crate::testing::{load_case, load_fixture};
    use crate::topoupdate::{state_delta, woodbury_update};

    #[test]
    fn zero_change_gives_zero_factor() {
        let grid = load_fixture("case14");
        let model = assemble(&grid, &cold_ref(&grid)).unwrap();
        let f = lmdf(&grid, &model, model.handle(), 0, 3, 0.0, 0.0, &LmdfTolerance::default()).unwrap();
        assert_eq!(f.0, [[0.0; 2]; 2]);
    }

    #[test]
    fn two_by_two_path_matches_rank_two_woodbury() {
        let grid = load_fixture("case14");
        let ac = ac_solve(&grid, Init::Flat, 1e-10, 20).unwrap();
        let model = assemble(&grid, &hot_ref(&grid, &ac).unwrap()).unwrap();
        let base = solve(&model, &grid.p_injections(), &grid.q_injections()).unwrap();
        let x = base.to_vec();
        let ix = model.indexer;
        let bridges = find_bridges(&grid);
        for ft in grid.in_service_branches().filter(|k| !bridges.contains(k)) {
            let br = &grid.branches[ft];
            if br.params.tau != 1.0 {
                continue;
            }
            let (gs, bs) = br.params.series();
            let d = d_matrix(model.reference.v_hat[br.from], model.reference.v_hat[br.to], -gs, -bs);
            let ctx = LmdfContext::new(model.handle(), ix, br.from, br.to);
            let up = line_modification_update(&ix, br.from, br.to, &d);
            let h = woodbury_update(model.handle(), &up).unwrap();
            let delta = state_delta(&h, &up, &base).to_vec();
            let d_theta = ix.mu(br.from, br.to).dot(&x);
            let d_u = ix.nu(br.from, br.to).dot(&x);
            for kl in grid.in_service_branches() {
                let mon = &grid.branches[kl];
                let (dp, ds) = ctx.lmdf(mon.from, mon.to, &d).unwrap().apply(d_theta, d_u);
                assert!((dp - ix.mu(mon.from, mon.to).dot(&delta)).abs() < 1e-10);
                assert!((ds - ix.nu(mon.from, mon.to).dot(&delta)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn frame_shift_leaves_factors_unchanged() {
        let grid = load_fixture("case14");
        let ac = ac_solve(&grid, Init::Flat, 1e-10, 20).unwrap();
        let reference = hot_ref(&grid, &ac).unwrap();
        let a = assemble(&grid, &reference).unwrap();
        let b = assemble(&grid, &reference.shifted(0.3)).unwrap();
        let tol = LmdfTolerance::default();
        let fa = lmdf(&grid, &a, a.handle(), 2, 5, 0.5, -3.0, &tol).unwrap();
        let fb = lmdf(&grid, &b, b.handle(), 2, 5, 0.5, -3.0, &tol).unwrap();
        assert_eq!(fa, fb);
    }

    #[test]
    fn lossless_limit_matches_classical_lodf() {
        let mut case = load_case("case14");
        for br in &mut case.branches {
            br.r = 0.0;
            br.b_charging = 0.0;
        }
        for b in &mut case.buses {
            b.v_set = b.v_set.map(|_| 1.0);
        }
        let grid = index_grid(&case).unwrap();
        let model = assemble(&grid, &cold_ref(&grid)).unwrap();
        let ns = grid.n + grid.m;
        let bridges = find_bridges(&grid);
        // oracle: PTDF of a unit transfer f -> t from two DC solves
        let ptdf = |f: usize, t: usize| {
            let mut p = vec![0.0; ns];
            if f < ns {
                p[f] += 1.0;
            }
            if t < ns {
                p[t] -= 1.0;
            }
            dc_solve(&grid, &p).unwrap().flows
        };
        let b_of = |k: usize| 1.0 / (grid.branches[k].params.x * grid.branches[k].params.tau);
        for ft in grid.in_service_branches().filter(|k| !bridges.contains(k)) {
            let br = &grid.branches[ft];
            if br.params.tau != 1.0 {
                continue;
            }
            let flows = ptdf(br.from, br.to);
            let ctx = LmdfContext::new(model.handle(), model.indexer, br.from, br.to);
            let (_, bs) = br.params.series();
            let d = d_matrix(1.0, 1.0, 0.0, -bs);
            for kl in grid.in_service_branches().filter(|&k| k != ft) {
                let lodf = flows[kl] / (1.0 - flows[ft]);
                let m = ctx.lmdf(grid.branches[kl].from, grid.branches[kl].to, &d).unwrap();
                assert!((m.0[0][0] * b_of(kl) / b_of(ft) - lodf).abs() < 1e-6);
            }
        }
    }
}
