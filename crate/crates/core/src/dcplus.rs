//! Solving the DC+ model, the classical DC baseline, and recovery of bus and
//! branch quantities from a linear state.

use serde::{Deserialize, Serialize};

use crate::acref::{branch_flows_at, bus_injections, BranchFlow};
use crate::error::{Error, Result};
use crate::gridio::{BusKind, IndexedGrid};
use crate::indexing::Selector;
use crate::linalg::SparseLu;
use crate::linearizer::{BranchBlock, LinearModel, ShuntBlock};
use crate::topoupdate::InverseHandle;

/// Angles of the non-slack buses and relative voltage deviations of the PQ buses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinState {
    pub theta: Vec<f64>,
    pub u: Vec<f64>,
}

impl LinState {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut x = self.theta.clone();
        x.extend_from_slice(&self.u);
        x
    }

    /// Splits a stacked `(θ; u)` vector with `n_theta = n + m` angles.
    pub fn from_vec(n_theta: usize, x: &[f64]) -> Self {
        LinState { theta: x[..n_theta].to_vec(), u: x[n_theta..].to_vec() }
    }

    pub fn plus(&self, delta: &LinState) -> LinState {
        LinState {
            theta: self.theta.iter().zip(&delta.theta).map(|(a, b)| a + b).collect(),
            u: self.u.iter().zip(&delta.u).map(|(a, b)| a + b).collect(),
        }
    }

    /// Angle of internal bus `i` (zero at the slack).
    pub fn theta_at(&self, i: usize) -> f64 {
        self.theta.get(i).copied().unwrap_or(0.0)
    }

    /// Voltage deviation of internal bus `i` (zero at PV and slack buses).
    pub fn u_at(&self, i: usize) -> f64 {
        self.u.get(i).copied().unwrap_or(0.0)
    }
}

/// `(θ; u) = M⁻¹ ((p; q) − (p̂; q̂))`.
pub fn solve(model: &LinearModel, p: &[f64], q: &[f64]) -> Result<LinState> {
    solve_with(model.handle(), model, p, q)
}

/// Same as [`solve`] with an explicit (possibly updated) inverse handle.
pub fn solve_with(handle: &InverseHandle, model: &LinearModel, p: &[f64], q: &[f64]) -> Result<LinState> {
    let rhs = model.rhs(p, q)?;
    if rhs.len() != handle.dim() {
        return Err(Error::Dimension { expected: handle.dim(), got: rhs.len() });
    }
    Ok(LinState::from_vec(p.len(), &handle.apply(&rhs)))
}

/// Generalized injection sensitivity: the state response `M⁻¹ sel` to a unit
/// change of the injection selected by `sel` (`η_j` for real power at bus
/// `j`, `ζ_j` for reactive power).
pub fn injection_sensitivity(handle: &InverseHandle, sel: Selector) -> Vec<f64> {
    handle.apply(&sel.to_dense(handle.dim()))
}

/// Classical DC load flow result.
#[derive(Clone, Debug, PartialEq)]
pub struct DcSolution {
    /// Angle per bus (slack zero), internal order.
    pub theta: Vec<f64>,
    /// Real power entering each branch at its from end.
    pub flows: Vec<f64>,
    /// Slack injection balancing the lossless system.
    pub p_slack: f64,
}

/// Lossless DC load flow: susceptances `1/(xτ)`, phase shifts as offsets,
/// unit voltages, shunts ignored, single slack. `p` covers the non-slack buses.
pub fn dc_solve(grid: &IndexedGrid, p: &[f64]) -> Result<DcSolution> {
    let ns = grid.n + grid.m;
    if p.len() != ns {
        return Err(Error::Dimension { expected: ns, got: p.len() });
    }
    let mut triplets = Vec::with_capacity(4 * grid.branches.len());
    let mut rhs = p.to_vec();
    for br in grid.branches.iter().filter(|b| b.in_service) {
        let b = 1.0 / (br.params.x * br.params.tau);
        let shift = br.params.alpha * b;
        for (a, o, sign) in [(br.from, br.to, 1.0), (br.to, br.from, -1.0)] {
            if a < ns {
                triplets.push((a, a, b));
                if o < ns {
                    triplets.push((a, o, -b));
                }
                rhs[a] += sign * shift;
            }
        }
    }
    let lu = SparseLu::factor(ns, &triplets, "DC susceptance matrix")?;
    let mut theta = lu.solve(&rhs, "DC susceptance matrix")?;
    theta.push(0.0);
    let flows: Vec<f64> = grid
        .branches
        .iter()
        .map(|br| {
            if br.in_service {
                (theta[br.from] - theta[br.to] - br.params.alpha) / (br.params.x * br.params.tau)
            } else {
                0.0
            }
        })
        .collect();
    Ok(DcSolution { theta, flows, p_slack: -p.iter().sum::<f64>() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowMode {
    /// Branch flows from the linear relation the model was built from.
    Linearized,
    /// Nonlinear branch equations evaluated at the linear state's voltages.
    Nonlinear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BusReport {
    pub id: u32,
    pub kind: BusKind,
    pub v: f64,
    pub theta: f64,
    /// Net injections implied by the flows (equal to the inputs at rows the model holds).
    pub p: f64,
    pub q: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Recovery {
    pub buses: Vec<BusReport>,
    pub flows: Vec<BranchFlow>,
}

/// Bus voltages `v̂(1+u)`, branch flows and nodal injections for a state of `model`.
pub fn recover(grid: &IndexedGrid, model: &LinearModel, state: &LinState, mode: FlowMode) -> Recovery {
    recover_blocks(grid, model, &model.blocks, state, mode)
}

/// Recovery with a patched set of branch blocks (after a modification).
pub fn recover_patched(
    grid: &IndexedGrid,
    model: &LinearModel,
    patches: &[(usize, Option<BranchBlock>)],
    state: &LinState,
    mode: FlowMode,
) -> Recovery {
    let mut blocks = model.blocks.clone();
    for &(k, b) in patches {
        blocks[k] = b;
    }
    recover_blocks(grid, model, &blocks, state, mode)
}

fn recover_blocks(
    grid: &IndexedGrid,
    model: &LinearModel,
    blocks: &[Option<BranchBlock>],
    state: &LinState,
    mode: FlowMode,
) -> Recovery {
    let nb = grid.bus_count();
    let v_hat = &model.reference.v_hat;
    let v: Vec<f64> = (0..nb).map(|i| v_hat[i] * (1.0 + state.u_at(i))).collect();
    let theta: Vec<f64> = (0..nb).map(|i| state.theta_at(i)).collect();
    let (flows, p, q) = match mode {
        FlowMode::Linearized => {
            let flows: Vec<BranchFlow> = grid
                .branches
                .iter()
                .zip(blocks)
                .map(|(br, blk)| match blk {
                    Some(b) => {
                        let [p_f, q_f, p_t, q_t] =
                            b.flows(theta[br.from], theta[br.to], state.u_at(br.from), state.u_at(br.to));
                        BranchFlow { p_f, q_f, p_t, q_t }
                    }
                    None => BranchFlow::default(),
                })
                .collect();
            let mut p = vec![0.0; nb];
            let mut q = vec![0.0; nb];
            for (br, f) in grid.branches.iter().zip(&flows) {
                p[br.from] += f.p_f;
                q[br.from] += f.q_f;
                p[br.to] += f.p_t;
                q[br.to] += f.q_t;
            }
            for (i, sh) in model.shunts.iter().enumerate() {
                let ShuntBlock { p_hat, q_hat, n_pu, n_qu } = *sh;
                p[i] += p_hat + n_pu * state.u_at(i);
                q[i] += q_hat + n_qu * state.u_at(i);
            }
            (flows, p, q)
        }
        FlowMode::Nonlinear => {
            let mut g = grid.clone();
            for (br, blk) in g.branches.iter_mut().zip(blocks) {
                br.in_service = blk.is_some();
            }
            let (p, q) = bus_injections(&g, &v, &theta);
            (branch_flows_at(&g, &v, &theta), p, q)
        }
    };
    let buses = grid
        .buses
        .iter()
        .enumerate()
        .map(|(i, b)| BusReport { id: b.id, kind: b.kind, v: v[i], theta: theta[i], p: p[i], q: q[i] })
        .collect();
    Recovery { buses, flows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acref::{ac_solve, branch_flows, Init};
    use crate::gridio::{index_grid, parse_matpower};
    use crate::linalg::{max_abs, max_abs_diff};
    use crate::linearizer::{assemble, cold_ref, hot_ref};
    use crate::testing::{load_fixture, random_vectors, TWO_BUS};

    fn two_bus() -> IndexedGrid {
        index_grid(&parse_matpower(TWO_BUS).unwrap()).unwrap()
    }

    #[test]
    fn zero_rhs_gives_zero_state() {
        let grid = load_fixture("case14");
        let model = assemble(&grid, &cold_ref(&grid)).unwrap();
        let s = solve(&model, model.p_hat(), model.q_hat()).unwrap();
        assert_eq!(max_abs(&s.to_vec()), 0.0);
    }

    #[test]
    fn two_bus_angle_and_dc_flow() {
        let grid = two_bus();
        let model = assemble(&grid, &cold_ref(&grid)).unwrap();
        let s = solve(&model, &[-0.1], &[0.0]).unwrap();
        assert!((s.theta[0] + 0.01).abs() < 1e-15);
        let dc = dc_solve(&grid, &[-0.1]).unwrap();
        assert!((dc.theta[0] + 0.01).abs() < 1e-15);
        assert!((dc.flows[0] - 0.1).abs() < 1e-14);
        assert_eq!(dc_solve(&grid, &[0.0]).unwrap().theta, vec![0.0, 0.0]);
    }

    #[test]
    fn hot_start_reproduces_ac_state() {
        for name in ["case14", "case118"] {
            let grid = load_fixture(name);
            let ac = ac_solve(&grid, Init::Flat, 1e-10, 30).unwrap();
            let reference = hot_ref(&grid, &ac).unwrap();
            let model = assemble(&grid, &reference).unwrap();
            let s = solve(&model, &grid.p_injections(), &grid.q_injections()).unwrap();
            assert!(max_abs_diff(&s.theta, &reference.theta_hat[..grid.n + grid.m]) < 1e-8, "{name}");
            assert!(max_abs(&s.u) < 1e-8, "{name}");

            let rec = recover(&grid, &model, &s, FlowMode::Linearized);
            for (lin, exact) in rec.flows.iter().zip(branch_flows(&grid, &ac)) {
                assert!((lin.p_f - exact.p_f).abs() < 1e-8 && (lin.q_t - exact.q_t).abs() < 1e-8);
            }
            assert!((rec.buses[grid.slack()].p - ac.p_slack).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_state_recovers_offsets() {
        let grid = load_fixture("case30");
        let model = assemble(&grid, &cold_ref(&grid)).unwrap();
        let zero = LinState { theta: vec![0.0; grid.n + grid.m], u: vec![0.0; grid.n] };
        let rec = recover(&grid, &model, &zero, FlowMode::Linearized);
        for (f, b) in rec.flows.iter().zip(&model.blocks) {
            let b = b.unwrap();
            // cold reference: only phase shifters have nonzero θ̂ (none in case30)
            assert_eq!((f.p_f, f.q_f, f.p_t, f.q_t), (b.from.p_hat, b.from.q_hat, b.to.p_hat, b.to.q_hat));
        }
    }

    #[test]
    fn recovered_balance_matches_inputs() {
        let grid = load_fixture("case14");
        let model = assemble(&grid, &cold_ref(&grid)).unwrap();
        let s = solve(&model, &grid.p_injections(), &grid.q_injections()).unwrap();
        let rec = recover(&grid, &model, &s, FlowMode::Linearized);
        for i in 0..grid.n + grid.m {
            assert!((rec.buses[i].p - grid.buses[i].p_inj).abs() < 1e-10);
        }
        for i in 0..grid.n {
            assert!((rec.buses[i].q - grid.buses[i].q_inj).abs() < 1e-10);
        }
        let nl = recover(&grid, &model, &s, FlowMode::Nonlinear);
        assert_eq!(nl.buses[3].v, rec.buses[3].v);
    }

    #[test]
    fn solve_is_linear_in_injections() {
        let grid = load_fixture("case14");
        let model = assemble(&grid, &cold_ref(&grid)).unwrap();
        let p = grid.p_injections();
        let q = grid.q_injections();
        let d = random_vectors(model.dim(), 1, 5).remove(0);
        let p2: Vec<f64> = p.iter().zip(&d).map(|(a, b)| a + b).collect();
        let q2: Vec<f64> = q.iter().zip(&d[p.len()..]).map(|(a, b)| a + b).collect();
        let s1 = solve(&model, &p, &q).unwrap().to_vec();
        let s2 = solve(&model, &p2, &q2).unwrap().to_vec();
        let diff: Vec<f64> = s2.iter().zip(&s1).map(|(a, b)| a - b).collect();
        assert!(max_abs_diff(&diff, &model.handle().apply(&d)) < 1e-12);
    }

    #[test]
    fn dc_baseline_degenerates_to_lossless_dcplus() {
        let mut case = crate::testing::load_case("case14");
        for br in &mut case.branches {
            br.r = 0.0;
            br.b_charging = 0.0;
        }
        for b in &mut case.buses {
            b.v_set = b.v_set.map(|_| 1.0);
        }
        let grid = index_grid(&case).unwrap();
        let model = assemble(&grid, &cold_ref(&grid)).unwrap();
        let s = solve(&model, &grid.p_injections(), &grid.q_injections()).unwrap();
        let dc = dc_solve(&grid, &grid.p_injections()).unwrap();
        assert!(max_abs_diff(&s.theta, &dc.theta[..grid.n + grid.m]) < 1e-12);
    }

    #[test]
    fn sensitivity_is_a_column_of_the_inverse() {
        let grid = load_fixture("case14");
        let model = assemble(&grid, &cold_ref(&grid)).unwrap();
        let col = injection_sensitivity(model.handle(), model.indexer.zeta(2));
        let back = crate::linalg::mat_vec(model.matrix(), &col);
        assert!(max_abs_diff(&back, &model.indexer.zeta(2).to_dense(model.dim())) < 1e-12);
    }
}
