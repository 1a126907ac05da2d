//! Full AC load flow in polar coordinates (Newton-Raphson).
//!
//! The unknowns are the angles of all non-slack buses and the relative
//! voltage corrections `v ← v(1 + Δu)` of the PQ buses, so the Jacobian is
//! the same matrix the linearizer assembles around the current iterate.

use log::debug;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridio::{connectivity_check, BusKind, Connectivity, IndexedGrid};
use crate::indexing::StateIndexer;
use crate::linalg::{max_abs, SparseLu};
use crate::linearizer::{branch_block, scatter_branch, scatter_shunt, shunt_block};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcState {
    /// Voltage magnitude per bus in internal order, pu.
    pub v: Vec<f64>,
    /// Voltage angle per bus in internal order, rad; zero at the slack.
    pub theta: Vec<f64>,
    /// Net injections at the slack, pu.
    pub p_slack: f64,
    pub q_slack: f64,
    /// Net reactive injections at the PV buses, pu.
    pub q_pv: Vec<f64>,
    pub converged: bool,
    pub max_mismatch: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug)]
pub enum Init<'a> {
    /// `θ = 0`, `v = 1` at PQ buses, `v = v_set` elsewhere.
    Flat,
    /// Start from a previous solution (PV/slack magnitudes reset to `v_set`).
    Warm(&'a AcState),
    /// Start from the magnitudes and angles stored in the case file.
    FromCase,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BranchFlow {
    pub p_f: f64,
    pub q_f: f64,
    pub p_t: f64,
    pub q_t: f64,
}

/// Branch-end injections for arbitrary bus voltages; zero for branches out of service.
pub fn branch_flows_at(grid: &IndexedGrid, v: &[f64], theta: &[f64]) -> Vec<BranchFlow> {
    grid.branches
        .iter()
        .map(|br| {
            if !br.in_service {
                return BranchFlow::default();
            }
            let a = br.params.admittance();
            let (vf, vt) = (v[br.from], v[br.to]);
            let (s, c) = (theta[br.from] - theta[br.to]).sin_cos();
            BranchFlow {
                p_f: vf * vf * a.g_ff + vf * vt * (a.g_ft * c + a.b_ft * s),
                q_f: -vf * vf * a.b_ff + vf * vt * (a.g_ft * s - a.b_ft * c),
                p_t: vt * vt * a.g_tt + vf * vt * (a.g_tf * c - a.b_tf * s),
                q_t: -vt * vt * a.b_tt + vf * vt * (-a.g_tf * s - a.b_tf * c),
            }
        })
        .collect()
}

pub fn branch_flows(grid: &IndexedGrid, state: &AcState) -> Vec<BranchFlow> {
    branch_flows_at(grid, &state.v, &state.theta)
}

/// Computed net injections of every bus: outgoing branch flows plus shunt withdrawal.
pub fn bus_injections(grid: &IndexedGrid, v: &[f64], theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let nb = grid.bus_count();
    let mut p = vec![0.0; nb];
    let mut q = vec![0.0; nb];
    for (br, fl) in grid.branches.iter().zip(branch_flows_at(grid, v, theta)) {
        p[br.from] += fl.p_f;
        q[br.from] += fl.q_f;
        p[br.to] += fl.p_t;
        q[br.to] += fl.q_t;
    }
    for (i, bus) in grid.buses.iter().enumerate() {
        let v2 = v[i] * v[i];
        p[i] += v2 * bus.g_shunt;
        q[i] -= v2 * bus.b_shunt;
    }
    (p, q)
}

/// Residual `computed − specified` over the `2n+m` retained equations.
pub fn mismatch(grid: &IndexedGrid, v: &[f64], theta: &[f64]) -> Vec<f64> {
    let (p, q) = bus_injections(grid, v, theta);
    let (n, m) = (grid.n, grid.m);
    let mut f = Vec::with_capacity(2 * n + m);
    f.extend((0..n + m).map(|i| p[i] - grid.buses[i].p_inj));
    f.extend((0..n).map(|i| q[i] - grid.buses[i].q_inj));
    f
}

/// Jacobian of [`mismatch`] with respect to `(θ, u)` at `v(1+u)`, as triplets.
pub fn jacobian_triplets(grid: &IndexedGrid, v: &[f64], theta: &[f64]) -> Vec<(usize, usize, f64)> {
    let ix = StateIndexer::new(grid.n, grid.m);
    let mut out = Vec::with_capacity(16 * grid.branches.len() + 2 * grid.n);
    for br in grid.branches.iter().filter(|b| b.in_service) {
        let blk = branch_block(&br.params, v[br.from], v[br.to], theta[br.from] - theta[br.to]);
        scatter_branch(&ix, br.from, br.to, &blk, &mut out);
    }
    for (i, bus) in grid.buses.iter().enumerate().take(grid.n) {
        if bus.g_shunt != 0.0 || bus.b_shunt != 0.0 {
            scatter_shunt(&ix, i, &shunt_block(bus.g_shunt, bus.b_shunt, v[i]), &mut out);
        }
    }
    out
}

fn initial_point(grid: &IndexedGrid, init: Init<'_>) -> Result<(Vec<f64>, Vec<f64>)> {
    let nb = grid.bus_count();
    let fixed_v = |i: usize, fallback: f64| match grid.buses[i].kind {
        BusKind::Pq => fallback,
        _ => grid.buses[i].v_set.unwrap_or(fallback),
    };
    match init {
        Init::Flat => Ok(((0..nb).map(|i| fixed_v(i, 1.0)).collect(), vec![0.0; nb])),
        Init::Warm(s) => {
            if s.v.len() != nb || s.theta.len() != nb {
                return Err(Error::Dimension { expected: nb, got: s.v.len() });
            }
            let slack = s.theta[grid.slack()];
            Ok(((0..nb).map(|i| fixed_v(i, s.v[i])).collect(), s.theta.iter().map(|t| t - slack).collect()))
        }
        Init::FromCase => {
            let slack = grid.buses[grid.slack()].va_file;
            Ok((
                (0..nb).map(|i| fixed_v(i, grid.buses[i].vm_file)).collect(),
                grid.buses.iter().map(|b| b.va_file - slack).collect(),
            ))
        }
    }
}

fn finish(grid: &IndexedGrid, v: Vec<f64>, theta: Vec<f64>, converged: bool, max_mismatch: f64, iterations: usize) -> AcState {
    let (p, q) = bus_injections(grid, &v, &theta);
    let s = grid.slack();
    AcState {
        p_slack: p[s],
        q_slack: q[s],
        q_pv: q[grid.n..grid.n + grid.m].to_vec(),
        v,
        theta,
        converged,
        max_mismatch,
        iterations,
    }
}

const MAX_HALVINGS: usize = 4;

/// Newton-Raphson load flow. PV buses hold `v = v_set`, the slack holds
/// `v = v_set, θ = 0`; no reactive limits are enforced.
pub fn ac_solve(grid: &IndexedGrid, init: Init<'_>, tol: f64, max_iter: usize) -> Result<AcState> {
    if !(tol > 0.0) {
        return Err(Error::InvalidCase(format!("tolerance must be positive, got {tol}")));
    }
    if let Connectivity::Islanded(buses) = connectivity_check(grid, &[]) {
        return Err(Error::Islanded(buses));
    }
    let (n, m) = (grid.n, grid.m);
    let dim = 2 * n + m;
    let (mut v, mut theta) = initial_point(grid, init)?;
    let mut f = mismatch(grid, &v, &theta);
    let mut err = max_abs(&f);
    let mut iter = 0;
    while err > tol && iter < max_iter {
        iter += 1;
        let jac = SparseLu::factor(dim, &jacobian_triplets(grid, &v, &theta), "AC Jacobian")?;
        let neg_f: Vec<f64> = f.iter().map(|x| -x).collect();
        let dx = jac.solve(&neg_f, "AC Newton step")?;

        let mut lambda = 1.0;
        let mut trial = (v.clone(), theta.clone(), f.clone(), f64::INFINITY);
        for _ in 0..=MAX_HALVINGS {
            let mut tv = v.clone();
            let mut tt = theta.clone();
            for i in 0..n + m {
                tt[i] += lambda * dx[i];
            }
            for i in 0..n {
                tv[i] *= 1.0 + lambda * dx[n + m + i];
            }
            let tf = mismatch(grid, &tv, &tt);
            let terr = max_abs(&tf);
            let ok = tv.iter().all(|x| *x > 0.0) && terr.is_finite();
            trial = (tv, tt, tf, if ok { terr } else { f64::INFINITY });
            if ok && terr < err {
                break;
            }
            lambda *= 0.5;
        }
        if !trial.3.is_finite() {
            break;
        }
        (v, theta, f, err) = trial;
        debug!("AC iteration {iter}: max mismatch {err:.3e}, step {lambda}");
    }
    let state = finish(grid, v, theta, err <= tol, err, iter);
    if state.converged {
        Ok(state)
    } else {
        Err(Error::NotConverged { iterations: iter, max_mismatch: err, last: Box::new(state) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridio::{index_grid, parse_matpower, BranchParams};
    use crate::testing::{load_fixture, random_vectors, TWO_BUS};

    fn lossless_two_bus(load_mw: f64) -> IndexedGrid {
        let text = TWO_BUS.replace("2 1 10 5", &format!("2 1 {load_mw} 0"));
        index_grid(&parse_matpower(&text).unwrap()).unwrap()
    }

    #[test]
    fn zero_injection_fixed_point() {
        let grid = lossless_two_bus(0.0);
        let s = ac_solve(&grid, Init::Flat, 1e-10, 10).unwrap();
        assert_eq!(s.v, vec![1.0, 1.0]);
        assert_eq!(s.theta, vec![0.0, 0.0]);
        assert_eq!(s.p_slack, 0.0);
        assert_eq!(s.iterations, 0);
    }

    #[test]
    fn single_line_flow_examples() {
        let grid = lossless_two_bus(0.0);
        let mut flat = ac_solve(&grid, Init::Flat, 1e-10, 10).unwrap();
        let f = branch_flows(&grid, &flat)[0];
        assert_eq!((f.p_f, f.q_f, f.p_t, f.q_t), (0.0, 0.0, 0.0, 0.0));

        // internal order puts bus 2 first; the branch runs 1 -> 2
        flat.theta = vec![-0.1, 0.0];
        let f = branch_flows(&grid, &flat)[0];
        assert!((f.p_f - 10.0 * 0.1f64.sin()).abs() < 1e-12);
        assert!((f.p_f - 0.998334166468).abs() < 1e-11);

        let shifted = grid.with_branch_params(0, BranchParams { alpha: 0.1, ..grid.branches[0].params });
        let f = branch_flows_at(&shifted, &flat.v, &flat.theta)[0];
        assert!(f.p_f.abs() < 1e-15);
    }

    #[test]
    fn islanded_grid_is_rejected() {
        let grid = load_fixture("case14");
        let k = grid.find_branch_between(7, 8, 1).unwrap();
        let cut = grid.without_branches(&[k]);
        assert!(matches!(ac_solve(&cut, Init::Flat, 1e-8, 20), Err(Error::Islanded(b)) if b == vec![8]));
    }

    #[test]
    fn case14_matches_published_solution() {
        // Published case14 solution (Vm, Va in degrees) for a few buses.
        let grid = load_fixture("case14");
        let s = ac_solve(&grid, Init::Flat, 1e-8, 20).unwrap();
        assert!(s.max_mismatch <= 1e-8);
        let published = [(4u32, 1.018, -10.31), (9, 1.056, -14.94), (14, 1.036, -16.03), (12, 1.055, -15.09)];
        for (id, vm, va) in published {
            let i = grid.internal(id).unwrap();
            assert!((s.v[i] - vm).abs() < 1.5e-3, "bus {id}: {}", s.v[i]);
            assert!((s.theta[i].to_degrees() - va).abs() < 0.05, "bus {id}: {}", s.theta[i].to_degrees());
        }
        assert!((s.p_slack * grid.base_mva - 232.4).abs() < 0.1);
    }

    #[test]
    fn energy_balance_and_kirchhoff() {
        for name in ["case14", "case30", "case118"] {
            let grid = load_fixture(name);
            let s = ac_solve(&grid, Init::Flat, 1e-9, 30).unwrap();
            let flows = branch_flows(&grid, &s);
            let losses: f64 = flows.iter().map(|f| f.p_f + f.p_t).sum::<f64>()
                + grid.buses.iter().zip(&s.v).map(|(b, v)| v * v * b.g_shunt).sum::<f64>();
            let (p, q) = bus_injections(&grid, &s.v, &s.theta);
            let total: f64 = p.iter().sum();
            assert!((total - losses).abs() < 10.0 * 1e-9, "{name}");
            // specified injections are met at every bus with an equation
            for i in 0..grid.n + grid.m {
                assert!((p[i] - grid.buses[i].p_inj).abs() <= 1e-9);
            }
            for i in 0..grid.n {
                assert!((q[i] - grid.buses[i].q_inj).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn analytic_jacobian_matches_central_differences() {
        let grid = load_fixture("case14");
        let base = ac_solve(&grid, Init::Flat, 1e-8, 20).unwrap();
        let dim = grid.state_dim();
        let (n, m) = (grid.n, grid.m);
        for (trial, dx) in random_vectors(dim, 3, 7).into_iter().enumerate() {
            let mut v = base.v.clone();
            let mut th = base.theta.clone();
            for i in 0..n + m {
                th[i] += 0.05 * dx[i];
            }
            for i in 0..n {
                v[i] *= 1.0 + 0.02 * dx[n + m + i];
            }
            let jac = crate::linalg::dense_from_triplets(dim, &jacobian_triplets(&grid, &v, &th));
            let h = 1e-6;
            for col in 0..dim {
                let (mut vp, mut tp, mut vm, mut tm) = (v.clone(), th.clone(), v.clone(), th.clone());
                if col < n + m {
                    tp[col] += h;
                    tm[col] -= h;
                } else {
                    vp[col - n - m] *= 1.0 + h;
                    vm[col - n - m] *= 1.0 - h;
                }
                let fp = mismatch(&grid, &vp, &tp);
                let fm = mismatch(&grid, &vm, &tm);
                for row in 0..dim {
                    let fd = (fp[row] - fm[row]) / (2.0 * h);
                    let scale = jac[(row, col)].abs().max(1.0);
                    assert!((fd - jac[(row, col)]).abs() / scale < 1e-6, "trial {trial} ({row},{col})");
                }
            }
        }
    }

    #[test]
    fn warm_start_converges_immediately() {
        let grid = load_fixture("case30");
        let s = ac_solve(&grid, Init::Flat, 1e-8, 20).unwrap();
        let again = ac_solve(&grid, Init::Warm(&s), 1e-8, 20).unwrap();
        assert_eq!(again.iterations, 0);
    }

    #[test]
    fn iteration_cap_reports_diagnostics() {
        let grid = load_fixture("case118");
        match ac_solve(&grid, Init::Flat, 1e-12, 1) {
            Err(Error::NotConverged { iterations, last, .. }) => {
                assert_eq!(iterations, 1);
                assert!(!last.converged);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
