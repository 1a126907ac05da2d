//! N-1 screening: every branch outage evaluated with DC+ (Woodbury update of
//! a hot-start model), the classical DC baseline, and the full AC oracle.

use serde::{Deserialize, Serialize};

use crate::acref::{ac_solve, branch_flows, bus_injections, AcState, BranchFlow, Init};
use crate::dcplus::{dc_solve, recover, recover_patched, solve_with, FlowMode, LinState};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::gridio::{connectivity_check, index_grid, BranchKey, BusKind, Connectivity, GridCase, IndexedGrid};
use crate::linearizer::{assemble, branch_block, LinearModel, RefKind, ReferenceState};
use crate::topoupdate::{close_switch, multi_branch_delta, open_split, pad_for_split, state_delta, woodbury_update, Busbar, SplitAssignment};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantity {
    V,
    Theta,
    P,
    Q,
}

impl Quantity {
    pub const ALL: [Quantity; 4] = [Quantity::V, Quantity::Theta, Quantity::P, Quantity::Q];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::V => "v",
            Quantity::Theta => "theta",
            Quantity::P => "p",
            Quantity::Q => "q",
        }
    }

    /// Whether the quantity is a model output (not an input) at a bus of this kind.
    pub fn is_output_at(self, kind: BusKind) -> bool {
        match self {
            Quantity::V => kind == BusKind::Pq,
            Quantity::Theta => kind != BusKind::Slack,
            Quantity::P => kind == BusKind::Slack,
            Quantity::Q => kind != BusKind::Pq,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dcplus,
    Dc,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Dcplus => "dcplus",
            Method::Dc => "dc",
        }
    }

    /// The DC baseline has no voltage magnitudes or reactive power.
    pub fn models(self, q: Quantity) -> bool {
        self == Method::Dcplus || matches!(q, Quantity::Theta | Quantity::P)
    }
}

/// Per-bus results of one topology for the three methods (pu, rad).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BusOutcome {
    pub bus: u32,
    pub kind: BusKind,
    pub v_ac: f64,
    pub v_dcplus: f64,
    pub theta_ac: f64,
    pub theta_dcplus: f64,
    pub theta_dc: f64,
    pub p_ac: f64,
    pub p_dcplus: f64,
    pub p_dc: f64,
    pub q_ac: f64,
    pub q_dcplus: f64,
}

impl BusOutcome {
    pub fn ac(&self, q: Quantity) -> f64 {
        match q {
            Quantity::V => self.v_ac,
            Quantity::Theta => self.theta_ac,
            Quantity::P => self.p_ac,
            Quantity::Q => self.q_ac,
        }
    }

    /// Signed error `method − AC`, if the method models the quantity.
    pub fn error(&self, q: Quantity, method: Method) -> Option<f64> {
        let value = match (q, method) {
            (Quantity::V, Method::Dcplus) => self.v_dcplus,
            (Quantity::Theta, Method::Dcplus) => self.theta_dcplus,
            (Quantity::Theta, Method::Dc) => self.theta_dc,
            (Quantity::P, Method::Dcplus) => self.p_dcplus,
            (Quantity::P, Method::Dc) => self.p_dc,
            (Quantity::Q, Method::Dcplus) => self.q_dcplus,
            _ => return None,
        };
        Some(value - self.ac(q))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "detail", rename_all = "snake_case")]
pub enum OutageStatus {
    Evaluated,
    /// Buses cut off from the slack.
    Islanded(Vec<u32>),
    /// The AC oracle did not converge (warm and flat start).
    AcFailed(String),
    /// Linear update failed on a connected graph.
    Degenerate(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutageRecord {
    /// Outaged branches; empty for the unmodified base case.
    pub outage: Vec<BranchKey>,
    pub status: OutageStatus,
    pub ac_iterations: usize,
    pub buses: Vec<BusOutcome>,
}

impl OutageRecord {
    pub fn feasible(&self) -> bool {
        !matches!(self.status, OutageStatus::Islanded(_))
    }

    pub fn evaluated(&self) -> bool {
        self.status == OutageStatus::Evaluated
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub execution: Execution,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { tol: 1e-8, max_iter: 30, execution: Execution::default() }
    }
}

/// Shared, immutable inputs of a scan.
#[derive(Clone, Copy, Debug)]
pub struct ScanBase<'a> {
    pub grid: &'a IndexedGrid,
    pub ac: &'a AcState,
    pub model: &'a LinearModel,
    pub state: &'a LinState,
}

fn ac_oracle(grid: &IndexedGrid, warm: &AcState, opts: &ScanOptions) -> Result<AcState> {
    ac_solve(grid, Init::Warm(warm), opts.tol, opts.max_iter)
        .or_else(|_| ac_solve(grid, Init::Flat, opts.tol, opts.max_iter))
}

/// Evaluates one outage (`None`: the unmodified grid) with all three methods.
pub fn evaluate_outage(base: &ScanBase<'_>, branch: Option<usize>, opts: &ScanOptions) -> OutageRecord {
    let removed: Vec<usize> = branch.into_iter().collect();
    evaluate_outages(base, &removed, opts)
}

/// Evaluates the simultaneous outage of `removed` (empty: the unmodified grid).
pub fn evaluate_outages(base: &ScanBase<'_>, removed: &[usize], opts: &ScanOptions) -> OutageRecord {
    let grid = base.grid;
    let outage: Vec<BranchKey> = removed.iter().map(|&k| grid.branches[k].key).collect();
    let record = |status, ac_iterations, buses| OutageRecord { outage: outage.clone(), status, ac_iterations, buses };
    if let Connectivity::Islanded(ids) = connectivity_check(grid, removed) {
        return record(OutageStatus::Islanded(ids), 0, Vec::new());
    }
    let reduced = grid.without_branches(removed);

    let dcplus = if removed.is_empty() {
        Ok(recover(grid, base.model, base.state, FlowMode::Linearized))
    } else {
        let changes: Vec<_> = removed.iter().map(|&k| (k, None)).collect();
        multi_branch_delta(grid, base.model, &changes).and_then(|up| {
            let h = woodbury_update(base.model.handle(), &up)?;
            let post = base.state.plus(&state_delta(&h, &up, base.state));
            Ok(recover_patched(grid, base.model, &up.blocks, &post, FlowMode::Linearized))
        })
    };
    let dcplus = match dcplus {
        Ok(r) => r,
        Err(e) => return record(OutageStatus::Degenerate(e.to_string()), 0, Vec::new()),
    };
    let dc = match dc_solve(&reduced, &grid.p_injections()) {
        Ok(d) => d,
        Err(e) => return record(OutageStatus::Degenerate(e.to_string()), 0, Vec::new()),
    };
    let ac = if removed.is_empty() {
        base.ac.clone()
    } else {
        match ac_oracle(&reduced, base.ac, opts) {
            Ok(s) => s,
            Err(e) => return record(OutageStatus::AcFailed(e.to_string()), 0, Vec::new()),
        }
    };
    let (p_ac, q_ac) = bus_injections(&reduced, &ac.v, &ac.theta);
    let slack = grid.slack();
    let buses = grid
        .buses
        .iter()
        .enumerate()
        .map(|(i, b)| BusOutcome {
            bus: b.id,
            kind: b.kind,
            v_ac: ac.v[i],
            v_dcplus: dcplus.buses[i].v,
            theta_ac: ac.theta[i] - ac.theta[slack],
            theta_dcplus: dcplus.buses[i].theta,
            theta_dc: dc.theta[i],
            p_ac: p_ac[i],
            p_dcplus: dcplus.buses[i].p,
            p_dc: if i == slack { dc.p_slack } else { b.p_inj },
            q_ac: q_ac[i],
            q_dcplus: dcplus.buses[i].q,
        })
        .collect();
    record(OutageStatus::Evaluated, ac.iterations, buses)
}

/// Scans the given branches (all in-service branches when `None`). Records
/// are returned sorted by branch identity regardless of execution mode.
pub fn n1_scan(base: &ScanBase<'_>, branches: Option<&[usize]>, opts: &ScanOptions) -> Vec<OutageRecord> {
    let list: Vec<usize> = match branches {
        Some(b) => b.to_vec(),
        None => base.grid.in_service_branches().collect(),
    };
    let mut records = exec::map(opts.execution, &list, |&k| evaluate_outage(base, Some(k), opts));
    records.sort_by(|a, b| a.outage.cmp(&b.outage));
    records
}

/// Empirical CDF of pooled absolute errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorCdf {
    pub quantity: Quantity,
    pub method: Method,
    /// Sorted absolute errors.
    pub errors: Vec<f64>,
}

impl ErrorCdf {
    pub fn len(&self) -> usize {
        self.errors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.errors.is_empty()
    }

    /// `(abs_error, cum_fraction)` pairs; the last fraction is 1.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let n = self.errors.len() as f64;
        self.errors.iter().enumerate().map(move |(i, &e)| (e, (i + 1) as f64 / n))
    }

    pub fn quantile(&self, q: f64) -> f64 {
        quantile_sorted(&self.errors, q)
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

fn pooled<'a>(records: &'a [OutageRecord], q: Quantity) -> impl Iterator<Item = &'a BusOutcome> + 'a {
    records.iter().filter(|r| r.evaluated()).flat_map(move |r| r.buses.iter().filter(move |b| q.is_output_at(b.kind)))
}

/// Pools `|method − AC|` over every evaluated outage and every bus where the
/// quantity is an output: `v` at PQ buses, `θ` at non-slack buses, `P` at the
/// slack, `Q` at the slack and PV buses.
pub fn error_cdf(records: &[OutageRecord], quantity: Quantity, method: Method) -> Result<ErrorCdf> {
    if !method.models(quantity) {
        return Err(Error::EmptyResult(format!("{} does not model {}", method.name(), quantity.name())));
    }
    let mut errors: Vec<f64> = pooled(records, quantity).filter_map(|b| b.error(quantity, method)).map(f64::abs).collect();
    if errors.is_empty() {
        return Err(Error::EmptyResult(format!("no evaluated outages for {}", quantity.name())));
    }
    errors.sort_by(f64::total_cmp);
    Ok(ErrorCdf { quantity, method, errors })
}

/// AC values over the same pool as [`error_cdf`], sorted.
pub fn ac_pool(records: &[OutageRecord], quantity: Quantity) -> Vec<f64> {
    let mut v: Vec<f64> = pooled(records, quantity).map(|b| b.ac(quantity)).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// One busbar after a split, DC+ against AC (pu, rad).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BusbarOutcome {
    pub busbar: Busbar,
    pub id: u32,
    pub base_kv: f64,
    pub v_dcplus: f64,
    pub v_ac: f64,
    pub theta_dcplus: f64,
    pub theta_ac: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitBranchOutcome {
    pub branch: BranchKey,
    pub busbar: Busbar,
    pub dcplus: BranchFlow,
    pub ac: BranchFlow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitOutcome {
    pub bus: u32,
    pub new_id: u32,
    pub busbars: [BusbarOutcome; 2],
    pub branches: Vec<SplitBranchOutcome>,
    pub ac_iterations: usize,
}

impl SplitOutcome {
    pub fn max_v_error(&self) -> f64 {
        self.busbars.iter().map(|b| (b.v_dcplus - b.v_ac).abs()).fold(0.0, f64::max)
    }

    pub fn max_theta_error(&self) -> f64 {
        self.busbars.iter().map(|b| (b.theta_dcplus - b.theta_ac).abs()).fold(0.0, f64::max)
    }
}

/// Opens the coupler described by `assignment` on the merged model and
/// compares the DC+ prediction at both busbars with an AC solve of the split grid.
pub fn evaluate_split(
    grid: &IndexedGrid,
    ac_base: &AcState,
    model: &LinearModel,
    assignment: &SplitAssignment,
    opts: &ScanOptions,
) -> Result<SplitOutcome> {
    let ctx = pad_for_split(grid, model, model.handle(), assignment)?;
    let h_o = open_split(&ctx)?;
    let state = ctx.solve(&h_o);

    let mut warm = ac_base.clone();
    warm.v.insert(ctx.t, warm.v[ctx.f]);
    warm.theta.insert(ctx.t, warm.theta[ctx.f]);
    let ac = ac_oracle(&ctx.open, &warm, opts)?;

    let open = &ctx.open;
    let r = &ctx.reference;
    let slack = open.slack();
    let busbar = |busbar: Busbar, i: usize| BusbarOutcome {
        busbar,
        id: open.buses[i].id,
        base_kv: open.buses[i].base_kv,
        v_dcplus: r.v_hat[i] * (1.0 + state.u_at(i)),
        v_ac: ac.v[i],
        theta_dcplus: state.theta_at(i),
        theta_ac: ac.theta[i] - ac.theta[slack],
    };
    let ac_flows = branch_flows(open, &ac);
    let branches = open
        .branches_at(ctx.f)
        .into_iter()
        .map(|k| (k, Busbar::A))
        .chain(open.branches_at(ctx.t).into_iter().map(|k| (k, Busbar::B)))
        .map(|(k, side)| {
            let br = &open.branches[k];
            let blk = branch_block(&br.params, r.v_hat[br.from], r.v_hat[br.to], r.theta_ft[k]);
            let [p_f, q_f, p_t, q_t] = blk.flows(
                state.theta_at(br.from),
                state.theta_at(br.to),
                state.u_at(br.from),
                state.u_at(br.to),
            );
            SplitBranchOutcome { branch: br.key, busbar: side, dcplus: BranchFlow { p_f, q_f, p_t, q_t }, ac: ac_flows[k] }
        })
        .collect();
    Ok(SplitOutcome {
        bus: assignment.bus,
        new_id: ctx.new_id,
        busbars: [busbar(Busbar::A, ctx.f), busbar(Busbar::B, ctx.t)],
        branches,
        ac_iterations: ac.iterations,
    })
}

/// Closing a coupler between two PQ buses: DC+ at both former buses
/// against an AC solve of the merged case.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergeOutcome {
    pub bus: u32,
    pub absorbed: u32,
    pub base_kv: f64,
    /// Values at `bus` and `absorbed` before the merge (AC).
    pub v_open: [f64; 2],
    pub theta_open: [f64; 2],
    /// DC+ prediction at both coupled busbars; equal up to round-off.
    pub v_dcplus: [f64; 2],
    pub theta_dcplus: [f64; 2],
    pub v_ac: f64,
    pub theta_ac: f64,
    pub ac_iterations: usize,
}

/// The open grid is linearized at its own AC solution with the absorbed bus
/// moved onto the reference values of `bus` (a closed coupler forces equal
/// voltages), then the zero-impedance coupler is closed on the inverse.
pub fn evaluate_merge(case: &GridCase, bus: u32, absorbed: u32, opts: &ScanOptions) -> Result<MergeOutcome> {
    let merged_case = case.merge_buses(bus, absorbed)?;
    let grid = index_grid(case)?;
    let open_ac = ac_solve(&grid, Init::Flat, opts.tol, opts.max_iter)?;
    let (ia, ib) = (grid.internal(bus).unwrap(), grid.internal(absorbed).unwrap());
    let slack = grid.slack();
    let mut v_hat = open_ac.v.clone();
    let mut theta_hat: Vec<f64> = open_ac.theta.iter().map(|t| t - open_ac.theta[slack]).collect();
    v_hat[ib] = v_hat[ia];
    theta_hat[ib] = theta_hat[ia];
    let reference = ReferenceState::from_bus_values(&grid, RefKind::Hot, v_hat, theta_hat);
    let model = assemble(&grid, &reference)?;
    let v = reference.v_hat[ia];
    let closed = close_switch(model.handle(), &model.indexer, ia, ib, v, v, 0.0)?;
    let state = solve_with(&closed, &model, &grid.p_injections(), &grid.q_injections())?;

    let merged = index_grid(&merged_case)?;
    let ac = ac_solve(&merged, Init::Flat, opts.tol, opts.max_iter)?;
    let im = merged.internal(bus).unwrap();
    let at = |i: usize| (reference.v_hat[i] * (1.0 + state.u_at(i)), state.theta_at(i));
    let ((va, ta), (vb, tb)) = (at(ia), at(ib));
    Ok(MergeOutcome {
        bus,
        absorbed,
        base_kv: grid.buses[ia].base_kv,
        v_open: [open_ac.v[ia], open_ac.v[ib]],
        theta_open: [open_ac.theta[ia] - open_ac.theta[slack], open_ac.theta[ib] - open_ac.theta[slack]],
        v_dcplus: [va, vb],
        theta_dcplus: [ta, tb],
        v_ac: ac.v[im],
        theta_ac: ac.theta[im] - ac.theta[merged.slack()],
        ac_iterations: ac.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dcplus::solve;
    use crate::gridio::find_bridges;
    use crate::linearizer::{assemble, hot_ref};
    use crate::testing::load_fixture;

    struct Fixture {
        grid: IndexedGrid,
        ac: AcState,
        model: LinearModel,
        state: LinState,
    }

    fn fixture(name: &str) -> Fixture {
        let grid = load_fixture(name);
        let ac = ac_solve(&grid, Init::Flat, 1e-10, 30).unwrap();
        let model = assemble(&grid, &hot_ref(&grid, &ac).unwrap()).unwrap();
        let state = solve(&model, &grid.p_injections(), &grid.q_injections()).unwrap();
        Fixture { grid, ac, model, state }
    }

    impl Fixture {
        fn base(&self) -> ScanBase<'_> {
            ScanBase { grid: &self.grid, ac: &self.ac, model: &self.model, state: &self.state }
        }
    }

    #[test]
    fn base_case_errors_vanish() {
        let fx = fixture("case14");
        let rec = evaluate_outage(&fx.base(), None, &ScanOptions::default());
        assert!(rec.evaluated());
        for q in Quantity::ALL {
            assert!(error_cdf(&[rec.clone()], q, Method::Dcplus).unwrap().quantile(1.0) <= 1e-8, "{q:?}");
        }
    }

    #[test]
    fn infeasible_set_is_the_bridge_set() {
        let fx = fixture("case14");
        let records = n1_scan(&fx.base(), None, &ScanOptions::default());
        assert_eq!(records.len(), 20);
        let infeasible: Vec<BranchKey> = records.iter().filter(|r| !r.feasible()).map(|r| r.outage[0]).collect();
        let bridges: Vec<BranchKey> = find_bridges(&fx.grid).into_iter().map(|k| fx.grid.branches[k].key).collect();
        assert_eq!(infeasible, bridges);
        assert_eq!(infeasible.len(), 1);
        assert!(records.windows(2).all(|w| w[0].outage < w[1].outage));
    }

    #[test]
    fn execution_modes_are_bitwise_identical() {
        let fx = fixture("case14");
        let seq = n1_scan(&fx.base(), None, &ScanOptions { execution: Execution::Sequential, ..Default::default() });
        let par = n1_scan(&fx.base(), None, &ScanOptions { execution: Execution::Parallel, ..Default::default() });
        assert_eq!(seq, par);
    }

    #[test]
    fn dcplus_angles_beat_dc() {
        let fx = fixture("case14");
        let records = n1_scan(&fx.base(), None, &ScanOptions::default());
        let plus = error_cdf(&records, Quantity::Theta, Method::Dcplus).unwrap();
        let dc = error_cdf(&records, Quantity::Theta, Method::Dc).unwrap();
        assert_eq!(plus.len(), dc.len());
        assert!(plus.median() < dc.median());
        let last = plus.points().last().unwrap();
        assert_eq!(last.1, 1.0);
        assert!(matches!(error_cdf(&records, Quantity::V, Method::Dc), Err(Error::EmptyResult(_))));
    }

    #[test]
    fn cdf_of_zero_errors_is_a_step_at_zero() {
        let outcome = BusOutcome {
            bus: 1,
            kind: BusKind::Slack,
            v_ac: 1.0,
            v_dcplus: 1.0,
            theta_ac: 0.0,
            theta_dcplus: 0.0,
            theta_dc: 0.0,
            p_ac: 0.5,
            p_dcplus: 0.5,
            p_dc: 0.5,
            q_ac: 0.1,
            q_dcplus: 0.1,
        };
        let rec = OutageRecord { outage: vec![], status: OutageStatus::Evaluated, ac_iterations: 0, buses: vec![outcome; 3] };
        let cdf = error_cdf(&[rec], Quantity::P, Method::Dcplus).unwrap();
        assert_eq!(cdf.points().collect::<Vec<_>>(), vec![(0.0, 1.0 / 3.0), (0.0, 2.0 / 3.0), (0.0, 1.0)]);
        assert!(matches!(error_cdf(&[], Quantity::P, Method::Dcplus), Err(Error::EmptyResult(_))));
    }

    #[test]
    fn split_example_tracks_ac() {
        let fx = fixture("split4");
        let text = std::fs::read_to_string(crate::testing::fixture_path("split4_assignment.json")).unwrap();
        let a: SplitAssignment = serde_json::from_str(&text).unwrap();
        let out = evaluate_split(&fx.grid, &fx.ac, &fx.model, &a, &ScanOptions::default()).unwrap();
        assert_eq!(out.new_id, 5);
        assert_eq!(out.branches.len(), 3);
        assert!(out.max_v_error() < 0.02);
        assert!(out.max_theta_error() < 1.5f64.to_radians());
    }

    #[test]
    fn merging_the_split_busbars_tracks_ac() {
        // split4 with bus 3 already split: busbar 5 carries the lines to 2 and 4
        let mut case = crate::testing::load_case("split4");
        let mut bar = case.buses[2].clone();
        bar.id = 5;
        bar.p_load_mw = 0.0;
        bar.q_load_mvar = 0.0;
        case.buses.push(bar);
        for br in &mut case.branches {
            if br.from_bus == 3 && br.to_bus == 4 {
                br.from_bus = 5;
            } else if br.from_bus == 2 && br.to_bus == 3 {
                br.to_bus = 5;
            }
        }
        let out = evaluate_merge(&case, 3, 5, &ScanOptions::default()).unwrap();
        assert!((out.v_dcplus[0] - out.v_dcplus[1]).abs() < 1e-9);
        assert!((out.theta_dcplus[0] - out.theta_dcplus[1]).abs() < 1e-9);
        assert!((out.v_dcplus[0] - out.v_ac).abs() < 0.02, "{out:?}");
        assert!((out.theta_dcplus[0] - out.theta_ac).abs() < 1.5f64.to_radians(), "{out:?}");
        // merging back recovers the unsplit case's AC solution
        let fx = fixture("split4");
        let i3 = fx.grid.internal(3).unwrap();
        assert!((out.v_ac - fx.ac.v[i3]).abs() < 1e-8);
        assert!(matches!(evaluate_merge(&case, 3, 1, &ScanOptions::default()), Err(Error::InvalidTopology(_))));
    }

    #[test]
    fn quantiles_interpolate() {
        assert_eq!(quantile_sorted(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.5);
        assert_eq!(quantile_sorted(&[1.0], 0.9), 1.0);
    }
}
