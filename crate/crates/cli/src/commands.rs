use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dcplus_core::acref::{ac_solve, branch_flows, bus_injections, AcState, Init};
use dcplus_core::contingency::{
    error_cdf, evaluate_merge, evaluate_outages, evaluate_split, n1_scan, BusOutcome, Method, OutageRecord, OutageStatus,
    Quantity, ScanBase, ScanOptions,
};
use dcplus_core::dcplus::{dc_solve, recover, solve, FlowMode, LinState};
use dcplus_core::exec::Execution;
use dcplus_core::gridio::{find_bridges, index_grid, parse_matpower, BranchKey, BusKind, GridCase, IndexedGrid};
use dcplus_core::linalg::{dense_from_triplets, max_abs, max_abs_diff, DenseLu};
use dcplus_core::linearizer::{assemble, assemble_parts, cold_ref, hot_ref, LinearModel};
use dcplus_core::topoupdate::{admissibility_warnings, branch_delta, d_matrix, woodbury_update, LmdfContext, LmdfTolerance, SplitAssignment};
use dcplus_core::Error;
use log::{info, warn};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

use crate::fail::CliError;
use crate::output::{write_json, Cell, Table};
use crate::{BranchArg, Command, Common, RefArg};

type Res<T> = Result<T, CliError>;

struct Session {
    common: Common,
    case: GridCase,
    grid: IndexedGrid,
    ac: Option<AcState>,
    model: LinearModel,
    state: LinState,
    opts: ScanOptions,
    started: Instant,
}

impl Session {
    fn open(common: Common) -> Res<Session> {
        let started = Instant::now();
        let path = &common.case;
        if !path.is_file() {
            return Err(CliError::input(format!("case not found: {}", path.display())));
        }
        let text = fs::read_to_string(path).map_err(|e| CliError::new(2, "input", format!("{}: {e}", path.display())))?;
        let case = parse_matpower(&text)?;
        let grid = index_grid(&case)?;
        if !(common.tol > 0.0) {
            return Err(CliError::input(format!("--tol must be positive, got {}", common.tol)));
        }
        let opts = ScanOptions {
            tol: common.tol,
            max_iter: common.max_iter,
            execution: if common.sequential { Execution::Sequential } else { Execution::Parallel },
        };
        let ac = ac_solve(&grid, Init::Flat, opts.tol, opts.max_iter)
            .or_else(|_| ac_solve(&grid, Init::FromCase, opts.tol, opts.max_iter));
        let (ac, reference) = match common.reference {
            RefArg::Hot => {
                let ac = ac?;
                let r = hot_ref(&grid, &ac)?;
                (Some(ac), r)
            }
            RefArg::Cold => match ac {
                Ok(ac) => (Some(ac), cold_ref(&grid)),
                Err(e) => {
                    warn!("AC load flow failed, AC columns stay empty: {e}");
                    (None, cold_ref(&grid))
                }
            },
        };
        let model = assemble(&grid, &reference)?;
        let state = solve(&model, &grid.p_injections(), &grid.q_injections())?;
        fs::create_dir_all(&common.out).map_err(|e| CliError::io(&common.out, e))?;
        let s = Session { common, case, grid, ac, model, state, opts, started };
        if s.common.selftest {
            s.selftest()?;
        }
        Ok(s)
    }

    /// The AC oracle is mandatory for every comparison beyond the plain load flow.
    fn ac(&self) -> Res<&AcState> {
        self.ac.as_ref().ok_or_else(|| CliError::new(3, "ac_failure", "AC load flow of the base case did not converge"))
    }

    fn scan_base<'a>(&'a self, ac: &'a AcState) -> ScanBase<'a> {
        ScanBase { grid: &self.grid, ac, model: &self.model, state: &self.state }
    }

    fn out(&self) -> &Path {
        &self.common.out
    }

    fn reference_name(&self) -> &'static str {
        match self.common.reference {
            RefArg::Cold => "cold",
            RefArg::Hot => "hot",
        }
    }

    fn header(&self) -> Value {
        json!({
            "case": self.grid.name,
            "buses": self.grid.bus_count(),
            "branches": self.grid.in_service_branches().count(),
            "reference": self.reference_name(),
            "state_dim": self.model.dim(),
        })
    }

    fn branch(&self, arg: BranchArg) -> Res<usize> {
        let k = arg.0;
        self.grid
            .find_branch_between(k.from, k.to, k.ordinal)
            .filter(|&i| self.grid.branches[i].in_service)
            .ok_or_else(|| CliError::input(format!("no in-service branch {k}")))
    }

    /// Woodbury-updated inverses against refactored rebuilt matrices.
    fn selftest(&self) -> Res<()> {
        let bridges = find_bridges(&self.grid);
        let mut pool: Vec<usize> = self.grid.in_service_branches().filter(|k| !bridges.contains(k)).collect();
        let dim = self.model.dim();
        let budget = if dim > 1500 { 5 } else { 100 };
        let mut rng = StdRng::seed_from_u64(self.common.seed);
        if pool.len() > budget {
            pool = rand::seq::index::sample(&mut rng, pool.len(), budget).into_iter().map(|i| pool[i]).collect();
            pool.sort_unstable();
        }
        let xs: Vec<Vec<f64>> = (0..5).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let mut worst = 0.0f64;
        for &k in &pool {
            let up = branch_delta(&self.grid, &self.model, k, None)?;
            let h = woodbury_update(self.model.handle(), &up)?;
            let parts = assemble_parts(&self.grid.without_branches(&[k]), &self.model.reference)?;
            let dense = DenseLu::factor(&dense_from_triplets(dim, &parts.triplets), 1e-13, "rebuilt model")?;
            for x in &xs {
                let want = dense.solve(x);
                worst = worst.max(max_abs_diff(&h.apply(x), &want) / max_abs(&want));
            }
        }
        let pass = worst <= 1e-8;
        write_json(
            self.out(),
            "selftest.json",
            json!({ "outages": pool.len(), "vectors": xs.len(), "max_rel_error": worst, "tolerance": 1e-8, "pass": pass }),
        )?;
        println!("selftest: {} outages, max relative error {worst:.3e} ({})", pool.len(), if pass { "pass" } else { "FAIL" });
        if pass {
            Ok(())
        } else {
            Err(CliError::new(1, "selftest", format!("rebuild oracle deviation {worst:.3e} exceeds 1e-8")))
        }
    }
}

pub fn run(cmd: Command) -> Res<()> {
    match cmd {
        Command::Loadflow(c) => loadflow(&Session::open(c)?),
        Command::N1 { common, sample } => n1(&Session::open(common)?, sample),
        Command::Lmdf { common, monitored, modified, dg, db, max_angle, max_voltage_gap } => {
            let tol = LmdfTolerance { max_angle, max_voltage_gap };
            lmdf_cmd(&Session::open(common)?, monitored, modified, dg.zip(db), &tol)
        }
        Command::Split { common, assignment, bus } => split(&Session::open(common)?, &assignment, bus),
        Command::Merge { common, bus, absorb } => merge(&Session::open(common)?, bus, absorb),
        Command::MultiOutage { common, branches } => multi_outage(&Session::open(common)?, &branches),
    }
}

fn kind_name(kind: BusKind) -> &'static str {
    match kind {
        BusKind::Pq => "pq",
        BusKind::Pv => "pv",
        BusKind::Slack => "slack",
    }
}

fn elapsed(s: &Session) -> f64 {
    s.started.elapsed().as_secs_f64()
}

fn has_kv(grid: &IndexedGrid) -> bool {
    grid.buses.iter().any(|b| b.base_kv > 0.0)
}

fn kv(base_kv: f64, v: Option<f64>) -> Cell {
    if base_kv > 0.0 {
        v.map(|v| v * base_kv).into()
    } else {
        Cell::Empty
    }
}

fn deg(x: Option<f64>) -> Cell {
    x.map(f64::to_degrees).into()
}

fn loadflow(s: &Session) -> Res<()> {
    let grid = &s.grid;
    let rec = recover(grid, &s.model, &s.state, FlowMode::Linearized);
    let dc = dc_solve(grid, &grid.p_injections())?;
    let ac = s.ac.as_ref();
    let ac_inj = ac.map(|a| bus_injections(grid, &a.v, &a.theta));
    let ac_flows = ac.map(|a| branch_flows(grid, a));
    let slack = grid.slack();
    let with_kv = has_kv(grid);

    let mut cols: Vec<&str> = vec![
        "bus_id", "type", "v_ac", "v_dcplus", "theta_ac", "theta_dcplus", "theta_dc", "p_ac", "p_dcplus", "p_dc", "q_ac",
        "q_dcplus",
    ];
    if with_kv {
        cols.extend(["v_ac_kv", "v_dcplus_kv", "theta_ac_deg", "theta_dcplus_deg", "theta_dc_deg"]);
    }
    let mut busses = Table::new(cols);
    let mut order: Vec<usize> = (0..grid.bus_count()).collect();
    order.sort_by_key(|&i| grid.buses[i].id);
    let (mut err_v, mut err_t, mut err_dc) = (0.0f64, 0.0f64, 0.0f64);
    for &i in &order {
        let b = &grid.buses[i];
        let r = &rec.buses[i];
        let v_ac = ac.map(|a| a.v[i]);
        let t_ac = ac.map(|a| a.theta[i] - a.theta[slack]);
        let p_dc = if i == slack { dc.p_slack } else { b.p_inj };
        if let (Some(v), Some(t)) = (v_ac, t_ac) {
            err_v = err_v.max((r.v - v).abs());
            err_t = err_t.max((r.theta - t).abs());
            err_dc = err_dc.max((dc.theta[i] - t).abs());
        }
        let mut row = vec![
            b.id.into(),
            kind_name(b.kind).into(),
            v_ac.into(),
            r.v.into(),
            t_ac.into(),
            r.theta.into(),
            dc.theta[i].into(),
            ac_inj.as_ref().map(|(p, _)| p[i]).into(),
            r.p.into(),
            p_dc.into(),
            ac_inj.as_ref().map(|(_, q)| q[i]).into(),
            r.q.into(),
        ];
        if with_kv {
            row.extend([kv(b.base_kv, v_ac), kv(b.base_kv, Some(r.v)), deg(t_ac), deg(Some(r.theta)), deg(Some(dc.theta[i]))]);
        }
        busses.push(row);
    }

    let mut branches = Table::new([
        "from", "to", "ordinal", "in_service", "p_f_ac", "p_f_dcplus", "p_f_dc", "q_f_ac", "q_f_dcplus", "p_t_ac",
        "p_t_dcplus", "p_t_dc", "q_t_ac", "q_t_dcplus", "p_loss_ac", "p_loss_dcplus",
    ]);
    for (k, br) in grid.branches.iter().enumerate() {
        let a = ac_flows.as_ref().map(|f| f[k]);
        let d = &rec.flows[k];
        let on = br.in_service;
        branches.push(vec![
            br.key.from.into(),
            br.key.to.into(),
            br.key.ordinal.into(),
            Cell::Int(on as i64),
            a.map(|f| f.p_f).into(),
            d.p_f.into(),
            dc.flows[k].into(),
            a.map(|f| f.q_f).into(),
            d.q_f.into(),
            a.map(|f| f.p_t).into(),
            d.p_t.into(),
            (-dc.flows[k]).into(),
            a.map(|f| f.q_t).into(),
            d.q_t.into(),
            a.map(|f| f.p_f + f.p_t).into(),
            (d.p_f + d.p_t).into(),
        ]);
    }
    let fmt = s.common.format;
    let mut files = vec![busses.write(s.out(), "busses", fmt)?, branches.write(s.out(), "branches", fmt)?];
    let mut summary = s.header();
    summary["ac"] = match ac {
        Some(a) => json!({ "converged": a.converged, "iterations": a.iterations, "max_mismatch": a.max_mismatch }),
        None => Value::Null,
    };
    if ac.is_some() {
        summary["max_abs_error"] = json!({ "dcplus": { "v": err_v, "theta": err_t }, "dc": { "theta": err_dc } });
    }
    summary["p_slack"] = json!({ "ac": ac.map(|a| a.p_slack), "dcplus": rec.buses[slack].p, "dc": dc.p_slack });
    summary["wall_time_s"] = json!(elapsed(s));
    files.push(s.out().join("summary.json"));
    summary["files"] = file_names(&files);
    write_json(s.out(), "summary.json", summary)?;
    report(&files);
    Ok(())
}

fn file_names(files: &[PathBuf]) -> Value {
    json!(files.iter().filter_map(|p| p.file_name()).map(|f| f.to_string_lossy().into_owned()).collect::<Vec<_>>())
}

fn report(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

fn status_name(st: &OutageStatus) -> &'static str {
    match st {
        OutageStatus::Evaluated => "evaluated",
        OutageStatus::Islanded(_) => "islanded",
        OutageStatus::AcFailed(_) => "ac_failed",
        OutageStatus::Degenerate(_) => "degenerate",
    }
}

const OUTCOME_COLUMNS: [&str; 13] = [
    "bus_id", "type", "v_ac", "v_dcplus", "theta_ac", "theta_dcplus", "theta_dc", "p_ac", "p_dcplus", "p_dc", "q_ac",
    "q_dcplus", "ac_iterations",
];

fn outcome_cells(b: &BusOutcome, iterations: usize) -> Vec<Cell> {
    vec![
        b.bus.into(),
        kind_name(b.kind).into(),
        b.v_ac.into(),
        b.v_dcplus.into(),
        b.theta_ac.into(),
        b.theta_dcplus.into(),
        b.theta_dc.into(),
        b.p_ac.into(),
        b.p_dcplus.into(),
        b.p_dc.into(),
        b.q_ac.into(),
        b.q_dcplus.into(),
        Cell::Int(iterations as i64),
    ]
}

fn outage_label(keys: &[BranchKey]) -> String {
    keys.iter().map(|k| k.to_string()).collect::<Vec<_>>().join("+")
}

fn n1(s: &Session, sample: Option<usize>) -> Res<()> {
    let ac = s.ac()?;
    let all: Vec<usize> = s.grid.in_service_branches().collect();
    let chosen: Option<Vec<usize>> = match sample {
        Some(n) if n < all.len() => {
            let mut rng = StdRng::seed_from_u64(s.common.seed);
            let mut pick: Vec<usize> = rand::seq::index::sample(&mut rng, all.len(), n).into_iter().map(|i| all[i]).collect();
            pick.sort_unstable();
            Some(pick)
        }
        _ => None,
    };
    let records = n1_scan(&s.scan_base(ac), chosen.as_deref(), &s.opts);
    let scan_time = elapsed(s);

    let mut cols = vec!["from", "to", "ordinal", "status"];
    cols.extend(OUTCOME_COLUMNS);
    let mut table = Table::new(cols);
    for r in &records {
        let k = r.outage[0];
        let lead = || -> Vec<Cell> { vec![k.from.into(), k.to.into(), k.ordinal.into(), status_name(&r.status).into()] };
        if r.evaluated() {
            let mut buses: Vec<&BusOutcome> = r.buses.iter().collect();
            buses.sort_by_key(|b| b.bus);
            for b in buses {
                let mut row = lead();
                row.extend(outcome_cells(b, r.ac_iterations));
                table.push(row);
            }
        } else {
            let mut row = lead();
            row.extend(std::iter::repeat_n(Cell::Empty, OUTCOME_COLUMNS.len()));
            table.push(row);
        }
    }
    let fmt = s.common.format;
    let mut files = vec![table.write(s.out(), "outages", fmt)?];
    let evaluated = records.iter().filter(|r| r.evaluated()).count();
    let mut medians = serde_json::Map::new();
    if evaluated > 0 {
        for q in Quantity::ALL {
            for m in [Method::Dcplus, Method::Dc] {
                if !m.models(q) {
                    continue;
                }
                let cdf = error_cdf(&records, q, m)?;
                let mut t = Table::new(["abs_error", "cum_fraction"]);
                for (e, f) in cdf.points() {
                    t.push(vec![e.into(), f.into()]);
                }
                let stem = format!("cdf_{}_{}", q.name(), m.name());
                files.push(t.write(s.out(), &stem, fmt)?);
                medians.insert(format!("{}_{}", q.name(), m.name()), json!(cdf.median()));
            }
        }
    }
    let infeasible: Vec<String> = records.iter().filter(|r| !r.feasible()).map(|r| outage_label(&r.outage)).collect();
    let count = |name: &str| records.iter().filter(|r| status_name(&r.status) == name).count();
    let mut summary = s.header();
    summary["outages"] = json!(records.len());
    summary["evaluated"] = json!(evaluated);
    summary["infeasible_outages"] = json!(infeasible.len());
    summary["infeasible"] = json!(infeasible);
    summary["ac_failures"] = json!(count("ac_failed"));
    summary["degenerate"] = json!(count("degenerate"));
    summary["median_abs_error"] = Value::Object(medians);
    summary["sampled"] = json!(chosen.is_some());
    summary["seed"] = json!(s.common.seed);
    summary["execution"] = json!(if s.opts.execution.is_parallel() { "parallel" } else { "sequential" });
    summary["scan_time_s"] = json!(scan_time);
    summary["wall_time_s"] = json!(elapsed(s));
    files.push(s.out().join("summary.json"));
    summary["files"] = file_names(&files);
    write_json(s.out(), "summary.json", summary)?;
    report(&files);
    if evaluated == 0 {
        return Err(Error::EmptyResult("no feasible contingencies".into()).into());
    }
    Ok(())
}

/// `(θ_a − θ_b, u_a − u_b)` with `u = v / v̂ − 1`.
fn differences(model: &LinearModel, v: &[f64], theta: &[f64], a: usize, b: usize) -> (f64, f64) {
    let vh = &model.reference.v_hat;
    (theta[a] - theta[b], (v[a] / vh[a] - 1.0) - (v[b] / vh[b] - 1.0))
}

fn lmdf_cmd(s: &Session, monitored: BranchArg, modified: BranchArg, change: Option<(f64, f64)>, tol: &LmdfTolerance) -> Res<()> {
    let ac = s.ac()?;
    let (kl, ft) = (s.branch(monitored)?, s.branch(modified)?);
    let grid = &s.grid;
    let br = &grid.branches[ft];
    let (gs, bs) = br.params.series();
    let outage = change.is_none();
    let (dg, db) = change.unwrap_or((-gs, -bs));
    let warnings = admissibility_warnings(grid, &s.model, ft, tol);
    let mon = &grid.branches[kl];
    let rh = &s.model.reference;
    let d = d_matrix(rh.v_hat[br.from], rh.v_hat[br.to], dg, db);
    let factor = LmdfContext::new(s.model.handle(), s.model.indexer, br.from, br.to).lmdf(mon.from, mon.to, &d)?;

    let x = s.state.to_vec();
    let ix = s.model.indexer;
    let (dt, du) = (ix.mu(br.from, br.to).dot(&x), ix.nu(br.from, br.to).dot(&x));
    let predicted = factor.apply(dt, du);

    // AC oracle: re-solve with the modified series admittance
    let modified_grid = if outage {
        grid.without_branches(&[ft])
    } else {
        let (g, b) = (gs + dg, bs + db);
        let z2 = g * g + b * b;
        if z2 == 0.0 {
            return Err(Error::InvalidTopology("modified series admittance is zero; use the outage default".into()).into());
        }
        let params = dcplus_core::gridio::BranchParams { r: g / z2, x: -b / z2, ..br.params };
        grid.with_branch_params(ft, params)
    };
    let post = ac_solve(&modified_grid, Init::Warm(ac), s.opts.tol, s.opts.max_iter)
        .or_else(|_| ac_solve(&modified_grid, Init::Flat, s.opts.tol, s.opts.max_iter))?;
    let before = differences(&s.model, &ac.v, &ac.theta, mon.from, mon.to);
    let after = differences(&s.model, &post.v, &post.theta, mon.from, mon.to);

    let mut doc = s.header();
    doc["monitored"] = json!(mon.key.to_string());
    doc["modified"] = json!(br.key.to_string());
    doc["change"] = json!({ "dg": dg, "db": db, "outage": outage });
    doc["d"] = json!(d);
    doc["lmdf"] = json!(factor.0);
    doc["warnings"] = json!(warnings);
    doc["modified_differences"] = json!({ "theta": dt, "u": du });
    doc["monitored_change"] = json!({
        "dcplus": { "theta": predicted.0, "u": predicted.1 },
        "ac": { "theta": after.0 - before.0, "u": after.1 - before.1 },
    });
    doc["wall_time_s"] = json!(elapsed(s));
    let path = write_json(s.out(), "lmdf.json", doc)?;
    report(&[path]);
    Ok(())
}

fn pair(dcplus: f64, ac: f64) -> Value {
    json!({ "dcplus": dcplus, "ac": ac })
}

fn split(s: &Session, assignment: &Path, bus: Option<u32>) -> Res<()> {
    let ac = s.ac()?;
    let text = fs::read_to_string(assignment)
        .map_err(|e| CliError::input(format!("assignment file {}: {e}", assignment.display())))?;
    let a: SplitAssignment = serde_json::from_str(&text)?;
    if let Some(b) = bus.filter(|&b| b != a.bus) {
        return Err(CliError::input(format!("--bus {b} does not match the assignment's bus {}", a.bus)));
    }
    let out = evaluate_split(&s.grid, ac, &s.model, &a, &s.opts)?;
    let busbars: Vec<Value> = out
        .busbars
        .iter()
        .map(|b| {
            let mut v = json!({
                "busbar": b.busbar,
                "id": b.id,
                "v_pu": pair(b.v_dcplus, b.v_ac),
                "theta_rad": pair(b.theta_dcplus, b.theta_ac),
                "theta_deg": pair(b.theta_dcplus.to_degrees(), b.theta_ac.to_degrees()),
            });
            if b.base_kv > 0.0 {
                v["v_kv"] = pair(b.v_dcplus * b.base_kv, b.v_ac * b.base_kv);
            }
            v
        })
        .collect();
    let branches: Vec<Value> = out
        .branches
        .iter()
        .map(|b| {
            json!({
                "branch": b.branch.to_string(),
                "busbar": b.busbar,
                "p_f": pair(b.dcplus.p_f, b.ac.p_f),
                "q_f": pair(b.dcplus.q_f, b.ac.q_f),
                "p_t": pair(b.dcplus.p_t, b.ac.p_t),
                "q_t": pair(b.dcplus.q_t, b.ac.q_t),
            })
        })
        .collect();
    let mut doc = s.header();
    doc["bus"] = json!(out.bus);
    doc["new_busbar_id"] = json!(out.new_id);
    doc["busbars"] = json!(busbars);
    doc["branches"] = json!(branches);
    doc["max_abs_error"] = json!({
        "v_pu": out.max_v_error(),
        "theta_rad": out.max_theta_error(),
        "theta_deg": out.max_theta_error().to_degrees(),
    });
    doc["ac_iterations"] = json!(out.ac_iterations);
    doc["wall_time_s"] = json!(elapsed(s));
    let path = write_json(s.out(), "split_report.json", doc)?;
    for b in &out.busbars {
        println!(
            "busbar {:?} (bus {}): v {:.4} | {:.4} pu, theta {:.2} | {:.2} deg (DC+ | AC)",
            b.busbar,
            b.id,
            b.v_dcplus,
            b.v_ac,
            b.theta_dcplus.to_degrees(),
            b.theta_ac.to_degrees()
        );
    }
    report(&[path]);
    Ok(())
}

fn merge(s: &Session, bus: u32, absorb: u32) -> Res<()> {
    if s.common.reference == RefArg::Cold {
        warn!("merge always linearizes at the AC state of the open grid; --ref cold is ignored");
    }
    let out = evaluate_merge(&s.case, bus, absorb, &s.opts)?;
    let mut doc = s.header();
    doc["reference"] = json!("hot");
    doc["bus"] = json!(bus);
    doc["absorbed"] = json!(absorb);
    doc["open_ac"] = json!({ "v_pu": out.v_open, "theta_rad": out.theta_open });
    doc["v_pu"] = pair(out.v_dcplus[0], out.v_ac);
    doc["theta_rad"] = pair(out.theta_dcplus[0], out.theta_ac);
    doc["theta_deg"] = pair(out.theta_dcplus[0].to_degrees(), out.theta_ac.to_degrees());
    if out.base_kv > 0.0 {
        doc["v_kv"] = pair(out.v_dcplus[0] * out.base_kv, out.v_ac * out.base_kv);
    }
    doc["busbar_mismatch"] = json!({
        "v_pu": (out.v_dcplus[0] - out.v_dcplus[1]).abs(),
        "theta_rad": (out.theta_dcplus[0] - out.theta_dcplus[1]).abs(),
    });
    doc["ac_iterations"] = json!(out.ac_iterations);
    doc["wall_time_s"] = json!(elapsed(s));
    let path = write_json(s.out(), "merge_report.json", doc)?;
    report(&[path]);
    Ok(())
}

fn multi_outage(s: &Session, branches: &[BranchArg]) -> Res<()> {
    let ac = s.ac()?;
    let removed = branches.iter().map(|&b| s.branch(b)).collect::<Res<Vec<usize>>>()?;
    let rec: OutageRecord = evaluate_outages(&s.scan_base(ac), &removed, &s.opts);
    let label = outage_label(&rec.outage);
    match &rec.status {
        OutageStatus::Evaluated => {}
        OutageStatus::Islanded(ids) => return Err(Error::Islanded(ids.clone()).into()),
        OutageStatus::AcFailed(msg) => return Err(CliError::new(3, "ac_failure", format!("outage {label}: {msg}"))),
        OutageStatus::Degenerate(msg) => return Err(Error::Degenerate(msg.clone()).into()),
    }
    let mut table = Table::new(OUTCOME_COLUMNS);
    let mut buses: Vec<&BusOutcome> = rec.buses.iter().collect();
    buses.sort_by_key(|b| b.bus);
    let mut worst = serde_json::Map::new();
    for b in &buses {
        table.push(outcome_cells(b, rec.ac_iterations));
    }
    for q in Quantity::ALL {
        for m in [Method::Dcplus, Method::Dc] {
            if m.models(q) {
                let cdf = error_cdf(std::slice::from_ref(&rec), q, m)?;
                worst.insert(format!("{}_{}", q.name(), m.name()), json!(cdf.quantile(1.0)));
            }
        }
    }
    let mut files = vec![table.write(s.out(), "multi_outage", s.common.format)?];
    let mut summary = s.header();
    summary["outage"] = json!(rec.outage.iter().map(|k| k.to_string()).collect::<Vec<_>>());
    summary["max_abs_error"] = Value::Object(worst);
    summary["ac_iterations"] = json!(rec.ac_iterations);
    summary["wall_time_s"] = json!(elapsed(s));
    files.push(s.out().join("summary.json"));
    summary["files"] = file_names(&files);
    write_json(s.out(), "summary.json", summary)?;
    info!("outage {label} evaluated");
    report(&files);
    Ok(())
}
