use dcplus_core::acref::{ac_solve, Init};
use dcplus_core::contingency::{error_cdf, evaluate_outage, n1_scan, Method, OutageStatus, Quantity, ScanBase, ScanOptions};
use dcplus_core::dcplus::solve;
use dcplus_core::exec::Execution;
use dcplus_core::gridio::{find_bridges, index_grid, parse_matpower, to_matpower};
use dcplus_core::linearizer::{assemble, hot_ref};
use dcplus_core::testing::{fixture_path, load_fixture};

#[test]
fn case30_scan_is_deterministic_and_complete() {
    let grid = load_fixture("case30");
    let ac = ac_solve(&grid, Init::Flat, 1e-10, 30).unwrap();
    let model = assemble(&grid, &hot_ref(&grid, &ac).unwrap()).unwrap();
    let state = solve(&model, &grid.p_injections(), &grid.q_injections()).unwrap();
    let base = ScanBase { grid: &grid, ac: &ac, model: &model, state: &state };

    let seq = n1_scan(&base, None, &ScanOptions { execution: Execution::Sequential, ..Default::default() });
    let par = n1_scan(&base, None, &ScanOptions { execution: Execution::Parallel, ..Default::default() });
    assert_eq!(seq, par);
    assert_eq!(seq.len(), grid.in_service_branches().count());

    let islanded = seq.iter().filter(|r| matches!(r.status, OutageStatus::Islanded(_))).count();
    assert_eq!(islanded, find_bridges(&grid).len());
    assert!(seq.iter().filter(|r| r.feasible()).all(|r| r.evaluated()));

    let plus = error_cdf(&seq, Quantity::Theta, Method::Dcplus).unwrap();
    let dc = error_cdf(&seq, Quantity::Theta, Method::Dc).unwrap();
    assert!(plus.quantile(0.9) < dc.quantile(0.9));

    let unchanged = evaluate_outage(&base, None, &ScanOptions::default());
    for q in Quantity::ALL {
        for b in &unchanged.buses {
            if let Some(e) = b.error(q, Method::Dcplus) {
                assert!(e.abs() <= 1e-8, "{q:?} at bus {}: {e}", b.bus);
            }
        }
    }
}

#[test]
fn case_files_survive_a_write_read_cycle() {
    for name in ["case14", "case30", "case118", "split4"] {
        let text = std::fs::read_to_string(fixture_path(name)).unwrap();
        let case = parse_matpower(&text).unwrap();
        let again = parse_matpower(&to_matpower(&case)).unwrap();
        assert_eq!(index_grid(&case).unwrap(), index_grid(&again).unwrap(), "{name}");
    }
}
