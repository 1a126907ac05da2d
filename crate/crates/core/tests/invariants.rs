use dcplus_core::acref::{ac_solve, Init};
use dcplus_core::dcplus::solve;
use dcplus_core::gridio::{find_bridges, BranchParams, IndexedGrid};
use dcplus_core::linalg::{dense_from_triplets, max_abs, max_abs_diff, DenseLu};
use dcplus_core::linearizer::{assemble, assemble_parts, hot_ref, LinearModel};
use dcplus_core::testing::{load_fixture, random_vectors};
use dcplus_core::topoupdate::{branch_delta, multi_branch_delta, state_delta, woodbury_update};
use proptest::prelude::*;
use std::sync::OnceLock;

fn case14() -> &'static (IndexedGrid, LinearModel) {
    static CELL: OnceLock<(IndexedGrid, LinearModel)> = OnceLock::new();
    CELL.get_or_init(|| {
        let grid = load_fixture("case14");
        let ac = ac_solve(&grid, Init::Flat, 1e-10, 30).unwrap();
        let model = assemble(&grid, &hot_ref(&grid, &ac).unwrap()).unwrap();
        (grid, model)
    })
}

fn rebuilt(grid: &IndexedGrid, model: &LinearModel) -> DenseLu {
    let parts = assemble_parts(grid, &model.reference).unwrap();
    DenseLu::factor(&dense_from_triplets(parts.indexer.dim(), &parts.triplets), 1e-13, "rebuilt").unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // Any finite change of one branch's parameters is a rank ≤ 3 update whose
    // Woodbury inverse agrees with refactoring the modified grid.
    #[test]
    fn parameter_change_matches_rebuild(
        k in 0usize..20,
        r_scale in 0.2f64..3.0,
        x_scale in 0.5f64..3.0,
        alpha in -0.2f64..0.2,
        seed in 0u64..1000,
    ) {
        let (grid, model) = case14();
        let old = grid.branches[k].params;
        let new = BranchParams { r: old.r * r_scale, x: old.x * x_scale, alpha, ..old };
        let up = branch_delta(grid, model, k, Some(new)).unwrap();
        prop_assert!(up.rank() <= 3);
        let h = woodbury_update(model.handle(), &up).unwrap();
        let dense = rebuilt(&grid.with_branch_params(k, new), model);
        for x in random_vectors(model.dim(), 3, seed) {
            let want = dense.solve(&x);
            prop_assert!(max_abs_diff(&h.apply(&x), &want) <= 1e-8 * max_abs(&want));
        }
    }

    // Simultaneous outages of two non-bridge branches, when the pair keeps
    // the grid connected, match the rebuilt model's solution.
    #[test]
    fn double_outage_state_matches_rebuild(a in 0usize..20, b in 0usize..20) {
        let (grid, model) = case14();
        let bridges = find_bridges(grid);
        prop_assume!(a != b && !bridges.contains(&a) && !bridges.contains(&b));
        let reduced = grid.without_branches(&[a, b]);
        prop_assume!(dcplus_core::gridio::connectivity_check(&reduced, &[]).is_connected());
        let base = solve(model, &grid.p_injections(), &grid.q_injections()).unwrap();
        let up = multi_branch_delta(grid, model, &[(a, None), (b, None)]).unwrap();
        let h = woodbury_update(model.handle(), &up).unwrap();
        let post = base.plus(&state_delta(&h, &up, &base)).to_vec();
        let parts = assemble_parts(&reduced, &model.reference).unwrap();
        let mut rhs: Vec<f64> = grid.p_injections().iter().zip(&parts.p_hat_bus).map(|(p, h)| p - h).collect();
        rhs.extend(grid.q_injections().iter().zip(&parts.q_hat_bus).map(|(q, h)| q - h));
        let want = rebuilt(&reduced, model).solve(&rhs);
        prop_assert!(max_abs_diff(&post, &want) <= 1e-9 * max_abs(&want).max(1.0));
    }
}

#[test]
fn deep_update_stack_compacts_to_the_same_action() {
    let (grid, model) = case14();
    let bridges = find_bridges(grid);
    let mut h = model.handle().clone().with_max_depth(3);
    let mut removed = Vec::new();
    let mut current = grid.clone();
    for k in grid.in_service_branches().filter(|k| !bridges.contains(k)).take(5) {
        let trial = current.without_branches(&[k]);
        if !dcplus_core::gridio::connectivity_check(&trial, &[]).is_connected() {
            continue;
        }
        let up = branch_delta(&current, model, k, None).unwrap();
        h = woodbury_update(&h, &up).unwrap();
        assert!(h.depth() <= 3);
        removed.push(k);
        current = trial;
    }
    assert!(removed.len() >= 3);
    let dense = rebuilt(&current, model);
    for x in random_vectors(model.dim(), 5, 77) {
        let want = dense.solve(&x);
        assert!(max_abs_diff(&h.apply(&x), &want) <= 1e-8 * max_abs(&want));
    }
}
