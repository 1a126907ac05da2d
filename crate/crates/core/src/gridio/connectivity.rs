use std::collections::{HashSet, VecDeque};

use super::IndexedGrid;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Connectivity {
    Connected,
    /// External ids of the buses not reachable from the slack, ascending.
    Islanded(Vec<u32>),
}

impl Connectivity {
    pub fn is_connected(&self) -> bool {
        matches!(self, Connectivity::Connected)
    }
}

fn adjacency(grid: &IndexedGrid, removed: &HashSet<usize>) -> Vec<Vec<(usize, usize)>> {
    let mut adj = vec![Vec::new(); grid.bus_count()];
    for k in grid.in_service_branches().filter(|k| !removed.contains(k)) {
        let br = &grid.branches[k];
        adj[br.from].push((br.to, k));
        adj[br.to].push((br.from, k));
    }
    adj
}

/// Breadth-first search from the slack over in-service branches minus `removed`.
pub fn connectivity_check(grid: &IndexedGrid, removed: &[usize]) -> Connectivity {
    let removed: HashSet<usize> = removed.iter().copied().collect();
    let adj = adjacency(grid, &removed);
    let mut seen = vec![false; grid.bus_count()];
    let mut queue = VecDeque::from([grid.slack()]);
    seen[grid.slack()] = true;
    while let Some(u) = queue.pop_front() {
        for &(v, _) in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    let mut cut: Vec<u32> = seen.iter().enumerate().filter(|(_, &s)| !s).map(|(i, _)| grid.buses[i].id).collect();
    if cut.is_empty() {
        Connectivity::Connected
    } else {
        cut.sort_unstable();
        Connectivity::Islanded(cut)
    }
}

/// Bridges of the in-service branch graph (iterative Tarjan low-link).
/// Parallel branches are distinguished by branch index, so a doubled
/// circuit is never a bridge.
pub fn find_bridges(grid: &IndexedGrid) -> Vec<usize> {
    let adj = adjacency(grid, &HashSet::new());
    let nb = grid.bus_count();
    let mut disc = vec![usize::MAX; nb];
    let mut low = vec![0usize; nb];
    let mut bridges = Vec::new();
    let mut timer = 0;

    for root in 0..nb {
        if disc[root] != usize::MAX {
            continue;
        }
        // (vertex, edge used to enter it, next adjacency position)
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(top) = stack.last_mut() {
            let (u, via, pos) = *top;
            if pos < adj[u].len() {
                top.2 += 1;
                let (v, edge) = adj[u][pos];
                if edge == via {
                    continue;
                }
                if disc[v] == usize::MAX {
                    disc[v] = timer;
                    low[v] = timer;
                    timer += 1;
                    stack.push((v, edge, 0));
                } else {
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                stack.pop();
                if let Some(&(parent, _, _)) = stack.last() {
                    low[parent] = low[parent].min(low[u]);
                    if low[u] > disc[parent] {
                        bridges.push(via);
                    }
                }
            }
        }
    }
    bridges.sort_unstable();
    bridges
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::load_fixture;

    #[test]
    fn case14_is_connected() {
        let grid = load_fixture("case14");
        assert_eq!(connectivity_check(&grid, &[]), Connectivity::Connected);
    }

    #[test]
    fn case14_radial_branch_to_bus8() {
        let grid = load_fixture("case14");
        let k = grid.find_branch_between(7, 8, 1).unwrap();
        assert_eq!(connectivity_check(&grid, &[k]), Connectivity::Islanded(vec![8]));
        assert_eq!(find_bridges(&grid), vec![k]);
    }

    #[test]
    fn bridges_match_brute_force() {
        for name in ["case14", "case30", "case118"] {
            let grid = load_fixture(name);
            let brute: Vec<usize> = grid
                .in_service_branches()
                .filter(|&k| !connectivity_check(&grid, &[k]).is_connected())
                .collect();
            assert_eq!(find_bridges(&grid), brute, "{name}");
        }
    }

    #[test]
    fn parallel_circuit_is_not_a_bridge() {
        let mut case = crate::gridio::parse_matpower(crate::testing::TWO_BUS).unwrap();
        let grid = crate::gridio::index_grid(&case).unwrap();
        assert_eq!(find_bridges(&grid), vec![0]);
        case.branches.push(case.branches[0].clone());
        let grid = crate::gridio::index_grid(&case).unwrap();
        assert!(find_bridges(&grid).is_empty());
    }
}
