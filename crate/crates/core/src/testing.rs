//! Fixture helpers shared by unit tests, integration tests, benches and the
//! CLI self-test. Not part of the stable API.

use std::path::PathBuf;

use crate::gridio::{index_grid, parse_matpower, GridCase, IndexedGrid};

/// Slack bus 1, PQ bus 2 with a 10 MW / 5 MVAr load, one lossless line x = 0.1.
pub const TWO_BUS: &str = "
function mpc = twobus
mpc.baseMVA = 100;
mpc.bus = [
    1 3 0 0 0 0 1 1 0 230 1 1.1 0.9;
    2 1 10 5 0 0 1 1 0 230 1 1.1 0.9;
];
mpc.gen = [
    1 0 0 0 0 1 100 1 0 0;
];
mpc.branch = [
    1 2 0 0.1 0 0 0 0 0 0 1 -360 360;
];
";

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn fixture_path(name: &str) -> PathBuf {
    let file = if name.contains('.') { name.to_string() } else { format!("{name}.m") };
    fixture_dir().join(file)
}

pub fn load_case(name: &str) -> GridCase {
    let path = fixture_path(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    parse_matpower(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn load_fixture(name: &str) -> IndexedGrid {
    index_grid(&load_case(name)).expect("fixture indexes")
}

/// Deterministic pseudo-random vectors for oracle comparisons.
pub fn random_vectors(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    // splitmix64; keeps the core crate free of an RNG dependency
    let mut state = seed;
    let mut next = move || {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        (z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    (0..count).map(|_| (0..dim).map(|_| next()).collect()).collect()
}
