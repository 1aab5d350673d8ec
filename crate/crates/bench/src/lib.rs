//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use qaoa_tsp::{build_ising, cost_table, gen_random_graph, CostTable, IsingHamiltonian};

/// Random instance with weights up to 20 and the default penalty of twice the largest weight.
pub fn instance(n: usize, seed: u64) -> (Arc<IsingHamiltonian>, Arc<CostTable>) {
    let graph = gen_random_graph(n, 20, seed).expect("valid size");
    let ham = build_ising(&graph, 2.0 * graph.max_weight()).expect("positive penalty");
    let table = cost_table(&ham).expect("small enough");
    (Arc::new(ham), Arc::new(table))
}

/// Flat `[γ1, β1, ...]` parameters for `p` layers.
pub fn params(p: usize) -> Vec<f64> {
    (0..2 * p).map(|k| 0.1 + 0.05 * k as f64).collect()
}
