//! QAOA for the symmetric Traveling Salesman Problem.
//!
//! Instances over `n` cities are encoded on `(n-1)^2` qubits by pinning city 0
//! to the first time slot. The crate covers the classical side (costs, the
//! brute-force oracle, graph generation), the Ising encoding, a dense
//! statevector simulator with depolarizing-noise trajectories, the three QAOA
//! mixers (X, XY, row-swap), a two-part layerwise-learning optimizer and the
//! experiment runner that produces per-run and aggregate reports.

pub mod ansatz;
pub mod error;
pub mod experiment;
pub mod ising;
pub mod metrics;
pub mod optimizer;
pub mod statevector;
pub mod tsp;

pub use ansatz::{
    build_initial_state, estimate_resources, evaluate_ansatz, AnsatzSpec, InitialStateKind, MixerKind, ParamVector,
    ResourceEstimate,
};
pub use error::{Error, Result};
pub use experiment::{AggregateReport, ExperimentConfig, RunReport};
pub use ising::{build_ising, cost_table, qubit_index, CostTable, IsingHamiltonian, QubitLayout};
pub use metrics::{approximation_ratio, rank, true_percentage, ClassPercentages};
pub use optimizer::{minimize, LLTrace, OptimizerConfig, ProtocolStep};
pub use statevector::{expectation_cost, run_noisy, sample, GateOp, NoiseSpec, ShotCounts, StateVector};
pub use tsp::{
    brute_force_solve, classify_bitstring, cost_improved, gen_random_graph, skewness, tour_cost, Bitstring,
    BitstringClass, SkewnessReport, Solution, Tour, TspGraph,
};
