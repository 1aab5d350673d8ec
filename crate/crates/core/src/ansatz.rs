//! QAOA circuits: initial states, mixers, full ansatz evaluation and logical
//! resource counts.
//!
//! Two execution paths share the same unitaries. The fast path applies the
//! phase separator as one diagonal over the cost table and each mixer term
//! exactly; the gate-level path ([`layer_gates`]) decomposes both into
//! [`GateOp`]s so that noise can be attached per gate and gates can be counted.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use itertools::Itertools;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ising::{CostTable, IsingHamiltonian, QubitLayout};
use crate::statevector::{expectation_cost, GateOp, Pauli, PauliString, StateVector};
use crate::tsp::{Bitstring, Tour};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MixerKind {
    X,
    XY,
    RS,
}

impl MixerKind {
    pub const ALL: [MixerKind; 3] = [MixerKind::X, MixerKind::XY, MixerKind::RS];

    /// The initial state each mixer is paired with.
    pub fn initial_state(self) -> InitialStateKind {
        match self {
            MixerKind::X => InitialStateKind::Hadamard,
            MixerKind::XY => InitialStateKind::WRows,
            MixerKind::RS => InitialStateKind::Permutation,
        }
    }
}

impl fmt::Display for MixerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MixerKind::X => "X",
            MixerKind::XY => "XY",
            MixerKind::RS => "RS",
        };
        f.write_str(s)
    }
}

impl FromStr for MixerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "X" => Ok(MixerKind::X),
            "XY" => Ok(MixerKind::XY),
            "RS" => Ok(MixerKind::RS),
            other => Err(Error::Config(format!("unknown mixer {other:?} (expected X, XY or RS)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InitialStateKind {
    Hadamard,
    WRows,
    Permutation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub n: usize,
    pub mixer: MixerKind,
    /// Number of QAOA layers.
    pub p: usize,
}

impl AnsatzSpec {
    pub fn new(n: usize, mixer: MixerKind, p: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::Config(format!("need at least 3 cities, got {n}")));
        }
        if p == 0 {
            return Err(Error::Config("depth must be >= 1".into()));
        }
        Ok(AnsatzSpec { n, mixer, p })
    }

    pub fn num_qubits(&self) -> usize {
        QubitLayout::new(self.n).num_qubits()
    }

    pub fn with_depth(self, p: usize) -> Self {
        AnsatzSpec { p, ..self }
    }
}

/// Layer angles `(γ_k, β_k)`, wrapped into `[0, 2π)`.
///
/// The flat form used by optimizers interleaves layers: `[γ1, β1, γ2, β2, ...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub gammas: Vec<f64>,
    pub betas: Vec<f64>,
}

pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

impl ParamVector {
    pub fn new(gammas: Vec<f64>, betas: Vec<f64>) -> Result<Self> {
        if gammas.len() != betas.len() {
            return Err(Error::Dimension {
                expected: gammas.len(),
                got: betas.len(),
            });
        }
        Ok(ParamVector {
            gammas: gammas.into_iter().map(wrap_angle).collect(),
            betas: betas.into_iter().map(wrap_angle).collect(),
        })
    }

    pub fn zeros(p: usize) -> Self {
        ParamVector {
            gammas: vec![0.0; p],
            betas: vec![0.0; p],
        }
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if flat.len() % 2 != 0 {
            return Err(Error::Dimension {
                expected: flat.len() + 1,
                got: flat.len(),
            });
        }
        let (gammas, betas) = flat.chunks(2).map(|c| (c[0], c[1])).unzip();
        ParamVector::new(gammas, betas)
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.gammas
            .iter()
            .zip(&self.betas)
            .flat_map(|(&g, &b)| [g, b])
            .collect()
    }

    pub fn depth(&self) -> usize {
        self.gammas.len()
    }
}

pub fn build_initial_state(kind: InitialStateKind, n: usize) -> Result<StateVector> {
    if n < 3 {
        return Err(Error::Config(format!("need at least 3 cities, got {n}")));
    }
    let layout = QubitLayout::new(n);
    let q = layout.num_qubits();
    match kind {
        InitialStateKind::Hadamard => Ok(StateVector::uniform(q)),
        InitialStateKind::WRows => {
            // Product over city rows of W_{n-1} on that row's time qubits.
            let m = layout.side();
            let count = m.pow(m as u32);
            let amp = Complex64::new(1.0 / (count as f64).sqrt(), 0.0);
            let mut amps = vec![Complex64::new(0.0, 0.0); 1 << q];
            for times in (0..m).map(|_| 1..=m).multi_cartesian_product() {
                let index = times
                    .iter()
                    .enumerate()
                    .map(|(row, &t)| 1usize << layout.index_unchecked(row + 1, t))
                    .sum::<usize>();
                amps[index] = amp;
            }
            StateVector::from_amplitudes(amps)
        }
        InitialStateKind::Permutation => {
            let identity = Tour::new((0..n).collect())?;
            StateVector::init_basis_state(q, Bitstring::from_tour(&identity).to_index())
        }
    }
}

/// Time pairs visited by the XY mixer within one row, in application order.
fn xy_time_pairs(m: usize) -> Vec<(usize, usize)> {
    if m == 2 {
        vec![(1, 2)]
    } else {
        (1..=m).map(|t| (t, t % m + 1)).collect()
    }
}

fn xy_pairs(n: usize) -> Vec<(usize, usize)> {
    let layout = QubitLayout::new(n);
    let pairs = xy_time_pairs(layout.side());
    (1..n)
        .flat_map(|i| {
            pairs
                .iter()
                .map(move |&(t, s)| (layout.index_unchecked(i, t), layout.index_unchecked(i, s)))
        })
        .collect()
}

/// Row-swap terms: for each city pair `(i < j)`, the qubit pairs `((i,t), (j,t))` over all times.
fn row_swap_terms(n: usize) -> Vec<Vec<(usize, usize)>> {
    let layout = QubitLayout::new(n);
    (1..n)
        .tuple_combinations()
        .map(|(i, j)| {
            (1..n)
                .map(|t| (layout.index_unchecked(i, t), layout.index_unchecked(j, t)))
                .collect()
        })
        .collect()
}

/// Applies one mixer unitary `exp(-i β H_M)` on the fast path.
///
/// * X: `RX(2β)` on every qubit.
/// * XY: `exp(-iβ(XX+YY))` on cyclically adjacent time pairs of each city row.
/// * RS: for each city pair `(i<j)` in lexicographic order, the exact
///   `exp(-iβ S_ij)` where `S_ij = prod_t SWAP((i,t),(j,t))` exchanges the
///   two rows; one first-order product across pairs.
pub fn apply_mixer_layer(state: &mut StateVector, mixer: MixerKind, beta: f64, n: usize) -> Result<()> {
    let q = QubitLayout::new(n).num_qubits();
    if state.num_qubits() != q {
        return Err(Error::Dimension {
            expected: q,
            got: state.num_qubits(),
        });
    }
    match mixer {
        MixerKind::X => {
            for k in 0..q {
                state.apply(&GateOp::rx(2.0 * beta, k))?;
            }
        }
        MixerKind::XY => {
            for (a, b) in xy_pairs(n) {
                state.apply(&GateOp::xy(beta, a, b))?;
            }
        }
        MixerKind::RS => {
            for term in row_swap_terms(n) {
                state.apply_swap_rotation(beta, &term)?;
            }
        }
    }
    Ok(())
}

/// Gate-level form of one mixer unitary.
///
/// For RS, `S_ij = 2^{-m} prod_t (II + XX + YY + ZZ)` expands into `4^m`
/// mutually commuting Pauli strings; the all-identity string only adds a
/// global phase and is dropped, leaving `4^m - 1` rotations per term.
pub fn mixer_gates(mixer: MixerKind, beta: f64, n: usize) -> Vec<GateOp> {
    let q = QubitLayout::new(n).num_qubits();
    match mixer {
        MixerKind::X => (0..q).map(|k| GateOp::rx(2.0 * beta, k)).collect(),
        MixerKind::XY => xy_pairs(n).into_iter().map(|(a, b)| GateOp::xy(beta, a, b)).collect(),
        MixerKind::RS => {
            let mut gates = Vec::new();
            for term in row_swap_terms(n) {
                let m = term.len();
                let angle = beta / (1u64 << m) as f64;
                for code in 1..4usize.pow(m as u32) {
                    let mut letters = Vec::with_capacity(2 * m);
                    for (pos, &(a, b)) in term.iter().enumerate() {
                        let p = match (code >> (2 * pos)) & 3 {
                            1 => Pauli::X,
                            2 => Pauli::Y,
                            3 => Pauli::Z,
                            _ => continue,
                        };
                        letters.push((a, p));
                        letters.push((b, p));
                    }
                    gates.push(GateOp::pauli(
                        angle,
                        PauliString::new(letters).expect("row qubits are distinct"),
                    ));
                }
            }
            gates
        }
    }
}

/// Gate-level `exp(-i γ H_P)` up to the global phase of the offset.
pub fn phase_gates(ham: &IsingHamiltonian, gamma: f64) -> Vec<GateOp> {
    let mut gates = Vec::new();
    for (k, &c) in ham.linear.iter().enumerate() {
        if c != 0.0 {
            gates.push(GateOp::pauli(gamma * c, PauliString::new(vec![(k, Pauli::Z)]).unwrap()));
        }
    }
    for (&(i, j), &c) in &ham.quadratic {
        if c != 0.0 {
            let zz = PauliString::new(vec![(i, Pauli::Z), (j, Pauli::Z)]).unwrap();
            gates.push(GateOp::pauli(gamma * c, zz));
        }
    }
    gates
}

/// Gate sequence for one layer: phase separator, then mixer.
pub fn layer_gates(ham: &IsingHamiltonian, mixer: MixerKind, gamma: f64, beta: f64) -> Vec<GateOp> {
    let mut gates = phase_gates(ham, gamma);
    gates.extend(mixer_gates(mixer, beta, ham.n));
    gates
}

/// Full gate-level circuit (without state preparation).
pub fn build_circuit(spec: &AnsatzSpec, params: &ParamVector, ham: &IsingHamiltonian) -> Result<Vec<GateOp>> {
    check_params(spec, params)?;
    Ok(params
        .gammas
        .iter()
        .zip(&params.betas)
        .flat_map(|(&g, &b)| layer_gates(ham, spec.mixer, g, b))
        .collect())
}

fn check_params(spec: &AnsatzSpec, params: &ParamVector) -> Result<()> {
    if params.depth() != spec.p || params.betas.len() != spec.p {
        return Err(Error::Dimension {
            expected: spec.p,
            got: params.depth(),
        });
    }
    Ok(())
}

/// Final QAOA state `U_M(β_p) U_P(γ_p) ... U_M(β_1) U_P(γ_1) |s>` on the fast path.
pub fn prepare_state(spec: &AnsatzSpec, params: &ParamVector, table: &CostTable) -> Result<StateVector> {
    check_params(spec, params)?;
    if table.n() != spec.n {
        return Err(Error::Dimension {
            expected: spec.n,
            got: table.n(),
        });
    }
    let mut state = build_initial_state(spec.mixer.initial_state(), spec.n)?;
    for (&gamma, &beta) in params.gammas.iter().zip(&params.betas) {
        state.apply_cost_phase(gamma, table)?;
        apply_mixer_layer(&mut state, spec.mixer, beta, spec.n)?;
    }
    Ok(state)
}

/// Exact cost expectation and final state.
pub fn evaluate_ansatz(spec: &AnsatzSpec, params: &ParamVector, table: &CostTable) -> Result<(f64, StateVector)> {
    let state = prepare_state(spec, params, table)?;
    let e = expectation_cost(&state, table)?;
    Ok((e, state))
}

/// Reusable evaluator that keeps the initial state and a scratch buffer.
#[derive(Debug, Clone)]
pub struct AnsatzEvaluator {
    spec: AnsatzSpec,
    table: Arc<CostTable>,
    init: StateVector,
}

impl AnsatzEvaluator {
    pub fn new(spec: AnsatzSpec, table: Arc<CostTable>) -> Result<Self> {
        if table.n() != spec.n {
            return Err(Error::Dimension {
                expected: spec.n,
                got: table.n(),
            });
        }
        let init = build_initial_state(spec.mixer.initial_state(), spec.n)?;
        Ok(AnsatzEvaluator { spec, table, init })
    }

    pub fn spec(&self) -> &AnsatzSpec {
        &self.spec
    }

    pub fn table(&self) -> &Arc<CostTable> {
        &self.table
    }

    pub fn initial_state(&self) -> &StateVector {
        &self.init
    }

    /// State after the layers in `flat` (`[γ1, β1, ...]`, any depth).
    pub fn state(&self, flat: &[f64]) -> Result<StateVector> {
        let params = ParamVector::from_flat(flat)?;
        let mut state = self.init.clone();
        for (&gamma, &beta) in params.gammas.iter().zip(&params.betas) {
            state.apply_cost_phase(gamma, &self.table)?;
            apply_mixer_layer(&mut state, self.spec.mixer, beta, self.spec.n)?;
        }
        Ok(state)
    }

    pub fn expectation(&self, flat: &[f64]) -> Result<f64> {
        expectation_cost(&self.state(flat)?, &self.table)
    }
}

/// Logical gate counts for one QAOA layer, before any hardware transpilation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceEstimate {
    pub n: usize,
    pub mixer: MixerKind,
    pub qubits: usize,
    pub mixer_single_qubit_gates: usize,
    /// Multi-qubit mixer rotations keyed by arity.
    pub mixer_multi_qubit_gates: BTreeMap<usize, usize>,
    pub mixer_depth: usize,
    pub phase_single_qubit_gates: usize,
    pub phase_two_qubit_gates: usize,
    pub phase_depth: usize,
    pub layer_depth: usize,
    /// RS only: number of `(i<j)` row pairs.
    pub row_swap_terms: usize,
    /// RS only: Pauli-string rotations per row-swap term.
    pub strings_per_term: usize,
    /// RS only: widest string in a term.
    pub string_width: usize,
}

impl ResourceEstimate {
    pub fn mixer_multi_qubit_total(&self) -> usize {
        self.mixer_multi_qubit_gates.values().sum()
    }

    pub const CSV_HEADER: &'static str = "n,mixer,qubits,mixer_1q,mixer_2q,mixer_multi,mixer_depth,phase_1q,phase_2q,phase_depth,layer_depth,row_swap_terms,strings_per_term,string_width";

    pub fn csv_row(&self) -> String {
        let two = self.mixer_multi_qubit_gates.get(&2).copied().unwrap_or(0);
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.n,
            self.mixer,
            self.qubits,
            self.mixer_single_qubit_gates,
            two,
            self.mixer_multi_qubit_total() - two,
            self.mixer_depth,
            self.phase_single_qubit_gates,
            self.phase_two_qubit_gates,
            self.phase_depth,
            self.layer_depth,
            self.row_swap_terms,
            self.strings_per_term,
            self.string_width
        )
    }
}

/// ASAP scheduling depth of a gate sequence (gates sharing a qubit are serialized).
pub fn logical_depth(gates: &[Vec<usize>], num_qubits: usize) -> usize {
    let mut level = vec![0usize; num_qubits];
    let mut depth = 0;
    for qubits in gates {
        let layer = qubits.iter().map(|&q| level[q]).max().unwrap_or(0) + 1;
        for &q in qubits {
            level[q] = layer;
        }
        depth = depth.max(layer);
    }
    depth
}

/// Qubit supports of the phase separator for a graph with all weights nonzero:
/// every qubit, plus same-row, same-time and consecutive-time pairs.
pub fn phase_structure(n: usize) -> (Vec<usize>, Vec<(usize, usize)>) {
    let layout = QubitLayout::new(n);
    let m = layout.side();
    let mut pairs = std::collections::BTreeSet::new();
    for i in 1..=m {
        for (t, s) in (1..=m).tuple_combinations() {
            pairs.insert(ordered(layout.index_unchecked(i, t), layout.index_unchecked(i, s)));
            pairs.insert(ordered(layout.index_unchecked(t, i), layout.index_unchecked(s, i)));
        }
        for j in (1..=m).filter(|&j| j != i) {
            for t in 1..m {
                pairs.insert(ordered(layout.index_unchecked(i, t), layout.index_unchecked(j, t + 1)));
            }
        }
    }
    ((0..layout.num_qubits()).collect(), pairs.into_iter().collect())
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

pub fn estimate_resources(spec: &AnsatzSpec) -> ResourceEstimate {
    let q = spec.num_qubits();
    let mixer: Vec<Vec<usize>> = mixer_gates(spec.mixer, 1.0, spec.n)
        .iter()
        .map(GateOp::qubits)
        .collect();
    let (singles, pairs) = phase_structure(spec.n);
    let phase: Vec<Vec<usize>> = singles
        .iter()
        .map(|&k| vec![k])
        .chain(pairs.iter().map(|&(a, b)| vec![a, b]))
        .collect();

    let mut multi = BTreeMap::new();
    let mut mixer_single = 0;
    for g in &mixer {
        if g.len() == 1 {
            mixer_single += 1;
        } else {
            *multi.entry(g.len()).or_insert(0) += 1;
        }
    }
    let layer: Vec<Vec<usize>> = phase.iter().chain(&mixer).cloned().collect();
    let (terms, per_term, width) = match spec.mixer {
        MixerKind::RS => {
            let m = spec.n - 1;
            let terms = m * (m - 1) / 2;
            (terms, 4usize.pow(m as u32) - 1, 2 * m)
        }
        _ => (0, 0, 0),
    };
    ResourceEstimate {
        n: spec.n,
        mixer: spec.mixer,
        qubits: q,
        mixer_single_qubit_gates: mixer_single,
        mixer_multi_qubit_gates: multi,
        mixer_depth: logical_depth(&mixer, q),
        phase_single_qubit_gates: singles.len(),
        phase_two_qubit_gates: pairs.len(),
        phase_depth: logical_depth(&phase, q),
        layer_depth: logical_depth(&layer, q),
        row_swap_terms: terms,
        strings_per_term: per_term,
        string_width: width,
    }
}
