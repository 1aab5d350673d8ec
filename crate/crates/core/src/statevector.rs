//! Dense statevector engine.
//!
//! Basis ordering: qubit `k` is bit `k` (weight `2^k`) of the basis index.
//! Gate conventions:
//!
//! * `Rx(θ)            = exp(-i θ/2 X)`
//! * `XyRot(β; a, b)   = exp(-i β (X_a X_b + Y_a Y_b))`
//! * `PauliRot(θ; P)   = exp(-i θ P)`
//! * `DiagonalPhase(γ) : ψ[x] -> exp(-i γ cost[x]) ψ[x]`

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ising::CostTable;

const NORM_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    X,
    Y,
    Z,
}

/// Tensor product of Pauli letters on distinct qubits (identity elsewhere).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    terms: Vec<(usize, Pauli)>,
    flip: usize,
    sign: usize,
    num_y: u32,
}

impl PauliString {
    pub fn new(mut terms: Vec<(usize, Pauli)>) -> Result<Self> {
        terms.sort_unstable();
        if terms.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Gate(format!("repeated qubit in Pauli string {terms:?}")));
        }
        let mut flip = 0;
        let mut sign = 0;
        let mut num_y = 0;
        for &(q, p) in &terms {
            if q >= usize::BITS as usize - 1 {
                return Err(Error::Gate(format!("qubit {q} out of range")));
            }
            match p {
                Pauli::X => flip |= 1 << q,
                Pauli::Y => {
                    flip |= 1 << q;
                    sign |= 1 << q;
                    num_y += 1;
                }
                Pauli::Z => sign |= 1 << q,
            }
        }
        Ok(PauliString {
            terms,
            flip,
            sign,
            num_y,
        })
    }

    pub fn terms(&self) -> &[(usize, Pauli)] {
        &self.terms
    }

    pub fn qubits(&self) -> impl Iterator<Item = usize> + '_ {
        self.terms.iter().map(|&(q, _)| q)
    }

    pub fn weight(&self) -> usize {
        self.terms.len()
    }

    fn max_qubit(&self) -> Option<usize> {
        self.terms.last().map(|&(q, _)| q)
    }

    /// `<x ^ flip| P |x>`.
    #[inline]
    fn phase(&self, x: usize) -> Complex64 {
        let base = match self.num_y % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        if (x & self.sign).count_ones() % 2 == 1 {
            -base
        } else {
            base
        }
    }
}

impl std::fmt::Display for PauliString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (k, (q, p)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " ")?;
            }
            write!(f, "{p:?}{q}")?;
        }
        Ok(())
    }
}

/// One circuit operation. Angles are radians.
#[derive(Debug, Clone)]
pub enum GateOp {
    Rx { angle: f64, qubit: usize },
    XyRot { angle: f64, a: usize, b: usize },
    PauliRot { angle: f64, string: PauliString },
    DiagonalPhase { angle: f64, table: Arc<CostTable> },
}

impl GateOp {
    pub fn rx(angle: f64, qubit: usize) -> Self {
        GateOp::Rx { angle, qubit }
    }

    pub fn xy(angle: f64, a: usize, b: usize) -> Self {
        GateOp::XyRot { angle, a, b }
    }

    pub fn pauli(angle: f64, string: PauliString) -> Self {
        GateOp::PauliRot { angle, string }
    }

    /// Qubits the gate touches; empty for the whole-register diagonal phase.
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            GateOp::Rx { qubit, .. } => vec![*qubit],
            GateOp::XyRot { a, b, .. } => vec![*a, *b],
            GateOp::PauliRot { string, .. } => string.qubits().collect(),
            GateOp::DiagonalPhase { .. } => Vec::new(),
        }
    }

    fn validate(&self, num_qubits: usize) -> Result<()> {
        match self {
            GateOp::Rx { qubit, .. } if *qubit >= num_qubits => Err(Error::Gate(format!(
                "qubit {qubit} out of range for {num_qubits} qubits"
            ))),
            GateOp::XyRot { a, b, .. } => {
                if a == b {
                    Err(Error::Gate(format!("XY rotation on coincident qubits {a}")))
                } else if *a >= num_qubits || *b >= num_qubits {
                    Err(Error::Gate(format!(
                        "qubits ({a},{b}) out of range for {num_qubits} qubits"
                    )))
                } else {
                    Ok(())
                }
            }
            GateOp::PauliRot { string, .. } => match string.max_qubit() {
                Some(q) if q >= num_qubits => Err(Error::Gate(format!(
                    "Pauli string {string} out of range for {num_qubits} qubits"
                ))),
                _ => Ok(()),
            },
            GateOp::DiagonalPhase { table, .. } if table.len() != 1 << num_qubits => Err(Error::Dimension {
                expected: 1 << num_qubits,
                got: table.len(),
            }),
            _ => Ok(()),
        }
    }
}

/// `v` with a zero bit inserted at position `p`.
#[inline]
fn insert_zero(v: usize, p: usize) -> usize {
    ((v >> p) << (p + 1)) | (v & ((1 << p) - 1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn init_basis_state(num_qubits: usize, index: usize) -> Result<Self> {
        let size = 1usize << num_qubits;
        if index >= size {
            return Err(Error::Index {
                index,
                qubits: num_qubits,
            });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); size];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(StateVector { num_qubits, amps })
    }

    /// `|+>^q`.
    pub fn uniform(num_qubits: usize) -> Self {
        let size = 1usize << num_qubits;
        let a = Complex64::new(1.0 / (size as f64).sqrt(), 0.0);
        StateVector {
            num_qubits,
            amps: vec![a; size],
        }
    }

    /// Takes ownership of explicit amplitudes; the length must be a power of two and the norm 1.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        if !amps.len().is_power_of_two() {
            return Err(Error::Dimension {
                expected: amps.len().next_power_of_two(),
                got: amps.len(),
            });
        }
        let state = StateVector {
            num_qubits: amps.len().trailing_zeros() as usize,
            amps,
        };
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Gate(format!("amplitudes not normalized (norm^2 = {norm})")));
        }
        Ok(state)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            .norm_sqr()
    }

    pub fn copy_from(&mut self, other: &StateVector) {
        self.num_qubits = other.num_qubits;
        self.amps.clear();
        self.amps.extend_from_slice(&other.amps);
    }

    pub fn apply(&mut self, gate: &GateOp) -> Result<()> {
        gate.validate(self.num_qubits)?;
        match gate {
            GateOp::Rx { angle, qubit } => self.rx(*angle, *qubit),
            GateOp::XyRot { angle, a, b } => self.xy_rot(*angle, *a, *b),
            GateOp::PauliRot { angle, string } => self.pauli_rot(*angle, string),
            GateOp::DiagonalPhase { angle, table } => self.diagonal_phase(*angle, table.costs()),
        }
        Ok(())
    }

    pub fn apply_all<'a>(&mut self, gates: impl IntoIterator<Item = &'a GateOp>) -> Result<()> {
        for gate in gates {
            self.apply(gate)?;
        }
        Ok(())
    }

    fn rx(&mut self, theta: f64, qubit: usize) {
        let (s, c) = (theta / 2.0).sin_cos();
        let mis = Complex64::new(0.0, -s);
        let stride = 1usize << qubit;
        for base in (0..self.amps.len()).step_by(2 * stride) {
            for x in base..base + stride {
                let y = x + stride;
                let (a0, a1) = (self.amps[x], self.amps[y]);
                self.amps[x] = a0 * c + a1 * mis;
                self.amps[y] = a0 * mis + a1 * c;
            }
        }
    }

    fn xy_rot(&mut self, beta: f64, a: usize, b: usize) {
        // XX + YY = 2(|01><10| + |10><01|) on the (a, b) pair.
        let (s, c) = (2.0 * beta).sin_cos();
        let mis = Complex64::new(0.0, -s);
        let (lo, hi) = (a.min(b), a.max(b));
        let (ma, mb) = (1usize << a, 1usize << b);
        for r in 0..self.amps.len() >> 2 {
            let base = insert_zero(insert_zero(r, lo), hi);
            let x = base | mb;
            let y = base | ma;
            let (ax, ay) = (self.amps[x], self.amps[y]);
            self.amps[x] = ax * c + ay * mis;
            self.amps[y] = ay * c + ax * mis;
        }
    }

    fn pauli_rot(&mut self, theta: f64, string: &PauliString) {
        let (s, c) = theta.sin_cos();
        if string.flip == 0 {
            // Diagonal: P|x> = ±|x>.
            let plus = Complex64::new(c, -s);
            let minus = Complex64::new(c, s);
            for (x, a) in self.amps.iter_mut().enumerate() {
                *a *= if (x & string.sign).count_ones() % 2 == 1 {
                    minus
                } else {
                    plus
                };
            }
            return;
        }
        let mis = Complex64::new(0.0, -s);
        let low = string.flip.trailing_zeros() as usize;
        for r in 0..self.amps.len() >> 1 {
            let x = insert_zero(r, low);
            let y = x ^ string.flip;
            let (ax, ay) = (self.amps[x], self.amps[y]);
            self.amps[x] = ax * c + mis * string.phase(y) * ay;
            self.amps[y] = ay * c + mis * string.phase(x) * ax;
        }
    }

    fn diagonal_phase(&mut self, gamma: f64, costs: &[f64]) {
        for (a, &cost) in self.amps.iter_mut().zip(costs) {
            *a *= Complex64::cis(-gamma * cost);
        }
    }

    /// Multiplies each amplitude by `exp(-i γ cost[x])`.
    pub fn apply_cost_phase(&mut self, gamma: f64, table: &CostTable) -> Result<()> {
        if table.len() != self.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                got: table.len(),
            });
        }
        self.diagonal_phase(gamma, table.costs());
        Ok(())
    }

    /// Applies the Pauli operator itself (used for error insertion).
    pub fn apply_pauli(&mut self, string: &PauliString) -> Result<()> {
        if let Some(q) = string.max_qubit() {
            if q >= self.num_qubits {
                return Err(Error::Gate(format!("Pauli string {string} out of range")));
            }
        }
        if string.flip == 0 {
            for (x, a) in self.amps.iter_mut().enumerate() {
                if (x & string.sign).count_ones() % 2 == 1 {
                    *a = -*a;
                }
            }
            return Ok(());
        }
        let low = string.flip.trailing_zeros() as usize;
        for r in 0..self.amps.len() >> 1 {
            let x = insert_zero(r, low);
            let y = x ^ string.flip;
            let (ax, ay) = (self.amps[x], self.amps[y]);
            self.amps[y] = string.phase(x) * ax;
            self.amps[x] = string.phase(y) * ay;
        }
        Ok(())
    }

    /// `exp(-i θ S)` where `S` swaps the qubits of every listed pair at once.
    ///
    /// `S` is a Hermitian involution, so the exponential is `cos θ - i sin θ S`.
    pub fn apply_swap_rotation(&mut self, theta: f64, pairs: &[(usize, usize)]) -> Result<()> {
        for &(a, b) in pairs {
            if a == b || a >= self.num_qubits || b >= self.num_qubits {
                return Err(Error::Gate(format!("bad swap pair ({a},{b})")));
            }
        }
        let (s, c) = theta.sin_cos();
        let mis = Complex64::new(0.0, -s);
        let swap = |x: usize| {
            pairs.iter().fold(x, |acc, &(a, b)| {
                let (ba, bb) = ((x >> a) & 1, (x >> b) & 1);
                if ba == bb {
                    acc
                } else {
                    acc ^ (1 << a) ^ (1 << b)
                }
            })
        };
        for x in 0..self.amps.len() {
            let y = swap(x);
            if y == x {
                self.amps[x] *= Complex64::new(c, -s);
            } else if x < y {
                let (ax, ay) = (self.amps[x], self.amps[y]);
                self.amps[x] = ax * c + ay * mis;
                self.amps[y] = ay * c + ax * mis;
            }
        }
        Ok(())
    }
}

/// Exact `sum_x |ψ[x]|^2 cost[x]`.
pub fn expectation_cost(state: &StateVector, table: &CostTable) -> Result<f64> {
    if table.len() != state.len() {
        return Err(Error::Dimension {
            expected: state.len(),
            got: table.len(),
        });
    }
    Ok(state
        .amps
        .iter()
        .zip(table.costs())
        .map(|(a, c)| a.norm_sqr() * c)
        .sum())
}

/// Measurement histogram keyed by basis-state index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotCounts {
    pub shots: usize,
    pub counts: BTreeMap<usize, usize>,
}

impl ShotCounts {
    fn new() -> Self {
        ShotCounts {
            shots: 0,
            counts: BTreeMap::new(),
        }
    }

    fn record(&mut self, index: usize) {
        self.shots += 1;
        *self.counts.entry(index).or_insert(0) += 1;
    }

    pub fn count(&self, index: usize) -> usize {
        self.counts.get(&index).copied().unwrap_or(0)
    }

    /// Empirical distribution as a dense vector of length `size`.
    pub fn probabilities(&self, size: usize) -> Vec<f64> {
        let mut p = vec![0.0; size];
        for (&k, &c) in &self.counts {
            p[k] = c as f64 / self.shots as f64;
        }
        p
    }

    pub fn mean_cost(&self, table: &CostTable) -> f64 {
        self.counts.iter().map(|(&k, &c)| c as f64 * table.get(k)).sum::<f64>() / self.shots as f64
    }
}

fn cumulative(probs: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    probs
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect()
}

#[inline]
fn draw(cdf: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total = *cdf.last().expect("non-empty distribution");
    let u = rng.gen::<f64>() * total;
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

/// i.i.d. computational-basis measurements, deterministic per seed.
pub fn sample(state: &StateVector, shots: usize, seed: u64) -> ShotCounts {
    let cdf = cumulative(&state.probabilities());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = ShotCounts::new();
    for _ in 0..shots {
        counts.record(draw(&cdf, &mut rng));
    }
    counts
}

/// Depolarizing error rates; multi-qubit gates fail ten times as often as single-qubit ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub p1: f64,
    pub p2: f64,
}

impl NoiseSpec {
    pub const MAX_P1: f64 = 0.1;

    pub fn new(p1: f64) -> Result<Self> {
        if !(0.0..=Self::MAX_P1).contains(&p1) {
            return Err(Error::Noise(format!("p1 = {p1} outside [0, {}]", Self::MAX_P1)));
        }
        Ok(NoiseSpec { p1, p2: 10.0 * p1 })
    }

    pub fn noiseless() -> Self {
        NoiseSpec { p1: 0.0, p2: 0.0 }
    }

    /// Error probability after `gate`; the ideal diagonal phase is treated as noise-free.
    fn rate(&self, gate: &GateOp) -> f64 {
        match gate {
            GateOp::DiagonalPhase { .. } => 0.0,
            g if g.qubits().len() == 1 => self.p1,
            _ => self.p2,
        }
    }
}

/// Uniformly random non-identity Pauli string over `qubits`.
fn random_error(qubits: &[usize], rng: &mut ChaCha8Rng) -> PauliString {
    let k = qubits.len() as u32;
    let code = rng.gen_range(1..4usize.pow(k));
    let terms = qubits
        .iter()
        .enumerate()
        .filter_map(|(pos, &q)| match (code >> (2 * pos)) & 3 {
            1 => Some((q, Pauli::X)),
            2 => Some((q, Pauli::Y)),
            3 => Some((q, Pauli::Z)),
            _ => None,
        })
        .collect();
    PauliString::new(terms).expect("distinct gate qubits")
}

/// Memory budget for cached noiseless prefix states in [`run_noisy`].
const CHECKPOINT_BYTES: usize = 64 << 20;

/// Pauli-twirl trajectory simulation of a depolarizing noise model.
///
/// For every shot, each gate independently fails with its rate and is then
/// followed by a uniformly random non-identity Pauli on its qubits; the shot
/// is measured once at the end. Error locations come from a stream separate
/// from the measurement stream, so with zero noise the counts equal
/// [`sample`] of the noiseless output for the same seed.
pub fn run_noisy(
    circuit: &[GateOp],
    init: &StateVector,
    noise: &NoiseSpec,
    shots: usize,
    seed: u64,
) -> Result<ShotCounts> {
    for gate in circuit {
        gate.validate(init.num_qubits)?;
    }
    let state_bytes = init.len() * std::mem::size_of::<Complex64>();
    let stride = (circuit.len() * state_bytes / CHECKPOINT_BYTES).max(1);

    // checkpoints[k] = state after gates[..k * stride]
    let mut checkpoints = vec![init.clone()];
    let mut ideal = init.clone();
    for (g, gate) in circuit.iter().enumerate() {
        ideal.apply(gate)?;
        if (g + 1) % stride == 0 && g + 1 < circuit.len() {
            checkpoints.push(ideal.clone());
        }
    }
    let ideal_cdf = cumulative(&ideal.probabilities());
    let rates: Vec<f64> = circuit.iter().map(|g| noise.rate(g)).collect();
    let noisy = rates.iter().any(|&r| r > 0.0);

    let mut measure_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
    noise_rng.set_stream(1);

    let mut counts = ShotCounts::new();
    let mut work = init.clone();
    let mut events: Vec<(usize, PauliString)> = Vec::new();
    for _ in 0..shots {
        events.clear();
        if noisy {
            for (g, &rate) in rates.iter().enumerate() {
                if rate > 0.0 && noise_rng.gen::<f64>() < rate {
                    events.push((g, random_error(&circuit[g].qubits(), &mut noise_rng)));
                }
            }
        }
        if events.is_empty() {
            counts.record(draw(&ideal_cdf, &mut measure_rng));
            continue;
        }
        let first = events[0].0;
        let start = (first / stride).min(checkpoints.len() - 1);
        work.copy_from(&checkpoints[start]);
        let mut next = 0;
        for (g, gate) in circuit.iter().enumerate().skip(start * stride) {
            work.apply(gate)?;
            while next < events.len() && events[next].0 == g {
                work.apply_pauli(&events[next].1)?;
                next += 1;
            }
        }
        let cdf = cumulative(&work.probabilities());
        counts.record(draw(&cdf, &mut measure_rng));
    }
    Ok(counts)
}
