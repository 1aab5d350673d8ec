//! Qubit layout and the Ising form of the reduced TSP cost.
//!
//! Basis ordering: qubit `k` carries bit weight `2^k` in the basis-state index,
//! the same convention used by [`crate::statevector`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tsp::TspGraph;

/// Largest qubit count for which a dense cost table is built.
pub const TABLE_MAX_QUBITS: usize = 24;

/// Maps lattice point `(city i, time t)`, `1 <= i, t <= n-1`, to qubit `(n-1)(i-1) + (t-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QubitLayout {
    n: usize,
}

impl QubitLayout {
    pub fn new(n: usize) -> Self {
        QubitLayout { n }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Side of the square lattice, `n - 1`.
    pub fn side(&self) -> usize {
        self.n - 1
    }

    pub fn num_qubits(&self) -> usize {
        self.side() * self.side()
    }

    pub fn index(&self, city: usize, time: usize) -> Result<usize> {
        qubit_index(city, time, self.n)
    }

    pub(crate) fn index_unchecked(&self, city: usize, time: usize) -> usize {
        self.side() * (city - 1) + (time - 1)
    }

    /// Inverse map: qubit id to `(city, time)`.
    pub fn position(&self, qubit: usize) -> (usize, usize) {
        (qubit / self.side() + 1, qubit % self.side() + 1)
    }

    /// Qubits of one city row, ordered by time.
    pub fn row(&self, city: usize) -> Vec<usize> {
        (1..self.n).map(|t| self.index_unchecked(city, t)).collect()
    }
}

pub fn qubit_index(city: usize, time: usize, n: usize) -> Result<usize> {
    if n < 2 || city == 0 || time == 0 || city >= n || time >= n {
        return Err(Error::Layout { city, time, n });
    }
    Ok((n - 1) * (city - 1) + (time - 1))
}

/// `H = offset + sum_k c_k Z_k + sum_{k<l} c_kl Z_k Z_l`, diagonal in the computational basis.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingHamiltonian {
    pub n: usize,
    pub lambda: f64,
    pub offset: f64,
    pub linear: Vec<f64>,
    pub quadratic: BTreeMap<(usize, usize), f64>,
}

#[derive(Serialize, Deserialize)]
struct QuadraticTerm {
    i: usize,
    j: usize,
    c: f64,
}

#[derive(Serialize, Deserialize)]
struct HamiltonianFile {
    n: usize,
    lambda: f64,
    offset: f64,
    linear: Vec<f64>,
    quadratic: Vec<QuadraticTerm>,
}

impl Serialize for IsingHamiltonian {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        HamiltonianFile {
            n: self.n,
            lambda: self.lambda,
            offset: self.offset,
            linear: self.linear.clone(),
            quadratic: self
                .quadratic
                .iter()
                .map(|(&(i, j), &c)| QuadraticTerm { i, j, c })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for IsingHamiltonian {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let file = HamiltonianFile::deserialize(deserializer)?;
        let mut quadratic = BTreeMap::new();
        for term in file.quadratic {
            let key = (term.i.min(term.j), term.i.max(term.j));
            if key.0 == key.1 || key.1 >= file.linear.len() {
                return Err(serde::de::Error::custom(format!(
                    "bad quadratic term ({}, {})",
                    term.i, term.j
                )));
            }
            *quadratic.entry(key).or_insert(0.0) += term.c;
        }
        Ok(IsingHamiltonian {
            n: file.n,
            lambda: file.lambda,
            offset: file.offset,
            linear: file.linear,
            quadratic,
        })
    }
}

impl IsingHamiltonian {
    pub fn num_qubits(&self) -> usize {
        self.linear.len()
    }

    /// Diagonal element for basis state `index`, with `z_k = 1 - 2 x_k`.
    pub fn energy(&self, index: usize) -> f64 {
        let z = |k: usize| if (index >> k) & 1 == 1 { -1.0 } else { 1.0 };
        let mut e = self.offset;
        for (k, &c) in self.linear.iter().enumerate() {
            e += c * z(k);
        }
        for (&(i, j), &c) in &self.quadratic {
            e += c * z(i) * z(j);
        }
        e
    }
}

/// QUBO accumulator: `constant + sum a_k x_k + sum_{k<l} b_kl x_k x_l` with `x_k^2 = x_k`.
struct Qubo {
    constant: f64,
    linear: Vec<f64>,
    quadratic: BTreeMap<(usize, usize), f64>,
}

impl Qubo {
    fn new(q: usize) -> Self {
        Qubo {
            constant: 0.0,
            linear: vec![0.0; q],
            quadratic: BTreeMap::new(),
        }
    }

    fn add_pair(&mut self, a: usize, b: usize, w: f64) {
        if a == b {
            self.linear[a] += w;
        } else {
            *self.quadratic.entry((a.min(b), a.max(b))).or_insert(0.0) += w;
        }
    }

    /// Adds `w * (1 - sum_{k in group} x_k)^2`.
    fn add_one_hot_penalty(&mut self, group: &[usize], w: f64) {
        self.constant += w;
        for &k in group {
            // -2 x_k + x_k^2 = -x_k
            self.linear[k] -= w;
        }
        for (pos, &a) in group.iter().enumerate() {
            for &b in &group[pos + 1..] {
                self.add_pair(a, b, 2.0 * w);
            }
        }
    }

    /// Substitutes `x = (1 - z) / 2`.
    fn into_ising(self, n: usize, lambda: f64) -> IsingHamiltonian {
        let mut offset = self.constant;
        let mut linear = vec![0.0; self.linear.len()];
        for (k, &a) in self.linear.iter().enumerate() {
            offset += a / 2.0;
            linear[k] -= a / 2.0;
        }
        let mut quadratic = BTreeMap::new();
        for (&(i, j), &b) in &self.quadratic {
            offset += b / 4.0;
            linear[i] -= b / 4.0;
            linear[j] -= b / 4.0;
            quadratic.insert((i, j), b / 4.0);
        }
        IsingHamiltonian {
            n,
            lambda,
            offset,
            linear,
            quadratic,
        }
    }
}

/// Ising coefficients whose diagonal reproduces `cost_improved(x, lambda)` for every `x`.
pub fn build_ising(graph: &TspGraph, lambda: f64) -> Result<IsingHamiltonian> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidPenalty(lambda));
    }
    let n = graph.n();
    let layout = QubitLayout::new(n);
    let m = layout.side();
    let mut qubo = Qubo::new(layout.num_qubits());

    for i in 1..n {
        for j in 1..n {
            let w = graph.weight(i, j);
            if i == j || w == 0.0 {
                continue;
            }
            for t in 1..m {
                qubo.add_pair(layout.index_unchecked(i, t), layout.index_unchecked(j, t + 1), w);
            }
        }
    }
    for i in 1..n {
        let w = graph.weight(0, i);
        qubo.linear[layout.index_unchecked(i, 1)] += w;
        qubo.linear[layout.index_unchecked(i, m)] += w;
    }

    for t in 1..n {
        let column: Vec<usize> = (1..n).map(|i| layout.index_unchecked(i, t)).collect();
        qubo.add_one_hot_penalty(&column, lambda);
    }
    for i in 1..n {
        qubo.add_one_hot_penalty(&layout.row(i), lambda);
    }

    Ok(qubo.into_ising(n, lambda))
}

/// Classical cost of every basis state, indexed by basis-state integer.
#[derive(Debug, Clone, PartialEq)]
pub struct CostTable {
    n: usize,
    lambda: f64,
    costs: Vec<f64>,
}

impl CostTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn num_qubits(&self) -> usize {
        (self.n - 1) * (self.n - 1)
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.costs[index]
    }

    pub fn min(&self) -> f64 {
        self.costs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        self.costs.iter().sum::<f64>() / self.costs.len() as f64
    }

    /// All basis states attaining the minimum, ascending.
    pub fn argmin(&self) -> Vec<usize> {
        let min = self.min();
        self.costs
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c == min)
            .map(|(k, _)| k)
            .collect()
    }
}

pub fn cost_table(ham: &IsingHamiltonian) -> Result<CostTable> {
    let q = ham.num_qubits();
    if q > TABLE_MAX_QUBITS {
        return Err(Error::TableLimitExceeded {
            qubits: q,
            limit: TABLE_MAX_QUBITS,
        });
    }
    // Linear terms first for every index, then each ZZ term adds +-c on a
    // parity pattern; same arithmetic as `energy` but vectorized over states.
    let size = 1usize << q;
    let mut costs = vec![ham.offset; size];
    for (k, &c) in ham.linear.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        for (x, e) in costs.iter_mut().enumerate() {
            *e += if (x >> k) & 1 == 1 { -c } else { c };
        }
    }
    for (&(i, j), &c) in &ham.quadratic {
        if c == 0.0 {
            continue;
        }
        for (x, e) in costs.iter_mut().enumerate() {
            *e += if ((x >> i) ^ (x >> j)) & 1 == 1 { -c } else { c };
        }
    }
    Ok(CostTable {
        n: ham.n,
        lambda: ham.lambda,
        costs,
    })
}
