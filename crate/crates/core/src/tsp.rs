//! TSP instances, classical costs and the brute-force oracle.
//!
//! Bitstrings use the reduced encoding where city 0 is pinned to time 0, so a
//! tour over `n` cities is described by the `(n-1) x (n-1)` one-hot matrix
//! `x[i][t]` with `i, t` in `1..n`. Row = city, column = time.

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ising::QubitLayout;

/// Largest city count accepted by [`brute_force_solve`].
pub const ORACLE_MAX_CITIES: usize = 12;

/// Variance below which the skewness is reported as zero.
const DEGENERATE_VARIANCE: f64 = 1e-12;

/// Symmetric weighted complete graph.
///
/// Serialized as `{"n": int, "weights": [[...]]}` with the full matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphFile", into = "GraphFile")]
pub struct TspGraph {
    n: usize,
    weights: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    n: usize,
    weights: Vec<Vec<f64>>,
}

impl TryFrom<GraphFile> for TspGraph {
    type Error = Error;

    fn try_from(file: GraphFile) -> Result<Self> {
        if file.weights.len() != file.n {
            return Err(Error::InvalidGraph(format!(
                "declared n = {} but matrix has {} rows",
                file.n,
                file.weights.len()
            )));
        }
        TspGraph::new(file.weights)
    }
}

impl From<TspGraph> for GraphFile {
    fn from(graph: TspGraph) -> Self {
        GraphFile {
            n: graph.n,
            weights: graph.weights,
        }
    }
}

impl TspGraph {
    /// Validates symmetry, zero diagonal, nonnegative finite weights and `n >= 3`.
    pub fn new(weights: Vec<Vec<f64>>) -> Result<Self> {
        let n = weights.len();
        if n < 3 {
            return Err(Error::InvalidGraph(format!("need at least 3 cities, got {n}")));
        }
        for (i, row) in weights.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidGraph(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if row[i] != 0.0 {
                return Err(Error::InvalidGraph(format!("nonzero diagonal at {i}")));
            }
            for (j, &w) in row.iter().enumerate() {
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidGraph(format!("weight ({i},{j}) = {w}")));
                }
                if weights[j][i] != w {
                    return Err(Error::InvalidGraph(format!("asymmetric weight at ({i},{j})")));
                }
            }
        }
        Ok(TspGraph { n, weights })
    }

    /// Builds a graph from the upper-triangle edge list `(i, j, w)`.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut weights = vec![vec![0.0; n]; n];
        for &(i, j, w) in edges {
            if i >= n || j >= n || i == j {
                return Err(Error::InvalidGraph(format!("bad edge ({i},{j})")));
            }
            weights[i][j] = w;
            weights[j][i] = w;
        }
        TspGraph::new(weights)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i][j]
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    /// Weights of the `n(n-1)/2` distinct edges in `(i<j)` lexicographic order.
    pub fn edge_weights(&self) -> Vec<f64> {
        (0..self.n)
            .tuple_combinations()
            .map(|(i, j)| self.weights[i][j])
            .collect()
    }

    pub fn max_weight(&self) -> f64 {
        self.edge_weights().into_iter().fold(0.0, f64::max)
    }

    /// Same graph with every edge weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let weights = self
            .weights
            .iter()
            .map(|row| row.iter().map(|w| w * factor).collect())
            .collect();
        TspGraph::new(weights)
    }
}

/// Visiting order starting at city 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Tour(Vec<usize>);

impl Tour {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        if order.first() != Some(&0) {
            return Err(Error::InvalidTour(format!("{order:?} does not start at city 0")));
        }
        let mut seen = vec![false; order.len()];
        for &c in &order {
            if c >= order.len() || seen[c] {
                return Err(Error::InvalidTour(format!("{order:?} is not a permutation")));
            }
            seen[c] = true;
        }
        Ok(Tour(order))
    }

    pub fn order(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The same cycle traversed in the opposite direction.
    pub fn reversed(&self) -> Tour {
        let mut order = vec![0];
        order.extend(self.0[1..].iter().rev());
        Tour(order)
    }
}

impl std::fmt::Display for Tour {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({})", self.0.iter().join(","))
    }
}

/// Binary decision variables in layout order: `bits[k]` is qubit `k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Bitstring {
    n: usize,
    bits: Vec<u8>,
}

impl Bitstring {
    pub fn new(n: usize, bits: Vec<u8>) -> Result<Self> {
        let expected = (n - 1) * (n - 1);
        if bits.len() != expected {
            return Err(Error::LayoutMismatch {
                expected,
                got: bits.len(),
            });
        }
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidTour("bits must be 0 or 1".into()));
        }
        Ok(Bitstring { n, bits })
    }

    /// Parses a string of '0'/'1' characters, qubit 0 first.
    pub fn parse(n: usize, s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::InvalidTour(format!("unexpected character {other:?}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Bitstring::new(n, bits)
    }

    /// Bitstring of a basis-state index (qubit `k` is bit `k`).
    pub fn from_index(n: usize, index: usize) -> Self {
        let q = (n - 1) * (n - 1);
        let bits = (0..q).map(|k| ((index >> k) & 1) as u8).collect();
        Bitstring { n, bits }
    }

    pub fn to_index(&self) -> usize {
        self.bits
            .iter()
            .enumerate()
            .fold(0, |acc, (k, &b)| acc | ((b as usize) << k))
    }

    pub fn from_tour(tour: &Tour) -> Self {
        let n = tour.len();
        let layout = QubitLayout::new(n);
        let mut bits = vec![0u8; layout.num_qubits()];
        for (t, &city) in tour.order().iter().enumerate().skip(1) {
            bits[layout.index_unchecked(city, t)] = 1;
        }
        Bitstring { n, bits }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Decision variable `x_{i,t}` for `i, t` in `1..n`.
    pub fn get(&self, city: usize, time: usize) -> u8 {
        self.bits[QubitLayout::new(self.n).index_unchecked(city, time)]
    }

    /// Decodes to a tour when every row and column has exactly one set bit.
    pub fn decode(&self) -> Option<Tour> {
        let m = self.n - 1;
        let mut order = vec![0usize; self.n];
        for t in 1..=m {
            let cities: Vec<usize> = (1..=m).filter(|&i| self.get(i, t) == 1).collect();
            if cities.len() != 1 {
                return None;
            }
            order[t] = cities[0];
        }
        for i in 1..=m {
            if (1..=m).map(|t| self.get(i, t) as usize).sum::<usize>() != 1 {
                return None;
            }
        }
        Some(Tour(order))
    }
}

impl std::fmt::Display for Bitstring {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in &self.bits {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BitstringClass {
    True,
    False,
    Invalid,
}

/// Total length of the closed tour, including the edge back to city 0.
pub fn tour_cost(graph: &TspGraph, tour: &Tour) -> Result<f64> {
    if tour.len() != graph.n() {
        return Err(Error::InvalidTour(format!(
            "tour visits {} cities, graph has {}",
            tour.len(),
            graph.n()
        )));
    }
    let order = tour.order();
    Ok(order
        .iter()
        .zip(order.iter().cycle().skip(1))
        .map(|(&a, &b)| graph.weight(a, b))
        .sum())
}

/// Exact optimum with every optimal fixed-start tour (reversal pairs included).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub min_cost: f64,
    pub optimal_tours: Vec<Tour>,
}

impl Solution {
    /// Whether `cost` ties the optimum. Integer instances compare exactly.
    pub fn is_optimal_cost(&self, cost: f64) -> bool {
        (cost - self.min_cost).abs() <= 1e-9 * self.min_cost.abs().max(1.0)
    }

    /// Basis-state indices of the optimal tours, sorted.
    pub fn true_indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = self
            .optimal_tours
            .iter()
            .map(|t| Bitstring::from_tour(t).to_index())
            .collect();
        idx.sort_unstable();
        idx
    }
}

/// Enumerates all `(n-1)!` tours that start at city 0.
pub fn brute_force_solve(graph: &TspGraph) -> Result<Solution> {
    let n = graph.n();
    if n > ORACLE_MAX_CITIES {
        return Err(Error::OracleLimitExceeded {
            n,
            limit: ORACLE_MAX_CITIES,
        });
    }
    let mut best = f64::INFINITY;
    let mut tours = Vec::new();
    for perm in (1..n).permutations(n - 1) {
        let mut order = Vec::with_capacity(n);
        order.push(0);
        order.extend(perm);
        let tour = Tour(order);
        let cost = tour_cost(graph, &tour)?;
        let tol = if best.is_finite() {
            1e-9 * best.abs().max(1.0)
        } else {
            0.0
        };
        if cost < best - tol {
            best = cost;
            tours.clear();
            tours.push(tour);
        } else if (cost - best).abs() <= tol {
            tours.push(tour);
        }
    }
    tours.sort();
    Ok(Solution {
        min_cost: best,
        optimal_tours: tours,
    })
}

/// Classifies `x` against a precomputed oracle solution.
pub fn classify_with(graph: &TspGraph, solution: &Solution, x: &Bitstring) -> Result<BitstringClass> {
    check_layout(graph, x)?;
    Ok(match x.decode() {
        None => BitstringClass::Invalid,
        Some(tour) => {
            if solution.is_optimal_cost(tour_cost(graph, &tour)?) {
                BitstringClass::True
            } else {
                BitstringClass::False
            }
        }
    })
}

pub fn classify_bitstring(graph: &TspGraph, x: &Bitstring) -> Result<BitstringClass> {
    check_layout(graph, x)?;
    let solution = brute_force_solve(graph)?;
    classify_with(graph, &solution, x)
}

fn check_layout(graph: &TspGraph, x: &Bitstring) -> Result<()> {
    let expected = (graph.n() - 1) * (graph.n() - 1);
    if x.n() != graph.n() || x.bits().len() != expected {
        return Err(Error::LayoutMismatch {
            expected,
            got: x.bits().len(),
        });
    }
    Ok(())
}

/// Distance part of the reduced cost: consecutive-time pairs among cities
/// `1..n` plus the two edges that touch the pinned city 0.
pub fn cost_distance(graph: &TspGraph, x: &Bitstring) -> Result<f64> {
    check_layout(graph, x)?;
    let n = graph.n();
    let m = n - 1;
    let mut total = 0.0;
    for i in 1..n {
        for j in 1..n {
            for t in 1..m {
                if x.get(i, t) == 1 && x.get(j, t + 1) == 1 {
                    total += graph.weight(i, j);
                }
            }
        }
    }
    for i in 1..n {
        total += graph.weight(0, i) * (x.get(i, 1) as f64 + x.get(i, m) as f64);
    }
    Ok(total)
}

/// Row and column one-hot violations: `sum_t (1 - sum_i x)^2 + sum_i (1 - sum_t x)^2`.
pub fn cost_penalty(graph: &TspGraph, x: &Bitstring) -> Result<f64> {
    check_layout(graph, x)?;
    let m = graph.n() - 1;
    let mut total = 0.0;
    for t in 1..=m {
        let s: f64 = (1..=m).map(|i| x.get(i, t) as f64).sum();
        total += (1.0 - s).powi(2);
    }
    for i in 1..=m {
        let s: f64 = (1..=m).map(|t| x.get(i, t) as f64).sum();
        total += (1.0 - s).powi(2);
    }
    Ok(total)
}

/// Reduced cost `C'(x) = C'_dist(x) + lambda * C'_penalty(x)`.
pub fn cost_improved(graph: &TspGraph, x: &Bitstring, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidPenalty(lambda));
    }
    Ok(cost_distance(graph, x)? + lambda * cost_penalty(graph, x)?)
}

/// Fisher-Pearson moment coefficient of the edge-weight distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewnessReport {
    pub g: f64,
    pub m2: f64,
    pub m3: f64,
    pub mean: f64,
    /// Set when the variance vanished and `g` was forced to zero.
    pub degenerate: bool,
}

pub fn skewness(graph: &TspGraph) -> SkewnessReport {
    let edges = graph.edge_weights();
    let count = edges.len() as f64;
    let mean = edges.iter().sum::<f64>() / count;
    let moment = |k: i32| edges.iter().map(|w| (w - mean).powi(k)).sum::<f64>() / count;
    let m2 = moment(2);
    let m3 = moment(3);
    let degenerate = m2 < DEGENERATE_VARIANCE;
    let g = if degenerate { 0.0 } else { m3 / m2.powf(1.5) };
    SkewnessReport {
        g,
        m2,
        m3,
        mean,
        degenerate,
    }
}

/// Integer weights drawn uniformly from `1..=max_weight` per unordered pair.
pub fn gen_random_graph(n: usize, max_weight: u32, seed: u64) -> Result<TspGraph> {
    if n < 3 {
        return Err(Error::InvalidGraph(format!("need at least 3 cities, got {n}")));
    }
    if max_weight == 0 {
        return Err(Error::InvalidGraph("max_weight must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let w = rng.gen_range(1..=max_weight) as f64;
            weights[i][j] = w;
            weights[j][i] = w;
        }
    }
    TspGraph::new(weights)
}
