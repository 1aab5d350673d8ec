//! Solution-quality metrics over a distribution of measured basis states.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ising::CostTable;
use crate::tsp::{tour_cost, Bitstring, BitstringClass, Solution, TspGraph};

pub const DEFAULT_TOP_K: usize = 32;

/// Ratio of the achieved expected cost to the optimal tour cost.
pub fn approximation_ratio(expectation: f64, ideal: f64) -> Result<f64> {
    if !(ideal > 0.0) {
        return Err(Error::Metric(format!("ideal cost must be positive, got {ideal}")));
    }
    Ok(expectation / ideal)
}

fn check_distribution(probs: &[f64], true_set: &[usize]) -> Result<()> {
    if true_set.is_empty() {
        return Err(Error::Metric("empty set of optimal states".into()));
    }
    if let Some(&x) = true_set.iter().find(|&&x| x >= probs.len()) {
        return Err(Error::Index {
            index: x,
            qubits: probs.len().trailing_zeros() as usize,
        });
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Metric(format!("probabilities sum to {total}")));
    }
    Ok(())
}

/// Percentage of probability mass on optimal-tour encodings.
pub fn true_percentage(probs: &[f64], true_set: &[usize]) -> Result<f64> {
    check_distribution(probs, true_set)?;
    Ok(100.0 * true_set.iter().map(|&x| probs[x]).sum::<f64>())
}

/// One plus the number of non-optimal states strictly more likely than the most likely optimal one.
pub fn rank(probs: &[f64], true_set: &[usize]) -> Result<usize> {
    check_distribution(probs, true_set)?;
    let best = true_set.iter().map(|&x| probs[x]).fold(f64::NEG_INFINITY, f64::max);
    let mut is_true = vec![false; probs.len()];
    for &x in true_set {
        is_true[x] = true;
    }
    let above = probs.iter().zip(&is_true).filter(|(&p, &t)| !t && p > best).count();
    Ok(1 + above)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassPercentages {
    #[serde(rename = "true")]
    pub true_: f64,
    #[serde(rename = "false")]
    pub false_: f64,
    pub invalid: f64,
}

impl ClassPercentages {
    pub fn total(&self) -> f64 {
        self.true_ + self.false_ + self.invalid
    }
}

/// Class of every basis state of an instance, indexed by basis state.
pub fn classify_all(graph: &TspGraph, solution: &Solution) -> Result<Vec<BitstringClass>> {
    let n = graph.n();
    let q = (n - 1) * (n - 1);
    (0..1usize << q)
        .map(|x| {
            Ok(match Bitstring::from_index(n, x).decode() {
                None => BitstringClass::Invalid,
                Some(t) if solution.is_optimal_cost(tour_cost(graph, &t)?) => BitstringClass::True,
                Some(_) => BitstringClass::False,
            })
        })
        .collect()
}

pub fn class_percentages(probs: &[f64], classes: &[BitstringClass]) -> Result<ClassPercentages> {
    if probs.len() != classes.len() {
        return Err(Error::Dimension {
            expected: classes.len(),
            got: probs.len(),
        });
    }
    let mut out = ClassPercentages {
        true_: 0.0,
        false_: 0.0,
        invalid: 0.0,
    };
    for (&p, class) in probs.iter().zip(classes) {
        match class {
            BitstringClass::True => out.true_ += p,
            BitstringClass::False => out.false_ += p,
            BitstringClass::Invalid => out.invalid += p,
        }
    }
    out.true_ *= 100.0;
    out.false_ *= 100.0;
    out.invalid *= 100.0;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateProbability {
    pub index: usize,
    pub bitstring: String,
    pub probability: f64,
    pub cost: f64,
    pub class: BitstringClass,
}

/// The `k` most likely states, by descending probability then ascending index.
pub fn top_states(
    probs: &[f64],
    k: usize,
    n: usize,
    table: &CostTable,
    classes: &[BitstringClass],
) -> Vec<StateProbability> {
    let mut order: Vec<usize> = (0..probs.len()).filter(|&x| probs[x] > 0.0).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    order
        .into_iter()
        .take(k)
        .map(|x| StateProbability {
            index: x,
            bitstring: Bitstring::from_index(n, x).to_string(),
            probability: probs[x],
            cost: table.get(x),
            class: classes[x],
        })
        .collect()
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ising::{build_ising, cost_table};
    use crate::tsp::brute_force_solve;

    fn ring4() -> TspGraph {
        TspGraph::from_edges(
            4,
            &[
                (0, 1, 1.0),
                (1, 2, 1.0),
                (2, 3, 1.0),
                (0, 3, 1.0),
                (0, 2, 10.0),
                (1, 3, 10.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn ar_examples() {
        assert_eq!(approximation_ratio(7.0, 7.0).unwrap(), 1.0);
        assert_eq!(approximation_ratio(9.0, 4.5).unwrap(), 2.0);
        assert!(approximation_ratio(1.0, 0.0).is_err());
        assert!(approximation_ratio(1.0, -2.0).is_err());
    }

    #[test]
    fn uniform_ar_is_table_mean_over_min() {
        let g = ring4();
        let table = cost_table(&build_ising(&g, 20.0).unwrap()).unwrap();
        let sol = brute_force_solve(&g).unwrap();
        let uniform = table.costs().iter().sum::<f64>() / 512.0;
        let ar = approximation_ratio(uniform, sol.min_cost).unwrap();
        assert!((ar - table.mean() / table.min()).abs() < 1e-12);
    }

    #[test]
    fn true_percentage_uniform_ring() {
        let sol = brute_force_solve(&ring4()).unwrap();
        let probs = vec![1.0 / 512.0; 512];
        let tp = true_percentage(&probs, &sol.true_indices()).unwrap();
        assert!((tp - 100.0 * 2.0 / 512.0).abs() < 1e-12);
    }

    #[test]
    fn rank_examples() {
        let probs = [0.1, 0.5, 0.2, 0.2];
        assert_eq!(rank(&probs, &[1]).unwrap(), 1);
        let probs = [0.05, 0.25, 0.25, 0.25, 0.2];
        assert_eq!(rank(&probs, &[0]).unwrap(), 5);
        assert_eq!(rank(&probs, &[0, 4]).unwrap(), 4);
        // Ties with the best true state do not count.
        let probs = [0.25, 0.25, 0.25, 0.25];
        assert_eq!(rank(&probs, &[2]).unwrap(), 1);
    }

    #[test]
    fn metric_errors() {
        assert!(true_percentage(&[1.0], &[]).is_err());
        assert!(rank(&[0.5, 0.4], &[0]).is_err());
        assert!(rank(&[1.0, 0.0], &[5]).is_err());
    }

    #[test]
    fn classes_cover_everything() {
        let g = ring4();
        let sol = brute_force_solve(&g).unwrap();
        let classes = classify_all(&g, &sol).unwrap();
        assert_eq!(classes.iter().filter(|c| **c == BitstringClass::True).count(), 2);
        assert_eq!(classes.iter().filter(|c| **c == BitstringClass::False).count(), 4);
        let probs = vec![1.0 / 512.0; 512];
        let cp = class_percentages(&probs, &classes).unwrap();
        assert!((cp.total() - 100.0).abs() < 1e-9);
        assert!((cp.invalid - 100.0 * 506.0 / 512.0).abs() < 1e-9);
    }

    #[test]
    fn top_states_ordering() {
        let g = ring4();
        let table = cost_table(&build_ising(&g, 20.0).unwrap()).unwrap();
        let classes = classify_all(&g, &brute_force_solve(&g).unwrap()).unwrap();
        let mut probs = vec![0.0; 512];
        probs[7] = 0.25;
        probs[3] = 0.25;
        probs[100] = 0.5;
        let top = top_states(&probs, 2, 4, &table, &classes);
        assert_eq!(top.iter().map(|s| s.index).collect::<Vec<_>>(), [100, 3]);
        assert_eq!(top[0].bitstring.len(), 9);
        assert_eq!(top_states(&probs, 32, 4, &table, &classes).len(), 3);
    }

    #[test]
    fn population_std() {
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
        assert_eq!(mean_std(&[5.0]), (5.0, 0.0));
    }
}
