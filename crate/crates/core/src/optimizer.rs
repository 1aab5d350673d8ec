//! Bounded derivative-free minimization and the two-part layerwise-learning
//! protocol.
//!
//! Protocol A grows the circuit one layer at a time: layers 1 and 2 are
//! optimized jointly from a seeded point near zero, then each further layer is
//! optimized alone from zero with all earlier layers frozen. Protocol B
//! repeatedly retrains a random half of all parameters. Every step accepts its result only on a strict
//! improvement, so the recorded cost never increases.

use std::cell::RefCell;
use std::f64::consts::TAU;
use std::sync::Arc;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::{build_circuit, build_initial_state, wrap_angle, AnsatzEvaluator, AnsatzSpec, ParamVector};
use crate::error::{Error, Result};
use crate::ising::{CostTable, IsingHamiltonian};
use crate::statevector::{run_noisy, NoiseSpec, ShotCounts, StateVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Evaluation budget per step is this times the number of free parameters.
    pub evals_per_param: usize,
    /// Initial trust-region radius in radians.
    pub initial_step: f64,
    /// Terminal trust-region radius in radians.
    pub final_step: f64,
    /// Number of B-steps; `None` means one per layer.
    pub retrain_iterations: Option<usize>,
    /// Drives the first-step start point, drawn from `[0, initial_step)`, and the B-step masks.
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            evals_per_param: 100,
            initial_step: 0.5,
            final_step: 1e-4,
            retrain_iterations: None,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.evals_per_param == 0 {
            return Err(Error::Config("evals_per_param must be >= 1".into()));
        }
        let ok =
            self.final_step > 0.0 && self.final_step < self.initial_step && self.initial_step <= std::f64::consts::PI;
        if !ok {
            return Err(Error::Config(format!(
                "need 0 < final_step < initial_step <= pi, got final_step = {}, initial_step = {}",
                self.final_step, self.initial_step
            )));
        }
        Ok(())
    }

    pub fn max_evals(&self, free: usize) -> usize {
        self.evals_per_param * free
    }

    pub fn iterations(&self, depth: usize) -> usize {
        self.retrain_iterations.unwrap_or(depth)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
}

/// Minimizes `objective` over `[0, 2π]^k` starting from `x0` with COBYLA.
///
/// The returned point is the best one evaluated, so `f <= objective(x0)`
/// always holds; `x0` itself is the first evaluation and counts toward the
/// budget. Objective errors abort the search and are returned.
pub fn minimize<F>(objective: F, x0: &[f64], max_evals: usize, config: &OptimizerConfig) -> Result<Minimum>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if x0.is_empty() {
        return Err(Error::Optimizer("no free parameters".into()));
    }
    if x0.iter().any(|&v| !(0.0..=TAU).contains(&v)) {
        return Err(Error::Optimizer(format!("start point {x0:?} outside [0, 2pi]")));
    }
    if max_evals == 0 {
        return Err(Error::Optimizer("evaluation budget is zero".into()));
    }

    struct Tracker {
        best_x: Vec<f64>,
        best_f: f64,
        evals: usize,
        error: Option<Error>,
    }
    let tracker = RefCell::new(Tracker {
        best_x: x0.to_vec(),
        best_f: f64::INFINITY,
        evals: 0,
        error: None,
    });
    let eval = |x: &[f64]| -> f64 {
        let mut t = tracker.borrow_mut();
        if t.error.is_some() || t.evals >= max_evals {
            return f64::MAX;
        }
        t.evals += 1;
        match objective(x) {
            Ok(f) if f.is_finite() => {
                if f < t.best_f {
                    t.best_f = f;
                    t.best_x = x.to_vec();
                }
                f
            }
            Ok(f) => {
                t.error = Some(Error::Optimizer(format!("objective returned {f}")));
                f64::MAX
            }
            Err(e) => {
                t.error = Some(e);
                f64::MAX
            }
        }
    };

    eval(x0);
    if max_evals > 1 && tracker.borrow().error.is_none() {
        let bounds = vec![(0.0, TAU); x0.len()];
        let cons: Vec<fn(&[f64], &mut ()) -> f64> = Vec::new();
        let tols = cobyla::StopTols {
            xtol_abs: vec![config.final_step; x0.len()],
            ..cobyla::StopTols::default()
        };
        // The tracker keeps the best point, so the solver's own status is irrelevant.
        let _ = cobyla::minimize(
            |x: &[f64], _: &mut ()| eval(x),
            x0,
            &bounds,
            &cons,
            (),
            max_evals - 1,
            cobyla::RhoBeg::All(config.initial_step),
            Some(tols),
        );
    }

    let t = tracker.into_inner();
    if let Some(e) = t.error {
        return Err(e);
    }
    Ok(Minimum {
        x: t.best_x.into_iter().map(wrap_angle).collect(),
        f: t.best_f,
        evals: t.evals,
    })
}

/// Cost of a flat parameter vector `[γ1, β1, ...]`; the circuit depth is `flat.len() / 2`.
pub trait Objective: Sync {
    fn evaluate(&self, flat: &[f64]) -> Result<f64>;
}

/// Exact expectation on the fast statevector path.
#[derive(Debug, Clone)]
pub struct ExactObjective {
    evaluator: AnsatzEvaluator,
}

impl ExactObjective {
    pub fn new(spec: AnsatzSpec, table: Arc<CostTable>) -> Result<Self> {
        Ok(ExactObjective {
            evaluator: AnsatzEvaluator::new(spec, table)?,
        })
    }

    pub fn evaluator(&self) -> &AnsatzEvaluator {
        &self.evaluator
    }
}

impl Objective for ExactObjective {
    fn evaluate(&self, flat: &[f64]) -> Result<f64> {
        self.evaluator.expectation(flat)
    }
}

/// Sampled mean cost over noisy gate-level trajectories.
///
/// Every evaluation reuses the same trajectory seed, so comparisons between
/// parameter points see the same error realizations.
#[derive(Debug, Clone)]
pub struct NoisyObjective {
    spec: AnsatzSpec,
    ham: Arc<IsingHamiltonian>,
    table: Arc<CostTable>,
    init: StateVector,
    noise: NoiseSpec,
    shots: usize,
    seed: u64,
}

impl NoisyObjective {
    pub fn new(
        spec: AnsatzSpec,
        ham: Arc<IsingHamiltonian>,
        table: Arc<CostTable>,
        noise: NoiseSpec,
        shots: usize,
        seed: u64,
    ) -> Result<Self> {
        if shots == 0 {
            return Err(Error::Config("shots must be >= 1".into()));
        }
        let init = build_initial_state(spec.mixer.initial_state(), spec.n)?;
        Ok(NoisyObjective {
            spec,
            ham,
            table,
            init,
            noise,
            shots,
            seed,
        })
    }

    pub fn table(&self) -> &Arc<CostTable> {
        &self.table
    }

    /// Trajectory histogram for the circuit given by `flat`.
    pub fn counts(&self, flat: &[f64]) -> Result<ShotCounts> {
        let params = ParamVector::from_flat(flat)?;
        let spec = self.spec.with_depth(params.depth());
        let circuit = build_circuit(&spec, &params, &self.ham)?;
        run_noisy(&circuit, &self.init, &self.noise, self.shots, self.seed)
    }
}

impl Objective for NoisyObjective {
    fn evaluate(&self, flat: &[f64]) -> Result<f64> {
        Ok(self.counts(flat)?.mean_cost(&self.table))
    }
}

/// One optimization step of the protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolStep {
    /// `A<depth>` or `B<iteration>`.
    pub label: String,
    /// Circuit depth evaluated during the step.
    pub depth: usize,
    /// Which of the `2p` parameters were free.
    pub free_mask: Vec<bool>,
    /// Best accepted cost after the step.
    pub cost: f64,
    /// Full parameter vector (length `2p`) after the step.
    pub params: Vec<f64>,
    pub evals: usize,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LLTrace {
    pub steps: Vec<ProtocolStep>,
}

impl LLTrace {
    pub fn final_cost(&self) -> Option<f64> {
        self.steps.last().map(|s| s.cost)
    }

    pub fn final_params(&self) -> Option<&[f64]> {
        self.steps.last().map(|s| s.params.as_slice())
    }

    pub fn total_evals(&self) -> usize {
        self.steps.iter().map(|s| s.evals).sum()
    }

    pub fn is_monotone(&self) -> bool {
        self.steps.windows(2).all(|w| w[1].cost <= w[0].cost)
    }

    pub fn step(&self, label: &str) -> Option<&ProtocolStep> {
        self.steps.iter().find(|s| s.label == label)
    }

    /// Cost after the A-step that reached `depth`.
    pub fn pretrain_cost(&self, depth: usize) -> Option<f64> {
        self.step(&format!("A{depth}")).map(|s| s.cost)
    }
}

/// Optimizes the parameters at `free` indices of `params`, evaluating the first `depth` layers.
fn optimize_subset(
    objective: &dyn Objective,
    params: &[f64],
    free: &[usize],
    depth: usize,
    config: &OptimizerConfig,
) -> Result<Minimum> {
    let x0: Vec<f64> = free.iter().map(|&k| params[k]).collect();
    let f = |x: &[f64]| {
        let mut full = params[..2 * depth].to_vec();
        for (&k, &v) in free.iter().zip(x) {
            full[k] = v;
        }
        objective.evaluate(&full)
    };
    minimize(f, &x0, config.max_evals(free.len()), config)
}

fn mask(len: usize, free: &[usize]) -> Vec<bool> {
    let mut m = vec![false; len];
    for &k in free {
        m[k] = true;
    }
    m
}

/// Protocol A up to `depth` layers; emits steps `A2 ... A<depth>`.
pub fn pretrain(objective: &dyn Objective, depth: usize, config: &OptimizerConfig) -> Result<LLTrace> {
    config.validate()?;
    if depth < 2 {
        return Err(Error::Config(format!("pretraining needs depth >= 2, got {depth}")));
    }
    let len = 2 * depth;
    let mut params = vec![0.0; len];
    let mut trace = LLTrace::default();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);

    // The all-zero point is stationary for mixers whose initial state is an
    // eigenstate (X, XY), so the first two layers start slightly off zero.
    for v in &mut params[..4] {
        *v = rng.gen_range(0.0..config.initial_step);
    }
    let free: Vec<usize> = (0..4).collect();
    let m = optimize_subset(objective, &params, &free, 2, config)?;
    params[..4].copy_from_slice(&m.x);
    let mut best = m.f;
    trace.steps.push(ProtocolStep {
        label: "A2".into(),
        depth: 2,
        free_mask: mask(len, &free),
        cost: best,
        params: params.clone(),
        evals: m.evals,
        accepted: true,
    });

    for layer in 3..=depth {
        let free = vec![2 * layer - 2, 2 * layer - 1];
        let m = optimize_subset(objective, &params, &free, layer, config)?;
        let accepted = m.f < best;
        if accepted {
            best = m.f;
            params[free[0]] = m.x[0];
            params[free[1]] = m.x[1];
        }
        trace.steps.push(ProtocolStep {
            label: format!("A{layer}"),
            depth: layer,
            free_mask: mask(len, &free),
            cost: best,
            params: params.clone(),
            evals: m.evals,
            accepted,
        });
    }
    Ok(trace)
}

/// Protocol B: `iterations` steps, each retraining a seeded random half of all parameters.
pub fn retrain(
    objective: &dyn Objective,
    trace_in: &LLTrace,
    iterations: usize,
    config: &OptimizerConfig,
) -> Result<LLTrace> {
    config.validate()?;
    let last = trace_in
        .steps
        .last()
        .ok_or_else(|| Error::Config("retraining needs a pretrained trace".into()))?;
    let mut params = last.params.clone();
    let len = params.len();
    let depth = len / 2;
    let mut best = last.cost;
    let mut trace = trace_in.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let count = (len / 2).max(1);

    for iteration in 1..=iterations {
        let mut free = sample_indices(&mut rng, len, count).into_vec();
        free.sort_unstable();
        let m = optimize_subset(objective, &params, &free, depth, config)?;
        let accepted = m.f < best;
        if accepted {
            best = m.f;
            for (&k, &v) in free.iter().zip(&m.x) {
                params[k] = v;
            }
        }
        trace.steps.push(ProtocolStep {
            label: format!("B{iteration}"),
            depth,
            free_mask: mask(len, &free),
            cost: best,
            params: params.clone(),
            evals: m.evals,
            accepted,
        });
    }
    Ok(trace)
}

/// Pretraining followed by retraining with the configured number of iterations.
pub fn layerwise_learning(objective: &dyn Objective, depth: usize, config: &OptimizerConfig) -> Result<LLTrace> {
    let pre = pretrain(objective, depth, config)?;
    retrain(objective, &pre, config.iterations(depth), config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::MixerKind;
    use crate::ising::{build_ising, cost_table};
    use crate::tsp::{gen_random_graph, TspGraph};

    fn config() -> OptimizerConfig {
        OptimizerConfig::default()
    }

    struct Closure<F>(F);
    impl<F: Fn(&[f64]) -> Result<f64> + Sync> Objective for Closure<F> {
        fn evaluate(&self, flat: &[f64]) -> Result<f64> {
            (self.0)(flat)
        }
    }

    fn exact(graph: &TspGraph, mixer: MixerKind, p: usize) -> ExactObjective {
        let ham = build_ising(graph, 2.0 * graph.max_weight()).unwrap();
        let table = Arc::new(cost_table(&ham).unwrap());
        ExactObjective::new(AnsatzSpec::new(graph.n(), mixer, p).unwrap(), table).unwrap()
    }

    #[test]
    fn convex_bowl() {
        let m = minimize(|x| Ok((x[0] - 1.0).powi(2)), &[0.0], 100, &config()).unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-3, "{m:?}");
        assert!(m.evals <= 100);
    }

    #[test]
    fn never_worse_than_start() {
        let f = |x: &[f64]| Ok(x[0].sin() + x[1].cos());
        for start in [[0.0, 0.0], [4.7, 3.1], [6.0, 0.5], [1.0, 2.0]] {
            let f0 = f(&start).unwrap();
            let m = minimize(f, &start, 200, &config()).unwrap();
            assert!(m.f <= f0);
            assert!(m.x.iter().all(|&v| (0.0..TAU).contains(&v)));
            assert_eq!(f(&m.x).unwrap(), m.f);
        }
    }

    #[test]
    fn budget_is_respected() {
        let m = minimize(
            |x| Ok(x.iter().map(|v| (v - 2.0).powi(2)).sum()),
            &[0.0; 3],
            7,
            &config(),
        )
        .unwrap();
        assert!(m.evals <= 7);
        let m = minimize(|x| Ok(x[0]), &[3.0], 1, &config()).unwrap();
        assert_eq!((m.evals, m.f), (1, 3.0));
    }

    #[test]
    fn objective_errors_propagate() {
        let r = minimize(|_| Err(Error::Metric("boom".into())), &[0.0], 10, &config());
        assert_eq!(r, Err(Error::Metric("boom".into())));
        let r = minimize(|_| Ok(f64::NAN), &[0.0], 10, &config());
        assert!(matches!(r, Err(Error::Optimizer(_))));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(minimize(|_| Ok(0.0), &[], 10, &config()).is_err());
        assert!(minimize(|_| Ok(0.0), &[7.0], 10, &config()).is_err());
        let bad = OptimizerConfig {
            final_step: 1.0,
            ..config()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn three_city_xy_matches_grid_search() {
        // Grid oracle over one layer at spacing π/50; two layers can only do better.
        let g = gen_random_graph(3, 20, 11).unwrap();
        let obj = exact(&g, MixerKind::XY, 2);
        let min = obj.evaluator().table().min();
        let step = std::f64::consts::PI / 50.0;
        let mut grid_best = f64::INFINITY;
        for a in 0..100 {
            for b in 0..100 {
                let flat = [a as f64 * step, b as f64 * step];
                grid_best = grid_best.min(obj.evaluate(&flat).unwrap());
            }
        }
        assert!(grid_best <= min * 1.02, "grid {grid_best} vs {min}");
        for seed in 0..3 {
            let trace = pretrain(&obj, 2, &OptimizerConfig { seed, ..config() }).unwrap();
            let f = trace.final_cost().unwrap();
            assert!(f <= min * 1.02 && f <= grid_best + 1e-6, "seed {seed}: {f} vs {min}");
        }
    }

    #[test]
    fn zero_start_is_stationary_for_xy() {
        let g = gen_random_graph(3, 20, 11).unwrap();
        let obj = exact(&g, MixerKind::XY, 2);
        let f0 = obj.evaluate(&[0.0; 4]).unwrap();
        for k in 0..4 {
            let mut x = [0.0; 4];
            x[k] = 0.5;
            assert!((obj.evaluate(&x).unwrap() - f0).abs() < 1e-9);
        }
    }

    #[test]
    fn pretrain_trace_shape() {
        let g = gen_random_graph(4, 20, 3).unwrap();
        let obj = exact(&g, MixerKind::XY, 4);
        let trace = pretrain(&obj, 4, &config()).unwrap();
        let labels: Vec<&str> = trace.steps.iter().map(|s| s.label.as_str()).collect();
        assert_eq!(labels, ["A2", "A3", "A4"]);
        assert_eq!(
            trace.steps[0].free_mask,
            [true, true, true, true, false, false, false, false]
        );
        assert_eq!(
            trace.steps[2].free_mask,
            [false, false, false, false, false, false, true, true]
        );
        assert!(trace.is_monotone());
        for s in &trace.steps {
            let active = &s.params[..2 * s.depth];
            assert_eq!(obj.evaluate(active).unwrap(), s.cost);
            assert!(s.params[2 * s.depth..].iter().all(|&v| v == 0.0));
            if !s.accepted {
                assert_eq!(&s.params[2 * s.depth - 2..2 * s.depth], &[0.0, 0.0]);
            }
        }
        assert!(trace.total_evals() <= 4 * 100 + 2 * 2 * 100);
    }

    #[test]
    fn flat_landscape_rejects_new_layers() {
        let obj = Closure(|_: &[f64]| Ok(5.0));
        let trace = pretrain(&obj, 4, &config()).unwrap();
        assert!(trace.steps[1..].iter().all(|s| !s.accepted));
        assert!(trace.final_params().unwrap()[4..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn retrain_masks_and_monotonicity() {
        let g = gen_random_graph(4, 20, 5).unwrap();
        let obj = exact(&g, MixerKind::RS, 3);
        let cfg = OptimizerConfig {
            evals_per_param: 30,
            seed: 42,
            ..config()
        };
        let pre = pretrain(&obj, 3, &cfg).unwrap();
        let a = retrain(&obj, &pre, 3, &cfg).unwrap();
        let b = retrain(&obj, &pre, 3, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.is_monotone());
        for s in &a.steps[2..] {
            assert_eq!(s.free_mask.iter().filter(|&&m| m).count(), 3);
            assert_eq!(s.depth, 3);
        }
        let other = retrain(&obj, &pre, 3, &OptimizerConfig { seed: 43, ..cfg }).unwrap();
        let masks = |t: &LLTrace| t.steps.iter().map(|s| s.free_mask.clone()).collect::<Vec<_>>();
        assert_ne!(masks(&a), masks(&other));
    }

    #[test]
    fn retrain_needs_trace() {
        let obj = Closure(|_: &[f64]| Ok(0.0));
        assert!(retrain(&obj, &LLTrace::default(), 2, &config()).is_err());
        assert!(pretrain(&obj, 1, &config()).is_err());
    }

    #[test]
    fn noisy_objective_is_deterministic() {
        let g = gen_random_graph(3, 20, 2).unwrap();
        let ham = Arc::new(build_ising(&g, 40.0).unwrap());
        let table = Arc::new(cost_table(&ham).unwrap());
        let spec = AnsatzSpec::new(3, MixerKind::XY, 2).unwrap();
        let obj = NoisyObjective::new(spec, ham.clone(), table.clone(), NoiseSpec::new(1e-2).unwrap(), 200, 9).unwrap();
        let x = [0.3, 0.8, 0.1, 0.4];
        assert_eq!(obj.evaluate(&x).unwrap(), obj.evaluate(&x).unwrap());
        let clean = NoisyObjective::new(spec, ham, table.clone(), NoiseSpec::noiseless(), 20_000, 9).unwrap();
        let exact = ExactObjective::new(spec, table).unwrap().evaluate(&x).unwrap();
        let sampled = clean.evaluate(&x).unwrap();
        assert!((sampled - exact).abs() < 0.05 * exact, "{sampled} vs {exact}");
    }
}
