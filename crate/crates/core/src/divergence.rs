//! Staleness versus model divergence on synthetic convex learners.
//!
//! Learner `k` minimizes `F_k(w) = 0.5 ||A_k w - b_k||^2` with full-gradient
//! steps. Each cycle every learner starts from the shared global model, runs
//! its `tau_k` updates, and the orchestrator averages the results weighted
//! by `d_k / d`. The auxiliary model follows centralized gradient descent on
//! `F = (1/d) sum d_k F_k`, advancing `tau_m = max_k tau_k` steps per cycle.
//!
//! Within a cycle the virtual average `w[l] = (1/d) sum d_k w_k[l]` and the
//! auxiliary iterate obey, step by step,
//!
//! ```text
//! ||w[l+1] - aux[l+1]|| <= ||w[l] - aux[l]|| + (eta beta / d) sum_k h_k[l]
//! ```
//!
//! with `h_k[l] = d_k ||w_k[l] - aux[l]||` while learner `k` is still
//! updating and `h_k[l] = d_k ||grad F_k(aux[l])|| / beta` once it has gone
//! idle (its staleness gap). [`divergence_trace`] checks this at every step.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::allocator::IntegerAllocation;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexLearner {
    pub weight: DVector<f64>,
    pub batch_size: u64,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub step_size: f64,
}

impl ConvexLearner {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, batch_size: u64, step_size: f64) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::InvalidModel(format!(
                "A has {} rows but b has {} entries",
                a.nrows(),
                b.len()
            )));
        }
        if batch_size == 0 || !(step_size > 0.0 && step_size.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "batch size {batch_size} and step {step_size} must be positive"
            )));
        }
        let weight = DVector::zeros(a.ncols());
        Ok(ConvexLearner {
            weight,
            batch_size,
            a,
            b,
            step_size,
        })
    }

    pub fn dimension(&self) -> usize {
        self.a.ncols()
    }

    pub fn loss(&self, w: &DVector<f64>) -> f64 {
        0.5 * (&self.a * w - &self.b).norm_squared()
    }

    pub fn gradient(&self, w: &DVector<f64>) -> DVector<f64> {
        self.a.transpose() * (&self.a * w - &self.b)
    }

    /// Gradient Lipschitz constant: largest eigenvalue of `A^T A`.
    pub fn smoothness(&self) -> f64 {
        let gram = self.a.transpose() * &self.a;
        gram.symmetric_eigenvalues().iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalRun {
    pub weight: DVector<f64>,
    /// Step size exceeds `2 / beta`; the iterates may blow up.
    pub unstable_step: bool,
}

/// `tau` gradient steps from the learner's current weight.
pub fn local_sgd(learner: &ConvexLearner, tau: u64) -> Result<LocalRun> {
    if tau == 0 {
        return Err(Error::InvalidModel("local training needs at least one update".into()));
    }
    let mut w = learner.weight.clone();
    for _ in 0..tau {
        w -= learner.gradient(&w) * learner.step_size;
    }
    Ok(LocalRun {
        weight: w,
        unstable_step: learner.step_size > 2.0 / learner.smoothness(),
    })
}

/// Batch-weighted mean of the local weights.
pub fn aggregate(weights: &[DVector<f64>], batches: &[u64]) -> Result<DVector<f64>> {
    if weights.is_empty() || weights.len() != batches.len() {
        return Err(Error::InvalidModel(format!(
            "{} weights for {} batches",
            weights.len(),
            batches.len()
        )));
    }
    let dim = weights[0].len();
    if let Some(w) = weights.iter().find(|w| w.len() != dim) {
        return Err(Error::InvalidModel(format!(
            "weight dimension {} differs from {dim}",
            w.len()
        )));
    }
    let total: u64 = batches.iter().sum();
    if total == 0 {
        return Err(Error::InvalidModel("batches sum to zero".into()));
    }
    let mut out = DVector::zeros(dim);
    for (w, &d) in weights.iter().zip(batches) {
        out.axpy(d as f64 / total as f64, w, 1.0);
    }
    Ok(out)
}

fn total_batch(learners: &[ConvexLearner]) -> f64 {
    learners.iter().map(|l| l.batch_size as f64).sum()
}

/// `F(w) = (1/d) sum_k d_k F_k(w)`.
pub fn global_loss(learners: &[ConvexLearner], w: &DVector<f64>) -> f64 {
    let d = total_batch(learners);
    learners.iter().map(|l| l.batch_size as f64 * l.loss(w)).sum::<f64>() / d
}

pub fn global_gradient(learners: &[ConvexLearner], w: &DVector<f64>) -> DVector<f64> {
    let d = total_batch(learners);
    let mut g = DVector::zeros(w.len());
    for l in learners {
        g.axpy(l.batch_size as f64 / d, &l.gradient(w), 1.0);
    }
    g
}

/// One centralized gradient step of the auxiliary model.
pub fn auxiliary_step(aux: &DVector<f64>, learners: &[ConvexLearner], step: f64) -> DVector<f64> {
    aux - global_gradient(learners, aux) * step
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregationState {
    pub global_weight: DVector<f64>,
    pub auxiliary_weight: DVector<f64>,
    pub cycle_index: usize,
    pub update_counts: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub cycle: usize,
    pub divergence: f64,
    pub global_loss: f64,
    pub max_staleness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceTrace {
    pub rows: Vec<TraceRow>,
    /// Steps whose divergence increment exceeded the contribution bound.
    pub bound_violations: usize,
    pub bound_checks: usize,
    /// Largest `lhs - rhs` seen (negative when the bound always held).
    pub worst_bound_margin: f64,
    pub final_state: AggregationState,
}

impl DivergenceTrace {
    pub fn divergences(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.divergence).collect()
    }
}

/// Runs `cycles` aggregation rounds with the allocation's update counts and
/// batch weights. Every learner must carry the allocation's batch size and
/// a common step size; all start from the first learner's weight.
pub fn divergence_trace(
    allocation: &IntegerAllocation,
    learners: &[ConvexLearner],
    cycles: usize,
) -> Result<DivergenceTrace> {
    let k = learners.len();
    if k == 0 || allocation.taus.len() != k {
        return Err(Error::InvalidModel(format!(
            "{} learners for an allocation of {}",
            k,
            allocation.taus.len()
        )));
    }
    let dim = learners[0].dimension();
    let step = learners[0].step_size;
    for (i, l) in learners.iter().enumerate() {
        if l.dimension() != dim || l.step_size != step {
            return Err(Error::InvalidModel(format!(
                "learner {} does not share dimension {dim} and step {step}",
                i + 1
            )));
        }
        if l.batch_size != allocation.batches[i] {
            return Err(Error::InvalidModel(format!(
                "learner {} has batch {} but the allocation assigns {}",
                i + 1,
                l.batch_size,
                allocation.batches[i]
            )));
        }
    }
    let beta = learners.iter().map(ConvexLearner::smoothness).fold(0.0, f64::max);
    let d = total_batch(learners);
    let weights: Vec<f64> = learners.iter().map(|l| l.batch_size as f64 / d).collect();
    let taus = &allocation.taus;
    let tau_max = taus.iter().copied().max().unwrap_or(0);

    let mut state = AggregationState {
        global_weight: learners[0].weight.clone(),
        auxiliary_weight: learners[0].weight.clone(),
        cycle_index: 0,
        update_counts: taus.clone(),
    };
    let mut rows = Vec::with_capacity(cycles);
    let (mut checks, mut violations) = (0usize, 0usize);
    let mut worst = f64::NEG_INFINITY;

    let average = |locals: &[DVector<f64>]| -> DVector<f64> {
        let mut out = DVector::zeros(dim);
        for (w, &p) in locals.iter().zip(&weights) {
            out.axpy(p, w, 1.0);
        }
        out
    };

    for g in 0..cycles {
        let mut locals = vec![state.global_weight.clone(); k];
        let mut virtual_avg = state.global_weight.clone();
        let mut aux = state.auxiliary_weight.clone();
        for l in 0..tau_max {
            let before = (&virtual_avg - &aux).norm();
            let mut contribution = 0.0;
            for i in 0..k {
                let d_k = learners[i].batch_size as f64;
                if l < taus[i] {
                    contribution += d_k * (&locals[i] - &aux).norm();
                    let grad = learners[i].gradient(&locals[i]);
                    locals[i] -= grad * step;
                } else {
                    contribution += d_k * learners[i].gradient(&aux).norm() / beta;
                }
            }
            aux = auxiliary_step(&aux, learners, step);
            virtual_avg = average(&locals);
            let after = (&virtual_avg - &aux).norm();
            let bound = before + step * beta / d * contribution;
            let margin = after - bound;
            checks += 1;
            worst = worst.max(margin);
            if margin > 1e-12 * bound.max(1.0) {
                violations += 1;
            }
        }
        state.global_weight = virtual_avg;
        state.auxiliary_weight = aux;
        state.cycle_index = g + 1;
        rows.push(TraceRow {
            cycle: g + 1,
            divergence: (&state.global_weight - &state.auxiliary_weight).norm(),
            global_loss: global_loss(learners, &state.global_weight),
            max_staleness: allocation.report.max_staleness,
        });
    }

    Ok(DivergenceTrace {
        rows,
        bound_violations: violations,
        bound_checks: checks,
        worst_bound_margin: worst,
        final_state: state,
    })
}

/// Parameters for [`synthetic_learners`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SyntheticConfig {
    pub dimension: usize,
    /// Spread of the per-learner targets around a shared one; 0 gives
    /// identical learners.
    pub heterogeneity: f64,
    /// Off-identity noise in each `A_k`.
    pub conditioning_noise: f64,
    /// Step size as a fraction of `1 / beta`.
    pub step_scale: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            dimension: 8,
            heterogeneity: 1.0,
            conditioning_noise: 0.3,
            step_scale: 0.1,
            seed: 0,
        }
    }
}

/// Seeded quadratic learners, one per batch size. `A_k = I + noise`, so each
/// `F_k` is strongly convex with high probability; `eta = step_scale / beta`
/// with `beta` the largest smoothness constant. The shared start weight is
/// drawn from the same seed.
pub fn synthetic_learners(batches: &[u64], cfg: &SyntheticConfig) -> Result<Vec<ConvexLearner>> {
    if cfg.dimension == 0 {
        return Err(Error::InvalidModel("dimension must be positive".into()));
    }
    let m = cfg.dimension;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    let shared_a = DMatrix::from_fn(m, m, |_, _| normal(&mut rng));
    let shared_b = DVector::from_fn(m, |_, _| normal(&mut rng));
    let start = DVector::from_fn(m, |_, _| normal(&mut rng));
    let mut systems = Vec::with_capacity(batches.len());
    for _ in batches {
        let own_a = DMatrix::from_fn(m, m, |_, _| normal(&mut rng));
        let own_b = DVector::from_fn(m, |_, _| normal(&mut rng));
        let a = DMatrix::identity(m, m)
            + (&shared_a + own_a * cfg.heterogeneity) * cfg.conditioning_noise;
        let b = &shared_b + own_b * cfg.heterogeneity;
        systems.push((a, b));
    }
    let beta = systems
        .iter()
        .map(|(a, _)| (a.transpose() * a).symmetric_eigenvalues().max())
        .fold(0.0, f64::max);
    let step = cfg.step_scale / beta;
    systems
        .into_iter()
        .zip(batches)
        .map(|((a, b), &batch)| {
            let mut l = ConvexLearner::new(a, b, batch, step)?;
            l.weight = start.clone();
            Ok(l)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocator::{AllocationProblem, IntegerAllocation};
    use crate::edge_model::TimeCoefficients;
    use proptest::prelude::*;

    fn scalar(a: f64, b: f64, eta: f64, w0: f64) -> ConvexLearner {
        let mut l = ConvexLearner::new(DMatrix::from_element(1, 1, a), DVector::from_element(1, b), 1, eta).unwrap();
        l.weight = DVector::from_element(1, w0);
        l
    }

    fn allocation(taus: &[u64], batches: &[u64]) -> IntegerAllocation {
        let coeffs = vec![TimeCoefficients::new(1e-6, 0.0, 0.0).unwrap(); taus.len()];
        let total = batches.iter().sum();
        let p = AllocationProblem::new(coeffs, 1.0, total, 1, total).unwrap();
        IntegerAllocation::from_parts(&p, taus.to_vec(), batches.to_vec())
    }

    #[test]
    fn unit_step_on_identity_hits_minimizer() {
        let mut l = ConvexLearner::new(DMatrix::identity(3, 3), DVector::from_vec(vec![1.0, -2.0, 0.5]), 4, 1.0).unwrap();
        l.weight = DVector::from_vec(vec![9.0, 9.0, 9.0]);
        let run = local_sgd(&l, 1).unwrap();
        assert_eq!(run.weight, l.b);
        assert!(!run.unstable_step);
    }

    #[test]
    fn two_half_steps() {
        let l = scalar(1.0, 0.0, 0.5, 1.0);
        assert!((local_sgd(&l, 2).unwrap().weight[0] - 0.25).abs() < 1e-15);
        assert!(local_sgd(&l, 0).is_err());
        assert!(local_sgd(&scalar(1.0, 0.0, 2.5, 1.0), 1).unwrap().unstable_step);
    }

    #[test]
    fn aggregate_examples() {
        let w = |x: f64| DVector::from_element(1, x);
        assert_eq!(aggregate(&[w(0.0), w(2.0)], &[5, 5]).unwrap()[0], 1.0);
        assert_eq!(aggregate(&[w(0.0), w(4.0)], &[3, 1]).unwrap()[0], 1.0);
        assert_eq!(aggregate(&[w(7.5)], &[3]).unwrap()[0], 7.5);
        let bad = aggregate(&[w(0.0), DVector::zeros(2)], &[1, 1]);
        assert!(matches!(bad, Err(Error::InvalidModel(_))));
    }

    #[test]
    fn global_gradient_is_weighted_mean() {
        let l1 = ConvexLearner::new(DMatrix::identity(2, 2), DVector::from_vec(vec![1.0, 0.0]), 3, 0.1).unwrap();
        let l2 = ConvexLearner::new(DMatrix::identity(2, 2), DVector::from_vec(vec![0.0, 4.0]), 1, 0.1).unwrap();
        let w = DVector::from_vec(vec![0.5, 0.5]);
        let expected = (l1.gradient(&w) * 3.0 + l2.gradient(&w)) / 4.0;
        assert!((global_gradient(&[l1, l2], &w) - expected).norm() < 1e-15);
    }

    #[test]
    fn single_learner_auxiliary_matches_local() {
        let l = scalar(1.3, 0.7, 0.2, -1.0);
        let mut aux = l.weight.clone();
        for _ in 0..5 {
            aux = auxiliary_step(&aux, std::slice::from_ref(&l), l.step_size);
        }
        assert!((aux - local_sgd(&l, 5).unwrap().weight).norm() < 1e-15);
    }

    #[test]
    fn identical_learners_without_staleness_track_auxiliary() {
        let cfg = SyntheticConfig { heterogeneity: 0.0, ..Default::default() };
        let batches = [40, 40, 40];
        let learners = synthetic_learners(&batches, &cfg).unwrap();
        let trace = divergence_trace(&allocation(&[3, 3, 3], &batches), &learners, 20).unwrap();
        assert_eq!(trace.rows.len(), 20);
        assert!(trace.divergences().iter().all(|&v| v <= 1e-12));
    }

    #[test]
    fn stale_learner_increases_divergence() {
        let batches = [30, 30, 30, 30];
        let cfg = SyntheticConfig { seed: 5, ..Default::default() };
        let learners = synthetic_learners(&batches, &cfg).unwrap();
        let fresh = divergence_trace(&allocation(&[4, 4, 4, 4], &batches), &learners, 15).unwrap();
        let stale = divergence_trace(&allocation(&[4, 4, 4, 1], &batches), &learners, 15).unwrap();
        for (s, f) in stale.divergences().iter().zip(fresh.divergences()) {
            assert!(*s >= f, "{s} < {f}");
        }
        assert_eq!(stale.bound_violations, 0);
    }

    #[test]
    fn mismatched_batches_rejected() {
        let learners = synthetic_learners(&[10, 10], &SyntheticConfig::default()).unwrap();
        assert!(divergence_trace(&allocation(&[1, 1], &[15, 5]), &learners, 3).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn bound_never_violated(
            seed in any::<u64>(),
            taus in proptest::collection::vec(0u64..7, 1..6),
            heterogeneity in 0.0f64..2.0,
        ) {
            let batches: Vec<u64> = (0..taus.len() as u64).map(|i| 10 + 7 * i).collect();
            let cfg = SyntheticConfig { seed, heterogeneity, ..Default::default() };
            let learners = synthetic_learners(&batches, &cfg).unwrap();
            let trace = divergence_trace(&allocation(&taus, &batches), &learners, 6).unwrap();
            prop_assert_eq!(trace.bound_violations, 0);
        }

        #[test]
        fn smoothness_bounds_gradient_ratio(seed in any::<u64>(), x in proptest::collection::vec(-3.0f64..3.0, 8), y in proptest::collection::vec(-3.0f64..3.0, 8)) {
            let learners = synthetic_learners(&[1], &SyntheticConfig { seed, ..Default::default() }).unwrap();
            let l = &learners[0];
            let (x, y) = (DVector::from_vec(x), DVector::from_vec(y));
            prop_assume!((&x - &y).norm() > 1e-9);
            let ratio = (l.gradient(&x) - l.gradient(&y)).norm() / (&x - &y).norm();
            prop_assert!(ratio <= l.smoothness() * (1.0 + 1e-10));
        }
    }
}
