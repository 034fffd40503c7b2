//! Random instance generators shared by the integration tests.
#![allow(dead_code)]

use async_mel::allocator::{AllocationProblem, IntegerAllocation};
use async_mel::edge_model::{
    achievable_rate, dbm_to_watts, path_loss_gain, time_coefficients, ChannelParams, ComputeParams,
    LearnerProfile, LearningMode, TaskProfile, TimeCoefficients,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Indoor channel at a uniform distance in (0, 50] m and a clock drawn from
/// [700 MHz, 2.4 GHz], MNIST task. The returned coefficients describe the
/// full 60,000-sample task.
pub fn indoor_learner(rng: &mut ChaCha8Rng) -> TimeCoefficients {
    let distance = 50.0 * (1.0 - rng.random::<f64>());
    let channel = ChannelParams::new(5e6, dbm_to_watts(23.0), path_loss_gain(distance).unwrap(), dbm_to_watts(-174.0))
        .unwrap();
    assert!(achievable_rate(&channel).unwrap() > 0.0);
    let learner = LearnerProfile {
        id: 1,
        channel,
        compute: ComputeParams::new(rng.random_range(7e8..=2.4e9)).unwrap(),
        mode: LearningMode::ParallelizedLearning,
    };
    time_coefficients(&learner, &TaskProfile::mnist()).unwrap()
}

/// Rescales a 60,000-sample learner to a `d`-sample task: each sample stands
/// for `60000 / d` original ones, so per-sample terms scale and the model
/// exchange does not.
pub fn rescale(c: &TimeCoefficients, d: u64) -> TimeCoefficients {
    let s = 60_000.0 / d as f64;
    TimeCoefficients::new(c.c2 * s, c.c1 * s, c.c0).unwrap()
}

/// Budget at which the unclamped relaxed solution has common update count
/// `tau`: `sum_k (T - c0_k) / (c2_k tau + c1_k) = d` is linear in `T`.
pub fn budget_for_tau(coeffs: &[TimeCoefficients], d: u64, tau: f64) -> f64 {
    let inv: f64 = coeffs.iter().map(|c| 1.0 / (c.c2 * tau + c.c1)).sum();
    let shifted: f64 = coeffs.iter().map(|c| c.c0 / (c.c2 * tau + c.c1)).sum();
    (d as f64 + shifted) / inv
}

pub struct InstanceShape {
    pub learners: std::ops::RangeInclusive<usize>,
    pub dataset: std::ops::RangeInclusive<u64>,
    pub target_tau: std::ops::Range<f64>,
    /// Probability of a binding upper batch bound.
    pub clamp_probability: f64,
    /// Probability of a lower batch bound above 1.
    pub lower_probability: f64,
}

impl Default for InstanceShape {
    fn default() -> Self {
        InstanceShape {
            learners: 2..=4,
            dataset: 20..=200,
            target_tau: 1.5..18.0,
            clamp_probability: 0.3,
            lower_probability: 0.0,
        }
    }
}

/// Small instance with the default indoor channel and MNIST physics.
pub fn random_instance(rng: &mut ChaCha8Rng, shape: &InstanceShape) -> AllocationProblem {
    let k = rng.random_range(shape.learners.clone());
    let d = rng.random_range(shape.dataset.clone()).max(4 * k as u64);
    let coeffs: Vec<TimeCoefficients> = (0..k).map(|_| rescale(&indoor_learner(rng), d)).collect();
    let tau = rng.random_range(shape.target_tau.clone());
    let budget = budget_for_tau(&coeffs, d, tau);
    let even = d.div_ceil(k as u64);
    let upper = if rng.random_bool(shape.clamp_probability) {
        rng.random_range(even..=d)
    } else {
        d
    };
    let lower = if rng.random_bool(shape.lower_probability) {
        rng.random_range(1..=(d / k as u64).max(1))
    } else {
        1
    };
    AllocationProblem::new(coeffs, budget, d, lower, upper).unwrap()
}

/// Feasibility re-derived from the raw time law, independent of the
/// library's own checker.
pub fn independent_violation(p: &AllocationProblem, a: &IntegerAllocation) -> Option<String> {
    let k = p.coefficients.len();
    if a.taus.len() != k || a.batches.len() != k {
        return Some("wrong length".into());
    }
    if a.batches.iter().sum::<u64>() != p.dataset_size {
        return Some(format!("sum {} != {}", a.batches.iter().sum::<u64>(), p.dataset_size));
    }
    if !a.taus.iter().any(|&t| t >= 1) {
        return Some("no participant".into());
    }
    for i in 0..k {
        let (tau, d) = (a.taus[i] as f64, a.batches[i] as f64);
        let c = &p.coefficients[i];
        let t = c.c2 * tau * d + c.c1 * d + c.c0;
        if a.batches[i] < p.batch_lower || a.batches[i] > p.batch_upper {
            return Some(format!("learner {i} batch {} out of bounds", a.batches[i]));
        }
        if a.taus[i] >= 1 && t > p.cycle_budget_s * (1.0 + 1e-12) {
            return Some(format!("learner {i} time {t} > {}", p.cycle_budget_s));
        }
    }
    None
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
