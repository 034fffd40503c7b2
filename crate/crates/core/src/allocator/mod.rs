//! Min-max staleness allocation.
//!
//! The integer problem asks for `(tau_k, d_k)` per learner with
//! `c2 tau d + c1 d + c0 = T`, `sum d_k = d`, `d_l <= d_k <= d_u`, minimizing
//! the largest `|tau_k - tau_l|`. It is solved in two stages: a continuous
//! relaxation ([`relaxed_solve`]) followed by integer repair
//! ([`integerize_sai`]). Integer solutions only need `t_k <= T`, since
//! flooring can only shorten a round.
//!
//! [`brute_force_oracle`] enumerates small instances exactly. The
//! heterogeneity-unaware and synchronous baselines live in [`baselines`].

mod baselines;
mod kkt;
mod nnls;
mod oracle;
mod relaxed;
mod sai;

pub use baselines::{hu_equal_allocation, synchronous_baseline};
pub use kkt::{
    kkt_d_star, kkt_tau_star, recover_multipliers, stationarity_residual, KktCertificate,
    MultiplierSet, CERTIFICATE_TOLERANCE,
};
pub use nnls::nnls;
pub use oracle::{brute_force_oracle, MAX_ORACLE_LEARNERS, MAX_ORACLE_TAU};
pub use relaxed::{batch_from_tau, learner_tau_bounds, relaxed_solve, TauInterval};
pub use sai::integerize_sai;

use serde::{Deserialize, Serialize};

use crate::edge_model::TimeCoefficients;
use crate::staleness::{pair_matrix, staleness_report_int, StalenessReport};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationProblem {
    pub coefficients: Vec<TimeCoefficients>,
    pub cycle_budget_s: f64,
    pub dataset_size: u64,
    pub batch_lower: u64,
    pub batch_upper: u64,
}

impl AllocationProblem {
    pub fn new(
        coefficients: Vec<TimeCoefficients>,
        cycle_budget_s: f64,
        dataset_size: u64,
        batch_lower: u64,
        batch_upper: u64,
    ) -> Result<Self> {
        let p = AllocationProblem {
            coefficients,
            cycle_budget_s,
            dataset_size,
            batch_lower,
            batch_upper,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.coefficients.len() as u64;
        if k == 0 {
            return Err(Error::InvalidScenario("at least one learner is required".into()));
        }
        for c in &self.coefficients {
            TimeCoefficients::new(c.c2, c.c1, c.c0)?;
        }
        if !(self.cycle_budget_s.is_finite() && self.cycle_budget_s > 0.0) {
            return Err(Error::InvalidScenario(format!(
                "cycle budget must be positive, got {}",
                self.cycle_budget_s
            )));
        }
        if self.batch_lower == 0 || self.batch_lower > self.batch_upper {
            return Err(Error::InvalidScenario(format!(
                "batch bounds must satisfy 1 <= d_l <= d_u, got [{}, {}]",
                self.batch_lower, self.batch_upper
            )));
        }
        let d = self.dataset_size;
        if k.saturating_mul(self.batch_lower) > d || k.saturating_mul(self.batch_upper) < d {
            return Err(Error::InvalidScenario(format!(
                "dataset of {d} samples cannot be split over {k} learners within [{}, {}]",
                self.batch_lower, self.batch_upper
            )));
        }
        Ok(())
    }

    pub fn learners(&self) -> usize {
        self.coefficients.len()
    }

    /// Largest batch learner `k` can take while running `tau` updates inside
    /// the cycle, capped at `d_u`.
    pub fn batch_cap(&self, k: usize, tau: u64) -> u64 {
        max_batch(&self.coefficients[k], self.cycle_budget_s, tau).min(self.batch_upper)
    }
}

/// Largest integer `b >= 0` with `cycle_time(tau, b) <= budget`; 0 if even an
/// empty batch overruns.
pub(crate) fn max_batch(coeff: &TimeCoefficients, budget: f64, tau: u64) -> u64 {
    let tau = tau as f64;
    if coeff.cycle_time(tau, 0.0) > budget {
        return 0;
    }
    let per_sample = coeff.c2 * tau + coeff.c1;
    if per_sample <= 0.0 {
        return u64::MAX;
    }
    largest_fitting(((budget - coeff.c0) / per_sample).floor(), |b| {
        coeff.cycle_time(tau, b as f64) <= budget
    })
}

/// Largest integer `tau >= 0` with `cycle_time(tau, batch) <= budget`; 0 if
/// no update fits.
pub(crate) fn max_tau(coeff: &TimeCoefficients, budget: f64, batch: u64) -> u64 {
    let b = batch as f64;
    if coeff.cycle_time(0.0, b) > budget {
        return 0;
    }
    if batch == 0 {
        return u64::MAX;
    }
    largest_fitting(((budget - coeff.c0 - coeff.c1 * b) / (coeff.c2 * b)).floor(), |t| {
        coeff.cycle_time(t as f64, b) <= budget
    })
}

/// Corrects a floating point estimate of the largest integer satisfying a
/// monotone predicate that holds at 0.
fn largest_fitting(estimate: f64, fits: impl Fn(u64) -> bool) -> u64 {
    const EXACT: f64 = 9.0e15;
    if estimate.is_nan() || estimate >= EXACT {
        return u64::MAX;
    }
    let mut x = estimate.max(0.0) as u64;
    while x > 0 && !fits(x) {
        x -= 1;
    }
    while fits(x + 1) {
        x += 1;
    }
    x
}

/// Fills batches from `d_l` upward, busiest learners (largest `tau`) first,
/// ties by index. `None` if the caps cannot absorb `total`.
pub(crate) fn assign_batches_greedy(
    taus: &[u64],
    caps: &[u64],
    total: u64,
    lower: u64,
) -> Option<Vec<u64>> {
    let mut batches = vec![lower; taus.len()];
    let mut remaining = total.checked_sub(lower * taus.len() as u64)?;
    let mut order: Vec<usize> = (0..taus.len()).collect();
    order.sort_by_key(|&k| (std::cmp::Reverse(taus[k]), k));
    for k in order {
        if remaining == 0 {
            break;
        }
        let room = caps[k].saturating_sub(lower);
        let take = room.min(remaining);
        batches[k] += take;
        remaining -= take;
    }
    (remaining == 0).then_some(batches)
}

/// Relaxed solution: real `tau_k`, real batches, every learner exactly on
/// the cycle budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousAllocation {
    pub taus: Vec<f64>,
    pub batches: Vec<f64>,
    pub slack_z: f64,
    pub times: Vec<f64>,
    /// The common update count before per-learner clamping.
    pub common_tau: f64,
}

impl ContinuousAllocation {
    /// True when no learner was pushed off the common update count.
    pub fn is_unclamped(&self) -> bool {
        self.slack_z == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegerAllocation {
    pub taus: Vec<u64>,
    pub batches: Vec<u64>,
    pub times: Vec<f64>,
    pub report: StalenessReport,
}

impl IntegerAllocation {
    pub fn from_parts(problem: &AllocationProblem, taus: Vec<u64>, batches: Vec<u64>) -> Self {
        let times = problem
            .coefficients
            .iter()
            .zip(taus.iter().zip(&batches))
            .map(|(c, (&t, &b))| c.cycle_time(t as f64, b as f64))
            .collect();
        let pm = pair_matrix(taus.len()).expect("allocation has at least one learner");
        let report = staleness_report_int(&taus, &pm).expect("sizes agree");
        IntegerAllocation {
            taus,
            batches,
            times,
            report,
        }
    }

    /// Learners that run at least one update.
    pub fn contributing(&self) -> Vec<bool> {
        self.taus.iter().map(|&t| t >= 1).collect()
    }

    /// Checks `t_k <= T` for contributing learners, `sum d_k = d` and the
    /// batch bounds. Returns the first violation.
    pub fn check_feasible(&self, problem: &AllocationProblem) -> std::result::Result<(), String> {
        let k = problem.learners();
        if self.taus.len() != k || self.batches.len() != k || self.times.len() != k {
            return Err(format!("allocation sized for {} learners, problem has {k}", self.taus.len()));
        }
        let total: u64 = self.batches.iter().sum();
        if total != problem.dataset_size {
            return Err(format!("batches sum to {total}, dataset has {}", problem.dataset_size));
        }
        for i in 0..k {
            let d = self.batches[i];
            if d < problem.batch_lower || d > problem.batch_upper {
                return Err(format!(
                    "learner {} batch {d} outside [{}, {}]",
                    i + 1,
                    problem.batch_lower,
                    problem.batch_upper
                ));
            }
            if self.taus[i] >= 1 {
                let t = problem.coefficients[i].cycle_time(self.taus[i] as f64, d as f64);
                if t > problem.cycle_budget_s {
                    return Err(format!(
                        "learner {} needs {t} s, budget is {} s",
                        i + 1,
                        problem.cycle_budget_s
                    ));
                }
            }
        }
        Ok(())
    }
}
