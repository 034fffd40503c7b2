use serde::{Deserialize, Serialize};

use super::{AllocationProblem, ContinuousAllocation};
use crate::edge_model::TimeCoefficients;
use crate::{Error, Result};

const MAX_BISECTIONS: usize = 200;
const SUM_TOLERANCE: f64 = 1e-12;
const WIDTH_TOLERANCE: f64 = 1e-12;

/// Range of real update counts that keeps a learner's batch in `[d_l, d_u]`
/// while it exactly fills the cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauInterval {
    pub min: f64,
    pub max: f64,
}

impl TauInterval {
    pub fn clamp(&self, tau: f64) -> f64 {
        tau.clamp(self.min, self.max)
    }
}

/// Batch that exactly fills the cycle at `tau` updates:
/// `(T - c0) / (c2 tau + c1)`, strictly decreasing in `tau`.
pub fn batch_from_tau(coeff: &TimeCoefficients, budget: f64, tau: f64) -> f64 {
    (budget - coeff.c0) / (coeff.c2 * tau + coeff.c1)
}

pub fn learner_tau_bounds(problem: &AllocationProblem) -> Result<Vec<TauInterval>> {
    problem.validate()?;
    let budget = problem.cycle_budget_s;
    let (lo, hi) = (problem.batch_lower as f64, problem.batch_upper as f64);
    problem
        .coefficients
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let spare = budget - c.c0 - c.c1 * lo;
            if spare <= 0.0 {
                return Err(Error::InfeasibleLearner(k + 1));
            }
            Ok(TauInterval {
                min: ((budget - c.c0 - c.c1 * hi) / (c.c2 * hi)).max(0.0),
                max: spare / (c.c2 * lo),
            })
        })
        .collect()
}

/// Continuous min-max solve.
///
/// With every learner on the time equality, its batch is a decreasing
/// function of its update count, so the spread is minimized by a common
/// update count clamped into each learner's [`TauInterval`]. The common value
/// is the root of `sum_k batch(clamp_k(tau)) = d`, found by bisection.
pub fn relaxed_solve(problem: &AllocationProblem) -> Result<ContinuousAllocation> {
    let bounds = learner_tau_bounds(problem)?;
    let budget = problem.cycle_budget_s;
    let d = problem.dataset_size as f64;
    let (dl, du) = (problem.batch_lower as f64, problem.batch_upper as f64);

    let batch_at = |k: usize, tau: f64| -> f64 {
        batch_from_tau(&problem.coefficients[k], budget, bounds[k].clamp(tau)).clamp(dl, du)
    };
    let total_at = |tau: f64| -> f64 { (0..bounds.len()).map(|k| batch_at(k, tau)).sum() };

    let mut lo = bounds.iter().map(|b| b.min).fold(f64::INFINITY, f64::min);
    let mut hi = bounds.iter().map(|b| b.max).fold(0.0, f64::max);
    let (most, least) = (total_at(lo), total_at(hi));
    if most < d * (1.0 - SUM_TOLERANCE) {
        return Err(Error::InfeasibleProblem(format!(
            "largest feasible batches sum to {most:.6}, dataset needs {d}"
        )));
    }
    if least > d * (1.0 + SUM_TOLERANCE) {
        return Err(Error::InfeasibleProblem(format!(
            "smallest feasible batches sum to {least:.6}, above the dataset of {d}"
        )));
    }

    let mut tau = if (most - d).abs() <= (least - d).abs() { lo } else { hi };
    let mut gap = (total_at(tau) - d).abs();
    for _ in 0..MAX_BISECTIONS {
        if gap <= SUM_TOLERANCE * d || hi - lo <= WIDTH_TOLERANCE * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let total = total_at(mid);
        if (total - d).abs() < gap {
            tau = mid;
            gap = (total - d).abs();
        }
        if total > d {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let taus: Vec<f64> = bounds.iter().map(|b| b.clamp(tau)).collect();
    let batches: Vec<f64> = (0..taus.len()).map(|k| batch_at(k, tau)).collect();
    let times = problem
        .coefficients
        .iter()
        .zip(taus.iter().zip(&batches))
        .map(|(c, (&t, &b))| c.cycle_time(t, b))
        .collect();
    let max = taus.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = taus.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ContinuousAllocation {
        taus,
        batches,
        slack_z: max - min,
        times,
        common_tau: tau,
    })
}
