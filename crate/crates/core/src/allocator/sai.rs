use super::{AllocationProblem, ContinuousAllocation, IntegerAllocation};
use crate::{Error, Result};

/// Repairs a relaxed solution into an integer allocation.
///
/// Suggest: floor every update count (at least 1) and size each batch cap
/// for it. Improve, in order:
/// 1. while the caps cannot hold the dataset, drop one update from the
///    busiest learner with `tau >= 2` (ties: biggest cap gain, then index);
/// 2. trim excess samples from the learners with the most room above `d_l`;
/// 3. raise lagging learners one update at a time while their round still
///    fits and they stay at or below the current maximum.
pub fn integerize_sai(cont: &ContinuousAllocation, problem: &AllocationProblem) -> Result<IntegerAllocation> {
    problem.validate()?;
    let k = problem.learners();
    if cont.taus.len() != k {
        return Err(Error::InvalidScenario(format!(
            "continuous allocation sized for {} learners, problem has {k}",
            cont.taus.len()
        )));
    }
    let (lower, total) = (problem.batch_lower, problem.dataset_size);

    let mut taus: Vec<u64> = cont
        .taus
        .iter()
        .map(|&t| ((t + 1e-9).floor().max(1.0)) as u64)
        .collect();
    let mut caps: Vec<u64> = (0..k).map(|i| problem.batch_cap(i, taus[i])).collect();

    for i in 0..k {
        while caps[i] < lower && taus[i] > 1 {
            taus[i] -= 1;
            caps[i] = problem.batch_cap(i, taus[i]);
        }
        if caps[i] < lower {
            return Err(Error::InfeasibleProblem(format!(
                "learner {} cannot fit one update on {lower} samples",
                i + 1
            )));
        }
    }

    while caps.iter().sum::<u64>() < total {
        let pick = (0..k)
            .filter(|&i| taus[i] >= 2)
            .max_by_key(|&i| {
                let gain = problem.batch_cap(i, taus[i] - 1) - caps[i];
                (taus[i], gain, std::cmp::Reverse(i))
            });
        let Some(i) = pick else {
            return Err(Error::InfeasibleProblem(format!(
                "caps at one update each hold {} of {total} samples",
                caps.iter().sum::<u64>()
            )));
        };
        taus[i] -= 1;
        caps[i] = problem.batch_cap(i, taus[i]);
    }

    let batches = trim_excess(&caps, lower, total);

    loop {
        let top = *taus.iter().max().expect("nonempty");
        let mut changed = false;
        for i in 0..k {
            if taus[i] < top
                && problem.coefficients[i].cycle_time((taus[i] + 1) as f64, batches[i] as f64)
                    <= problem.cycle_budget_s
            {
                taus[i] += 1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    Ok(IntegerAllocation::from_parts(problem, taus, batches))
}

/// Starting from `caps`, removes `sum(caps) - total` samples, always from the
/// learner with the largest slack above `lower` (ties: lowest index).
fn trim_excess(caps: &[u64], lower: u64, total: u64) -> Vec<u64> {
    let mut excess = caps.iter().sum::<u64>() - total;
    let mut batches = caps.to_vec();
    if excess == 0 {
        return batches;
    }
    let slack: Vec<u64> = caps.iter().map(|&c| c - lower).collect();
    let removable_above = |level: u64| -> u64 { slack.iter().map(|&s| s.saturating_sub(level)).sum() };
    // Highest level whose removal covers the excess.
    let (mut lo, mut hi) = (0u64, *slack.iter().max().expect("nonempty"));
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if removable_above(mid) >= excess {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    let level = lo;
    // Bring everyone down to level + 1, then shave the rest one sample each.
    for (b, &s) in batches.iter_mut().zip(&slack) {
        let cut = s.saturating_sub(level + 1);
        *b -= cut;
        excess -= cut;
    }
    for (b, &s) in batches.iter_mut().zip(&slack) {
        if excess == 0 {
            break;
        }
        if s > level {
            *b -= 1;
            excess -= 1;
        }
    }
    batches
}
