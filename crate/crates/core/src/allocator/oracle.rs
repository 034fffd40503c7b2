use std::cmp::Reverse;

use super::{assign_batches_greedy, AllocationProblem, IntegerAllocation};
use crate::exec::Execution;
use crate::{Error, Result};

pub const MAX_ORACLE_LEARNERS: usize = 5;
pub const MAX_ORACLE_TAU: u64 = 30;

/// Ranking key; smaller is better. Staleness sums are compared as integers
/// so ties are exact.
type Key = (u64, u64, Reverse<u64>, u64);

/// Exhaustive search over `tau in {1..tau_cap}^K`.
///
/// A vector is feasible when every learner's batch cap is at least `d_l` and
/// the caps hold the dataset. Among feasible vectors the winner has the
/// smallest max staleness, then the smallest average, then the most useful
/// work `sum tau_k d_k` under greedy batch filling, then the lowest
/// enumeration index.
pub fn brute_force_oracle(problem: &AllocationProblem, tau_cap: u64, exec: Execution) -> Result<IntegerAllocation> {
    problem.validate()?;
    let k = problem.learners();
    if k > MAX_ORACLE_LEARNERS {
        return Err(Error::EnumerationGuard(format!(
            "oracle enumerates at most {MAX_ORACLE_LEARNERS} learners, scenario has {k}"
        )));
    }
    if tau_cap == 0 || tau_cap > MAX_ORACLE_TAU {
        return Err(Error::EnumerationGuard(format!(
            "oracle tau cap must be in 1..={MAX_ORACLE_TAU}, got {tau_cap}"
        )));
    }

    // caps[i][t - 1] = batch cap of learner i at t updates.
    let caps: Vec<Vec<u64>> = (0..k)
        .map(|i| (1..=tau_cap).map(|t| problem.batch_cap(i, t)).collect())
        .collect();
    let radix = tau_cap as usize;
    let space = radix.pow(k as u32);
    let chunks = space.div_ceil(4096).max(1);
    let chunk_len = space.div_ceil(chunks);

    let best = exec
        .map_range(chunks, |c| {
            let start = c * chunk_len;
            let end = (start + chunk_len).min(space);
            let mut taus = vec![0u64; k];
            let mut cap = vec![0u64; k];
            let mut local: Option<(Key, Vec<u64>)> = None;
            for index in start..end {
                let mut rest = index;
                for i in (0..k).rev() {
                    taus[i] = (rest % radix) as u64 + 1;
                    rest /= radix;
                }
                if let Some(key) = evaluate(problem, &caps, &taus, &mut cap, index as u64, local.as_ref().map(|b| b.0)) {
                    local = Some((key, taus.clone()));
                }
            }
            local
        })
        .into_iter()
        .flatten()
        .min_by_key(|(key, _)| *key);

    let Some((_, taus)) = best else {
        return Err(Error::InfeasibleProblem(format!(
            "no update vector with tau <= {tau_cap} fits the dataset"
        )));
    };
    let cap: Vec<u64> = (0..k).map(|i| caps[i][taus[i] as usize - 1]).collect();
    let batches = assign_batches_greedy(&taus, &cap, problem.dataset_size, problem.batch_lower)
        .expect("winning vector is feasible");
    Ok(IntegerAllocation::from_parts(problem, taus, batches))
}

/// Key of `taus` if feasible and strictly better than `incumbent`.
fn evaluate(
    problem: &AllocationProblem,
    caps: &[Vec<u64>],
    taus: &[u64],
    cap: &mut [u64],
    index: u64,
    incumbent: Option<Key>,
) -> Option<Key> {
    let k = taus.len();
    let max_gap = taus.iter().max().unwrap() - taus.iter().min().unwrap();
    if let Some(best) = incumbent {
        if max_gap > best.0 {
            return None;
        }
    }
    let mut total = 0u64;
    for i in 0..k {
        cap[i] = caps[i][taus[i] as usize - 1];
        if cap[i] < problem.batch_lower {
            return None;
        }
        total += cap[i];
    }
    if total < problem.dataset_size {
        return None;
    }
    let mut gap_sum = 0u64;
    for a in 0..k {
        for b in a + 1..k {
            gap_sum += taus[a].abs_diff(taus[b]);
        }
    }
    let batches = assign_batches_greedy(taus, cap, problem.dataset_size, problem.batch_lower)?;
    let work: u64 = taus.iter().zip(&batches).map(|(t, d)| t * d).sum();
    let key = (max_gap, gap_sum, Reverse(work), index);
    match incumbent {
        Some(best) if key >= best => None,
        _ => Some(key),
    }
}
