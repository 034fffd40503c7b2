use super::{assign_batches_greedy, max_tau, AllocationProblem, IntegerAllocation};
use crate::{Error, Result};

/// Heterogeneity-unaware split: equal batches (remainder one sample each to
/// the first learners), then as many updates as each learner can fit.
/// Learners that cannot fit a single update end up with `tau = 0`.
pub fn hu_equal_allocation(problem: &AllocationProblem) -> IntegerAllocation {
    let k = problem.learners() as u64;
    let base = problem.dataset_size / k;
    let extra = problem.dataset_size % k;
    let batches: Vec<u64> = (0..k).map(|i| base + u64::from(i < extra)).collect();
    let taus = problem
        .coefficients
        .iter()
        .zip(&batches)
        .map(|(c, &b)| max_tau(c, problem.cycle_budget_s, b))
        .collect();
    IntegerAllocation::from_parts(problem, taus, batches)
}

/// Synchronous allocation: the largest common update count whose caps still
/// hold the dataset.
pub fn synchronous_baseline(problem: &AllocationProblem) -> Result<IntegerAllocation> {
    problem.validate()?;
    let k = problem.learners();
    let caps_at = |tau: u64| -> Vec<u64> { (0..k).map(|i| problem.batch_cap(i, tau)).collect() };
    let feasible = |tau: u64| -> bool {
        let caps = caps_at(tau);
        caps.iter().all(|&c| c >= problem.batch_lower) && caps.iter().sum::<u64>() >= problem.dataset_size
    };
    if !feasible(1) {
        return Err(Error::InfeasibleProblem(
            "even one synchronized update does not fit the dataset".into(),
        ));
    }
    // Caps shrink as tau grows, so feasibility is a prefix of 1, 2, ...
    let mut good = 1u64;
    let mut bad = 2u64;
    while feasible(bad) {
        good = bad;
        bad = bad.saturating_mul(2);
    }
    while bad - good > 1 {
        let mid = good + (bad - good) / 2;
        if feasible(mid) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    let taus = vec![good; k];
    let batches = assign_batches_greedy(&taus, &caps_at(good), problem.dataset_size, problem.batch_lower)
        .expect("feasible update count");
    Ok(IntegerAllocation::from_parts(problem, taus, batches))
}

#[cfg(test)]
mod tests {
    use super::super::toy;
    use super::*;
    use crate::edge_model::TimeCoefficients;

    #[test]
    fn equal_split_spreads_remainder() {
        let p = AllocationProblem::new(toy::coeffs(&[1.0, 1.0, 1.0]), 10.0, 10, 1, 10).unwrap();
        let hu = hu_equal_allocation(&p);
        assert_eq!(hu.batches, vec![4, 3, 3]);
        assert_eq!(hu.taus, vec![2, 3, 3]);
    }

    #[test]
    fn homogeneous_equal_split_has_no_staleness() {
        let hu = hu_equal_allocation(&toy::homogeneous());
        assert_eq!(hu.taus, vec![2, 2]);
        assert_eq!(hu.report.max_staleness, 0.0);
    }

    #[test]
    fn update_ratio_tracks_clock_ratio() {
        // Compute-dominated: c2 ratio 2.4 GHz / 700 MHz.
        let fast = TimeCoefficients::new(1.0 / 2.4e3, 1e-9, 1e-3).unwrap();
        let slow = TimeCoefficients::new(1.0 / 7e2, 1e-9, 1e-3).unwrap();
        let p = AllocationProblem::new(vec![fast, slow], 300.0, 200, 1, 200).unwrap();
        let hu = hu_equal_allocation(&p);
        let ratio = hu.taus[0] as f64 / hu.taus[1] as f64;
        assert!((ratio - 2.4e9 / 7e8).abs() / (2.4e9 / 7e8) < 0.02, "{ratio}");
    }

    #[test]
    fn non_contributing_learner_flagged() {
        let c = TimeCoefficients::new(1.0, 0.0, 0.0).unwrap();
        let slow = TimeCoefficients::new(50.0, 0.0, 0.0).unwrap();
        let p = AllocationProblem::new(vec![c, slow], 10.0, 4, 1, 4).unwrap();
        let hu = hu_equal_allocation(&p);
        assert_eq!(hu.taus, vec![5, 0]);
        assert_eq!(hu.contributing(), vec![true, false]);
        hu.check_feasible(&p).unwrap();
    }

    #[test]
    fn synchronous_toys() {
        let s = synchronous_baseline(&toy::homogeneous()).unwrap();
        assert_eq!((s.taus.clone(), s.batches.clone()), (vec![2, 2], vec![5, 5]));
        let s = synchronous_baseline(&toy::heterogeneous()).unwrap();
        assert_eq!(s.taus, vec![1, 1]);
        assert_eq!(s.report.max_staleness, 0.0);
        s.check_feasible(&toy::heterogeneous()).unwrap();
        let p = AllocationProblem::new(toy::coeffs(&[1.0, 1.0]), 3.0, 8, 1, 8).unwrap();
        assert!(matches!(synchronous_baseline(&p), Err(Error::InfeasibleProblem(_))));
    }
}
