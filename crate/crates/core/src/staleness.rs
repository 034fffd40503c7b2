//! Learner pairs, staleness metrics and the pair-multiplier gradients.
//!
//! Learners are 0-based in code; [`PairMatrix::one_based`] gives the
//! conventional 1-based listing.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// All unordered learner pairs `(first, second)`, `first < second`, in
/// lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairMatrix {
    learners: usize,
    pairs: Vec<(usize, usize)>,
}

impl PairMatrix {
    pub fn new(learners: usize) -> Result<Self> {
        if learners == 0 {
            return Err(Error::InvalidScenario("at least one learner is required".into()));
        }
        let pairs = (0..learners)
            .flat_map(|k| (k + 1..learners).map(move |l| (k, l)))
            .collect();
        Ok(PairMatrix { learners, pairs })
    }

    pub fn learners(&self) -> usize {
        self.learners
    }

    /// Number of pairs, `K (K - 1) / 2`.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn one_based(&self) -> Vec<(usize, usize)> {
        self.pairs.iter().map(|&(a, b)| (a + 1, b + 1)).collect()
    }
}

/// Shorthand for [`PairMatrix::new`].
pub fn pair_matrix(learners: usize) -> Result<PairMatrix> {
    PairMatrix::new(learners)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StalenessReport {
    pub max_staleness: f64,
    pub avg_staleness: f64,
    pub per_pair: Vec<f64>,
}

pub fn staleness_report(taus: &[f64], pm: &PairMatrix) -> Result<StalenessReport> {
    if taus.len() != pm.learners() {
        return Err(Error::InvalidScenario(format!(
            "{} update counts for {} learners",
            taus.len(),
            pm.learners()
        )));
    }
    let per_pair: Vec<f64> = pm
        .pairs()
        .iter()
        .map(|&(a, b)| (taus[a] - taus[b]).abs())
        .collect();
    let max_staleness = per_pair.iter().copied().fold(0.0, f64::max);
    let avg_staleness = if per_pair.is_empty() {
        0.0
    } else {
        per_pair.iter().sum::<f64>() / per_pair.len() as f64
    };
    Ok(StalenessReport {
        max_staleness,
        avg_staleness,
        per_pair,
    })
}

/// Convenience wrapper for integer update counts.
pub fn staleness_report_int(taus: &[u64], pm: &PairMatrix) -> Result<StalenessReport> {
    let taus: Vec<f64> = taus.iter().map(|&t| t as f64).collect();
    staleness_report(&taus, pm)
}

/// Multipliers of the two one-sided staleness constraints of each pair:
/// `mu[n]` for `tau_first - tau_second <= z`, `mu_prime[n]` for the reverse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMultipliers {
    pub mu: Vec<f64>,
    pub mu_prime: Vec<f64>,
}

impl PairMultipliers {
    pub fn zeros(pairs: usize) -> Self {
        PairMultipliers {
            mu: vec![0.0; pairs],
            mu_prime: vec![0.0; pairs],
        }
    }

    /// `sum(mu) + sum(mu_prime)`.
    pub fn total(&self) -> f64 {
        self.mu.iter().chain(&self.mu_prime).sum()
    }

    fn check(&self, pairs: usize) -> Result<()> {
        if self.mu.len() != pairs || self.mu_prime.len() != pairs {
            return Err(Error::InvalidMultipliers(format!(
                "expected {pairs} pair multipliers, got {} and {}",
                self.mu.len(),
                self.mu_prime.len()
            )));
        }
        if let Some(v) = self.mu.iter().chain(&self.mu_prime).find(|v| v.is_nan() || **v < 0.0) {
            return Err(Error::InvalidMultipliers(format!(
                "pair multipliers must be nonnegative, found {v}"
            )));
        }
        Ok(())
    }
}

/// Gradient of the pair-constraint terms with respect to each `tau_k`,
/// accumulated pair by pair.
pub fn u_vectors_direct(pm: &PairMatrix, mult: &PairMultipliers) -> Result<(Vec<f64>, Vec<f64>)> {
    mult.check(pm.len())?;
    let mut u = vec![0.0; pm.learners()];
    let mut u_prime = vec![0.0; pm.learners()];
    for (n, &(a, b)) in pm.pairs().iter().enumerate() {
        u[a] += mult.mu[n];
        u[b] -= mult.mu[n];
        u_prime[a] -= mult.mu_prime[n];
        u_prime[b] += mult.mu_prime[n];
    }
    Ok((u, u_prime))
}

/// 1-based position of the first pair whose first element is learner `k`
/// (1-based): `1 + sum_{m=1}^{k-1} (K - m)`.
pub fn block_start(learners: usize, k: usize) -> usize {
    1 + (1..k).map(|m| learners - m).sum::<usize>()
}

/// 1-based position of the last pair whose first element is learner `k`:
/// `sum_{m=1}^{k} (K - m)`. Smaller than [`block_start`] when the block is
/// empty (`k = K`).
pub fn block_end(learners: usize, k: usize) -> usize {
    (1..=k).map(|m| learners - m).sum()
}

/// Same vectors as [`u_vectors_direct`], built from the block-index layout
/// of the lexicographic pair list instead of walking the pairs.
///
/// Learner `k` is the first element of pairs `block_start(k)..=block_end(k)`
/// and the second element of pair `block_start(j) + (k - j - 1)` for every
/// `j < k`.
pub fn u_vectors_indexed(learners: usize, mult: &PairMultipliers) -> Result<(Vec<f64>, Vec<f64>)> {
    if learners == 0 {
        return Err(Error::InvalidScenario("at least one learner is required".into()));
    }
    let pairs = learners * (learners - 1) / 2;
    mult.check(pairs)?;
    let mut u = Vec::with_capacity(learners);
    let mut u_prime = Vec::with_capacity(learners);
    for k in 1..=learners {
        let (start, end) = (block_start(learners, k), block_end(learners, k));
        let mut first = 0.0;
        let mut first_prime = 0.0;
        for j in start..=end {
            first += mult.mu[j - 1];
            first_prime += mult.mu_prime[j - 1];
        }
        let mut second = 0.0;
        let mut second_prime = 0.0;
        for j in 1..k {
            let n = block_start(learners, j) + (k - j - 1);
            second += mult.mu[n - 1];
            second_prime += mult.mu_prime[n - 1];
        }
        u.push(first - second);
        u_prime.push(second_prime - first_prime);
    }
    Ok((u, u_prime))
}
