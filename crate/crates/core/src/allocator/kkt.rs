//! Lagrangian diagnostics for the relaxed problem.
//!
//! Stationarity of the Lagrangian gives, per learner `k`,
//!
//! ```text
//! d/d tau_k:  lambda_k c2 d_k + u_k + u'_k - alpha_k                = 0
//! d/d d_k:    lambda_k (c2 tau_k + c1) + omega - nu_k + nu'_k       = 0
//! d/d z:      1 - sum_n (mu_n + mu'_n)                              = 0
//! ```
//!
//! `alpha_k` is the multiplier of `-tau_k <= 0` and `nu_k`, `nu'_k` those of
//! `d_l - d_k <= 0` and `d_k - d_u <= 0`. The closed forms in
//! [`kkt_tau_star`] and [`kkt_d_star`] are kept in their customary
//! shape (both bound multipliers enter with a plus sign); only the residual
//! above is used to certify solutions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{nnls, AllocationProblem, ContinuousAllocation};
use crate::edge_model::TimeCoefficients;
use crate::staleness::{pair_matrix, u_vectors_direct, PairMultipliers};
use crate::{Error, Result};

/// Largest stationarity residual accepted by [`recover_multipliers`].
pub const CERTIFICATE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierSet {
    pub lambda: Vec<f64>,
    pub alpha: Vec<f64>,
    pub omega: f64,
    pub nu: Vec<f64>,
    pub nu_prime: Vec<f64>,
    pub pair: PairMultipliers,
}

impl MultiplierSet {
    pub fn zeros(learners: usize) -> Self {
        MultiplierSet {
            lambda: vec![0.0; learners],
            alpha: vec![0.0; learners],
            omega: 0.0,
            nu: vec![0.0; learners],
            nu_prime: vec![0.0; learners],
            pair: PairMultipliers::zeros(learners * learners.saturating_sub(1) / 2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktCertificate {
    pub multipliers: MultiplierSet,
    /// Max absolute stationarity residual over all `2K + 1` equations.
    pub residual: f64,
}

/// `tau_k* = -(lambda_k c1 + nu_k + nu'_k + omega) / (lambda_k c2)`.
pub fn kkt_tau_star(mult: &MultiplierSet, coeff: &TimeCoefficients, k: usize) -> Result<f64> {
    let lambda = mult.lambda[k];
    if lambda == 0.0 {
        return Err(Error::DegenerateMultiplier(k + 1));
    }
    Ok(-(lambda * coeff.c1 + mult.nu[k] + mult.nu_prime[k] + mult.omega) / (lambda * coeff.c2))
}

/// `d_k* = -(u_k + u'_k + alpha_k) / (lambda_k c2)`.
pub fn kkt_d_star(
    mult: &MultiplierSet,
    coeff: &TimeCoefficients,
    u: &[f64],
    u_prime: &[f64],
    k: usize,
) -> Result<f64> {
    let lambda = mult.lambda[k];
    if lambda == 0.0 {
        return Err(Error::DegenerateMultiplier(k + 1));
    }
    Ok(-(u[k] + u_prime[k] + mult.alpha[k]) / (lambda * coeff.c2))
}

/// Max absolute residual of the stationarity system at `(taus, batches)`.
/// The `z` equation is skipped for a single learner, which has no pairs.
pub fn stationarity_residual(
    problem: &AllocationProblem,
    taus: &[f64],
    batches: &[f64],
    mult: &MultiplierSet,
) -> Result<f64> {
    let k = problem.learners();
    let pm = pair_matrix(k)?;
    let (u, u_prime) = u_vectors_direct(&pm, &mult.pair)?;
    let mut worst: f64 = if pm.is_empty() {
        0.0
    } else {
        (1.0 - mult.pair.total()).abs()
    };
    for i in 0..k {
        let c = &problem.coefficients[i];
        let tau_eq = mult.lambda[i] * c.c2 * batches[i] + u[i] + u_prime[i] - mult.alpha[i];
        let d_eq = mult.lambda[i] * (c.c2 * taus[i] + c.c1) + mult.omega - mult.nu[i] + mult.nu_prime[i];
        worst = worst.max(tau_eq.abs()).max(d_eq.abs());
    }
    Ok(worst)
}

/// Recovers multipliers certifying a relaxed solution.
///
/// Bound multipliers `alpha`, `nu`, `nu'` are fixed at zero. The `d`
/// equations then force `lambda_k = -omega / (c2 tau_k + c1)`, which turns
/// the `tau` and `z` equations into a linear system in `(mu, mu', omega)`.
/// Only pair constraints active at the solution get a column, and the
/// system is fitted by nonnegative least squares.
pub fn recover_multipliers(
    cont: &ContinuousAllocation,
    problem: &AllocationProblem,
) -> Result<KktCertificate> {
    let k = problem.learners();
    if cont.taus.len() != k || cont.batches.len() != k {
        return Err(Error::InvalidScenario(format!(
            "continuous allocation sized for {} learners, problem has {k}",
            cont.taus.len()
        )));
    }
    let pm = pair_matrix(k)?;
    let n = pm.len();
    let mut mult = MultiplierSet::zeros(k);

    if n > 0 {
        let scale = cont.taus.iter().copied().fold(1.0, f64::max);
        let active_tol = 1e-9 * scale;
        let z = cont.slack_z;
        // Columns: active mu_n, active mu'_n, then omega split as +/-.
        let mut columns: Vec<(Vec<f64>, Column)> = Vec::new();
        for (idx, &(a, b)) in pm.pairs().iter().enumerate() {
            let gap = cont.taus[a] - cont.taus[b];
            if gap >= z - active_tol {
                columns.push((incidence(k, a, b, 1.0), Column::Mu(idx)));
            }
            if -gap >= z - active_tol {
                columns.push((incidence(k, a, b, -1.0), Column::MuPrime(idx)));
            }
        }
        let ratio: Vec<f64> = (0..k)
            .map(|i| {
                let c = &problem.coefficients[i];
                c.c2 * cont.batches[i] / (c.c2 * cont.taus[i] + c.c1)
            })
            .collect();
        let mut omega_col: Vec<f64> = ratio.iter().map(|r| -r).collect();
        omega_col.push(0.0);
        columns.push((omega_col.clone(), Column::Omega(1.0)));
        columns.push((omega_col.iter().map(|v| -v).collect(), Column::Omega(-1.0)));

        let a = DMatrix::from_fn(k + 1, columns.len(), |r, c| columns[c].0[r]);
        let mut rhs = DVector::zeros(k + 1);
        rhs[k] = 1.0;
        let (x, _) = nnls(&a, &rhs);
        for (value, (_, col)) in x.iter().zip(&columns) {
            match *col {
                Column::Mu(i) => mult.pair.mu[i] = *value,
                Column::MuPrime(i) => mult.pair.mu_prime[i] = *value,
                Column::Omega(sign) => mult.omega += sign * value,
            }
        }
    }
    for i in 0..k {
        let c = &problem.coefficients[i];
        mult.lambda[i] = -mult.omega / (c.c2 * cont.taus[i] + c.c1);
    }

    let residual = stationarity_residual(problem, &cont.taus, &cont.batches, &mult)?;
    if residual > CERTIFICATE_TOLERANCE {
        return Err(Error::NoCertificate {
            residual,
            tolerance: CERTIFICATE_TOLERANCE,
        });
    }
    Ok(KktCertificate {
        multipliers: mult,
        residual,
    })
}

enum Column {
    Mu(usize),
    MuPrime(usize),
    Omega(f64),
}

/// `sign * (e_a - e_b)` with a trailing 1 for the `z` row.
fn incidence(k: usize, a: usize, b: usize, sign: f64) -> Vec<f64> {
    let mut col = vec![0.0; k + 1];
    col[a] = sign;
    col[b] = -sign;
    col[k] = 1.0;
    col
}
