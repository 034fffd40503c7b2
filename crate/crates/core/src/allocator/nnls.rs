use nalgebra::{DMatrix, DVector};

/// Lawson-Hanson nonnegative least squares: `argmin ||A x - b||, x >= 0`.
///
/// Subproblems on the passive set are solved by SVD, so rank-deficient
/// column sets are fine. Returns `(x, ||A x - b||)`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, f64) {
    let n = a.ncols();
    let tol = 1e-12 * a.norm().max(1.0);
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];

    let residual = |x: &DVector<f64>| b - a * x;
    let max_outer = 3 * n + 10;

    for _ in 0..max_outer {
        let w = a.transpose() * residual(&x);
        let candidate = (0..n)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        match candidate {
            Some(j) if w[j] > tol => passive[j] = true,
            _ => break,
        }

        for _ in 0..max_outer {
            let s = solve_passive(a, b, &passive);
            let bad: Vec<usize> = (0..n).filter(|&i| passive[i] && s[i] <= tol).collect();
            if bad.is_empty() {
                x = s;
                break;
            }
            let alpha = bad
                .iter()
                .map(|&i| x[i] / (x[i] - s[i]))
                .fold(f64::INFINITY, f64::min);
            x += (s - &x) * alpha;
            for i in 0..n {
                if passive[i] && x[i] <= tol {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
        }
    }
    let r = residual(&x).norm();
    (x, r)
}

fn solve_passive(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let cols: Vec<usize> = (0..passive.len()).filter(|&j| passive[j]).collect();
    let mut out = DVector::zeros(passive.len());
    if cols.is_empty() {
        return out;
    }
    let sub = a.select_columns(&cols);
    let sol = sub
        .svd(true, true)
        .solve(b, 1e-12)
        .expect("both singular vector sets were computed");
    for (i, &j) in cols.iter().enumerate() {
        out[j] = sol[i];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_optimum_inside_orthant() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let (x, r) = nnls(&a, &b);
        assert!((x[0] - 1.0).abs() < 1e-10 && (x[1] - 2.0).abs() < 1e-10);
        assert!(r < 1e-10);
    }

    #[test]
    fn negative_component_pinned_to_zero() {
        let a = DMatrix::identity(2, 2);
        let b = DVector::from_vec(vec![-1.0, 2.0]);
        let (x, r) = nnls(&a, &b);
        assert_eq!(x[0], 0.0);
        assert!((x[1] - 2.0).abs() < 1e-12);
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matches_brute_force_on_small_system() {
        // Enumerate every active set of a 3x3 problem and keep the best
        // nonnegative least-squares solution.
        let a = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.5, 0.3, 1.0, -2.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![-0.5, 1.5, 0.2]);
        let mut best = f64::INFINITY;
        for mask in 0u8..8 {
            let passive: Vec<bool> = (0..3).map(|i| mask & (1 << i) != 0).collect();
            let s = solve_passive(&a, &b, &passive);
            if s.iter().all(|&v| v >= 0.0) {
                best = best.min((&b - &a * &s).norm());
            }
        }
        let (x, r) = nnls(&a, &b);
        assert!(x.iter().all(|&v| v >= 0.0));
        assert!((r - best).abs() < 1e-10);
    }
}
