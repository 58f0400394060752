use nalgebra::DVector;

use super::{L1Qp, L1QpSolution};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 1_000_000;

/// Cyclic coordinate descent with exact soft-threshold updates.
///
/// Slow but simple enough to trust; used to cross-check feature-sign search.
/// Stops when no coordinate moves by `tol` or more in a full sweep.
pub fn solve_coordinate_descent_oracle(problem: &L1Qp, tol: f64) -> Result<L1QpSolution> {
    if !(tol > 0.0) {
        return Err(Error::Argument(format!("tolerance must be positive, got {tol}")));
    }
    let n = problem.dim();
    let p = problem.p();
    let q = problem.q();
    let lambda = problem.lambda();
    let mut x: DVector<f64> = DVector::zeros(n);

    for sweep in 1..=MAX_SWEEPS {
        let mut max_change: f64 = 0.0;
        for i in 0..n {
            let off_diag: f64 = (0..n).filter(|&k| k != i).map(|k| p[(i, k)] * x[k]).sum();
            let r = q[i] - off_diag;
            let next = if p[(i, i)] > 0.0 {
                soft_threshold(r, lambda) / p[(i, i)]
            } else if r.abs() > lambda {
                return Err(Error::Solver(format!(
                    "coordinate {i} has zero curvature and gradient {r} beyond lambda {lambda}"
                )));
            } else {
                0.0
            };
            max_change = max_change.max((next - x[i]).abs());
            x[i] = next;
        }
        if max_change < tol {
            return Ok(L1QpSolution::at(problem, x, sweep, true));
        }
    }
    Ok(L1QpSolution::at(problem, x, MAX_SWEEPS, false))
}

fn soft_threshold(v: f64, lambda: f64) -> f64 {
    v.signum() * (v.abs() - lambda).max(0.0)
}

#[cfg(test)]
mod tests {
    use nalgebra::DMatrix;

    use super::*;

    #[test]
    fn single_coordinate() {
        let prob = L1Qp::new(DMatrix::from_element(1, 1, 2.0), DVector::from_element(1, 3.0), 1.0).unwrap();
        let sol = solve_coordinate_descent_oracle(&prob, 1e-14).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identity_is_soft_threshold() {
        let q = DVector::from_vec(vec![3.0, -0.2, -1.5, 0.9]);
        let prob = L1Qp::new(DMatrix::identity(4, 4), q.clone(), 0.5).unwrap();
        let sol = solve_coordinate_descent_oracle(&prob, 1e-14).unwrap();
        for i in 0..4 {
            assert_eq!(sol.x[i], soft_threshold(q[i], 0.5));
        }
    }

    #[test]
    fn descends_from_zero() {
        let a = DMatrix::from_fn(10, 8, |i, j| ((i * 8 + j) as f64 * 0.37).sin());
        let p = a.transpose() * &a + DMatrix::identity(8, 8) * 0.1;
        let q = DVector::from_fn(8, |i, _| (i as f64 * 1.3).cos());
        let prob = L1Qp::new(p, q, 0.05).unwrap();
        let sol = solve_coordinate_descent_oracle(&prob, 1e-12).unwrap();
        assert!(sol.objective <= prob.objective(&DVector::zeros(8)));
        assert!(sol.kkt_residual < 1e-9);
    }

    #[test]
    fn zero_diagonal_with_large_gradient_fails() {
        let prob = L1Qp::new(DMatrix::zeros(1, 1), DVector::from_element(1, 2.0), 1.0).unwrap();
        assert!(solve_coordinate_descent_oracle(&prob, 1e-10).is_err());
        let ok = L1Qp::new(DMatrix::zeros(1, 1), DVector::from_element(1, 0.5), 1.0).unwrap();
        assert_eq!(solve_coordinate_descent_oracle(&ok, 1e-10).unwrap().x[0], 0.0);
    }
}
