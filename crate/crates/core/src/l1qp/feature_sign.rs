//! Feature-sign search: an active-set method that guesses the sign of each
//! nonzero coefficient, solves the resulting unconstrained quadratic on the
//! active set, and repairs sign errors with a discrete line search.

use nalgebra::{DMatrix, DVector};

use super::{L1Qp, L1QpSolution};
use crate::error::{Error, Result};

/// Relative jitter added to a singular active-set system before giving up.
const JITTER: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureSign {
    /// Absolute tolerance on the optimality conditions.
    pub tol: f64,
    /// Bound on feature-sign steps (linear solves).
    pub max_iter: usize,
}

impl Default for FeatureSign {
    fn default() -> Self {
        FeatureSign {
            tol: 1e-10,
            max_iter: 1000,
        }
    }
}

pub fn solve_feature_sign(problem: &L1Qp, tol: f64, max_iter: usize) -> Result<L1QpSolution> {
    FeatureSign { tol, max_iter }.solve(problem, None)
}

impl FeatureSign {
    /// Solves `problem`, optionally starting from `warm`.
    ///
    /// The returned objective never exceeds the objective at the starting
    /// point. If the step budget runs out the best iterate is returned with
    /// `converged == false`.
    pub fn solve(&self, problem: &L1Qp, warm: Option<&DVector<f64>>) -> Result<L1QpSolution> {
        if !(self.tol > 0.0) {
            return Err(Error::Argument(format!("tolerance must be positive, got {}", self.tol)));
        }
        let n = problem.dim();
        let p = problem.p();
        let q = problem.q();
        let lambda = problem.lambda();

        let mut x = match warm {
            Some(w) if w.len() != n => {
                return Err(Error::Argument(format!(
                    "warm start has length {}, expected {n}",
                    w.len()
                )))
            }
            Some(w) => w.clone(),
            None => DVector::zeros(n),
        };
        let mut theta: Vec<f64> = x.iter().map(|v| sign(*v)).collect();

        let mut best_obj = sparse_objective(problem, &x);
        let mut best_x = x.clone();
        let jitter = JITTER * p.trace().max(0.0) / n.max(1) as f64;
        // for positive semidefinite P the largest entry sits on the diagonal
        let p_max = p.diagonal().amax();
        let q_max = q.amax();

        let mut steps = 0;
        let mut converged = false;
        loop {
            let g = sparse_gradient(problem, &x);
            // rounding floor: the gradient cannot be resolved better than this
            let floor = 100.0 * f64::EPSILON * (q_max + lambda + p_max * x.lp_norm(1));
            let tol = self.tol.max(floor);

            let nonzero_optimal = (0..n).all(|i| x[i] == 0.0 || (g[i] + lambda * theta[i]).abs() <= tol);
            if nonzero_optimal {
                // strict comparison keeps the lowest index on ties
                let mut entering: Option<(usize, f64)> = None;
                for i in 0..n {
                    let violation = g[i].abs() - lambda;
                    if x[i] == 0.0 && violation > tol && entering.is_none_or(|(_, v)| violation > v) {
                        entering = Some((i, violation));
                    }
                }
                match entering {
                    None => {
                        converged = true;
                        break;
                    }
                    Some((i, _)) => theta[i] = -sign(g[i]),
                }
            }
            if steps >= self.max_iter {
                break;
            }
            steps += 1;

            let active: Vec<usize> = (0..n).filter(|&i| theta[i] != 0.0).collect();
            let p_aa = DMatrix::from_fn(active.len(), active.len(), |r, c| p[(active[r], active[c])]);
            let rhs = DVector::from_iterator(active.len(), active.iter().map(|&i| q[i] - lambda * theta[i]));
            let target = solve_active(p_aa, &rhs, jitter)?;

            x = line_search(problem, &x, &active, &target);
            for (t, v) in theta.iter_mut().zip(x.iter()) {
                *t = sign(*v);
            }
            let obj = sparse_objective(problem, &x);
            if obj < best_obj {
                best_obj = obj;
                best_x = x.clone();
            }
        }

        let x = if sparse_objective(problem, &x) <= best_obj {
            x
        } else {
            best_x
        };
        Ok(L1QpSolution::at(problem, x, steps, converged))
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn support(x: &DVector<f64>) -> Vec<usize> {
    (0..x.len()).filter(|&i| x[i] != 0.0).collect()
}

/// `P x − q`, touching only the columns of `P` where `x` is nonzero.
fn sparse_gradient(problem: &L1Qp, x: &DVector<f64>) -> DVector<f64> {
    let mut g = -problem.q();
    for i in support(x) {
        g.axpy(x[i], &problem.p().column(i), 1.0);
    }
    g
}

/// Objective evaluated over the support of `x` only.
fn sparse_objective(problem: &L1Qp, x: &DVector<f64>) -> f64 {
    let s = support(x);
    let p = problem.p();
    let mut quad = 0.0;
    let mut lin = 0.0;
    let mut l1 = 0.0;
    for &i in &s {
        let pi: f64 = s.iter().map(|&j| p[(i, j)] * x[j]).sum();
        quad += x[i] * pi;
        lin += problem.q()[i] * x[i];
        l1 += x[i].abs();
    }
    0.5 * quad - lin + problem.lambda() * l1
}

fn solve_active(p_aa: DMatrix<f64>, rhs: &DVector<f64>, jitter: f64) -> Result<DVector<f64>> {
    let finite = |v: DVector<f64>| Some(v).filter(|v| v.iter().all(|e| e.is_finite()));
    if let Some(sol) = p_aa.clone().cholesky().and_then(|c| finite(c.solve(rhs))) {
        return Ok(sol);
    }
    let mut jittered = p_aa;
    for i in 0..jittered.nrows() {
        jittered[(i, i)] += jitter;
    }
    jittered
        .cholesky()
        .and_then(|c| finite(c.solve(rhs)))
        .ok_or_else(|| Error::Solver(format!("singular {0}x{0} active-set system", rhs.len())))
}

/// Picks the best point on the segment from `x` to the active-set solution,
/// checking the endpoint and every point where an active coefficient changes
/// sign.
fn line_search(problem: &L1Qp, x: &DVector<f64>, active: &[usize], target: &DVector<f64>) -> DVector<f64> {
    let mut breakpoints: Vec<(f64, Option<usize>)> = vec![(1.0, None)];
    for (a, &i) in active.iter().enumerate() {
        let (from, to) = (x[i], target[a]);
        if from != 0.0 && from * to < 0.0 {
            let t = from / (from - to);
            if t > 0.0 && t < 1.0 {
                breakpoints.push((t, Some(i)));
            }
        }
    }
    breakpoints.sort_by(|a, b| a.0.total_cmp(&b.0));

    let point = |t: f64, zeroed: Option<usize>| {
        let mut y = x.clone();
        for (a, &i) in active.iter().enumerate() {
            y[i] = x[i] + t * (target[a] - x[i]);
        }
        if let Some(i) = zeroed {
            y[i] = 0.0;
        }
        y
    };

    let mut best: Option<(f64, DVector<f64>)> = None;
    for (t, zeroed) in breakpoints {
        let y = point(t, zeroed);
        let obj = sparse_objective(problem, &y);
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, y));
        }
    }
    best.expect("at least the endpoint").1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::l1qp::kkt_residual;

    fn qp(p: &[f64], q: &[f64], lambda: f64) -> L1Qp {
        let n = q.len();
        L1Qp::new(DMatrix::from_row_slice(n, n, p), DVector::from_row_slice(q), lambda).unwrap()
    }

    #[test]
    fn one_dimensional_soft_threshold() {
        let sol = solve_feature_sign(&qp(&[2.0], &[3.0], 1.0), 1e-12, 100).unwrap();
        assert!(sol.converged);
        assert!((sol.x[0] - 1.0).abs() < 1e-14);
        assert!(sol.kkt_residual < 1e-12);
    }

    #[test]
    fn zero_linear_term_gives_zero() {
        let p = [2.0, 0.3, 0.0, 0.3, 1.0, 0.2, 0.0, 0.2, 3.0];
        let sol = solve_feature_sign(&qp(&p, &[0.0, 0.0, 0.0], 0.5), 1e-12, 100).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.x, DVector::zeros(3));
        assert_eq!(sol.iterations, 0);
    }

    #[test]
    fn diagonal_problem_decouples() {
        let sol = solve_feature_sign(&qp(&[1.0, 0.0, 0.0, 1.0], &[0.5, 2.0], 1.0), 1e-12, 100).unwrap();
        assert_eq!(sol.x[0], 0.0);
        assert!((sol.x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn negative_coefficients() {
        let sol = solve_feature_sign(&qp(&[1.0, 0.0, 0.0, 4.0], &[-3.0, 0.2], 1.0), 1e-12, 100).unwrap();
        assert!((sol.x[0] + 2.0).abs() < 1e-14);
        assert_eq!(sol.x[1], 0.0);
    }

    #[test]
    fn sign_change_repaired_by_line_search() {
        // correlated coordinates: greedy entry of x0 overshoots then x1 pulls it back
        let p = [1.0, 0.95, 0.95, 1.0];
        let prob = qp(&p, &[1.0, 1.5], 0.1);
        let sol = solve_feature_sign(&prob, 1e-12, 100).unwrap();
        assert!(sol.converged);
        assert!(kkt_residual(&prob, &sol.x) < 1e-10);
    }

    #[test]
    fn warm_start_never_worse() {
        let p = [2.0, 0.5, 0.5, 1.0];
        let prob = qp(&p, &[1.0, -1.0], 0.2);
        let warm = DVector::from_vec(vec![0.3, -0.9]);
        let cold = solve_feature_sign(&prob, 1e-12, 100).unwrap();
        let sol = FeatureSign {
            tol: 1e-12,
            max_iter: 100,
        }
        .solve(&prob, Some(&warm))
        .unwrap();
        assert!(sol.objective <= prob.objective(&warm));
        assert!((sol.objective - cold.objective).abs() < 1e-14);
    }

    #[test]
    fn exhausted_budget_returns_best_iterate() {
        let p = [2.0, 0.5, 0.1, 0.5, 1.0, 0.2, 0.1, 0.2, 3.0];
        let prob = qp(&p, &[2.0, -3.0, 4.0], 0.1);
        let sol = solve_feature_sign(&prob, 1e-12, 1).unwrap();
        assert!(!sol.converged);
        assert!(sol.objective <= 0.0);
    }

    #[test]
    fn rank_deficient_problem() {
        // rank-one P: any split between the two coordinates is optimal
        let prob = qp(&[1.0, 1.0, 1.0, 1.0], &[2.0, 2.0], 0.5);
        let sol = solve_feature_sign(&prob, 1e-8, 100).unwrap();
        assert!((sol.objective - (-1.125)).abs() < 1e-6, "{}", sol.objective);
    }

    #[test]
    fn unbounded_problem_is_an_error() {
        let prob = qp(&[0.0], &[2.0], 1.0);
        assert!(matches!(solve_feature_sign(&prob, 1e-10, 10), Err(Error::Solver(_))));
    }
}
