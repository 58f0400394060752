//! L1-regularized quadratic programs in the canonical form
//!
//! ```text
//! minimize  ½ xᵀP x − qᵀx + λ‖x‖₁
//! ```
//!
//! with `P` symmetric positive semidefinite. Every sparse profile update in the
//! topic models is cast into this form and handed to [`solve_feature_sign`].
//! [`solve_coordinate_descent_oracle`] is a slow, independent solver kept for
//! cross-checking.

mod coordinate_descent;
mod feature_sign;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub use coordinate_descent::solve_coordinate_descent_oracle;
pub use feature_sign::{solve_feature_sign, FeatureSign};

#[derive(Clone, Debug, PartialEq)]
pub struct L1Qp {
    p: DMatrix<f64>,
    q: DVector<f64>,
    lambda: f64,
}

impl L1Qp {
    pub fn new(p: DMatrix<f64>, q: DVector<f64>, lambda: f64) -> Result<Self> {
        let n = q.len();
        if p.nrows() != n || p.ncols() != n {
            return Err(Error::Argument(format!(
                "P is {}x{} but q has length {n}",
                p.nrows(),
                p.ncols()
            )));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Argument(format!(
                "lambda must be finite and nonnegative, got {lambda}"
            )));
        }
        if p.iter().chain(q.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Argument("P and q must be finite".into()));
        }
        let scale = p.amax().max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (p[(i, j)] - p[(j, i)]).abs() > 1e-10 * scale {
                    return Err(Error::Argument(format!("P is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(L1Qp { p, q, lambda })
    }

    /// Skips validation; for systems symmetric and finite by construction.
    pub(crate) fn new_trusted(p: DMatrix<f64>, q: DVector<f64>, lambda: f64) -> Self {
        debug_assert!(p.is_square() && p.nrows() == q.len() && lambda >= 0.0);
        L1Qp { p, q, lambda }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn q(&self) -> &DVector<f64> {
        &self.q
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.p * x)) - self.q.dot(x) + self.lambda * x.lp_norm(1)
    }

    /// Gradient of the smooth part, `P x − q`.
    pub fn smooth_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.p * x - &self.q
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct L1QpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl L1QpSolution {
    pub(crate) fn at(problem: &L1Qp, x: DVector<f64>, iterations: usize, converged: bool) -> Self {
        L1QpSolution {
            objective: problem.objective(&x),
            kkt_residual: kkt_residual(problem, &x),
            x,
            iterations,
            converged,
        }
    }

    pub fn support_size(&self) -> usize {
        self.x.iter().filter(|v| **v != 0.0).count()
    }
}

/// Largest violation of the optimality conditions at `x`.
///
/// For `x_i ≠ 0` the violation is `|g_i + λ sign(x_i)|`; for `x_i = 0` it is
/// `max(|g_i| − λ, 0)`, where `g = P x − q`.
pub fn kkt_residual(problem: &L1Qp, x: &DVector<f64>) -> f64 {
    assert_eq!(x.len(), problem.dim(), "dimension mismatch");
    let g = problem.smooth_gradient(x);
    let lambda = problem.lambda;
    x.iter()
        .zip(g.iter())
        .map(|(&xi, &gi)| {
            if xi != 0.0 {
                (gi + lambda * xi.signum()).abs()
            } else {
                (gi.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}
