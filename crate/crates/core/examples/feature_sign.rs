//! Solve a small L1-regularized quadratic program with feature-sign search and
//! compare against coordinate descent.

use nalgebra::{DMatrix, DVector};
use stm_rec::l1qp::{solve_coordinate_descent_oracle, FeatureSign, L1Qp};

fn main() -> stm_rec::Result<()> {
    // P = AᵀA for a random-ish A, so the problem is convex
    let a = DMatrix::from_fn(8, 5, |i, j| ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0);
    let p = a.transpose() * &a;
    let q = DVector::from_vec(vec![1.5, -0.4, 0.2, 2.0, -1.1]);

    for lambda in [0.0, 0.5, 1.0, 2.5] {
        let problem = L1Qp::new(p.clone(), q.clone(), lambda)?;
        let fs = FeatureSign::default().solve(&problem, None)?;
        let cd = solve_coordinate_descent_oracle(&problem, 1e-12)?;
        println!(
            "lambda {lambda:4.1}: objective {:+.8} (cd {:+.8}), support {}, kkt {:.1e}, steps {}",
            fs.objective,
            cd.objective,
            fs.support_size(),
            fs.kkt_residual,
            fs.iterations
        );
    }
    Ok(())
}
