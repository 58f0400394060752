mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use stm_rec::l1qp::{kkt_residual, solve_coordinate_descent_oracle, FeatureSign, L1Qp};

fn problem() -> impl Strategy<Value = L1Qp> {
    (1usize..=8).prop_flat_map(|k| {
        (
            prop::collection::vec(-2.0f64..2.0, (k + 3) * k),
            prop::collection::vec(-5.0f64..5.0, k),
            0.0f64..3.0,
        )
            .prop_map(move |(a, q, lambda)| {
                let a = DMatrix::from_vec(k + 3, k, a);
                let mut p = a.transpose() * a;
                for i in 0..k {
                    p[(i, i)] += 0.1;
                }
                L1Qp::new(p, DVector::from_vec(q), lambda).unwrap()
            })
    })
}

proptest! {
    #[test]
    fn matches_coordinate_descent(problem in problem()) {
        let fs = FeatureSign::default().solve(&problem, None).unwrap();
        let cd = solve_coordinate_descent_oracle(&problem, 1e-13).unwrap();
        prop_assert!((fs.objective - cd.objective).abs() <= 1e-8 * (1.0 + cd.objective.abs()));
        prop_assert!(fs.kkt_residual <= 1e-6);
    }

    #[test]
    fn zero_is_optimal_once_lambda_dominates_q(problem in problem()) {
        let lambda = problem.q().amax();
        let capped = L1Qp::new(problem.p().clone(), problem.q().clone(), lambda).unwrap();
        let sol = FeatureSign::default().solve(&capped, None).unwrap();
        prop_assert_eq!(sol.support_size(), 0);
    }

    #[test]
    fn scaling_the_problem_keeps_the_minimizer(problem in problem(), c in 0.1f64..10.0) {
        let scaled = L1Qp::new(problem.p() * c, problem.q() * c, problem.lambda() * c).unwrap();
        let a = FeatureSign::default().solve(&problem, None).unwrap();
        let b = FeatureSign::default().solve(&scaled, None).unwrap();
        prop_assert!((&a.x - &b.x).amax() <= 1e-7 * (1.0 + a.x.amax()));
    }

    #[test]
    fn warm_start_never_hurts(problem in problem(), warm in prop::collection::vec(-1.0f64..1.0, 8)) {
        let warm = DVector::from_iterator(problem.dim(), warm.into_iter().take(problem.dim()));
        let cold = FeatureSign::default().solve(&problem, None).unwrap();
        let hot = FeatureSign::default().solve(&problem, Some(&warm)).unwrap();
        prop_assert!(hot.objective <= problem.objective(&warm) + 1e-12);
        prop_assert!((hot.objective - cold.objective).abs() <= 1e-8 * (1.0 + cold.objective.abs()));
        prop_assert!(kkt_residual(&problem, &hot.x) <= 1e-6);
    }
}
