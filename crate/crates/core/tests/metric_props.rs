use proptest::prelude::*;
use stm_rec::eval::{aps, average_ranks, percentile_curve, rank_report};

fn scores_and_likes() -> impl Strategy<Value = (Vec<f64>, Vec<usize>)> {
    (2usize..60).prop_flat_map(|m| {
        (
            prop::collection::vec(-10.0f64..10.0, m),
            prop::collection::btree_set(0..m, 1..=m.min(8)).prop_map(|s| s.into_iter().collect()),
        )
    })
}

proptest! {
    #[test]
    fn aps_ignores_increasing_transforms((scores, liked) in scores_and_likes()) {
        let squashed: Vec<f64> = scores.iter().map(|s| (s / 3.0).tanh() * 5.0 + 2.0).collect();
        prop_assert_eq!(aps(&scores, &liked).unwrap(), aps(&squashed, &liked).unwrap());
    }

    #[test]
    fn aps_ignores_candidate_order((scores, liked) in scores_and_likes(), shift in 0usize..60) {
        let m = scores.len();
        let perm: Vec<usize> = (0..m).map(|p| (p + shift) % m).collect();
        let permuted: Vec<f64> = perm.iter().map(|&j| scores[j]).collect();
        let liked_at: Vec<usize> = liked.iter().map(|&j| perm.iter().position(|&p| p == j).unwrap()).collect();
        let a = aps(&scores, &liked).unwrap();
        let b = aps(&permuted, &liked_at).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn aps_lies_in_range((scores, liked) in scores_and_likes()) {
        let v = aps(&scores, &liked).unwrap();
        let m = scores.len() as f64;
        prop_assert!(v >= 100.0 / m - 1e-12 && v <= 100.0 + 1e-12);
    }

    #[test]
    fn average_ranks_sum_like_a_permutation(scores in prop::collection::vec(-3i32..3, 1..50)) {
        let scores: Vec<f64> = scores.into_iter().map(f64::from).collect();
        let n = scores.len() as f64;
        let total: f64 = average_ranks(&scores).iter().sum();
        prop_assert!((total - n * (n + 1.0) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn curve_is_monotone_and_ends_at_one(p in prop::collection::vec(0.1f64..100.0, 1..40)) {
        let curve = percentile_curve(&p);
        prop_assert_eq!(curve.len(), 100);
        prop_assert!(curve.windows(2).all(|w| w[0].cumulative_fraction <= w[1].cumulative_fraction));
        prop_assert_eq!(curve[99].cumulative_fraction, 1.0);
    }
}

#[test]
fn perfect_scorer_reaches_the_floor() {
    let candidates: Vec<usize> = (0..10).collect();
    let likes = vec![(0, vec![3])];
    let scorer = |_: usize, j: usize| if j == 3 { 1.0 } else { 0.0 };
    let report = rank_report(&scorer, &candidates, &likes, 1).unwrap();
    assert_eq!(report.maps, 10.0);
    assert_eq!(report.n_excluded_users, 0);
}

#[test]
fn users_without_likes_are_excluded() {
    let candidates: Vec<usize> = (0..4).collect();
    let likes = vec![(0, vec![1]), (1, vec![])];
    let report = rank_report(&|_: usize, j: usize| -(j as f64), &candidates, &likes, 2).unwrap();
    assert_eq!(report.n_evaluated_users, 1);
    assert_eq!(report.n_excluded_users, 1);
    assert_eq!(report.maps, 50.0);
}
