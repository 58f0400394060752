use std::collections::{BTreeSet, HashMap};

use nalgebra::DMatrix;
use proptest::prelude::*;
use stm_rec::data::{
    block_split, ingest_dataset, write_dataset, DataPaths, Dataset, FeatureMatrix, FeatureScaling, GroupMembership,
    Rating, RatingMatrix, SocialGraph,
};

/// Random dataset where every user rates at least one item.
fn dataset() -> impl Strategy<Value = Dataset> {
    (1usize..8, 1usize..10, 1usize..5).prop_flat_map(|(n, m, d)| {
        (
            prop::collection::vec(prop::collection::btree_map(0..m, -5.0f64..5.0, 1..=m), n),
            prop::collection::vec(-100.0f64..100.0, d * m),
            prop::collection::btree_map((0..n, 0..n), 0.0f64..1.0, 0..n * 2),
            prop::collection::vec(prop::collection::btree_set(0usize..3, 0..3), n),
        )
            .prop_map(move |(rows, feats, links, groups)| {
                let ratings = rows
                    .iter()
                    .enumerate()
                    .flat_map(|(user, r)| r.iter().map(move |(&item, &value)| Rating { user, item, value }));
                let ratings = RatingMatrix::new(n, m, ratings).unwrap();
                let features = FeatureMatrix::new(DMatrix::from_vec(d, m, feats)).unwrap();
                let links = links
                    .into_iter()
                    .filter(|((a, b), _)| a < b)
                    .map(|((a, b), s)| (a, b, s));
                let universe = vec!["a".to_string(), "b".to_string(), "c".to_string()];
                Dataset::new(ratings, features)
                    .unwrap()
                    .with_social(SocialGraph::new(n, links).unwrap())
                    .unwrap()
                    .with_groups(
                        GroupMembership::new(universe, groups.into_iter().collect::<Vec<BTreeSet<_>>>()).unwrap(),
                    )
                    .unwrap()
            })
    })
}

fn index(labels: &[String]) -> HashMap<&str, usize> {
    labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect()
}

fn round_trip(data: &Dataset, binary: bool) -> Dataset {
    let dir = tempfile::tempdir().unwrap();
    let written = write_dataset(dir.path(), data, binary).unwrap();
    assert_eq!(DataPaths::from_dir(dir.path()).unwrap(), written);
    ingest_dataset(&written, FeatureScaling::Raw).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip_preserves_everything(data in dataset()) {
        let back = round_trip(&data, false);
        let users = index(&back.user_labels);
        let items = index(&back.item_labels);
        prop_assert_eq!(back.ratings.n_observed(), data.ratings.n_observed());
        for r in data.ratings.entries() {
            let (u, j) = (users[data.user_labels[r.user].as_str()], items[data.item_labels[r.item].as_str()]);
            prop_assert_eq!(back.ratings.get(u, j), Some(r.value));
        }
        for j in 0..data.n_items() {
            let jj = items[data.item_labels[j].as_str()];
            prop_assert_eq!(back.features.column(jj), data.features.column(j));
        }
        let (s, t) = (data.social.as_ref().unwrap(), back.social.as_ref().unwrap());
        prop_assert_eq!(s.n_pairs(), t.n_pairs());
        for (a, b, v) in s.pairs() {
            let (aa, bb) = (users[data.user_labels[a].as_str()], users[data.user_labels[b].as_str()]);
            prop_assert_eq!(t.get(aa, bb), Some(v));
        }
        let (g, h) = (data.groups.as_ref().unwrap(), back.groups.as_ref().unwrap());
        for u in 0..data.n_users() {
            let names = |m: &GroupMembership, i: usize| -> BTreeSet<String> {
                m.groups_of(i).iter().map(|&k| m.universe()[k].clone()).collect()
            };
            prop_assert_eq!(names(g, u), names(h, users[data.user_labels[u].as_str()]));
        }
    }

    #[test]
    fn binary_features_round_trip_in_single_precision(data in dataset()) {
        let back = round_trip(&data, true);
        let drift = (back.features.matrix() - data.features.matrix()).amax();
        prop_assert!(drift <= 1e-5);
    }

    #[test]
    fn block_split_partitions_the_ratings(data in dataset(), seed in 0u64..100) {
        prop_assume!(data.n_users() >= 2 && data.n_items() >= 2);
        let masks = block_split(&data, seed, 0.5, 0.5).unwrap();
        prop_assert_eq!(masks.train().len() + masks.test().len(), data.ratings.n_observed());
        for &(u, j) in masks.test() {
            prop_assert!(masks.test_users().contains(&u) && masks.test_items().contains(&j));
            prop_assert!(!masks.is_train(u, j));
        }
        let again = block_split(&data, seed, 0.5, 0.5).unwrap();
        prop_assert_eq!(masks.fingerprint(), again.fingerprint());
        prop_assert_eq!(masks.train_view(&data).ratings.n_observed(), masks.train().len());
    }
}

#[test]
fn standardized_features_have_zero_mean_unit_variance() {
    let mut f = FeatureMatrix::new(DMatrix::from_row_slice(2, 4, &[1.0, 2.0, 3.0, 4.0, 5.0, 5.0, 5.0, 5.0])).unwrap();
    f.standardize();
    let row = f.matrix().row(0);
    assert!(row.mean().abs() < 1e-12);
    assert!((row.map(|v| v * v).mean() - 1.0).abs() < 1e-12);
    // a constant dimension stays finite
    assert!(f.matrix().row(1).iter().all(|v| v.is_finite()));
}
