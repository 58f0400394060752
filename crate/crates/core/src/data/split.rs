use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{Dataset, RatingMatrix};
use crate::error::{Error, Result};

/// Train/test partition of the observed ratings.
///
/// The test block is the set of observed entries whose user and item both fall
/// in the held-out tail of a seeded permutation. `test_users` and `test_items`
/// list that tail (sorted) whether or not they carry test entries; ranking
/// evaluation scores every test item for every test user.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitMasks {
    train: Vec<(usize, usize)>,
    test: Vec<(usize, usize)>,
    test_users: Vec<usize>,
    test_items: Vec<usize>,
}

impl SplitMasks {
    /// Every observed rating is a training rating.
    pub fn all_train(ratings: &RatingMatrix) -> Self {
        SplitMasks {
            train: ratings.entries().iter().map(|r| (r.user, r.item)).collect(),
            test: Vec::new(),
            test_users: Vec::new(),
            test_items: Vec::new(),
        }
    }

    pub fn train(&self) -> &[(usize, usize)] {
        &self.train
    }

    pub fn test(&self) -> &[(usize, usize)] {
        &self.test
    }

    pub fn test_users(&self) -> &[usize] {
        &self.test_users
    }

    pub fn test_items(&self) -> &[usize] {
        &self.test_items
    }

    pub fn is_train(&self, user: usize, item: usize) -> bool {
        self.train.binary_search(&(user, item)).is_ok()
    }

    pub fn is_test(&self, user: usize, item: usize) -> bool {
        self.test.binary_search(&(user, item)).is_ok()
    }

    /// The dataset as training sees it: only training ratings are observed.
    pub fn train_view(&self, data: &Dataset) -> Dataset {
        data.with_ratings(data.ratings.filter(|r| self.is_train(r.user, r.item)))
    }

    /// Liked test items per test user, skipping users without any.
    pub fn test_likes(&self, data: &Dataset) -> Vec<(usize, Vec<usize>)> {
        let mut out: Vec<(usize, Vec<usize>)> = Vec::new();
        for &(u, j) in &self.test {
            if data.ratings.get(u, j).is_some_and(|v| v > 0.0) {
                match out.last_mut() {
                    Some((last, items)) if *last == u => items.push(j),
                    _ => out.push((u, vec![j])),
                }
            }
        }
        out
    }

    /// Stable digest of the partition, used to audit that reports share a split.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for (tag, list) in [(b'r', &self.train), (b't', &self.test)] {
            h.update([tag]);
            for &(u, j) in list {
                h.update((u as u64).to_le_bytes());
                h.update((j as u64).to_le_bytes());
            }
        }
        for (tag, list) in [(b'u', &self.test_users), (b'i', &self.test_items)] {
            h.update([tag]);
            for &x in list {
                h.update((x as u64).to_le_bytes());
            }
        }
        h.finalize().iter().take(12).map(|b| format!("{b:02x}")).collect()
    }
}

/// Holds out the bottom-right block of a randomly permuted rating matrix.
pub fn block_split(data: &Dataset, seed: u64, user_fraction: f64, item_fraction: f64) -> Result<SplitMasks> {
    for (name, f) in [("user_fraction", user_fraction), ("item_fraction", item_fraction)] {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::Argument(format!("{name} must lie in (0, 1), got {f}")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tail = |n: usize, f: f64, rng: &mut ChaCha8Rng| {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        let n_tail = ((n as f64) * f).round() as usize;
        let mut t = perm[n - n_tail.min(n)..].to_vec();
        t.sort_unstable();
        t
    };
    let test_users = tail(data.n_users(), user_fraction, &mut rng);
    let test_items = tail(data.n_items(), item_fraction, &mut rng);

    let mut user_in = vec![false; data.n_users()];
    test_users.iter().for_each(|&u| user_in[u] = true);
    let mut item_in = vec![false; data.n_items()];
    test_items.iter().for_each(|&j| item_in[j] = true);

    let (test, train): (Vec<_>, Vec<_>) = data
        .ratings
        .entries()
        .iter()
        .map(|r| (r.user, r.item))
        .partition(|&(u, j)| user_in[u] && item_in[j]);
    Ok(SplitMasks {
        train,
        test,
        test_users,
        test_items,
    })
}

#[cfg(test)]
mod tests {
    use nalgebra::DMatrix;

    use super::*;
    use crate::data::FeatureMatrix;

    fn dense(n: usize, m: usize) -> Dataset {
        let likes = (0..n).flat_map(|i| (0..m).map(move |j| (i, j)));
        Dataset::new(
            RatingMatrix::from_likes(n, m, likes).unwrap(),
            FeatureMatrix::new(DMatrix::zeros(1, m)).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn quarter_block_of_dense_matrix() {
        let ds = dense(4, 4);
        let s = block_split(&ds, 7, 0.5, 0.5).unwrap();
        assert_eq!(s.train().len(), 12);
        assert_eq!(s.test().len(), 4);
        assert_eq!(s.test_users().len(), 2);
        assert_eq!(s.test_items().len(), 2);
    }

    #[test]
    fn seeded_split_is_deterministic() {
        let ds = dense(6, 5);
        let a = block_split(&ds, 3, 0.5, 0.4).unwrap();
        let b = block_split(&ds, 3, 0.5, 0.4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn fractions_must_be_open_interval() {
        let ds = dense(2, 2);
        assert!(block_split(&ds, 0, 0.0, 0.5).is_err());
        assert!(block_split(&ds, 0, 0.5, 1.0).is_err());
        assert!(block_split(&ds, 0, f64::NAN, 0.5).is_err());
    }

    #[test]
    fn partitions_observed_entries_for_every_seed() {
        // exhaustive over small shapes and seeds
        for n in 1..5 {
            for m in 1..5 {
                let likes: Vec<(usize, usize)> = (0..n)
                    .flat_map(|i| (0..m).map(move |j| (i, j)))
                    .filter(|(i, j)| (i * 7 + j * 3) % 3 != 0)
                    .collect();
                let ds = Dataset::new(
                    RatingMatrix::from_likes(n, m, likes.clone()).unwrap(),
                    FeatureMatrix::new(DMatrix::zeros(1, m)).unwrap(),
                )
                .unwrap();
                for seed in 0..16 {
                    let s = block_split(&ds, seed, 0.5, 0.5).unwrap();
                    let mut all: Vec<_> = s.train().iter().chain(s.test()).copied().collect();
                    all.sort_unstable();
                    assert_eq!(all, likes);
                    assert!(s.train().iter().all(|p| !s.is_test(p.0, p.1)));
                    for &(u, j) in s.test() {
                        assert!(s.test_users().contains(&u) && s.test_items().contains(&j));
                    }
                }
            }
        }
    }
}
