//! Planted-model data generator.
//!
//! A random unit-norm dictionary `D*` and sparse nonnegative profiles `U*`,
//! `V*` are drawn; item features are `X = D*V*` plus Gaussian noise, and each
//! user likes the items with the highest (optionally noisy) affinity
//! `U*ᵀV*`. Users whose planted profiles point the same way are linked in a
//! social graph. The generator knows the true affinities, so it reports the
//! mAPS an oracle would achieve.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{write_dataset, DataPaths, Dataset, FeatureMatrix, GroupMembership, RatingMatrix, SocialGraph};
use crate::error::{Error, Result};
use crate::eval::rank_report;
use crate::stm::top_by_score;

/// Cosine similarity of planted user profiles needed for a social link.
pub const LINK_THRESHOLD: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    /// Feature dimension.
    pub dim: usize,
    pub topics: usize,
    pub users: usize,
    pub items: usize,
    /// Share of topics active in each planted user profile.
    pub user_sparsity: f64,
    /// Share of topics active in each planted item profile.
    pub item_sparsity: f64,
    /// Share of items each user likes.
    pub rating_density: f64,
    pub feature_noise: f64,
    /// Noise added to affinities before picking likes.
    pub rating_noise: f64,
    pub social_noise: f64,
    pub seed: u64,
}

impl SynthConfig {
    /// 8 topics, 100 users, 200 items, 20 likes per user, mild noise.
    pub fn small() -> Self {
        SynthConfig {
            dim: 32,
            topics: 8,
            users: 100,
            items: 200,
            user_sparsity: 0.25,
            item_sparsity: 0.25,
            rating_density: 0.1,
            feature_noise: 0.05,
            rating_noise: 0.05,
            social_noise: 0.05,
            seed: 7,
        }
    }

    /// 100 topics with a single active topic per planted profile.
    pub fn sparse() -> Self {
        SynthConfig {
            dim: 128,
            topics: 100,
            users: 200,
            items: 2000,
            user_sparsity: 0.01,
            item_sparsity: 0.01,
            rating_density: 0.0025,
            feature_noise: 0.02,
            rating_noise: 0.0,
            social_noise: 0.05,
            seed: 11,
        }
    }

    /// Rating density of a large photo-sharing crawl (about 8 likes per 10 000 items).
    pub fn flickr() -> Self {
        SynthConfig {
            dim: 64,
            topics: 32,
            users: 400,
            items: 5000,
            user_sparsity: 0.1,
            item_sparsity: 0.1,
            rating_density: 0.0008025,
            feature_noise: 0.05,
            rating_noise: 0.05,
            social_noise: 0.05,
            seed: 13,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "small" => Ok(Self::small()),
            "sparse" => Ok(Self::sparse()),
            "flickr" => Ok(Self::flickr()),
            other => Err(Error::Argument(format!(
                "unknown preset {other:?} (expected small, sparse or flickr)"
            ))),
        }
    }

    /// Active topics per user profile.
    pub fn user_support(&self) -> usize {
        (self.user_sparsity * self.topics as f64).ceil() as usize
    }

    /// Active topics per item profile.
    pub fn item_support(&self) -> usize {
        (self.item_sparsity * self.topics as f64).ceil() as usize
    }

    /// Likes per user.
    pub fn likes_per_user(&self) -> usize {
        (self.rating_density * self.items as f64).round().max(1.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.topics == 0 || self.users == 0 || self.items == 0 {
            return Err(Error::Argument("dimensions must be positive".into()));
        }
        for (name, v) in [
            ("user_sparsity", self.user_sparsity),
            ("item_sparsity", self.item_sparsity),
            ("rating_density", self.rating_density),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Argument(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        for (name, v) in [
            ("feature_noise", self.feature_noise),
            ("rating_noise", self.rating_noise),
            ("social_noise", self.social_noise),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Argument(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        if self.likes_per_user() > self.items {
            return Err(Error::Argument("more likes per user than items".into()));
        }
        Ok(())
    }
}

/// Generated data together with the model that produced it.
#[derive(Clone, Debug)]
pub struct Planted {
    pub config: SynthConfig,
    pub data: Dataset,
    /// `d × K`, unit-norm columns.
    pub dictionary: DMatrix<f64>,
    /// `K × N`.
    pub users: DMatrix<f64>,
    /// `K × M`.
    pub items: DMatrix<f64>,
    /// mAPS of ranking all items by true affinity.
    pub oracle_maps: f64,
}

impl Planted {
    /// True affinity `U*_iᵀV*_j`.
    pub fn affinity(&self, user: usize, item: usize) -> f64 {
        self.users.column(user).dot(&self.items.column(item))
    }

    /// Fraction of nonzero entries in the planted user and item profiles.
    pub fn planted_density(&self) -> (f64, f64) {
        (
            self.config.user_support() as f64 / self.config.topics as f64,
            self.config.item_support() as f64 / self.config.topics as f64,
        )
    }
}

fn sparse_profiles(k: usize, n: usize, support: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(k, n);
    for j in 0..n {
        for t in sample(rng, k, support) {
            m[(t, j)] = rng.random_range(0.5..1.5);
        }
    }
    m
}

pub fn generate_planted(config: &SynthConfig) -> Result<Planted> {
    config.validate()?;
    let (d, k, n, m) = (config.dim, config.topics, config.users, config.items);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut dictionary = DMatrix::from_fn(d, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    for mut c in dictionary.column_iter_mut() {
        let norm = c.norm();
        c /= norm;
    }
    let items = sparse_profiles(k, m, config.item_support(), &mut rng);
    let users = sparse_profiles(k, n, config.user_support(), &mut rng);

    let mut x = &dictionary * &items;
    if config.feature_noise > 0.0 {
        let noise = Normal::new(0.0, config.feature_noise).expect("validated");
        x.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
    }

    let affinity = users.transpose() * &items;
    let n_likes = config.likes_per_user();
    let all_items: Vec<usize> = (0..m).collect();
    let rating_noise = Normal::new(0.0, config.rating_noise.max(0.0)).expect("validated");
    let mut likes = Vec::with_capacity(n * n_likes);
    for i in 0..n {
        let noisy: Vec<f64> = (0..m)
            .map(|j| {
                let a = affinity[(i, j)];
                if config.rating_noise > 0.0 {
                    a + rating_noise.sample(&mut rng)
                } else {
                    a
                }
            })
            .collect();
        likes.extend(
            top_by_score(&all_items, n_likes, |j| noisy[j])
                .into_iter()
                .map(|j| (i, j)),
        );
    }
    let ratings = RatingMatrix::from_likes(n, m, likes)?;

    let social_noise = Normal::new(0.0, config.social_noise.max(0.0)).expect("validated");
    let unit: Vec<DVector<f64>> = users.column_iter().map(|c| c.normalize()).collect();
    let mut links = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let cos = unit[a].dot(&unit[b]);
            if cos >= LINK_THRESHOLD {
                let s = if config.social_noise > 0.0 {
                    cos + social_noise.sample(&mut rng)
                } else {
                    cos
                };
                links.push((a, b, s.clamp(0.0, 1.0)));
            }
        }
    }
    let social = SocialGraph::new(n, links)?;

    let universe: Vec<String> = (0..k).map(|t| format!("topic-{t}")).collect();
    let members = (0..n)
        .map(|i| (0..k).filter(|&t| users[(t, i)] > 0.0).collect::<BTreeSet<usize>>())
        .collect();
    let groups = GroupMembership::new(universe, members)?;

    let data = Dataset::new(ratings, FeatureMatrix::new(x)?)?
        .with_social(social)?
        .with_groups(groups)?;

    let user_likes: Vec<(usize, Vec<usize>)> = (0..n)
        .map(|i| (i, data.ratings.user_ratings(i).iter().map(|&(j, _)| j).collect()))
        .collect();
    let oracle = rank_report(&|i: usize, j: usize| affinity[(i, j)], &all_items, &user_likes, n)?;

    Ok(Planted {
        config: config.clone(),
        data,
        dictionary,
        users,
        items,
        oracle_maps: oracle.maps,
    })
}

#[derive(Serialize)]
struct Truth<'a> {
    config: &'a SynthConfig,
    oracle_maps: f64,
    /// Column-major: one inner list per atom.
    dictionary: Vec<Vec<f64>>,
    users: Vec<Vec<f64>>,
    items: Vec<Vec<f64>>,
}

pub const TRUTH_FILE: &str = "truth.json";

fn columns(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().copied().collect()).collect()
}

/// Writes the dataset files plus a ground-truth sidecar into `dir`.
pub fn write_planted(dir: &Path, planted: &Planted, binary_features: bool) -> Result<DataPaths> {
    let paths = write_dataset(dir, &planted.data, binary_features)?;
    let truth = Truth {
        config: &planted.config,
        oracle_maps: planted.oracle_maps,
        dictionary: columns(&planted.dictionary),
        users: columns(&planted.users),
        items: columns(&planted.items),
    };
    let path = dir.join(TRUTH_FILE);
    let json = serde_json::to_vec_pretty(&truth).expect("plain data serializes");
    std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_features_are_exact() {
        let cfg = SynthConfig {
            feature_noise: 0.0,
            rating_noise: 0.0,
            social_noise: 0.0,
            ..SynthConfig::small()
        };
        let p = generate_planted(&cfg).unwrap();
        let residual = p.data.features.matrix() - &p.dictionary * &p.items;
        assert_eq!(residual.norm(), 0.0);
    }

    #[test]
    fn declared_shape_and_sparsity() {
        let p = generate_planted(&SynthConfig::small()).unwrap();
        for i in 0..100 {
            assert_eq!(p.data.ratings.user_ratings(i).len(), 20);
            assert_eq!(p.users.column(i).iter().filter(|v| **v != 0.0).count(), 2);
        }
        for j in 0..200 {
            assert_eq!(p.items.column(j).iter().filter(|v| **v != 0.0).count(), 2);
        }
        assert!(p.oracle_maps < 15.0, "{}", p.oracle_maps);
    }

    #[test]
    fn deterministic_under_seed() {
        let a = generate_planted(&SynthConfig::small()).unwrap();
        let b = generate_planted(&SynthConfig::small()).unwrap();
        assert_eq!(a.data, b.data);
        assert_eq!(a.users, b.users);
        assert_eq!(a.oracle_maps.to_bits(), b.oracle_maps.to_bits());
    }

    #[test]
    fn rejects_degenerate_config() {
        let cfg = SynthConfig {
            item_sparsity: 0.0,
            ..SynthConfig::small()
        };
        assert!(generate_planted(&cfg).is_err());
        assert!(SynthConfig::preset("huge").is_err());
    }
}
