//! Cold-start experiment: a share of items is withheld entirely, the model is
//! trained on a shrinking share of the rest, and withheld items are
//! recommended from their content encoding alone.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{rank_report, ProfileScorer, RankingReport};
use crate::data::{Dataset, SplitMasks};
use crate::error::{Error, Result};
use crate::hyper::Hyperparams;
use crate::stm::{encode_cold_start, train_stm};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ColdStartConfig {
    pub seed: u64,
    /// Share of items withheld from training.
    pub unseen_fraction: f64,
    /// Shares of the remaining items whose ratings are used for training.
    pub train_fractions: Vec<f64>,
    pub hyper: Hyperparams,
}

impl Default for ColdStartConfig {
    fn default() -> Self {
        ColdStartConfig {
            seed: 0,
            unseen_fraction: 0.2,
            train_fractions: vec![1.0, 0.8, 0.6, 0.4, 0.2],
            hyper: Hyperparams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ColdStartPoint {
    pub train_fraction: f64,
    pub n_train_items: usize,
    pub final_objective: f64,
    /// Ratings of withheld items visible to training; always zero.
    pub unseen_ratings_in_training: usize,
    pub report: RankingReport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ColdStartReport {
    pub config: ColdStartConfig,
    pub unseen_items: Vec<usize>,
    pub points: Vec<ColdStartPoint>,
}

/// Runs the experiment. Withheld items are ranked among themselves for every
/// user who likes at least one of them.
///
/// Training item sets are nested: the 0.4 set is a subset of the 0.6 set.
pub fn cold_start_protocol(data: &Dataset, config: &ColdStartConfig) -> Result<ColdStartReport> {
    let f = config.unseen_fraction;
    if !(f > 0.0 && f < 1.0) {
        return Err(Error::Argument(format!("unseen fraction must lie in (0, 1), got {f}")));
    }
    if let Some(t) = config.train_fractions.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
        return Err(Error::Argument(format!("train fractions must lie in (0, 1], got {t}")));
    }

    let m = data.n_items();
    let mut perm: Vec<usize> = (0..m).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed));
    let n_unseen = ((m as f64) * f).round() as usize;
    let (unseen, seen) = perm.split_at(n_unseen);
    let mut unseen = unseen.to_vec();
    unseen.sort_unstable();
    if unseen.len() < 2 || seen.is_empty() {
        return Err(Error::Evaluation(format!(
            "{m} items leave {} withheld and {} seen; need at least 2 and 1",
            unseen.len(),
            seen.len()
        )));
    }

    let mut withheld = vec![false; m];
    unseen.iter().for_each(|&j| withheld[j] = true);
    let likes = unseen_likes(data, &withheld);
    if likes.is_empty() {
        return Err(Error::Evaluation("no user likes a withheld item".into()));
    }

    let mut points = Vec::with_capacity(config.train_fractions.len());
    for &t in &config.train_fractions {
        let n_train = (((seen.len() as f64) * t).round() as usize).max(1);
        let mut train_items = seen[..n_train].to_vec();
        train_items.sort_unstable();
        let train = data.select_items(&train_items);
        let leaked = train
            .ratings
            .entries()
            .iter()
            .filter(|r| withheld[train_items[r.item]])
            .count();

        let model = train_stm(&train, &SplitMasks::all_train(&train.ratings), &config.hyper)?;

        let mut items = DMatrix::zeros(config.hyper.k, m);
        for &j in &unseen {
            let v = encode_cold_start(&model.dictionary, &data.features.column(j), config.hyper.lambda_v)?;
            items.set_column(j, &v);
        }
        let scorer = ProfileScorer {
            users: &model.user_profiles,
            items: &items,
        };
        let report = rank_report(&scorer, &unseen, &likes, data.n_users())?;
        points.push(ColdStartPoint {
            train_fraction: t,
            n_train_items: train_items.len(),
            final_objective: *model.objective_trace.last().expect("trace starts at initialization"),
            unseen_ratings_in_training: leaked,
            report,
        });
    }

    Ok(ColdStartReport {
        config: config.clone(),
        unseen_items: unseen,
        points,
    })
}

fn unseen_likes(data: &Dataset, withheld: &[bool]) -> Vec<(usize, Vec<usize>)> {
    (0..data.n_users())
        .filter_map(|u| {
            let liked: Vec<usize> = data
                .ratings
                .user_ratings(u)
                .iter()
                .filter(|&&(j, v)| withheld[j] && v > 0.0)
                .map(|&(j, _)| j)
                .collect();
            (!liked.is_empty()).then_some((u, liked))
        })
        .collect()
}
