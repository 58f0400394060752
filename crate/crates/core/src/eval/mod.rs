//! Ranking evaluation: average percentile score (APS), its mean over users
//! (mAPS), percentile curves, profile sparsity and topic inspection.
//!
//! For a user, all candidate items are ranked by descending score; tied items
//! share their average rank. An item at rank `r` of `M` sits at percentile
//! `100·r/M`, and the user's APS is the mean percentile of their liked items.
//! Lower is better; a random ranking scores about 50.

use std::cmp::Ordering;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::FactorModel;
use crate::data::{Dataset, SplitMasks};
use crate::error::{Error, Result};
use crate::social::SoStmState;
use crate::stm::StmState;

/// Anything that assigns a preference score to a (user, item) pair.
pub trait Scorer: Sync {
    fn score(&self, user: usize, item: usize) -> f64;
}

impl Scorer for StmState {
    fn score(&self, user: usize, item: usize) -> f64 {
        self.predict(user, item)
    }
}

impl Scorer for SoStmState {
    fn score(&self, user: usize, item: usize) -> f64 {
        self.predict(user, item)
    }
}

impl Scorer for FactorModel {
    fn score(&self, user: usize, item: usize) -> f64 {
        self.predict(user, item)
    }
}

/// Inner products of user and item profile columns.
#[derive(Clone, Copy, Debug)]
pub struct ProfileScorer<'a> {
    pub users: &'a DMatrix<f64>,
    pub items: &'a DMatrix<f64>,
}

impl Scorer for ProfileScorer<'_> {
    fn score(&self, user: usize, item: usize) -> f64 {
        self.users.column(user).dot(&self.items.column(item))
    }
}

impl<F: Fn(usize, usize) -> f64 + Sync> Scorer for F {
    fn score(&self, user: usize, item: usize) -> f64 {
        self(user, item)
    }
}

/// Rank of each score under a descending sort, 1-based, ties averaged.
pub fn average_ranks(scores: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut ranks = vec![0.0; scores.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]].total_cmp(&scores[order[start]]) == Ordering::Equal {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn like_percentiles(scores: &[f64], liked: &[usize]) -> Result<Vec<f64>> {
    if liked.is_empty() {
        return Err(Error::Evaluation("APS is undefined without liked items".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Evaluation("scores contain NaN".into()));
    }
    let m = scores.len() as f64;
    let ranks = average_ranks(scores);
    liked
        .iter()
        .map(|&j| {
            ranks
                .get(j)
                .map(|r| 100.0 * r / m)
                .ok_or_else(|| Error::Evaluation(format!("liked index {j} outside {} scores", scores.len())))
        })
        .collect()
}

/// Average percentile score of the `liked` positions within `scores`.
pub fn aps(scores: &[f64], liked: &[usize]) -> Result<f64> {
    let p = like_percentiles(scores, liked)?;
    Ok(p.iter().sum::<f64>() / p.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UserAps {
    pub user: usize,
    pub n_liked: usize,
    pub aps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub percentile: u32,
    pub cumulative_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankingReport {
    pub maps: f64,
    pub n_evaluated_users: usize,
    /// Candidate users skipped because they have no liked test item.
    pub n_excluded_users: usize,
    pub n_candidate_items: usize,
    pub per_user: Vec<UserAps>,
    pub pps_curve: Vec<CurvePoint>,
}

impl RankingReport {
    pub fn write_curve_csv(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        writeln!(out, "percentile,cumulative_fraction").expect("in-memory write");
        for p in &self.pps_curve {
            writeln!(out, "{},{}", p.percentile, p.cumulative_fraction).expect("in-memory write");
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Ranks `candidates` for every user in `likes` (liked items given by item
/// id, each a member of `candidates`) and summarizes the APS values.
pub fn rank_report(
    scorer: &impl Scorer,
    candidates: &[usize],
    likes: &[(usize, Vec<usize>)],
    n_candidate_users: usize,
) -> Result<RankingReport> {
    let mut position = std::collections::HashMap::with_capacity(candidates.len());
    for (p, &j) in candidates.iter().enumerate() {
        position.insert(j, p);
    }
    let evaluated: Vec<(UserAps, Vec<f64>)> = likes
        .par_iter()
        .filter(|(_, liked)| !liked.is_empty())
        .map(|(user, liked)| {
            let scores: Vec<f64> = candidates.iter().map(|&j| scorer.score(*user, j)).collect();
            let idx = liked
                .iter()
                .map(|j| {
                    position
                        .get(j)
                        .copied()
                        .ok_or_else(|| Error::Evaluation(format!("liked item {j} is not a candidate")))
                })
                .collect::<Result<Vec<_>>>()?;
            let percentiles = like_percentiles(&scores, &idx)?;
            let aps = percentiles.iter().sum::<f64>() / percentiles.len() as f64;
            Ok((
                UserAps {
                    user: *user,
                    n_liked: idx.len(),
                    aps,
                },
                percentiles,
            ))
        })
        .collect::<Result<_>>()?;
    if evaluated.is_empty() {
        return Err(Error::Evaluation("no user has a liked test item".into()));
    }
    let pooled: Vec<f64> = evaluated.iter().flat_map(|(_, p)| p.iter().copied()).collect();
    let per_user: Vec<UserAps> = evaluated.into_iter().map(|(u, _)| u).collect();
    let maps = per_user.iter().map(|u| u.aps).sum::<f64>() / per_user.len() as f64;
    Ok(RankingReport {
        maps,
        n_evaluated_users: per_user.len(),
        n_excluded_users: n_candidate_users.saturating_sub(per_user.len()),
        n_candidate_items: candidates.len(),
        per_user,
        pps_curve: percentile_curve(&pooled),
    })
}

/// Cumulative fraction of `percentiles` at or below each of 1, 2, …, 100.
pub fn percentile_curve(percentiles: &[f64]) -> Vec<CurvePoint> {
    let mut sorted = percentiles.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len().max(1) as f64;
    (1..=100u32)
        .map(|g| CurvePoint {
            percentile: g,
            cumulative_fraction: sorted.partition_point(|&p| p <= g as f64) as f64 / n,
        })
        .collect()
}

/// mAPS over the held-out block of `masks`: every test user with a liked test
/// item ranks all test items.
pub fn maps(model: &impl Scorer, data: &Dataset, masks: &SplitMasks) -> Result<RankingReport> {
    if masks.test().is_empty() {
        return Err(Error::Evaluation("the split has no test ratings".into()));
    }
    rank_report(
        model,
        masks.test_items(),
        &masks.test_likes(data),
        masks.test_users().len(),
    )
}

/// The P-PS curve of the held-out block.
pub fn pps_curve(model: &impl Scorer, data: &Dataset, masks: &SplitMasks) -> Result<Vec<CurvePoint>> {
    maps(model, data, masks).map(|r| r.pps_curve)
}

/// Fraction of entries with magnitude above `eps`.
pub fn profile_sparsity(profiles: &DMatrix<f64>, eps: f64) -> f64 {
    if profiles.is_empty() {
        return 0.0;
    }
    profiles.iter().filter(|v| v.abs() > eps).count() as f64 / profiles.len() as f64
}

pub const SPARSITY_EPS: f64 = 1e-8;

/// Items with the largest weight on `topic`, ties by index.
pub fn topic_top_items(items: &DMatrix<f64>, topic: usize, n: usize) -> Result<Vec<usize>> {
    if topic >= items.nrows() {
        return Err(Error::Argument(format!(
            "topic {topic} out of range (K = {})",
            items.nrows()
        )));
    }
    let row = items.row(topic);
    let all: Vec<usize> = (0..items.ncols()).collect();
    Ok(crate::stm::top_by_score(&all, n, |j| row[j]))
}

mod cold_start;

pub use cold_start::{cold_start_protocol, ColdStartConfig, ColdStartPoint, ColdStartReport};

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_examples() {
        assert_eq!(aps(&[4.0, 3.0, 2.0, 1.0], &[0]).unwrap(), 25.0);
        assert_eq!(aps(&[4.0, 3.0, 2.0, 1.0], &[0, 1, 2, 3]).unwrap(), 62.5);
    }

    #[test]
    fn ties_share_average_rank() {
        assert_eq!(average_ranks(&[1.0, 3.0, 1.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
        assert_eq!(aps(&[0.0; 5], &[2]).unwrap(), 60.0);
    }

    #[test]
    fn empty_likes_rejected() {
        assert!(aps(&[1.0], &[]).is_err());
        assert!(aps(&[1.0], &[1]).is_err());
    }

    #[test]
    fn curve_shape() {
        let c = percentile_curve(&[10.0, 50.0, 50.5, 100.0]);
        assert_eq!(c.len(), 100);
        assert_eq!(c[9].cumulative_fraction, 0.25);
        assert_eq!(c[49].cumulative_fraction, 0.5);
        assert_eq!(c[50].cumulative_fraction, 0.75);
        assert_eq!(c[99].cumulative_fraction, 1.0);
    }

    #[test]
    fn sparsity_extremes() {
        assert_eq!(profile_sparsity(&DMatrix::zeros(3, 4), SPARSITY_EPS), 0.0);
        assert_eq!(profile_sparsity(&DMatrix::from_element(3, 4, 1.0), SPARSITY_EPS), 1.0);
    }

    #[test]
    fn topic_items() {
        let mut v = DMatrix::zeros(2, 5);
        v[(1, 3)] = 0.7;
        assert_eq!(topic_top_items(&v, 1, 2).unwrap(), vec![3, 0]);
        assert_eq!(topic_top_items(&v, 0, 3).unwrap(), vec![0, 1, 2]);
        assert!(topic_top_items(&v, 2, 1).is_err());
    }
}
