//! Sparse Topic Model: items and users share a sparse code over a learned
//! dictionary of visual topics.
//!
//! ```text
//! ½‖X − DV‖² + (λ_R/2)‖I∘(R − UᵀV)‖² + λ_U‖U‖₁ + λ_V‖V‖₁,  ‖D_k‖ ≤ 1
//! ```

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::data::{Dataset, SplitMasks};
use crate::dictionary::TopicDictionary;
use crate::error::{Error, Result};
use crate::fit::{self, Penalty, Profiles};
use crate::hyper::Hyperparams;
use crate::l1qp::L1Qp;

/// A trained topic model. Also the shape of CTR-I models, which differ only in
/// how profiles are penalized.
#[derive(Clone, Debug, PartialEq)]
pub struct StmState {
    pub dictionary: TopicDictionary,
    /// One column per user, `K × N`.
    pub user_profiles: DMatrix<f64>,
    /// One column per item, `K × M`.
    pub item_profiles: DMatrix<f64>,
    pub hyper: Hyperparams,
    /// Objective at initialization and after every outer sweep.
    pub objective_trace: Vec<f64>,
}

impl StmState {
    pub fn n_users(&self) -> usize {
        self.user_profiles.ncols()
    }

    pub fn n_items(&self) -> usize {
        self.item_profiles.ncols()
    }

    /// Predicted preference `U_iᵀV_j`.
    pub fn predict(&self, user: usize, item: usize) -> f64 {
        self.user_profiles.column(user).dot(&self.item_profiles.column(item))
    }

    /// Top `n` of `candidates` for `user` by predicted score, ties broken by
    /// lower item index.
    pub fn recommend_top(&self, user: usize, candidates: &[usize], n: usize) -> Vec<usize> {
        top_by_score(candidates, n, |j| self.predict(user, j))
    }

    /// Profile for an item with no ratings, from its features alone.
    pub fn encode_item(&self, features: &DVector<f64>) -> Result<DVector<f64>> {
        encode_cold_start(&self.dictionary, features, self.hyper.lambda_v)
    }

    pub fn iterations(&self) -> usize {
        self.objective_trace.len().saturating_sub(1)
    }
}

pub(crate) fn top_by_score(candidates: &[usize], n: usize, score: impl Fn(usize) -> f64) -> Vec<usize> {
    let mut scored: Vec<(usize, f64)> = candidates.iter().map(|&j| (j, score(j))).collect();
    scored.sort_by(|a, b| match b.1.total_cmp(&a.1) {
        Ordering::Equal => a.0.cmp(&b.0),
        o => o,
    });
    scored.into_iter().take(n).map(|(j, _)| j).collect()
}

/// The STM objective of `state` on `data`'s features and ratings.
pub fn stm_objective(state: &StmState, data: &Dataset) -> f64 {
    fit::objective(
        data,
        None,
        &Profiles {
            atoms: state.dictionary.atoms(),
            users: &state.user_profiles,
            items: &state.item_profiles,
            factors: None,
        },
        &state.hyper,
        Penalty::Sparse,
    )
}

/// Per-term breakdown of the objective, for diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ObjectiveTerms {
    pub content: f64,
    pub ratings: f64,
    pub user_penalty: f64,
    pub item_penalty: f64,
}

impl ObjectiveTerms {
    pub fn total(&self) -> f64 {
        self.content + self.ratings + self.user_penalty + self.item_penalty
    }
}

pub fn stm_objective_terms(state: &StmState, data: &Dataset) -> ObjectiveTerms {
    let h = &state.hyper;
    ObjectiveTerms {
        content: state
            .dictionary
            .reconstruction_error(data.features.matrix(), &state.item_profiles),
        ratings: 0.5 * h.lambda_r * fit::rating_loss(&data.ratings, &state.user_profiles, &state.item_profiles),
        user_penalty: h.lambda_u * state.user_profiles.lp_norm(1),
        item_penalty: h.lambda_v * state.item_profiles.lp_norm(1),
    }
}

/// The sparse-coding problem for item `item` with the dictionary and user
/// profiles held fixed.
pub fn assemble_item_subproblem(state: &StmState, data: &Dataset, item: usize) -> Result<L1Qp> {
    check_item(data, item)?;
    let d = state.dictionary.atoms();
    let (p, q) = fit::item_system(
        &d.tr_mul(d),
        d.tr_mul(&data.features.column(item)),
        &state.user_profiles,
        data.ratings.item_ratings(item),
        state.hyper.lambda_r,
    );
    L1Qp::new(p, q, state.hyper.lambda_v)
}

/// The sparse-coding problem for user `user` with item profiles held fixed,
/// or `None` if the user has no observed ratings (their profile is zero).
pub fn assemble_user_subproblem(state: &StmState, data: &Dataset, user: usize) -> Result<Option<L1Qp>> {
    if user >= data.n_users() {
        return Err(Error::Argument(format!("user {user} out of range")));
    }
    let rated = data.ratings.user_ratings(user);
    if rated.is_empty() {
        return Ok(None);
    }
    let (p, q) = fit::user_system(&state.item_profiles, rated, state.hyper.lambda_r, None);
    L1Qp::new(p, q, state.hyper.lambda_u).map(Some)
}

/// Sparse code of an unrated item: `argmin ½‖x − Dv‖² + λ_V‖v‖₁`.
pub fn encode_cold_start(dictionary: &TopicDictionary, features: &DVector<f64>, lambda_v: f64) -> Result<DVector<f64>> {
    if features.len() != dictionary.dim() {
        return Err(Error::Argument(format!(
            "feature vector has length {}, dictionary expects {}",
            features.len(),
            dictionary.dim()
        )));
    }
    fit::encode_content(dictionary, features, lambda_v, Penalty::Sparse)
}

/// Trains an STM on the ratings in `masks`' training set.
///
/// Held-out ratings are never read: the model sees `masks.train_view(data)`.
pub fn train_stm(data: &Dataset, masks: &SplitMasks, hyper: &Hyperparams) -> Result<StmState> {
    let train = masks.train_view(data);
    let fitted = fit::fit(&train, None, hyper, Penalty::Sparse)?;
    Ok(StmState {
        dictionary: fitted.dictionary,
        user_profiles: fitted.users,
        item_profiles: fitted.items,
        hyper: hyper.clone(),
        objective_trace: fitted.trace,
    })
}

pub(crate) fn check_item(data: &Dataset, item: usize) -> Result<()> {
    if item >= data.n_items() {
        return Err(Error::Argument(format!("item {item} out of range")));
    }
    Ok(())
}
