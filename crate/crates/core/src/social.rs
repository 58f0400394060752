//! Social extension of the topic model. User profiles additionally explain an
//! observed user-user similarity through dense factor profiles `Z`:
//!
//! ```text
//! STM objective + (λ_S/2)‖I^S∘(S − UᵀZ)‖² + λ_Z‖Z‖²_F
//! ```
//!
//! With `λ_S = 0` the social terms are skipped and training reproduces STM
//! exactly.

use nalgebra::{DMatrix, DVector};

use crate::data::{Dataset, SocialGraph, SplitMasks};
use crate::error::{Error, Result};
use crate::fit::{self, Penalty, Profiles};
use crate::hyper::Hyperparams;
use crate::l1qp::L1Qp;
use crate::stm::StmState;

#[derive(Clone, Debug, PartialEq)]
pub struct SoStmState {
    pub topic: StmState,
    /// One column per user, `K × N`.
    pub factor_profiles: DMatrix<f64>,
}

impl SoStmState {
    pub fn predict(&self, user: usize, item: usize) -> f64 {
        self.topic.predict(user, item)
    }

    /// Predicted similarity `U_iᵀZ_m`.
    pub fn predict_similarity(&self, a: usize, b: usize) -> f64 {
        self.topic.user_profiles.column(a).dot(&self.factor_profiles.column(b))
    }
}

fn graph(data: &Dataset) -> Result<SocialGraph> {
    data.social_graph()
        .ok_or_else(|| Error::MissingInput("social model needs a social graph or group memberships".into()))
}

pub fn sostm_objective(state: &SoStmState, data: &Dataset) -> Result<f64> {
    let graph = graph(data)?;
    Ok(fit::objective(
        data,
        Some(&graph),
        &Profiles {
            atoms: state.topic.dictionary.atoms(),
            users: &state.topic.user_profiles,
            items: &state.topic.item_profiles,
            factors: Some(&state.factor_profiles),
        },
        &state.topic.hyper,
        Penalty::Sparse,
    ))
}

/// The user subproblem with the social reconstruction term included, or
/// `None` when the user has neither ratings nor weighted links.
pub fn assemble_user_subproblem_social(state: &SoStmState, data: &Dataset, user: usize) -> Result<Option<L1Qp>> {
    let graph = graph(data)?;
    if user >= data.n_users() {
        return Err(Error::Argument(format!("user {user} out of range")));
    }
    let h = &state.topic.hyper;
    let rated = data.ratings.user_ratings(user);
    let links = graph.neighbors(user);
    if rated.is_empty() && (links.is_empty() || h.lambda_s == 0.0) {
        return Ok(None);
    }
    let (p, q) = fit::user_system(
        &state.topic.item_profiles,
        rated,
        h.lambda_r,
        Some((&state.factor_profiles, links, h.lambda_s)),
    );
    L1Qp::new(p, q, h.lambda_u).map(Some)
}

/// Closed-form minimizer of the objective over factor profile `user`, with
/// everything else fixed. Returns the current column unchanged when `λ_S = 0`.
pub fn update_factor_profile(state: &SoStmState, data: &Dataset, user: usize) -> Result<DVector<f64>> {
    let graph = graph(data)?;
    if user >= data.n_users() {
        return Err(Error::Argument(format!("user {user} out of range")));
    }
    let h = &state.topic.hyper;
    if h.lambda_s == 0.0 {
        return Ok(state.factor_profiles.column(user).into_owned());
    }
    fit::factor_column(
        &state.topic.user_profiles,
        graph.neighbors(user),
        h.lambda_s,
        h.lambda_z,
    )
}

/// Trains the social model on the training ratings of `masks`. The social
/// graph is the explicit one if present, otherwise group-overlap similarity.
pub fn train_sostm(data: &Dataset, masks: &SplitMasks, hyper: &Hyperparams) -> Result<SoStmState> {
    let graph = graph(data)?;
    let train = masks.train_view(data);
    let fitted = fit::fit(&train, Some(&graph), hyper, Penalty::Sparse)?;
    Ok(SoStmState {
        topic: StmState {
            dictionary: fitted.dictionary,
            user_profiles: fitted.users,
            item_profiles: fitted.items,
            hyper: hyper.clone(),
            objective_trace: fitted.trace,
        },
        factor_profiles: fitted.factors.expect("social fit keeps factors"),
    })
}
