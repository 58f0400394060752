//! CTR-I: the topic model with squared-norm instead of L1 profile penalties,
//!
//! ```text
//! ½‖X − DV‖² + (λ_R/2)‖I∘(R − UᵀV)‖² + λ_U‖U‖²_F + λ_V‖V‖²_F
//! ```
//!
//! Profile updates are ridge regressions with closed-form solutions.

use nalgebra::DVector;

use crate::data::{Dataset, SplitMasks};
use crate::error::{Error, Result};
use crate::fit::{self, Penalty, Profiles};
use crate::hyper::Hyperparams;
use crate::stm::{check_item, StmState};

pub fn ctr_objective(state: &StmState, data: &Dataset) -> f64 {
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
        Penalty::Ridge,
    )
}

/// `V_j = (DᵀD + λ_R ÛÛᵀ + 2λ_V I)⁻¹ (DᵀX_j + λ_R Û R̂_·j)`.
pub fn ctr_item_update(state: &StmState, data: &Dataset, item: usize) -> Result<DVector<f64>> {
    check_item(data, item)?;
    let h = &state.hyper;
    let d = state.dictionary.atoms();
    let (mut p, q) = fit::item_system(
        &d.tr_mul(d),
        d.tr_mul(&data.features.column(item)),
        &state.user_profiles,
        data.ratings.item_ratings(item),
        h.lambda_r,
    );
    for k in 0..p.nrows() {
        p[(k, k)] += 2.0 * h.lambda_v;
    }
    fit::solve_psd(p, &q)
}

/// `U_i = (λ_R V̂V̂ᵀ + 2λ_U I)⁻¹ λ_R V̂ R̂_i·ᵀ`; zero for users without ratings.
pub fn ctr_user_update(state: &StmState, data: &Dataset, user: usize) -> Result<DVector<f64>> {
    if user >= data.n_users() {
        return Err(Error::Argument(format!("user {user} out of range")));
    }
    let h = &state.hyper;
    let rated = data.ratings.user_ratings(user);
    if rated.is_empty() {
        return Ok(DVector::zeros(h.k));
    }
    let (mut p, q) = fit::user_system(&state.item_profiles, rated, h.lambda_r, None);
    for k in 0..p.nrows() {
        p[(k, k)] += 2.0 * h.lambda_u;
    }
    fit::solve_psd(p, &q)
}

/// Trains CTR-I with the same schedule and initialization as STM.
pub fn train_ctr_i(data: &Dataset, masks: &SplitMasks, hyper: &Hyperparams) -> Result<StmState> {
    let train = masks.train_view(data);
    let fitted = fit::fit(&train, None, hyper, Penalty::Ridge)?;
    Ok(StmState {
        dictionary: fitted.dictionary,
        user_profiles: fitted.users,
        item_profiles: fitted.items,
        hyper: hyper.clone(),
        objective_trace: fitted.trace,
    })
}
