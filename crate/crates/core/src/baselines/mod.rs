//! Reference models: latent-factor models trained by gradient descent (PMF,
//! SoRec) and the ridge-penalized topic model (CTR-I).

mod ctr;
mod factor;

pub use ctr::{ctr_item_update, ctr_objective, ctr_user_update, train_ctr_i};
pub use factor::{factor_gradient, factor_loss, train_pmf, train_sorec, FactorConfig, FactorGradient, FactorModel};
