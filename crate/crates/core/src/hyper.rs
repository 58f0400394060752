use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regularization weights and schedule for the topic models.
///
/// The weights are ratios of noise variances: `lambda_r` balances content
/// reconstruction against ratings, `lambda_u`/`lambda_v` set profile sparsity,
/// `lambda_s`/`lambda_z` weight the social reconstruction and factor-profile
/// ridge term.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub lambda_r: f64,
    pub lambda_u: f64,
    pub lambda_v: f64,
    pub lambda_s: f64,
    pub lambda_z: f64,
    /// Number of topics.
    pub k: usize,
    pub max_iters: usize,
    /// Relative objective change that stops training.
    pub tol: f64,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            lambda_r: 1.90,
            lambda_u: 0.35,
            lambda_v: 0.60,
            lambda_s: 1.0,
            lambda_z: 0.3,
            k: 256,
            max_iters: 10,
            tol: 1e-4,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let weights = [
            ("lambda_r", self.lambda_r),
            ("lambda_u", self.lambda_u),
            ("lambda_v", self.lambda_v),
            ("lambda_s", self.lambda_s),
            ("lambda_z", self.lambda_z),
        ];
        for (name, w) in weights {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::Argument(format!(
                    "{name} must be a finite nonnegative number, got {w}"
                )));
            }
        }
        if self.k == 0 {
            return Err(Error::Argument("k must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Argument(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}
