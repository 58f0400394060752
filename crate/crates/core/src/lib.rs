//! Sparse topic models for image recommendation.
//!
//! Items are encoded as sparse combinations of learned visual topics, and
//! users as sparse preferences over the same topics. The crate provides the
//! model and its social extension, the baselines it is compared against,
//! ranking metrics, a planted-model data generator, and the `stm` command.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cli;
pub mod data;
pub mod dictionary;
pub mod error;
pub mod eval;
mod fit;
pub mod hyper;
pub mod l1qp;
pub mod persist;
pub mod social;
pub mod stm;
pub mod synth;

pub use error::{Error, Result};
pub use hyper::Hyperparams;
