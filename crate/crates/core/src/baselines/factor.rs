use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, RatingMatrix, SocialGraph, SplitMasks};
use crate::error::{Error, Result};
use crate::stm::top_by_score;

/// Training settings for PMF and SoRec.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FactorConfig {
    /// Latent dimension.
    pub dim: usize,
    pub reg: f64,
    /// Initial step size, halved whenever a step would raise the loss.
    pub lr: f64,
    pub epochs: usize,
    /// Weight of the social reconstruction term (SoRec only).
    pub lambda_social: f64,
    /// Standard deviation of the Gaussian initialization.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for FactorConfig {
    fn default() -> Self {
        FactorConfig {
            dim: 30,
            reg: 0.1,
            lr: 0.01,
            epochs: 200,
            lambda_social: 1.0,
            init_scale: 0.1,
            seed: 0,
        }
    }
}

impl FactorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Argument("latent dimension must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Argument(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        for (name, v) in [
            ("reg", self.reg),
            ("lambda_social", self.lambda_social),
            ("init_scale", self.init_scale),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Argument(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// A latent-factor model: users and items as columns of `ℓ × N` and `ℓ × M`
/// matrices, plus social factors for SoRec.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorModel {
    pub users: DMatrix<f64>,
    pub items: DMatrix<f64>,
    pub factors: Option<DMatrix<f64>>,
    pub config: FactorConfig,
    /// Loss at initialization and after every epoch.
    pub loss_trace: Vec<f64>,
}

impl FactorModel {
    pub fn predict(&self, user: usize, item: usize) -> f64 {
        self.users.column(user).dot(&self.items.column(item))
    }

    pub fn recommend_top(&self, user: usize, candidates: &[usize], n: usize) -> Vec<usize> {
        top_by_score(candidates, n, |j| self.predict(user, j))
    }
}

/// Gradient of [`factor_loss`] with respect to each factor matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorGradient {
    pub users: DMatrix<f64>,
    pub items: DMatrix<f64>,
    pub factors: Option<DMatrix<f64>>,
}

/// `Σ (r − uᵀv)² + reg(‖U‖² + ‖V‖²)`, plus
/// `λ_social [Σ_links (S − uᵀz)² + reg‖Z‖²]` when `social` is given.
pub fn factor_loss(
    ratings: &RatingMatrix,
    social: Option<(&SocialGraph, &DMatrix<f64>)>,
    users: &DMatrix<f64>,
    items: &DMatrix<f64>,
    config: &FactorConfig,
) -> f64 {
    let mut loss = config.reg * (users.norm_squared() + items.norm_squared());
    for r in ratings.entries() {
        loss += (r.value - users.column(r.user).dot(&items.column(r.item))).powi(2);
    }
    if let Some((graph, z)) = social.filter(|_| config.lambda_social != 0.0) {
        let mut s_loss = config.reg * z.norm_squared();
        for i in 0..graph.n_users() {
            for &(m, s) in graph.neighbors(i) {
                s_loss += (s - users.column(i).dot(&z.column(m))).powi(2);
            }
        }
        loss += config.lambda_social * s_loss;
    }
    loss
}

pub fn factor_gradient(
    ratings: &RatingMatrix,
    social: Option<(&SocialGraph, &DMatrix<f64>)>,
    users: &DMatrix<f64>,
    items: &DMatrix<f64>,
    config: &FactorConfig,
) -> FactorGradient {
    let mut gu = users * (2.0 * config.reg);
    let mut gv = items * (2.0 * config.reg);
    for r in ratings.entries() {
        let err = r.value - users.column(r.user).dot(&items.column(r.item));
        gu.column_mut(r.user).axpy(-2.0 * err, &items.column(r.item), 1.0);
        gv.column_mut(r.item).axpy(-2.0 * err, &users.column(r.user), 1.0);
    }
    let gz = social.filter(|_| config.lambda_social != 0.0).map(|(graph, z)| {
        let w = config.lambda_social;
        let mut gz = z * (2.0 * w * config.reg);
        for i in 0..graph.n_users() {
            for &(m, s) in graph.neighbors(i) {
                let err = s - users.column(i).dot(&z.column(m));
                gu.column_mut(i).axpy(-2.0 * w * err, &z.column(m), 1.0);
                gz.column_mut(m).axpy(-2.0 * w * err, &users.column(i), 1.0);
            }
        }
        gz
    });
    FactorGradient {
        users: gu,
        items: gv,
        factors: gz,
    }
}

/// Probabilistic matrix factorization on the training ratings.
pub fn train_pmf(data: &Dataset, masks: &SplitMasks, config: &FactorConfig) -> Result<FactorModel> {
    let train = masks.train_view(data);
    descend(&train.ratings, None, config)
}

/// PMF with user factors shared with a factorization of the social graph.
pub fn train_sorec(data: &Dataset, masks: &SplitMasks, config: &FactorConfig) -> Result<FactorModel> {
    let graph = data
        .social_graph()
        .ok_or_else(|| Error::MissingInput("SoRec needs a social graph or group memberships".into()))?;
    let train = masks.train_view(data);
    descend(&train.ratings, Some(&graph), config)
}

fn descend(ratings: &RatingMatrix, graph: Option<&SocialGraph>, config: &FactorConfig) -> Result<FactorModel> {
    config.validate()?;
    let (l, n, m) = (config.dim, ratings.n_users(), ratings.n_items());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, config.init_scale).expect("validated scale");
    let mut draw = |rows, cols| DMatrix::from_fn(rows, cols, |_, _| normal.sample(&mut rng));
    let mut users = draw(l, n);
    let mut items = draw(l, m);
    // drawn even without a graph so the other factors don't depend on it
    let mut factors = draw(l, n);

    let mut loss = factor_loss(ratings, graph.map(|g| (g, &factors)), &users, &items, config);
    if !loss.is_finite() {
        return Err(Error::Diverged("initial loss is not finite".into()));
    }
    let mut trace = vec![loss];
    let mut lr = config.lr;
    for _ in 0..config.epochs {
        let grad = factor_gradient(ratings, graph.map(|g| (g, &factors)), &users, &items, config);
        loop {
            let next_users = &users - &grad.users * lr;
            let next_items = &items - &grad.items * lr;
            let next_factors = match &grad.factors {
                Some(g) => &factors - g * lr,
                None => factors.clone(),
            };
            let next = factor_loss(
                ratings,
                graph.map(|g| (g, &next_factors)),
                &next_users,
                &next_items,
                config,
            );
            if next.is_nan() {
                return Err(Error::Diverged(format!("loss became NaN at learning rate {lr}")));
            }
            if next <= loss {
                users = next_users;
                items = next_items;
                factors = next_factors;
                loss = next;
                break;
            }
            lr *= 0.5;
            if lr < f64::EPSILON * config.lr {
                // no descent direction left at machine precision
                break;
            }
        }
        trace.push(loss);
    }
    Ok(FactorModel {
        users,
        items,
        factors: graph.map(|_| factors),
        config: config.clone(),
        loss_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureMatrix, Rating};

    fn single_rating() -> Dataset {
        let ratings = RatingMatrix::new(
            1,
            1,
            [Rating {
                user: 0,
                item: 0,
                value: 1.0,
            }],
        )
        .unwrap();
        Dataset::new(ratings, FeatureMatrix::new(DMatrix::zeros(1, 1)).unwrap()).unwrap()
    }

    #[test]
    fn scalar_factorization_reaches_the_rating() {
        let data = single_rating();
        let masks = SplitMasks::all_train(&data.ratings);
        let config = FactorConfig {
            dim: 1,
            reg: 0.0,
            lr: 0.1,
            epochs: 2000,
            init_scale: 0.5,
            seed: 3,
            ..Default::default()
        };
        let model = train_pmf(&data, &masks, &config).unwrap();
        assert!((model.predict(0, 0) - 1.0).abs() < 1e-6, "{}", model.predict(0, 0));
    }

    #[test]
    fn loss_trace_is_non_increasing() {
        let data = single_rating();
        let masks = SplitMasks::all_train(&data.ratings);
        let config = FactorConfig {
            dim: 3,
            lr: 5.0,
            epochs: 50,
            ..Default::default()
        };
        let model = train_pmf(&data, &masks, &config).unwrap();
        assert!(model.loss_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn sorec_requires_social_input() {
        let data = single_rating();
        let masks = SplitMasks::all_train(&data.ratings);
        let err = train_sorec(&data, &masks, &FactorConfig::default()).unwrap_err();
        assert!(matches!(err, Error::MissingInput(_)));
    }

    #[test]
    fn rejects_bad_config() {
        assert!(FactorConfig {
            lr: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(FactorConfig {
            dim: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }
}
