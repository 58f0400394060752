//! Model files: a versioned JSON container holding every trained matrix, the
//! settings used to train it and its objective or loss trace.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::baselines::{train_ctr_i, train_pmf, train_sorec, FactorConfig, FactorModel};
use crate::data::{Dataset, SplitMasks};
use crate::dictionary::TopicDictionary;
use crate::error::{Error, Result};
use crate::eval::Scorer;
use crate::hyper::Hyperparams;
use crate::social::{train_sostm, SoStmState};
use crate::stm::{train_stm, StmState};

pub const MODEL_FORMAT: &str = "stm-rec-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Stm,
    Sostm,
    Pmf,
    Sorec,
    CtrI,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Pmf,
        ModelKind::CtrI,
        ModelKind::Sorec,
        ModelKind::Stm,
        ModelKind::Sostm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Stm => "stm",
            ModelKind::Sostm => "sostm",
            ModelKind::Pmf => "pmf",
            ModelKind::Sorec => "sorec",
            ModelKind::CtrI => "ctr-i",
        }
    }

    /// Whether training needs a social graph or group memberships.
    pub fn is_social(self) -> bool {
        matches!(self, ModelKind::Sostm | ModelKind::Sorec)
    }

    /// Whether the model learns a topic dictionary.
    pub fn is_topic_model(self) -> bool {
        matches!(self, ModelKind::Stm | ModelKind::Sostm | ModelKind::CtrI)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            Error::Argument(format!(
                "unknown model kind {s:?} (expected stm, sostm, pmf, sorec or ctr-i)"
            ))
        })
    }
}

/// Any trained model.
#[derive(Clone, Debug, PartialEq)]
pub enum TrainedModel {
    Stm(StmState),
    Sostm(SoStmState),
    CtrI(StmState),
    Pmf(FactorModel),
    Sorec(FactorModel),
}

impl TrainedModel {
    /// Trains a model of the given kind on the training ratings of `masks`.
    /// Topic models read `hyper`, factor models read `factor`.
    pub fn fit(
        kind: ModelKind,
        data: &Dataset,
        masks: &SplitMasks,
        hyper: &Hyperparams,
        factor: &FactorConfig,
    ) -> Result<TrainedModel> {
        Ok(match kind {
            ModelKind::Stm => TrainedModel::Stm(train_stm(data, masks, hyper)?),
            ModelKind::Sostm => TrainedModel::Sostm(train_sostm(data, masks, hyper)?),
            ModelKind::CtrI => TrainedModel::CtrI(train_ctr_i(data, masks, hyper)?),
            ModelKind::Pmf => TrainedModel::Pmf(train_pmf(data, masks, factor)?),
            ModelKind::Sorec => TrainedModel::Sorec(train_sorec(data, masks, factor)?),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Stm(_) => ModelKind::Stm,
            TrainedModel::Sostm(_) => ModelKind::Sostm,
            TrainedModel::CtrI(_) => ModelKind::CtrI,
            TrainedModel::Pmf(_) => ModelKind::Pmf,
            TrainedModel::Sorec(_) => ModelKind::Sorec,
        }
    }

    fn topic(&self) -> Option<&StmState> {
        match self {
            TrainedModel::Stm(s) | TrainedModel::CtrI(s) => Some(s),
            TrainedModel::Sostm(s) => Some(&s.topic),
            _ => None,
        }
    }

    pub fn dictionary(&self) -> Option<&TopicDictionary> {
        self.topic().map(|s| &s.dictionary)
    }

    pub fn hyper(&self) -> Option<&Hyperparams> {
        self.topic().map(|s| &s.hyper)
    }

    pub fn user_profiles(&self) -> &DMatrix<f64> {
        match self {
            TrainedModel::Pmf(m) | TrainedModel::Sorec(m) => &m.users,
            _ => &self.topic().expect("topic model").user_profiles,
        }
    }

    pub fn item_profiles(&self) -> &DMatrix<f64> {
        match self {
            TrainedModel::Pmf(m) | TrainedModel::Sorec(m) => &m.items,
            _ => &self.topic().expect("topic model").item_profiles,
        }
    }

    /// Objective after each outer sweep, or loss after each epoch.
    pub fn trace(&self) -> &[f64] {
        match self {
            TrainedModel::Pmf(m) | TrainedModel::Sorec(m) => &m.loss_trace,
            _ => &self.topic().expect("topic model").objective_trace,
        }
    }

    pub fn n_users(&self) -> usize {
        self.user_profiles().ncols()
    }

    pub fn n_items(&self) -> usize {
        self.item_profiles().ncols()
    }

    pub fn predict(&self, user: usize, item: usize) -> f64 {
        self.user_profiles()
            .column(user)
            .dot(&self.item_profiles().column(item))
    }

    pub fn save(&self, path: &Path, split: Option<&SplitRecord>) -> Result<()> {
        let file = ModelFile::from_model(self, split.cloned());
        let json = serde_json::to_vec(&file).expect("plain data serializes");
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    /// Loads a model and the split it was trained on, if recorded.
    pub fn load(path: &Path) -> Result<(TrainedModel, Option<SplitRecord>)> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let file: ModelFile =
            serde_json::from_slice(&bytes).map_err(|e| Error::ModelFormat(format!("{}: {e}", path.display())))?;
        let split = file.split.clone();
        Ok((file.into_model()?, split))
    }
}

impl Scorer for TrainedModel {
    fn score(&self, user: usize, item: usize) -> f64 {
        self.predict(user, item)
    }
}

/// The train/test split a model was fitted on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub seed: u64,
    pub user_fraction: f64,
    pub item_fraction: f64,
    /// `None` when every rating was used for training.
    pub fingerprint: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct StoredMatrix {
    rows: usize,
    cols: usize,
    /// Column-major.
    data: Vec<f64>,
}

impl StoredMatrix {
    fn from(m: &DMatrix<f64>) -> Self {
        StoredMatrix {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.as_slice().to_vec(),
        }
    }

    fn into_matrix(self, name: &str) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::ModelFormat(format!(
                "{name}: {} values for a {}x{} matrix",
                self.data.len(),
                self.rows,
                self.cols
            )));
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::ModelFormat(format!("{name} contains non-finite values")));
        }
        Ok(DMatrix::from_vec(self.rows, self.cols, self.data))
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hyper: Option<Hyperparams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    factor_config: Option<FactorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<SplitRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dictionary: Option<StoredMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    duals: Option<Vec<f64>>,
    users: StoredMatrix,
    items: StoredMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    factors: Option<StoredMatrix>,
    trace: Vec<f64>,
}

impl ModelFile {
    fn from_model(model: &TrainedModel, split: Option<SplitRecord>) -> Self {
        let (hyper, factor_config, factors) = match model {
            TrainedModel::Stm(s) | TrainedModel::CtrI(s) => (Some(s.hyper.clone()), None, None),
            TrainedModel::Sostm(s) => (
                Some(s.topic.hyper.clone()),
                None,
                Some(StoredMatrix::from(&s.factor_profiles)),
            ),
            TrainedModel::Pmf(m) | TrainedModel::Sorec(m) => {
                (None, Some(m.config.clone()), m.factors.as_ref().map(StoredMatrix::from))
            }
        };
        ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            kind: model.kind(),
            hyper,
            factor_config,
            split,
            dictionary: model.dictionary().map(|d| StoredMatrix::from(d.atoms())),
            duals: model.dictionary().map(|d| d.duals().iter().copied().collect()),
            users: StoredMatrix::from(model.user_profiles()),
            items: StoredMatrix::from(model.item_profiles()),
            factors,
            trace: model.trace().to_vec(),
        }
    }

    fn into_model(self) -> Result<TrainedModel> {
        if self.format != MODEL_FORMAT {
            return Err(Error::ModelFormat(format!("unexpected format tag {:?}", self.format)));
        }
        if self.version != MODEL_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported version {} (this build reads version {MODEL_VERSION})",
                self.version
            )));
        }
        let missing = |what: &str| Error::ModelFormat(format!("{} model is missing {what}", self.kind));
        let users = self.users.into_matrix("users")?;
        let items = self.items.into_matrix("items")?;
        if users.nrows() != items.nrows() {
            return Err(Error::ModelFormat("user and item profiles differ in dimension".into()));
        }
        let factors = self.factors.map(|f| f.into_matrix("factors")).transpose()?;

        if !self.kind.is_topic_model() {
            let config = self.factor_config.ok_or_else(|| missing("factor_config"))?;
            let model = FactorModel {
                users,
                items,
                factors,
                config,
                loss_trace: self.trace,
            };
            return Ok(match self.kind {
                ModelKind::Pmf => TrainedModel::Pmf(model),
                _ => TrainedModel::Sorec(model),
            });
        }

        let hyper = self.hyper.ok_or_else(|| missing("hyper"))?;
        let atoms = self
            .dictionary
            .ok_or_else(|| missing("dictionary"))?
            .into_matrix("dictionary")?;
        let duals = DVector::from_vec(self.duals.ok_or_else(|| missing("duals"))?);
        if atoms.ncols() != users.nrows() {
            return Err(Error::ModelFormat(
                "dictionary size does not match profile dimension".into(),
            ));
        }
        let dictionary = TopicDictionary::new(atoms, duals).map_err(|e| Error::ModelFormat(e.to_string()))?;
        let topic = StmState {
            dictionary,
            user_profiles: users,
            item_profiles: items,
            hyper,
            objective_trace: self.trace,
        };
        Ok(match self.kind {
            ModelKind::Stm => TrainedModel::Stm(topic),
            ModelKind::CtrI => TrainedModel::CtrI(topic),
            _ => {
                let factor_profiles = factors.ok_or_else(|| missing("factors"))?;
                TrainedModel::Sostm(SoStmState { topic, factor_profiles })
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_stm() -> StmState {
        StmState {
            dictionary: TopicDictionary::new(DMatrix::identity(3, 2), DVector::from_vec(vec![0.5, 0.0])).unwrap(),
            user_profiles: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.25, -2.0]),
            item_profiles: DMatrix::from_row_slice(2, 3, &[0.0, 1.0, 0.1, 3.0, 0.0, 0.2]),
            hyper: Hyperparams {
                k: 2,
                ..Default::default()
            },
            objective_trace: vec![3.0, 2.0, 1.5],
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        let split = SplitRecord {
            seed: 4,
            user_fraction: 0.5,
            item_fraction: 0.5,
            fingerprint: Some("abc".into()),
        };
        for model in [
            TrainedModel::Stm(tiny_stm()),
            TrainedModel::CtrI(tiny_stm()),
            TrainedModel::Sostm(SoStmState {
                topic: tiny_stm(),
                factor_profiles: DMatrix::from_element(2, 2, 0.1),
            }),
            TrainedModel::Pmf(FactorModel {
                users: DMatrix::from_element(2, 2, 0.3),
                items: DMatrix::from_element(2, 3, -0.7),
                factors: None,
                config: FactorConfig::default(),
                loss_trace: vec![1.0],
            }),
        ] {
            model.save(&path, Some(&split)).unwrap();
            let (back, s) = TrainedModel::load(&path).unwrap();
            assert_eq!(back, model);
            assert_eq!(s.as_ref(), Some(&split));
        }
    }

    #[test]
    fn rejects_wrong_version_and_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        TrainedModel::Stm(tiny_stm()).save(&path, None).unwrap();
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace("\"version\":1", "\"version\":9");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(TrainedModel::load(&path), Err(Error::ModelFormat(_))));
        std::fs::write(&path, "not json").unwrap();
        assert!(matches!(TrainedModel::load(&path), Err(Error::ModelFormat(_))));
        assert!(matches!(
            TrainedModel::load(&dir.path().join("absent")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn kind_names_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        }
        assert!("svd++".parse::<ModelKind>().is_err());
    }
}
