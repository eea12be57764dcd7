//! Six classifiers behind one train/score interface.
//!
//! Every family trains on a [`Design`] and produces a [`TrainedModel`] whose
//! `score` lies in `[0, 1]`. Training rows are put into a canonical order
//! first, so results depend on the row multiset and the seed, never on the
//! order rows arrive in. The margin families (glm, lda, svm_rbf, knn)
//! standardize features internally; the tree families see raw features.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::features::{FeatureVector, FEATURE_NAMES};
use crate::{Error, Result};

pub mod forest;
pub mod gbt;
pub mod glm;
pub mod grid;
pub mod knn;
pub mod lda;
pub mod standardize;
pub mod svm;
pub mod tree;

pub use standardize::Standardizer;
pub use tree::{Tree, TreeNode};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gbt,
    RandomForest,
    Glm,
    Lda,
    SvmRbf,
    Knn,
}

impl Family {
    pub const ALL: [Family; 6] =
        [Family::Gbt, Family::RandomForest, Family::Glm, Family::Lda, Family::SvmRbf, Family::Knn];

    pub fn name(self) -> &'static str {
        match self {
            Family::Gbt => "gbt",
            Family::RandomForest => "random_forest",
            Family::Glm => "glm",
            Family::Lda => "lda",
            Family::SvmRbf => "svm_rbf",
            Family::Knn => "knn",
        }
    }

    pub fn is_tree_ensemble(self) -> bool {
        matches!(self, Family::Gbt | Family::RandomForest)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown model family `{s}`")))
    }
}

/// A hyperparameter value as it appears in configs and grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Text(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            ParamValue::Int(i) => Some(i as f64),
            ParamValue::Real(r) => Some(r),
            ParamValue::Text(_) => None,
        }
    }

    /// Numbers before text; numbers numerically, text lexicographically.
    pub fn cmp_key(&self, other: &ParamValue) -> std::cmp::Ordering {
        use std::cmp::Ordering;
        match (self.as_f64(), other.as_f64()) {
            (Some(a), Some(b)) => a.total_cmp(&b),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => match (self, other) {
                (ParamValue::Text(a), ParamValue::Text(b)) => a.cmp(b),
                _ => Ordering::Equal,
            },
        }
    }

    /// Parse a CLI-style literal: integer, then real, else text.
    pub fn parse(s: &str) -> ParamValue {
        if let Ok(i) = s.parse::<i64>() {
            ParamValue::Int(i)
        } else if let Ok(r) = s.parse::<f64>() {
            ParamValue::Real(r)
        } else {
            ParamValue::Text(s.to_string())
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Real(r) => write!(f, "{r}"),
            ParamValue::Text(s) => f.write_str(s),
        }
    }
}

pub type Hyperparameters = BTreeMap<String, ParamValue>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: Family,
    #[serde(default)]
    pub hyperparameters: Hyperparameters,
    #[serde(default)]
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(family: Family) -> Self {
        ModelSpec { family, hyperparameters: Hyperparameters::new(), seed: 0 }
    }

    pub fn with(mut self, name: &str, value: ParamValue) -> Self {
        self.hyperparameters.insert(name.to_string(), value);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Check names and ranges without training.
    pub fn validate(&self, n_features: usize) -> Result<()> {
        match self.family {
            Family::Gbt => gbt::GbtParams::from_spec(self).map(drop),
            Family::RandomForest => forest::ForestParams::from_spec(self, n_features).map(drop),
            Family::Glm => glm::GlmParams::from_spec(self).map(drop),
            Family::Lda => lda::LdaParams::from_spec(self).map(drop),
            Family::SvmRbf => svm::SvmParams::from_spec(self).map(drop),
            Family::Knn => knn::KnnParams::from_spec(self).map(drop),
        }
    }
}

/// Typed access to a spec's hyperparameter map; rejects unknown names.
pub(crate) struct ParamReader<'a> {
    family: Family,
    map: &'a Hyperparameters,
}

impl<'a> ParamReader<'a> {
    pub(crate) fn new(spec: &'a ModelSpec, known: &[&str]) -> Result<Self> {
        if let Some(k) = spec.hyperparameters.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(Error::Hyperparameter(format!(
                "{} does not take `{k}` (expected one of: {})",
                spec.family,
                known.join(", ")
            )));
        }
        Ok(ParamReader { family: spec.family, map: &spec.hyperparameters })
    }

    fn bad(&self, name: &str, why: &str) -> Error {
        Error::Hyperparameter(format!("{} `{name}` {why}", self.family))
    }

    pub(crate) fn real(&self, name: &str, default: f64, ok: impl Fn(f64) -> bool, range: &str) -> Result<f64> {
        let v = match self.map.get(name) {
            None => default,
            Some(p) => p.as_f64().ok_or_else(|| self.bad(name, "must be a number"))?,
        };
        if !v.is_finite() || !ok(v) {
            return Err(self.bad(name, &format!("must be {range}, got {v}")));
        }
        Ok(v)
    }

    pub(crate) fn opt_real(&self, name: &str, ok: impl Fn(f64) -> bool, range: &str) -> Result<Option<f64>> {
        match self.map.get(name) {
            None => Ok(None),
            Some(_) => self.real(name, 0.0, ok, range).map(Some),
        }
    }

    pub(crate) fn int(&self, name: &str, default: i64, min: i64) -> Result<i64> {
        let v = match self.map.get(name) {
            None => default,
            Some(ParamValue::Int(i)) => *i,
            Some(ParamValue::Real(r)) if r.fract() == 0.0 && r.abs() < 9e15 => *r as i64,
            Some(_) => return Err(self.bad(name, "must be an integer")),
        };
        if v < min {
            return Err(self.bad(name, &format!("must be at least {min}, got {v}")));
        }
        Ok(v)
    }

    pub(crate) fn opt_int(&self, name: &str, min: i64) -> Result<Option<i64>> {
        match self.map.get(name) {
            None => Ok(None),
            Some(_) => self.int(name, 0, min).map(Some),
        }
    }

    pub(crate) fn choice<'c>(&self, name: &str, default: &'c str, options: &[&'c str]) -> Result<&'c str> {
        match self.map.get(name) {
            None => Ok(default),
            Some(ParamValue::Text(s)) => options.iter().copied().find(|o| o == s).ok_or_else(|| {
                self.bad(name, &format!("must be one of {}, got `{s}`", options.join("/")))
            }),
            Some(v) => Err(self.bad(name, &format!("must be one of {}, got `{v}`", options.join("/")))),
        }
    }
}

/// A labelled training or scoring matrix.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Design {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
}

impl Design {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<bool>) -> Self {
        assert_eq!(rows.len(), labels.len(), "rows and labels differ in length");
        Design { rows, labels }
    }

    pub fn from_features(rows: &[FeatureVector]) -> Self {
        Design {
            rows: rows.iter().map(|r| r.values().to_vec()).collect(),
            labels: rows.iter().map(|r| r.is_stress()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.rows.first().map_or(0, |r| r.len())
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    /// Rows sorted by (features, label) under the IEEE total order.
    pub fn canonical(&self) -> Design {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| {
            self.rows[a]
                .iter()
                .zip(&self.rows[b])
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(self.labels[a].cmp(&self.labels[b]))
        });
        Design {
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    fn check(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Invalid("training data is empty".into()));
        }
        let d = self.n_features();
        if d == 0 || self.rows.iter().any(|r| r.len() != d) {
            return Err(Error::Invalid("training rows must share a non-zero width".into()));
        }
        if self.rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("training data contains non-finite values".into()));
        }
        Ok(())
    }
}

/// How an ensemble's summed tree outputs become a score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    /// score = sigmoid(margin)
    Logistic,
    /// score = margin
    Identity,
}

/// Read-only view of a tree ensemble: `margin = offset + scale * Σ tree(x)`.
#[derive(Debug, Clone, Copy)]
pub struct EnsembleView<'a> {
    pub trees: &'a [Tree],
    pub scale: f64,
    pub offset: f64,
    pub link: Link,
}

impl EnsembleView<'_> {
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.offset + self.scale * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn expected_margin(&self) -> f64 {
        self.offset + self.scale * self.trees.iter().map(Tree::expected_value).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelState {
    Gbt(gbt::GbtModel),
    RandomForest(forest::ForestModel),
    Glm(glm::GlmModel),
    Lda(lda::LdaModel),
    SvmRbf(svm::SvmModel),
    Knn(knn::KnnModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub spec: ModelSpec,
    pub feature_names: Vec<String>,
    pub standardizer: Standardizer,
    pub state: ModelState,
    #[serde(default)]
    pub warnings: Vec<String>,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl TrainedModel {
    pub fn family(&self) -> Family {
        self.spec.family
    }

    /// Probability-like stress score in `[0, 1]`.
    pub fn score(&self, x: &[f64]) -> f64 {
        let z = self.standardizer.transform(x);
        let s = match &self.state {
            ModelState::Gbt(m) => sigmoid(m.margin(&z)),
            ModelState::RandomForest(m) => m.score(&z),
            ModelState::Glm(m) => m.score(&z),
            ModelState::Lda(m) => m.score(&z),
            ModelState::SvmRbf(m) => m.score(&z),
            ModelState::Knn(m) => m.score(&z),
        };
        s.clamp(0.0, 1.0)
    }

    pub fn score_all(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        rows.iter().map(|r| self.score(r)).collect()
    }

    /// Pre-link model output; log-odds for gbt, glm and lda.
    pub fn margin(&self, x: &[f64]) -> f64 {
        let z = self.standardizer.transform(x);
        match &self.state {
            ModelState::Gbt(m) => m.margin(&z),
            ModelState::RandomForest(m) => m.score(&z),
            ModelState::Glm(m) => m.linear(&z),
            ModelState::Lda(m) => m.linear(&z),
            ModelState::SvmRbf(m) => m.decision(&z),
            ModelState::Knn(m) => m.score(&z),
        }
    }

    pub fn ensemble(&self) -> Option<EnsembleView<'_>> {
        match &self.state {
            ModelState::Gbt(m) => Some(EnsembleView {
                trees: &m.trees,
                scale: m.learning_rate,
                offset: m.base_score,
                link: Link::Logistic,
            }),
            ModelState::RandomForest(m) => Some(EnsembleView {
                trees: &m.trees,
                scale: 1.0 / m.trees.len() as f64,
                offset: 0.0,
                link: Link::Identity,
            }),
            _ => None,
        }
    }

    /// Fraction of rows whose thresholded score (≥ 0.5) matches the label.
    pub fn accuracy(&self, data: &Design) -> f64 {
        if data.is_empty() {
            return 0.0;
        }
        let hits = data
            .rows
            .iter()
            .zip(&data.labels)
            .filter(|(r, &l)| (self.score(r) >= 0.5) == l)
            .count();
        hits as f64 / data.len() as f64
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: TrainedModel = serde_json::from_str(s)?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "model format_version {} is not supported (expected {MODEL_FORMAT_VERSION})",
                m.format_version
            )));
        }
        Ok(m)
    }
}

fn default_feature_names(d: usize) -> Vec<String> {
    if d == FEATURE_NAMES.len() {
        FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        (0..d).map(|i| format!("x{i}")).collect()
    }
}

/// Train `spec` on `data`.
pub fn train(spec: &ModelSpec, data: &Design) -> Result<TrainedModel> {
    data.check()?;
    spec.validate(data.n_features())?;
    let data = data.canonical();
    let mut warnings = Vec::new();
    let (standardizer, state) = match spec.family {
        Family::Gbt => {
            let p = gbt::GbtParams::from_spec(spec)?;
            (Standardizer::identity(), ModelState::Gbt(gbt::train(&data, &p)?))
        }
        Family::RandomForest => {
            let p = forest::ForestParams::from_spec(spec, data.n_features())?;
            (Standardizer::identity(), ModelState::RandomForest(forest::train(&data, &p, spec.seed)?))
        }
        family => {
            let st = Standardizer::fit(&data.rows);
            let z = Design { rows: st.transform_all(&data.rows), labels: data.labels.clone() };
            let state = match family {
                Family::Glm => ModelState::Glm(glm::train(&z, &glm::GlmParams::from_spec(spec)?, &mut warnings)?),
                Family::Lda => ModelState::Lda(lda::train(&z, &lda::LdaParams::from_spec(spec)?, &mut warnings)?),
                Family::SvmRbf => {
                    ModelState::SvmRbf(svm::train(&z, &svm::SvmParams::from_spec(spec)?, &mut warnings)?)
                }
                Family::Knn => ModelState::Knn(knn::train(&z, &knn::KnnParams::from_spec(spec)?)?),
                Family::Gbt | Family::RandomForest => unreachable!(),
            };
            (st, state)
        }
    };
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        spec: spec.clone(),
        feature_names: default_feature_names(data.n_features()),
        standardizer,
        state,
        warnings,
    })
}

/// Per-family defaults used when a run does not override them.
///
/// gbt uses the tuned configuration from the study (deviance, mse,
/// 20 estimators, depth 7).
pub fn default_spec(family: Family, seed: u64) -> ModelSpec {
    let spec = ModelSpec::new(family).with_seed(seed);
    match family {
        Family::Gbt => spec
            .with("loss", ParamValue::Text("deviance".into()))
            .with("criterion", ParamValue::Text("mse".into()))
            .with("n_estimators", ParamValue::Int(20))
            .with("max_depth", ParamValue::Int(7)),
        _ => spec,
    }
}
