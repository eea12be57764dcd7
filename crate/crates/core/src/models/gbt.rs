//! Gradient-boosted regression trees for binary classification.
//!
//! The model is stored in margin (log-odds) units for both losses:
//! `margin(x) = base_score + learning_rate * Σ leaf(x)` and
//! `score = sigmoid(margin)`.
//!
//! * deviance: residuals `y - p`, leaf value `Σ(y - p) / Σ p(1 - p)`.
//! * exponential: with `ỹ = ±1` and half-margin `F`, residuals `ỹ e^{-ỹF}`,
//!   leaf value `Σ ỹ e^{-ỹF} / Σ e^{-ỹF}`; stored doubled so the margin is `2F`.

use serde::{Deserialize, Serialize};

use super::tree::{grow, Criterion, GrowConfig, Tree};
use super::{sigmoid, Design, ModelSpec, ParamReader};
use crate::rng::seeded;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Deviance,
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbtParams {
    pub loss: Loss,
    pub criterion: Criterion,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
}

impl GbtParams {
    pub const NAMES: [&'static str; 5] = ["loss", "criterion", "n_estimators", "max_depth", "learning_rate"];

    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let r = ParamReader::new(spec, &Self::NAMES)?;
        let loss = match r.choice("loss", "deviance", &["deviance", "exponential"])? {
            "deviance" => Loss::Deviance,
            _ => Loss::Exponential,
        };
        let criterion = match r.choice("criterion", "friedman_mse", &["friedman_mse", "mse"])? {
            "mse" => Criterion::Mse,
            _ => Criterion::FriedmanMse,
        };
        Ok(GbtParams {
            loss,
            criterion,
            n_estimators: r.int("n_estimators", 100, 1)? as usize,
            max_depth: r.int("max_depth", 3, 1)? as usize,
            learning_rate: r.real("learning_rate", 0.1, |v| v > 0.0 && v <= 1.0, "in (0, 1]")?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub loss: Loss,
    pub learning_rate: f64,
    pub base_score: f64,
    pub trees: Vec<Tree>,
    /// Mean training loss after initialization and after each stage.
    pub train_loss: Vec<f64>,
}

impl GbtModel {
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.base_score + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn mean_loss(loss: Loss, margins: &[f64], labels: &[bool]) -> f64 {
    let total: f64 = margins
        .iter()
        .zip(labels)
        .map(|(&m, &y)| match loss {
            // -log p(y | m)
            Loss::Deviance => softplus(if y { -m } else { m }),
            Loss::Exponential => {
                let yt = if y { 1.0 } else { -1.0 };
                (-yt * m / 2.0).exp()
            }
        })
        .sum();
    total / margins.len() as f64
}

pub fn train(data: &Design, params: &GbtParams) -> Result<GbtModel> {
    let n = data.len();
    let pos = data.positives();
    if pos == 0 || pos == n {
        return Err(Error::DegenerateFit(format!(
            "{:?} loss needs both labels in training data ({pos} of {n} rows are stress)",
            params.loss
        )
        .to_lowercase()));
    }
    let p = pos as f64 / n as f64;
    let base_score = (p / (1.0 - p)).ln();
    let mut margins = vec![base_score; n];
    let mut residuals = vec![0.0; n];
    let entries: Vec<(usize, f64)> = (0..n).map(|i| (i, 1.0)).collect();
    let config = GrowConfig {
        criterion: params.criterion,
        max_depth: Some(params.max_depth),
        min_samples_split: 2.0,
        features_per_split: None,
    };
    // no feature sampling, so the generator is never consulted
    let mut rng = seeded(0);
    let mut trees = Vec::with_capacity(params.n_estimators);
    let mut train_loss = vec![mean_loss(params.loss, &margins, &data.labels)];

    for _ in 0..params.n_estimators {
        for i in 0..n {
            residuals[i] = match params.loss {
                Loss::Deviance => (if data.labels[i] { 1.0 } else { 0.0 }) - sigmoid(margins[i]),
                Loss::Exponential => {
                    let yt = if data.labels[i] { 1.0 } else { -1.0 };
                    yt * (-yt * margins[i] / 2.0).exp()
                }
            };
        }
        let mut grown = grow(&data.rows, &residuals, &entries, &config, &mut rng);
        // Newton step per leaf
        let mut num = vec![0.0; grown.tree.nodes.len()];
        let mut den = vec![0.0; grown.tree.nodes.len()];
        for (i, &leaf) in grown.leaf_of.iter().enumerate() {
            num[leaf] += residuals[i];
            den[leaf] += match params.loss {
                Loss::Deviance => {
                    let q = sigmoid(margins[i]);
                    q * (1.0 - q)
                }
                Loss::Exponential => residuals[i].abs(),
            };
        }
        let scale = match params.loss {
            Loss::Deviance => 1.0,
            Loss::Exponential => 2.0,
        };
        for (k, node) in grown.tree.nodes.iter_mut().enumerate() {
            if node.is_leaf() {
                node.value = if den[k].abs() < 1e-150 { 0.0 } else { scale * num[k] / den[k] };
            }
        }
        for (i, &leaf) in grown.leaf_of.iter().enumerate() {
            margins[i] += params.learning_rate * grown.tree.nodes[leaf].value;
        }
        train_loss.push(mean_loss(params.loss, &margins, &data.labels));
        trees.push(grown.tree);
    }
    Ok(GbtModel { loss: params.loss, learning_rate: params.learning_rate, base_score, trees, train_loss })
}
