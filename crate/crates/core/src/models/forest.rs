//! Random forest of Gini trees on bootstrap samples.
//!
//! Each tree draws its own bootstrap sample and per-node feature subsets from
//! a sub-seed of the model seed, so trees can be grown in parallel and still
//! come out identical to a serial run. Leaves hold the stress fraction of the
//! bootstrap rows reaching them; the score is the mean over trees.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow, Criterion, GrowConfig, Tree};
use super::{Design, ModelSpec, ParamReader};
use crate::rng::{seeded, sub_seed};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub features_per_split: usize,
}

impl ForestParams {
    pub const NAMES: [&'static str; 3] = ["n_trees", "max_depth", "features_per_split"];

    pub fn from_spec(spec: &ModelSpec, n_features: usize) -> Result<Self> {
        let r = ParamReader::new(spec, &Self::NAMES)?;
        let default_k = ((n_features as f64).sqrt().floor() as i64).max(1);
        let k = r.int("features_per_split", default_k, 1)? as usize;
        if n_features > 0 && k > n_features {
            return Err(crate::Error::Hyperparameter(format!(
                "random_forest `features_per_split` must be at most {n_features}, got {k}"
            )));
        }
        Ok(ForestParams {
            n_trees: r.int("n_trees", 100, 1)? as usize,
            max_depth: r.opt_int("max_depth", 1)?.map(|d| d as usize),
            features_per_split: k,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
}

impl ForestModel {
    pub fn score(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

pub fn train(data: &Design, params: &ForestParams, seed: u64) -> Result<ForestModel> {
    let n = data.len();
    let targets: Vec<f64> = data.labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
    let config = GrowConfig {
        criterion: Criterion::Gini,
        max_depth: params.max_depth,
        min_samples_split: 2.0,
        features_per_split: Some(params.features_per_split),
    };
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seeded(sub_seed(seed, t as u64));
            let mut counts = vec![0u32; n];
            for _ in 0..n {
                counts[rng.random_range(0..n)] += 1;
            }
            let entries: Vec<(usize, f64)> = counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(i, &c)| (i, c as f64))
                .collect();
            grow(&data.rows, &targets, &entries, &config, &mut rng).tree
        })
        .collect();
    Ok(ForestModel { trees })
}
