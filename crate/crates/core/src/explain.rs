//! Exact SHAP attributions for tree ensembles.
//!
//! Uses the path-dependent formulation: a feature outside the coalition is
//! marginalized by descending both children of each split on it, weighted by
//! their training cover. Attributions are in margin units (log-odds for the
//! boosted model, mean leaf fraction for the forest) and satisfy
//! `base_value + Σ shap = margin(x)`.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::models::{EnsembleView, Tree, TrainedModel};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapRow {
    pub shap: Vec<f64>,
    pub base_value: f64,
    pub features: Vec<f64>,
}

impl ShapRow {
    /// `base_value + Σ shap`; equals the model margin.
    pub fn reconstructed_margin(&self) -> f64 {
        self.base_value + self.shap.iter().sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy)]
struct PathElement {
    feature: Option<usize>,
    zero_fraction: f64,
    one_fraction: f64,
    weight: f64,
}

fn extend_path(path: &mut Vec<PathElement>, zero_fraction: f64, one_fraction: f64, feature: Option<usize>) {
    let depth = path.len();
    path.push(PathElement { feature, zero_fraction, one_fraction, weight: if depth == 0 { 1.0 } else { 0.0 } });
    let d1 = (depth + 1) as f64;
    for i in (0..depth).rev() {
        path[i + 1].weight += one_fraction * path[i].weight * (i + 1) as f64 / d1;
        path[i].weight = zero_fraction * path[i].weight * (depth - i) as f64 / d1;
    }
}

fn unwind_path(path: &mut Vec<PathElement>, index: usize) {
    let depth = path.len() - 1;
    let (one, zero) = (path[index].one_fraction, path[index].zero_fraction);
    let d1 = (depth + 1) as f64;
    let mut next = path[depth].weight;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next * d1 / ((i + 1) as f64 * one);
            next = tmp - path[i].weight * zero * (depth - i) as f64 / d1;
        } else {
            path[i].weight = path[i].weight * d1 / (zero * (depth - i) as f64);
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
    path.pop();
}

/// Total weight of the path with element `index` removed.
fn unwound_sum(path: &[PathElement], index: usize) -> f64 {
    let depth = path.len() - 1;
    let (one, zero) = (path[index].one_fraction, path[index].zero_fraction);
    let d1 = (depth + 1) as f64;
    let mut next = path[depth].weight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = next * d1 / ((i + 1) as f64 * one);
            total += tmp;
            next = path[i].weight - tmp * zero * (depth - i) as f64 / d1;
        } else if zero != 0.0 {
            total += path[i].weight / zero * d1 / (depth - i) as f64;
        }
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    tree: &Tree,
    x: &[f64],
    phi: &mut [f64],
    node: usize,
    mut path: Vec<PathElement>,
    zero_fraction: f64,
    one_fraction: f64,
    feature: Option<usize>,
) {
    extend_path(&mut path, zero_fraction, one_fraction, feature);
    let n = &tree.nodes[node];
    let Some(split) = n.split else {
        for i in 1..path.len() {
            let w = unwound_sum(&path, i);
            let el = path[i];
            if let Some(f) = el.feature {
                phi[f] += w * (el.one_fraction - el.zero_fraction) * n.value;
            }
        }
        return;
    };
    let (hot, cold) =
        if x[split.feature] <= split.threshold { (split.left, split.right) } else { (split.right, split.left) };
    let hot_zero = tree.nodes[hot].cover / n.cover;
    let cold_zero = tree.nodes[cold].cover / n.cover;
    let (mut in_zero, mut in_one) = (1.0, 1.0);
    if let Some(k) = (1..path.len()).find(|&k| path[k].feature == Some(split.feature)) {
        in_zero = path[k].zero_fraction;
        in_one = path[k].one_fraction;
        unwind_path(&mut path, k);
    }
    recurse(tree, x, phi, hot, path.clone(), hot_zero * in_zero, in_one, Some(split.feature));
    recurse(tree, x, phi, cold, path, cold_zero * in_zero, 0.0, Some(split.feature));
}

/// SHAP values of a single tree's output at `x`.
pub fn tree_shap_single(tree: &Tree, x: &[f64], n_features: usize) -> Vec<f64> {
    let mut phi = vec![0.0; n_features];
    recurse(tree, x, &mut phi, 0, Vec::with_capacity(16), 1.0, 1.0, None);
    phi
}

fn ensemble_of(model: &TrainedModel) -> Result<EnsembleView<'_>> {
    model.ensemble().ok_or_else(|| {
        Error::UnsupportedFamily(format!("SHAP attribution needs a tree ensemble, got {}", model.family()))
    })
}

/// Attribute `model`'s margin at `x` to each feature.
pub fn tree_shap(model: &TrainedModel, x: &[f64]) -> Result<ShapRow> {
    let ens = ensemble_of(model)?;
    let d = model.feature_names.len();
    if x.len() != d {
        return Err(Error::Invalid(format!("expected {d} feature values, got {}", x.len())));
    }
    let mut row = ensemble_shap(&ens, &model.standardizer.transform(x), d);
    row.features = x.to_vec();
    Ok(row)
}

pub fn ensemble_shap(ens: &EnsembleView<'_>, x: &[f64], n_features: usize) -> ShapRow {
    let mut shap = vec![0.0; n_features];
    for t in ens.trees {
        for (s, v) in shap.iter_mut().zip(tree_shap_single(t, x, n_features)) {
            *s += v;
        }
    }
    shap.iter_mut().for_each(|s| *s *= ens.scale);
    ShapRow { shap, base_value: ens.expected_margin(), features: x.to_vec() }
}

/// Attributions for many rows; parallel, output in input order.
pub fn shap_matrix(model: &TrainedModel, rows: &[Vec<f64>]) -> Result<Vec<ShapRow>> {
    let ens = ensemble_of(model)?;
    let d = model.feature_names.len();
    if let Some(r) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::Invalid(format!("expected {d} feature values, got {}", r.len())));
    }
    Ok(rows
        .par_iter()
        .map(|x| {
            let mut row = ensemble_shap(&ens, &model.standardizer.transform(x), d);
            row.features = x.clone();
            row
        })
        .collect())
}

pub const MAX_BRUTE_FORCE_FEATURES: usize = 16;

/// Tree expectation with the features in `mask` fixed to `x` and the rest
/// marginalized by cover.
pub fn conditional_expectation(tree: &Tree, x: &[f64], mask: u32) -> f64 {
    fn walk(tree: &Tree, x: &[f64], mask: u32, i: usize) -> f64 {
        let n = &tree.nodes[i];
        match n.split {
            None => n.value,
            Some(s) if mask >> s.feature & 1 == 1 => {
                walk(tree, x, mask, if x[s.feature] <= s.threshold { s.left } else { s.right })
            }
            Some(s) => {
                let (l, r) = (&tree.nodes[s.left], &tree.nodes[s.right]);
                (l.cover * walk(tree, x, mask, s.left) + r.cover * walk(tree, x, mask, s.right)) / n.cover
            }
        }
    }
    walk(tree, x, mask, 0)
}

/// Exact Shapley values over all `2^d` coalitions.
pub fn brute_force_shapley(tree: &Tree, x: &[f64], n_features: usize) -> Result<Vec<f64>> {
    if n_features > MAX_BRUTE_FORCE_FEATURES {
        return Err(Error::Invalid(format!(
            "brute-force Shapley is limited to {MAX_BRUTE_FORCE_FEATURES} features, got {n_features}"
        )));
    }
    let d = n_features;
    let value: Vec<f64> = (0..1u32 << d).map(|m| conditional_expectation(tree, x, m)).collect();
    // |S|! (d - |S| - 1)! / d!
    let fact = |k: usize| (1..=k).map(|v| v as f64).product::<f64>();
    let weight: Vec<f64> = (0..d).map(|s| fact(s) * fact(d - s - 1) / fact(d)).collect();
    let mut phi = vec![0.0; d];
    for (i, p) in phi.iter_mut().enumerate() {
        for m in 0..1u32 << d {
            if m >> i & 1 == 1 {
                continue;
            }
            *p += weight[m.count_ones() as usize] * (value[(m | 1 << i) as usize] - value[m as usize]);
        }
    }
    Ok(phi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    pub mean_abs_shap: f64,
    pub rank: usize,
}

/// Features ranked by mean |shap|, largest first; ties keep column order.
pub fn shap_summary(feature_names: &[String], rows: &[ShapRow]) -> Result<Vec<FeatureImportance>> {
    if rows.is_empty() {
        return Err(Error::Invalid("SHAP summary needs at least one row".into()));
    }
    let n = rows.len() as f64;
    let mut imp: Vec<(usize, f64)> = (0..feature_names.len())
        .map(|f| (f, rows.iter().map(|r| r.shap[f].abs()).sum::<f64>() / n))
        .collect();
    imp.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(imp
        .into_iter()
        .enumerate()
        .map(|(rank, (f, v))| FeatureImportance { feature: feature_names[f].clone(), mean_abs_shap: v, rank: rank + 1 })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DependencePoint {
    pub row_id: usize,
    pub feature_value: f64,
    pub shap_value: f64,
}

/// `(feature value, shap value)` per row, sorted by feature value.
pub fn shap_dependence(feature: &str, feature_names: &[String], rows: &[ShapRow]) -> Result<Vec<DependencePoint>> {
    let f = feature_names
        .iter()
        .position(|n| n == feature)
        .ok_or_else(|| Error::Invalid(format!("unknown feature `{feature}`")))?;
    let mut pts: Vec<DependencePoint> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| DependencePoint { row_id: i, feature_value: r.features[f], shap_value: r.shap[f] })
        .collect();
    pts.sort_by(|a, b| a.feature_value.total_cmp(&b.feature_value).then(a.row_id.cmp(&b.row_id)));
    Ok(pts)
}

pub fn shap_csv(feature_names: &[String], rows: &[ShapRow]) -> String {
    let mut out = String::from("row_id,feature,feature_value,shap_value,base_value\n");
    for (i, r) in rows.iter().enumerate() {
        for (f, name) in feature_names.iter().enumerate() {
            let _ = writeln!(out, "{i},{name},{},{},{}", r.features[f], r.shap[f], r.base_value);
        }
    }
    out
}

pub fn summary_csv(importance: &[FeatureImportance]) -> String {
    let mut out = String::from("feature,mean_abs_shap,rank\n");
    for fi in importance {
        let _ = writeln!(out, "{},{},{}", fi.feature, fi.mean_abs_shap, fi.rank);
    }
    out
}

pub fn dependence_csv(points: &[DependencePoint]) -> String {
    let mut out = String::from("row_id,feature_value,shap_value\n");
    for p in points {
        let _ = writeln!(out, "{},{},{}", p.row_id, p.feature_value, p.shap_value);
    }
    out
}
