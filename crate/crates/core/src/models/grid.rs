//! Exhaustive hyperparameter search.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train, Design, Family, Hyperparameters, ModelSpec, ParamValue};
use crate::dataset::{participant_split, upsample_stress, ClassRatio, SplitDataset};
use crate::features::FeatureVector;
use crate::rng::sub_seed;
use crate::{Error, Result};

pub type Grid = BTreeMap<String, Vec<ParamValue>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Score each combination on the held-out test participants.
    TestAccuracy,
    /// Score on a participant-level validation carve-out of the training side.
    ValidationAccuracy,
}

pub const LEAKAGE_WARNING: &str =
    "grid search objective is test_accuracy: hyperparameters are tuned on the test participants, so the reported test metrics are optimistic; use validation_accuracy for an unbiased estimate";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub hyperparameters: Hyperparameters,
    pub accuracy: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub family: Family,
    pub objective: Objective,
    pub combinations: usize,
    pub best: Option<ModelSpec>,
    pub leaderboard: Vec<LeaderboardEntry>,
    pub warnings: Vec<String>,
}

/// Cartesian product of the grid, in key order with the last key varying fastest.
pub fn combinations(grid: &Grid) -> Vec<Hyperparameters> {
    let mut out = vec![Hyperparameters::new()];
    for (name, values) in grid {
        out = out
            .into_iter()
            .flat_map(|base| {
                values.iter().map(move |v| {
                    let mut h = base.clone();
                    h.insert(name.clone(), v.clone());
                    h
                })
            })
            .collect();
    }
    out
}

/// Lexicographic order over hyperparameter values, keys in sorted order.
pub fn cmp_hyperparameters(a: &Hyperparameters, b: &Hyperparameters) -> Ordering {
    let mut ia = a.iter();
    let mut ib = b.iter();
    loop {
        match (ia.next(), ib.next()) {
            (None, None) => return Ordering::Equal,
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some((ka, va)), Some((kb, vb))) => {
                let o = ka.cmp(kb).then_with(|| va.cmp_key(vb));
                if o.is_ne() {
                    return o;
                }
            }
        }
    }
}

/// Train every combination on `data.train` and rank by the objective.
///
/// `fixed` supplies hyperparameters shared by all combinations (grid values
/// win on conflict). With `upsample`, stress rows of the fitting side are
/// duplicated to the ratio *after* any validation carve-out, so duplicates
/// never reach the rows being scored. A combination that fails to train is
/// kept in the leaderboard with its error and ranked last.
pub fn grid_search(
    family: Family,
    grid: &Grid,
    fixed: &Hyperparameters,
    data: &SplitDataset,
    objective: Objective,
    upsample: Option<ClassRatio>,
    seed: u64,
) -> Result<GridResult> {
    if grid.is_empty() || grid.values().any(Vec::is_empty) {
        return Err(Error::Invalid("grid must name at least one hyperparameter and every list must be non-empty".into()));
    }
    let mut warnings = Vec::new();
    let (fit, eval) = match objective {
        Objective::TestAccuracy => {
            log::warn!("{LEAKAGE_WARNING}");
            warnings.push(LEAKAGE_WARNING.to_string());
            (fit_design(&data.train, upsample, seed)?, Design::from_features(&data.test))
        }
        Objective::ValidationAccuracy => {
            let inner = participant_split(&data.train, 0.8, seed)?;
            (fit_design(&inner.train, upsample, seed)?, Design::from_features(&inner.test))
        }
    };
    let combos = combinations(grid);
    let mut leaderboard: Vec<LeaderboardEntry> = combos
        .par_iter()
        .map(|h| {
            let mut hp = fixed.clone();
            hp.extend(h.clone());
            let spec = ModelSpec { family, hyperparameters: hp, seed };
            match train(&spec, &fit) {
                Ok(m) => LeaderboardEntry { hyperparameters: h.clone(), accuracy: Some(m.accuracy(&eval)), error: None },
                Err(e) => LeaderboardEntry { hyperparameters: h.clone(), accuracy: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    leaderboard.sort_by(|a, b| match (a.accuracy, b.accuracy) {
        (Some(x), Some(y)) => y.total_cmp(&x).then_with(|| cmp_hyperparameters(&a.hyperparameters, &b.hyperparameters)),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => cmp_hyperparameters(&a.hyperparameters, &b.hyperparameters),
    });
    let best = leaderboard.first().filter(|e| e.accuracy.is_some()).map(|e| {
        let mut hp = fixed.clone();
        hp.extend(e.hyperparameters.clone());
        ModelSpec { family, hyperparameters: hp, seed }
    });
    Ok(GridResult { family, objective, combinations: combos.len(), best, leaderboard, warnings })
}

fn fit_design(rows: &[FeatureVector], upsample: Option<ClassRatio>, seed: u64) -> Result<Design> {
    Ok(match upsample {
        Some(ratio) => Design::from_features(&upsample_stress(rows, ratio, sub_seed(seed, 1))?.0),
        None => Design::from_features(rows),
    })
}

/// The tuning grid reported for the boosted model: two losses, two split
/// criteria, two ensemble sizes, three depths.
pub fn study_gbt_grid() -> Grid {
    let text = |v: &[&str]| v.iter().map(|s| ParamValue::Text(s.to_string())).collect::<Vec<_>>();
    Grid::from([
        ("loss".to_string(), text(&["deviance", "exponential"])),
        ("criterion".to_string(), text(&["friedman_mse", "mse"])),
        ("n_estimators".to_string(), vec![ParamValue::Int(100), ParamValue::Int(200)]),
        ("max_depth".to_string(), vec![ParamValue::Int(3), ParamValue::Int(5), ParamValue::Int(7)]),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureVector, N_FEATURES};
    use crate::windowing::Label;

    fn split() -> SplitDataset {
        let mut rows = Vec::new();
        for p in 0..6 {
            for i in 0..30 {
                let stress = i % 4 == 0;
                let mut v = [1.0; N_FEATURES];
                v[3] = if stress { 12.0 } else { 4.0 } + (i % 5) as f64 * 0.1 + p as f64 * 0.01;
                v[0] = (i * 7 % 11) as f64;
                rows.push(FeatureVector::from_values(format!("p{p}"), Label::from_stress(stress), v));
            }
        }
        participant_split(&rows, 0.8, 1).unwrap()
    }

    #[test]
    fn study_grid_has_24_combinations() {
        assert_eq!(combinations(&study_gbt_grid()).len(), 24);
    }

    #[test]
    fn single_combination() {
        let grid = Grid::from([("k".to_string(), vec![ParamValue::Int(3)])]);
        let r = grid_search(Family::Knn, &grid, &Hyperparameters::new(), &split(), Objective::ValidationAccuracy, None, 0).unwrap();
        assert_eq!(r.leaderboard.len(), 1);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn ties_break_lexicographically() {
        // all k give perfect accuracy on this separable data
        let grid = Grid::from([("k".to_string(), vec![ParamValue::Int(5), ParamValue::Int(1), ParamValue::Int(3)])]);
        let r = grid_search(Family::Knn, &grid, &Hyperparameters::new(), &split(), Objective::TestAccuracy, None, 0).unwrap();
        let ks: Vec<_> = r.leaderboard.iter().map(|e| e.hyperparameters["k"].clone()).collect();
        assert_eq!(r.leaderboard[0].accuracy, Some(1.0));
        assert_eq!(ks, vec![ParamValue::Int(1), ParamValue::Int(3), ParamValue::Int(5)]);
        assert_eq!(r.best.unwrap().hyperparameters["k"], ParamValue::Int(1));
        assert_eq!(r.warnings, vec![LEAKAGE_WARNING.to_string()]);
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        let grid = Grid::from([("k".to_string(), vec![ParamValue::Int(2), ParamValue::Int(100_000)])]);
        let r = grid_search(Family::Knn, &grid, &Hyperparameters::new(), &split(), Objective::TestAccuracy, None, 0).unwrap();
        assert_eq!(r.leaderboard.len(), 2);
        assert!(r.leaderboard[0].accuracy.is_some());
        assert!(r.leaderboard[1].error.is_some());
    }

    #[test]
    fn empty_grid_rejected() {
        assert!(grid_search(Family::Knn, &Grid::new(), &Hyperparameters::new(), &split(), Objective::TestAccuracy, None, 0).is_err());
    }
}
