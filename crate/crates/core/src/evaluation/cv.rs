//! Grouped k-fold cross-validation and the 5x2-CV paired t-test.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize, Serializer};

use super::stats::student_t_two_sided;
use crate::dataset::{participant_counts, upsample_stress, ClassRatio};
use crate::features::FeatureVector;
use crate::models::{train, Design, ModelSpec};
use crate::rng::{seeded, sub_seed};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    /// Folds partition participants.
    Participant,
    /// Folds partition rows regardless of participant.
    Row,
}

/// Fold index per row.
///
/// Participant grouping deals participants, largest first (equal sizes in
/// seeded order), to the fold currently holding the fewest rows.
pub fn fold_assignment(rows: &[FeatureVector], k: usize, grouping: Grouping, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Evaluation(format!("need at least 2 folds, got {k}")));
    }
    match grouping {
        Grouping::Participant => {
            let mut counts = participant_counts(rows);
            if counts.len() < k {
                return Err(Error::Evaluation(format!(
                    "{k}-fold participant-grouped CV needs at least {k} participants, found {}",
                    counts.len()
                )));
            }
            counts.sort_by(|a, b| a.0.cmp(&b.0));
            counts.shuffle(&mut seeded(seed));
            counts.sort_by_key(|p| std::cmp::Reverse(p.1));
            let mut load = vec![0usize; k];
            let mut fold_of: BTreeMap<&str, usize> = BTreeMap::new();
            for (id, n) in &counts {
                let f = (0..k).min_by_key(|&f| (load[f], f)).unwrap();
                load[f] += n;
                fold_of.insert(id.as_str(), f);
            }
            Ok(rows.iter().map(|r| fold_of[r.participant_id.as_str()]).collect())
        }
        Grouping::Row => {
            if rows.len() < k {
                return Err(Error::Evaluation(format!("{k}-fold CV needs at least {k} rows")));
            }
            let mut idx: Vec<usize> = (0..rows.len()).collect();
            idx.shuffle(&mut seeded(seed));
            let mut folds = vec![0; rows.len()];
            for (pos, &i) in idx.iter().enumerate() {
                folds[i] = pos % k;
            }
            Ok(folds)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub k: usize,
    pub grouping: Grouping,
    pub seed: u64,
    /// Upsample stress rows inside each training fold.
    pub upsample: Option<ClassRatio>,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig { k: 10, grouping: Grouping::Participant, seed: 0, upsample: Some(ClassRatio::default()) }
    }
}

/// Train on `rows` outside `held_out` and return accuracy on `held_out`.
fn fold_accuracy(
    spec: &ModelSpec,
    rows: &[FeatureVector],
    folds: &[usize],
    held_out: usize,
    upsample: Option<ClassRatio>,
    seed: u64,
) -> Result<f64> {
    let mut test = Vec::new();
    let mut train_rows = Vec::new();
    for (r, &f) in rows.iter().zip(folds) {
        if f == held_out {
            test.push(r.clone());
        } else {
            train_rows.push(r.clone());
        }
    }
    let train_rows = match upsample {
        Some(ratio) => upsample_stress(&train_rows, ratio, seed)?.0,
        None => train_rows,
    };
    let model = train(spec, &Design::from_features(&train_rows))?;
    Ok(model.accuracy(&Design::from_features(&test)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    /// Mean fold accuracy, percent.
    pub score: f64,
    pub fold_accuracies: Vec<f64>,
}

pub fn kfold_cv(spec: &ModelSpec, rows: &[FeatureVector], config: &CvConfig) -> Result<CvResult> {
    let folds = fold_assignment(rows, config.k, config.grouping, config.seed)?;
    let fold_accuracies = (0..config.k)
        .map(|f| fold_accuracy(spec, rows, &folds, f, config.upsample, sub_seed(config.seed, f as u64)))
        .collect::<Result<Vec<f64>>>()?;
    let score = 100.0 * fold_accuracies.iter().sum::<f64>() / config.k as f64;
    Ok(CvResult { score, fold_accuracies })
}

fn ser_extended<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("NaN")
    } else if *v > 0.0 {
        s.serialize_str("Infinity")
    } else {
        s.serialize_str("-Infinity")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiveByTwoStatistic {
    #[serde(serialize_with = "ser_extended")]
    pub t: f64,
    pub p_value: f64,
    /// Every replication had zero variance.
    pub degenerate: bool,
}

/// Dietterich's statistic from `differences[i] = (p_i^(1), p_i^(2))`.
///
/// `t = p_1^(1) / sqrt(Σ s_i² / 5)` with `s_i² = Σ_j (p_i^(j) - p̄_i)²`,
/// two-sided p-value from Student's t with 5 degrees of freedom.
pub fn five_by_two_statistic(differences: &[[f64; 2]; 5]) -> FiveByTwoStatistic {
    let s2: f64 = differences
        .iter()
        .map(|[a, b]| {
            let m = (a + b) / 2.0;
            (a - m) * (a - m) + (b - m) * (b - m)
        })
        .sum();
    let first = differences[0][0];
    if s2 == 0.0 {
        return if first == 0.0 {
            FiveByTwoStatistic { t: 0.0, p_value: 1.0, degenerate: true }
        } else {
            FiveByTwoStatistic { t: first.signum() * f64::INFINITY, p_value: 0.0, degenerate: true }
        };
    }
    let t = first / (s2 / 5.0).sqrt();
    FiveByTwoStatistic { t, p_value: student_t_two_sided(t, 5.0), degenerate: false }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replication {
    pub accuracy_a: [f64; 2],
    pub accuracy_b: [f64; 2],
    pub differences: [f64; 2],
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiveByTwoResult {
    pub spec_a: ModelSpec,
    pub spec_b: ModelSpec,
    pub seed: u64,
    #[serde(flatten)]
    pub statistic: FiveByTwoStatistic,
    pub alpha: f64,
    pub decision: String,
    pub replications: Vec<Replication>,
}

fn decision(stat: &FiveByTwoStatistic, alpha: f64) -> String {
    if stat.p_value < alpha {
        if stat.t > 0.0 { "a_better" } else { "b_better" }.to_string()
    } else {
        "no_difference".to_string()
    }
}

/// Five replications of participant-grouped 2-fold CV comparing two specs.
pub fn five_by_two_ttest(
    spec_a: &ModelSpec,
    spec_b: &ModelSpec,
    rows: &[FeatureVector],
    seed: u64,
    upsample: Option<ClassRatio>,
) -> Result<FiveByTwoResult> {
    let mut diffs = [[0.0; 2]; 5];
    let mut replications = Vec::with_capacity(5);
    for (i, d) in diffs.iter_mut().enumerate() {
        let rep_seed = sub_seed(seed, i as u64);
        let folds = fold_assignment(rows, 2, Grouping::Participant, rep_seed)?;
        let mut acc_a = [0.0; 2];
        let mut acc_b = [0.0; 2];
        for j in 0..2 {
            // test on fold j, train on the other
            let up_seed = sub_seed(rep_seed, j as u64);
            acc_a[j] = fold_accuracy(spec_a, rows, &folds, j, upsample, up_seed)?;
            acc_b[j] = fold_accuracy(spec_b, rows, &folds, j, upsample, up_seed)?;
            d[j] = acc_a[j] - acc_b[j];
        }
        let m = (d[0] + d[1]) / 2.0;
        replications.push(Replication {
            accuracy_a: acc_a,
            accuracy_b: acc_b,
            differences: *d,
            variance: (d[0] - m).powi(2) + (d[1] - m).powi(2),
        });
    }
    let statistic = five_by_two_statistic(&diffs);
    let alpha = 0.05;
    Ok(FiveByTwoResult {
        spec_a: spec_a.clone(),
        spec_b: spec_b.clone(),
        seed,
        decision: decision(&statistic, alpha),
        statistic,
        alpha,
        replications,
    })
}
