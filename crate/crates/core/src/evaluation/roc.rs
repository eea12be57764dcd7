//! ROC curve, AUC and operating-point selection.
//!
//! A row is predicted stress when its score is at or above the threshold.
//! Thresholds are the distinct scores in descending order, preceded by a
//! sentinel one above the maximum, so the curve runs from (0, 0) to (1, 1).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<RocPoint>> {
    if scores.len() != labels.len() {
        return Err(Error::Evaluation("scores and labels differ in length".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Evaluation("scores contain NaN".into()));
    }
    let p = labels.iter().filter(|&&l| l).count();
    let n = labels.len() - p;
    if p == 0 || n == 0 {
        return Err(Error::Evaluation(format!(
            "ROC needs both labels, found {p} positive and {n} negative"
        )));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let max = scores[idx[0]];
    let mut out = vec![RocPoint { fpr: 0.0, tpr: 0.0, threshold: max + 1.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = 0;
    while k < idx.len() {
        let s = scores[idx[k]];
        while k < idx.len() && scores[idx[k]] == s {
            if labels[idx[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        out.push(RocPoint { fpr: fp as f64 / n as f64, tpr: tp as f64 / p as f64, threshold: s });
    }
    Ok(out)
}

/// Trapezoidal area under the curve.
pub fn auc(roc: &[RocPoint]) -> f64 {
    roc.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0).sum()
}

/// Operating-point rule for picking a threshold off the ROC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Largest threshold reaching the TPR floor.
    TprAtLeast(f64),
    /// Smallest threshold staying under the FPR cap.
    FprAtMost(f64),
}

impl Scenario {
    pub fn defaults() -> Vec<Scenario> {
        vec![Scenario::TprAtLeast(1.0), Scenario::TprAtLeast(0.5), Scenario::FprAtMost(0.1)]
    }

    pub fn name(&self) -> String {
        match self {
            Scenario::TprAtLeast(v) => format!("tpr_at_least_{v}"),
            Scenario::FprAtMost(v) => format!("fpr_at_most_{v}"),
        }
    }
}

pub fn scenario_threshold(roc: &[RocPoint], scenario: Scenario) -> f64 {
    match scenario {
        Scenario::TprAtLeast(tau) => roc
            .iter()
            .find(|p| p.tpr >= tau)
            .unwrap_or_else(|| roc.last().expect("roc is never empty"))
            .threshold,
        Scenario::FprAtMost(phi) => {
            roc.iter().take_while(|p| p.fpr <= phi).last().unwrap_or(&roc[0]).threshold
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub threshold: f64,
    #[serde(rename = "TP")]
    pub tp: usize,
    #[serde(rename = "FN")]
    pub fn_: usize,
    #[serde(rename = "FP")]
    pub fp: usize,
    #[serde(rename = "TN")]
    pub tn: usize,
    #[serde(rename = "TPR")]
    pub tpr: f64,
    #[serde(rename = "FPR")]
    pub fpr: f64,
}

pub fn confusion_at(scores: &[f64], labels: &[bool], threshold: f64) -> Confusion {
    let (mut tp, mut fn_, mut fp, mut tn) = (0, 0, 0, 0);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l) {
            (true, true) => tp += 1,
            (false, true) => fn_ += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
        }
    }
    let rate = |a: usize, b: usize| if a + b == 0 { 0.0 } else { a as f64 / (a + b) as f64 };
    Confusion { threshold, tp, fn_, fp, tn, tpr: rate(tp, fn_), fpr: rate(fp, tn) }
}

pub fn roc_csv(curves: &[(&str, &[RocPoint])]) -> String {
    let mut out = String::from("model,fpr,tpr,threshold\n");
    for (name, roc) in curves {
        for p in *roc {
            let _ = writeln!(out, "{name},{},{},{}", p.fpr, p.tpr, p.threshold);
        }
    }
    out
}
