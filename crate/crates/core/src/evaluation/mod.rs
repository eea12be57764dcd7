//! Model evaluation: ROC/AUC, threshold scenarios, cross-validation and the
//! 5x2-CV paired t-test.

use serde::{Deserialize, Serialize};

use crate::models::{Design, Family, TrainedModel};
use crate::Result;

pub mod cv;
pub mod roc;
pub mod stats;

pub use cv::{
    five_by_two_statistic, five_by_two_ttest, fold_assignment, kfold_cv, CvConfig, CvResult, FiveByTwoResult,
    FiveByTwoStatistic, Grouping,
};
pub use roc::{auc, confusion_at, roc_curve, scenario_threshold, Confusion, RocPoint, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMatrix {
    pub scenario: Scenario,
    pub name: String,
    #[serde(flatten)]
    pub confusion: Confusion,
}

/// Per-model metrics on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: Family,
    /// Percent.
    pub train_accuracy: f64,
    /// Percent.
    pub test_accuracy: f64,
    pub auc: f64,
    /// Percent; absent when cross-validation was not run.
    pub cv_score: Option<f64>,
    pub roc: Vec<RocPoint>,
    pub scenario_matrices: Vec<ScenarioMatrix>,
}

pub fn scenario_matrices(scores: &[f64], labels: &[bool], roc: &[RocPoint], scenarios: &[Scenario]) -> Vec<ScenarioMatrix> {
    scenarios
        .iter()
        .map(|&s| ScenarioMatrix {
            scenario: s,
            name: s.name(),
            confusion: confusion_at(scores, labels, scenario_threshold(roc, s)),
        })
        .collect()
}

/// Score `model` on train (accuracy only) and test (accuracy, ROC, scenarios).
pub fn evaluate(
    model: &TrainedModel,
    train: &Design,
    test: &Design,
    scenarios: &[Scenario],
    cv_score: Option<f64>,
) -> Result<EvalReport> {
    let scores = model.score_all(&test.rows);
    let roc = roc_curve(&scores, &test.labels)?;
    Ok(EvalReport {
        model: model.family(),
        train_accuracy: 100.0 * model.accuracy(train),
        test_accuracy: 100.0 * model.accuracy(test),
        auc: auc(&roc),
        cv_score,
        scenario_matrices: scenario_matrices(&scores, &test.labels, &roc, scenarios),
        roc,
    })
}
