//! Run configuration: parsed strictly (unknown keys rejected) and checked
//! before any data is touched.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stress_core::dataset::ClassRatio;
use stress_core::evaluation::{Grouping, Scenario};
use stress_core::features::{feature_index, N_FEATURES};
use stress_core::models::grid::{combinations, Grid, Objective};
use stress_core::models::{default_spec, Family, ModelSpec};
use stress_core::synth::CohortConfig;
use stress_core::windowing::WindowConfig;

use crate::error::CliError;

/// Where participant streams come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Input {
    /// Generate a synthetic cohort in memory.
    Synth(CohortConfig),
    /// Load `<id>.sensor.csv` / `<id>.events.csv` files from a directory.
    DataDir(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { train_fraction: 0.8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub family: Family,
    #[serde(default = "default_objective")]
    pub objective: Objective,
    pub parameters: Grid,
}

fn default_objective() -> Objective {
    Objective::ValidationAccuracy
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvSettings {
    pub k: usize,
    pub grouping: Grouping,
}

impl Default for CvSettings {
    fn default() -> Self {
        CvSettings { k: 10, grouping: Grouping::Participant }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    /// Family of the trained model to explain; must be a tree ensemble.
    pub model: Family,
    /// Features that get a dependence plot.
    pub dependence: Vec<String>,
    /// Also write per-row attributions.
    pub per_row: bool,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            model: Family::Gbt,
            dependence: vec!["std_hr".into(), "min_hr".into(), "std_acc".into()],
            per_row: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub input: Input,
    pub report_dir: Option<PathBuf>,
    pub window: WindowConfig,
    pub split: SplitConfig,
    /// `null` trains on the raw class balance.
    pub upsample: Option<ClassRatio>,
    /// Specs to train; empty means the default spec of every family.
    pub models: Vec<ModelSpec>,
    pub grid: Option<GridConfig>,
    pub scenarios: Vec<Scenario>,
    /// Participant-grouped k-fold CV score per model; `null` skips it.
    pub cv: Option<CvSettings>,
    /// `null` skips SHAP outputs.
    pub explain: Option<ExplainConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            input: Input::Synth(CohortConfig::default()),
            report_dir: None,
            window: WindowConfig::default(),
            split: SplitConfig::default(),
            upsample: Some(ClassRatio::default()),
            models: Vec::new(),
            grid: None,
            scenarios: Scenario::defaults(),
            cv: None,
            explain: Some(ExplainConfig::default()),
        }
    }
}

impl RunConfig {
    /// Defaults with the synthetic cohort seeded from `seed`.
    pub fn synth_default(seed: u64) -> Self {
        RunConfig { seed, input: Input::Synth(CohortConfig { seed, ..CohortConfig::default() }), ..Self::default() }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(format!("run config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Replace the seed everywhere it propagates: run, synthetic cohort and
    /// model specs that did not pin their own.
    pub fn reseed(&mut self, seed: u64) {
        self.seed = seed;
        if let Input::Synth(c) = &mut self.input {
            c.seed = seed;
        }
    }

    /// Model specs to train, with unseeded specs taking the run seed.
    pub fn model_specs(&self) -> Vec<ModelSpec> {
        if self.models.is_empty() {
            return Family::ALL.iter().map(|&f| default_spec(f, self.seed)).collect();
        }
        self.models
            .iter()
            .map(|s| if s.seed == 0 { s.clone().with_seed(self.seed) } else { s.clone() })
            .collect()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if let Input::Synth(c) = &self.input {
            c.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        self.window.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let f = self.split.train_fraction;
        if !(f > 0.0 && f < 1.0) {
            return bad(format!("split.train_fraction must lie in (0, 1), got {f}"));
        }
        if let Some(r) = self.upsample {
            if r.nonstress == 0 || r.stress == 0 {
                return bad("upsample ratio terms must be positive".into());
            }
        }
        for spec in self.model_specs() {
            spec.validate(N_FEATURES).map_err(|e| CliError::Config(format!("model {}: {e}", spec.family)))?;
        }
        if let Some(g) = &self.grid {
            if g.parameters.is_empty() || g.parameters.values().any(Vec::is_empty) {
                return bad("grid.parameters must name at least one hyperparameter with a non-empty list".into());
            }
            for hp in combinations(&g.parameters) {
                let spec = ModelSpec { family: g.family, hyperparameters: hp, seed: self.seed };
                spec.validate(N_FEATURES).map_err(|e| CliError::Config(format!("grid: {e}")))?;
            }
        }
        if self.scenarios.is_empty() {
            return bad("scenarios must not be empty".into());
        }
        for s in &self.scenarios {
            let v = match s {
                Scenario::TprAtLeast(v) | Scenario::FprAtMost(v) => *v,
            };
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("scenario {} must use a rate in [0, 1]", s.name()));
            }
        }
        if let Some(cv) = self.cv {
            if cv.k < 2 {
                return bad(format!("cv.k must be at least 2, got {}", cv.k));
            }
        }
        if let Some(ex) = &self.explain {
            if !ex.model.is_tree_ensemble() {
                return bad(format!("explain.model must be gbt or random_forest, got {}", ex.model));
            }
            let mut families: BTreeSet<Family> = self.model_specs().iter().map(|s| s.family).collect();
            families.extend(self.grid.as_ref().map(|g| g.family));
            if !families.contains(&ex.model) {
                return bad(format!("explain.model {} is not among the trained models", ex.model));
            }
            for name in &ex.dependence {
                if feature_index(name).is_none() {
                    return bad(format!("explain.dependence: unknown feature `{name}`"));
                }
            }
        }
        Ok(())
    }
}
