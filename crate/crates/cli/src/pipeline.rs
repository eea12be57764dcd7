//! End-to-end orchestration: input → windows → features → split → train →
//! evaluate → explain → report bundle.

use std::path::Path;

use serde::Serialize;
use stress_core::dataset::{participant_split, upsample_stress, SplitDataset, SplitManifest};
use stress_core::evaluation::{
    evaluate, five_by_two_ttest, kfold_cv, roc::roc_csv, CvConfig, EvalReport, FiveByTwoResult, RocPoint,
    ScenarioMatrix,
};
use stress_core::explain::{
    dependence_csv, shap_csv, shap_dependence, shap_matrix, shap_summary, summary_csv, FeatureImportance,
};
use stress_core::features::{featurize_cohort, FeatureVector};
use stress_core::ingest::{load_directory, ParticipantRecord};
use stress_core::models::grid::{grid_search, GridResult};
use stress_core::models::{default_spec, train, Design, Family, ModelSpec, TrainedModel, MODEL_FORMAT_VERSION};
use stress_core::plot::{beeswarm_svg, dependence_svg, roc_svg};
use stress_core::rng::sub_seed;
use stress_core::synth::generate_cohort;
use stress_core::windowing::{WindowConfig, WindowReport};

use crate::config::{ExplainConfig, Input, RunConfig};
use crate::error::CliError;
use crate::report::{Bundle, FileEntry};

/// Stream indices for sub-seeds derived from the run seed.
const UPSAMPLE_STREAM: u64 = 1;
const GRID_STREAM: u64 = 2;
const CV_STREAM: u64 = 3;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct InputSummary {
    pub source: String,
    pub participants: usize,
    pub samples: usize,
    pub events: usize,
    pub rejected_sample_rows: usize,
    pub rejected_event_rows: usize,
    pub duplicate_samples_collapsed: usize,
}

pub fn load_input(input: &Input) -> Result<(Vec<ParticipantRecord>, InputSummary), CliError> {
    match input {
        Input::Synth(cohort) => {
            let records = generate_cohort(cohort)?;
            let summary = InputSummary {
                source: "synth".into(),
                participants: records.len(),
                samples: records.iter().map(|r| r.samples.len()).sum(),
                events: records.iter().map(|r| r.events.len()).sum(),
                ..Default::default()
            };
            Ok((records, summary))
        }
        Input::DataDir(dir) => {
            let (records, reports) = load_directory(dir)?;
            if records.is_empty() {
                return Err(stress_core::Error::Format(format!("no *.sensor.csv files in {}", dir.display())).into());
            }
            for r in &reports {
                if !r.sample_rejects.is_empty() || !r.event_rejects.is_empty() {
                    log::warn!(
                        "{}: rejected {} sensor rows and {} event rows",
                        r.participant_id,
                        r.sample_rejects.len(),
                        r.event_rejects.len()
                    );
                }
            }
            let summary = InputSummary {
                source: "data_dir".into(),
                participants: records.len(),
                samples: reports.iter().map(|r| r.samples).sum(),
                events: reports.iter().map(|r| r.events).sum(),
                rejected_sample_rows: reports.iter().map(|r| r.sample_rejects.len()).sum(),
                rejected_event_rows: reports.iter().map(|r| r.event_rejects.len()).sum(),
                duplicate_samples_collapsed: reports.iter().map(|r| r.duplicate_samples_collapsed).sum(),
            };
            Ok((records, summary))
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct WindowSummary {
    pub stress_windows: usize,
    pub nonstress_windows: usize,
    pub merged_events: usize,
    pub required_samples: usize,
    pub dropped_stress: usize,
    pub dropped_nonstress: usize,
}

impl WindowSummary {
    fn from_reports(reports: &[WindowReport]) -> Self {
        WindowSummary {
            stress_windows: reports.iter().map(|r| r.stress_windows).sum(),
            nonstress_windows: reports.iter().map(|r| r.nonstress_windows).sum(),
            merged_events: reports.iter().map(|r| r.merged_events).sum(),
            required_samples: reports.first().map_or(0, |r| r.coverage.required_samples),
            dropped_stress: reports.iter().map(|r| r.coverage.dropped_stress).sum(),
            dropped_nonstress: reports.iter().map(|r| r.coverage.dropped_nonstress).sum(),
        }
    }
}

pub fn featurize(
    records: &[ParticipantRecord],
    window: &WindowConfig,
) -> Result<(Vec<FeatureVector>, WindowSummary), CliError> {
    let (rows, reports) = featurize_cohort(records, window)?;
    if rows.is_empty() {
        return Err(stress_core::Error::Contract("no window survived the coverage filter".into()).into());
    }
    Ok((rows, WindowSummary::from_reports(&reports)))
}

/// One row of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelMetrics {
    pub name: String,
    pub spec: ModelSpec,
    /// Percent.
    pub train_accuracy: f64,
    /// Percent.
    pub test_accuracy: f64,
    /// Percent; `null` when cross-validation was not requested.
    pub cv_score: Option<f64>,
    pub auc: f64,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub models: Vec<ModelMetrics>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioRow {
    pub model: String,
    #[serde(flatten)]
    pub matrix: ScenarioMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenariosReport {
    pub scenarios: Vec<ScenarioRow>,
}

/// A trained model with its evaluation, under a display name unique in the run.
pub struct Evaluated {
    pub name: String,
    pub model: TrainedModel,
    pub report: EvalReport,
}

/// Unique display names: the family name, suffixed `_2`, `_3`, … on repeats.
pub fn display_names(specs: &[ModelSpec]) -> Vec<String> {
    let mut seen = std::collections::BTreeMap::<Family, usize>::new();
    specs
        .iter()
        .map(|s| {
            let n = seen.entry(s.family).or_insert(0);
            *n += 1;
            if *n == 1 { s.family.name().to_string() } else { format!("{}_{}", s.family.name(), n) }
        })
        .collect()
}

pub fn metrics_report(evaluated: &[Evaluated], warnings: Vec<String>) -> MetricsReport {
    MetricsReport {
        models: evaluated
            .iter()
            .map(|e| ModelMetrics {
                name: e.name.clone(),
                spec: e.model.spec.clone(),
                train_accuracy: e.report.train_accuracy,
                test_accuracy: e.report.test_accuracy,
                cv_score: e.report.cv_score,
                auc: e.report.auc,
                warnings: e.model.warnings.clone(),
            })
            .collect(),
        warnings,
    }
}

pub fn scenarios_report(evaluated: &[Evaluated]) -> ScenariosReport {
    ScenariosReport {
        scenarios: evaluated
            .iter()
            .flat_map(|e| {
                e.report.scenario_matrices.iter().map(|m| ScenarioRow { model: e.name.clone(), matrix: m.clone() })
            })
            .collect(),
    }
}

/// metrics.json, scenarios.json, roc.csv, roc.svg.
pub fn add_evaluation_files(bundle: &mut Bundle, evaluated: &[Evaluated], warnings: Vec<String>) -> Result<(), CliError> {
    bundle.add_json("metrics.json", &metrics_report(evaluated, warnings))?;
    bundle.add_json("scenarios.json", &scenarios_report(evaluated))?;
    let curves: Vec<(&str, &[RocPoint])> = evaluated.iter().map(|e| (e.name.as_str(), e.report.roc.as_slice())).collect();
    bundle.add_text("roc.csv", roc_csv(&curves));
    bundle.add_text("roc.svg", roc_svg(&curves));
    Ok(())
}

/// shap_summary.csv/.svg, shap_dependence_<feature>.csv/.svg, optional shap.csv.
pub fn add_explanation_files(
    bundle: &mut Bundle,
    model: &TrainedModel,
    rows: &[FeatureVector],
    dependence: &[String],
    per_row: bool,
) -> Result<Vec<FeatureImportance>, CliError> {
    let x: Vec<Vec<f64>> = rows.iter().map(|r| r.values().to_vec()).collect();
    let shap = shap_matrix(model, &x)?;
    let names = &model.feature_names;
    let importance = shap_summary(names, &shap)?;
    bundle.add_text("shap_summary.csv", summary_csv(&importance));
    bundle.add_text("shap_summary.svg", beeswarm_svg(&importance, names, &shap));
    for feature in dependence {
        let points = shap_dependence(feature, names, &shap)?;
        bundle.add_text(format!("shap_dependence_{feature}.csv"), dependence_csv(&points));
        bundle.add_text(format!("shap_dependence_{feature}.svg"), dependence_svg(feature, &points));
    }
    if per_row {
        bundle.add_text("shap.csv", shap_csv(names, &shap));
    }
    Ok(importance)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Seeds {
    pub run: u64,
    pub split: u64,
    pub upsample: u64,
    pub grid: u64,
    pub cv: u64,
    pub models: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub core_version: String,
    pub model_format_version: u32,
    pub seeds: Seeds,
    pub config: RunConfig,
    pub input: InputSummary,
    pub windows: WindowSummary,
    pub explained_model: Option<String>,
    pub files: Vec<FileEntry>,
}

/// Everything `cmd_run` computed, before it is written out.
pub struct RunOutput {
    pub bundle: Bundle,
    pub evaluated: Vec<Evaluated>,
    pub split: SplitDataset,
    pub grid: Option<GridResult>,
    pub importance: Option<Vec<FeatureImportance>>,
}

/// Run the pipeline in memory.
pub fn execute(config: &RunConfig) -> Result<RunOutput, CliError> {
    config.validate()?;
    let seed = config.seed;
    let (records, input_summary) = load_input(&config.input)?;
    let (rows, window_summary) = featurize(&records, &config.window)?;
    log::info!("{} windows from {} participants", rows.len(), records.len());

    let split = participant_split(&rows, config.split.train_fraction, seed)?;
    let upsample_seed = sub_seed(seed, UPSAMPLE_STREAM);
    let (train_rows, upsample_report) = match config.upsample {
        Some(ratio) => {
            let (r, rep) = upsample_stress(&split.train, ratio, upsample_seed)?;
            (r, Some(rep))
        }
        None => (split.train.clone(), None),
    };
    let mut warnings: Vec<String> = upsample_report.iter().filter_map(|u| u.warning.clone()).collect();

    let mut specs = config.model_specs();
    let grid_seed = sub_seed(seed, GRID_STREAM);
    let grid = match &config.grid {
        Some(g) => {
            let fixed = specs.iter().find(|s| s.family == g.family).map(|s| s.hyperparameters.clone()).unwrap_or_default();
            let result = grid_search(g.family, &g.parameters, &fixed, &split, g.objective, config.upsample, grid_seed)?;
            warnings.extend(result.warnings.iter().cloned());
            if let Some(best) = &result.best {
                match specs.iter_mut().find(|s| s.family == g.family) {
                    Some(s) => *s = best.clone(),
                    None => specs.push(best.clone()),
                }
            }
            Some(result)
        }
        None => None,
    };

    let train_design = Design::from_features(&train_rows);
    let test_design = Design::from_features(&split.test);
    let cv_seed = sub_seed(seed, CV_STREAM);
    let names = display_names(&specs);
    let mut evaluated = Vec::with_capacity(specs.len());
    for (spec, name) in specs.iter().zip(names) {
        log::info!("training {name}");
        let model = train(spec, &train_design)?;
        let cv_score = match config.cv {
            Some(cv) => {
                let cfg = CvConfig { k: cv.k, grouping: cv.grouping, seed: cv_seed, upsample: config.upsample };
                Some(kfold_cv(spec, &split.train, &cfg)?.score)
            }
            None => None,
        };
        let report = evaluate(&model, &train_design, &test_design, &config.scenarios, cv_score)?;
        evaluated.push(Evaluated { name, model, report });
    }

    let mut bundle = Bundle::default();
    bundle.add_json("split.json", &SplitManifest::new(&split, upsample_report.as_ref()))?;
    add_evaluation_files(&mut bundle, &evaluated, warnings)?;
    if let Some(g) = &grid {
        bundle.add_json("leaderboard.json", g)?;
    }
    let mut explained_model = None;
    let importance = match &config.explain {
        Some(ExplainConfig { model, dependence, per_row }) => {
            let target = evaluated.iter().find(|e| e.model.family() == *model).ok_or_else(|| {
                CliError::Config(format!("explain.model {model} is not among the trained models"))
            })?;
            explained_model = Some(target.name.clone());
            Some(add_explanation_files(&mut bundle, &target.model, &split.test, dependence, *per_row)?)
        }
        None => None,
    };

    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        core_version: stress_core::VERSION.into(),
        model_format_version: MODEL_FORMAT_VERSION,
        seeds: Seeds {
            run: seed,
            split: seed,
            upsample: upsample_seed,
            grid: grid_seed,
            cv: cv_seed,
            models: specs.iter().map(|s| s.seed).collect(),
        },
        // the output location is not part of what determines the results
        config: RunConfig { report_dir: None, ..config.clone() },
        input: input_summary,
        windows: window_summary,
        explained_model,
        // every file except the manifest itself
        files: bundle.entries(),
    };
    bundle.add_json("manifest.json", &manifest)?;
    Ok(RunOutput { bundle, evaluated, split, grid, importance })
}

/// Run the pipeline and commit the bundle to `report_dir`.
pub fn cmd_run(config: &RunConfig, report_dir: &Path, replace: bool) -> Result<RunOutput, CliError> {
    if report_dir.exists() && !replace && std::fs::read_dir(report_dir)?.next().is_some() {
        return Err(CliError::Config(format!(
            "report directory {} exists and is not empty; pass --force to replace it",
            report_dir.display()
        )));
    }
    let out = execute(config)?;
    out.bundle.commit(report_dir, replace)?;
    Ok(out)
}

/// Spec for `family` from the configuration, or its default.
fn spec_for(config: &RunConfig, family: Family) -> ModelSpec {
    config.model_specs().into_iter().find(|s| s.family == family).unwrap_or_else(|| default_spec(family, config.seed))
}

/// 5x2-CV paired t-test of two families on the configured cohort.
pub fn cmd_compare(config: &RunConfig, a: Family, b: Family) -> Result<FiveByTwoResult, CliError> {
    let mut cfg = config.clone();
    // only the data, window, upsample and model sections matter here
    cfg.explain = None;
    cfg.validate()?;
    let (records, _) = load_input(&cfg.input)?;
    let (rows, _) = featurize(&records, &cfg.window)?;
    compare_rows(&rows, &spec_for(&cfg, a), &spec_for(&cfg, b), cfg.seed, cfg.upsample)
}

pub fn compare_rows(
    rows: &[FeatureVector],
    a: &ModelSpec,
    b: &ModelSpec,
    seed: u64,
    upsample: Option<stress_core::dataset::ClassRatio>,
) -> Result<FiveByTwoResult, CliError> {
    Ok(five_by_two_ttest(a, b, rows, seed, upsample)?)
}
