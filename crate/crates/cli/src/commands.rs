//! Stand-alone stages operating on intermediate files.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use stress_core::dataset::{participant_split, upsample_stress, ClassRatio, SplitManifest};
use stress_core::evaluation::{evaluate, Scenario};
use stress_core::features::{feature_csv, parse_feature_csv, FeatureVector};
use stress_core::ingest::load_directory;
use stress_core::models::{default_spec, train, Design, ParamValue, TrainedModel};
use stress_core::rng::sub_seed;
use stress_core::synth::{generate_cohort, write_cohort, CohortConfig};
use stress_core::windowing::WindowConfig;

use crate::args::{
    CompareArgs, EvalArgs, ExplainArgs, FeaturizeArgs, RunArgs, SynthArgs, TrainArgs, WindowArgs,
};
use crate::config::{ExplainConfig, RunConfig};
use crate::error::CliError;
use crate::pipeline::{self, add_evaluation_files, add_explanation_files, Evaluated};
use crate::report::Bundle;

const DEFAULT_REPORT_DIR: &str = "report";

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn load_features(path: &Path) -> Result<Vec<FeatureVector>, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(parse_feature_csv(std::io::BufReader::new(file))?)
}

fn load_model(path: &Path) -> Result<TrainedModel, CliError> {
    Ok(TrainedModel::from_json(&read_text(path)?)?)
}

fn load_split(path: &Path) -> Result<SplitManifest, CliError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn window_config(w: &WindowArgs) -> Result<WindowConfig, CliError> {
    let cfg = WindowConfig { half_width: w.half_width, length: w.length, min_coverage: w.min_coverage };
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

pub fn synth(args: &SynthArgs) -> Result<(), CliError> {
    let mut cfg = match &args.config {
        Some(p) => serde_json::from_str::<CohortConfig>(&read_text(p)?)
            .map_err(|e| CliError::Config(format!("cohort config: {e}")))?,
        None => CohortConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.participants {
        cfg.n_participants = n;
    }
    if let Some(d) = args.days {
        cfg.days = d;
    }
    if let Some(r) = args.events_per_day {
        cfg.events_per_day = r;
    }
    if args.zero_effect {
        cfg = cfg.zero_effect();
    }
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let records = generate_cohort(&cfg)?;
    write_cohort(&args.out, &records)?;
    write_json(&args.out.join("cohort.json"), &cfg)?;
    log::info!("wrote {} participants to {}", records.len(), args.out.display());
    Ok(())
}

pub fn featurize(args: &FeaturizeArgs) -> Result<(), CliError> {
    let window = window_config(&args.window)?;
    let (records, reports) = load_directory(&args.input)?;
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
    let (rows, summary) = pipeline::featurize(&records, &window)?;
    std::fs::write(&args.out, feature_csv(&rows))?;
    log::info!(
        "{} stress and {} non-stress windows ({} stress, {} non-stress dropped for coverage)",
        summary.stress_windows,
        summary.nonstress_windows,
        summary.dropped_stress,
        summary.dropped_nonstress
    );
    Ok(())
}

fn parse_param(s: &str) -> Result<(String, ParamValue), CliError> {
    let (k, v) = s.split_once('=').ok_or_else(|| CliError::Config(format!("--param expects NAME=VALUE, got `{s}`")))?;
    if k.is_empty() {
        return Err(CliError::Config(format!("--param expects NAME=VALUE, got `{s}`")));
    }
    Ok((k.to_string(), ParamValue::parse(v)))
}

pub fn train_cmd(args: &TrainArgs) -> Result<(), CliError> {
    let seed = args.split.seed;
    let mut spec = default_spec(args.model, seed);
    for p in &args.params {
        let (k, v) = parse_param(p)?;
        spec.hyperparameters.insert(k, v);
    }
    spec.validate(stress_core::features::N_FEATURES).map_err(|e| CliError::Config(e.to_string()))?;
    let f = args.split.train_fraction;
    if !(f > 0.0 && f < 1.0) {
        return Err(CliError::Config(format!("--train-fraction must lie in (0, 1), got {f}")));
    }
    let rows = load_features(&args.features)?;
    let split = participant_split(&rows, f, seed)?;
    let (train_rows, report) = if args.no_upsample {
        (split.train.clone(), None)
    } else {
        let (r, rep) = upsample_stress(&split.train, ClassRatio::default(), sub_seed(seed, 1))?;
        (r, Some(rep))
    };
    let model = train(&spec, &Design::from_features(&train_rows))?;
    std::fs::write(&args.out, model.to_json()? + "\n")?;
    if let Some(p) = &args.split_out {
        write_json(p, &SplitManifest::new(&split, report.as_ref()))?;
    }
    Ok(())
}

/// Rows of the split's train and test participants.
fn split_rows(rows: Vec<FeatureVector>, split: &SplitManifest) -> Result<(Vec<FeatureVector>, Vec<FeatureVector>), CliError> {
    let train_ids: BTreeSet<&str> = split.train_participants.iter().map(String::as_str).collect();
    let test_ids: BTreeSet<&str> = split.test_participants.iter().map(String::as_str).collect();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for r in rows {
        if test_ids.contains(r.participant_id.as_str()) {
            test.push(r);
        } else if train_ids.contains(r.participant_id.as_str()) {
            train.push(r);
        }
    }
    if test.is_empty() {
        return Err(stress_core::Error::Split("no feature rows belong to the split's test participants".into()).into());
    }
    Ok((train, test))
}

pub fn eval(args: &EvalArgs) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let split = load_split(&args.split)?;
    let (train_rows, test_rows) = split_rows(load_features(&args.features)?, &split)?;
    let report = evaluate(
        &model,
        &Design::from_features(&train_rows),
        &Design::from_features(&test_rows),
        &Scenario::defaults(),
        None,
    )?;
    let name = model.family().name().to_string();
    let evaluated = vec![Evaluated { name, model, report }];
    let mut bundle = Bundle::default();
    add_evaluation_files(&mut bundle, &evaluated, Vec::new())?;
    bundle.write_into(&args.out)
}

pub fn explain(args: &ExplainArgs) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let split = load_split(&args.split)?;
    let dependence =
        if args.features_to_plot.is_empty() { ExplainConfig::default().dependence } else { args.features_to_plot.clone() };
    for f in &dependence {
        if !model.feature_names.contains(f) {
            return Err(CliError::Config(format!("--feature: unknown feature `{f}`")));
        }
    }
    let (_, test_rows) = split_rows(load_features(&args.features)?, &split)?;
    let mut bundle = Bundle::default();
    add_explanation_files(&mut bundle, &model, &test_rows, &dependence, args.per_row)?;
    bundle.write_into(&args.out)
}

pub fn compare(args: &CompareArgs) -> Result<(), CliError> {
    let result = match (&args.config, &args.features) {
        (Some(path), _) => {
            let mut cfg = RunConfig::load(path)?;
            if let Some(s) = args.seed {
                cfg.reseed(s);
            }
            pipeline::cmd_compare(&cfg, args.family_a, args.family_b)?
        }
        (None, Some(features)) => {
            let seed = args.seed.unwrap_or(0);
            let rows = load_features(features)?;
            pipeline::compare_rows(
                &rows,
                &default_spec(args.family_a, seed),
                &default_spec(args.family_b, seed),
                seed,
                Some(ClassRatio::default()),
            )?
        }
        (None, None) => {
            let seed = args.seed.unwrap_or(0);
            pipeline::cmd_compare(&RunConfig::synth_default(seed), args.family_a, args.family_b)?
        }
    };
    match &args.out {
        Some(p) => write_json(p, &result),
        None => {
            println!("{}", serde_json::to_string_pretty(&result)?);
            Ok(())
        }
    }
}

pub fn run(args: &RunArgs) -> Result<PathBuf, CliError> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::synth_default(0),
    };
    if let Some(s) = args.seed {
        cfg.reseed(s);
    }
    let dir = args.out.clone().or_else(|| cfg.report_dir.clone()).unwrap_or_else(|| DEFAULT_REPORT_DIR.into());
    let out = pipeline::cmd_run(&cfg, &dir, args.force)?;
    for e in &out.evaluated {
        log::info!("{}: test accuracy {:.2}%, AUC {:.4}", e.name, e.report.test_accuracy, e.report.auc);
    }
    Ok(dir)
}
