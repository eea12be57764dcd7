use std::path::PathBuf;

use clap::builder::TypedValueParser;
use clap::{Args, Parser, Subcommand};
use stress_core::models::Family;

/// Wearable stress detection: synthesize or ingest 1 Hz heart-rate and
/// acceleration streams, window them around self-reported stress events,
/// train classifiers and write evaluation and explanation reports.
#[derive(Debug, Parser)]
#[command(name = "stressdetect", version, about, long_about = None)]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug); RUST_LOG overrides
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cohort as sensor and event CSVs
    Synth(SynthArgs),
    /// Window and featurize a directory of participant CSVs
    Featurize(FeaturizeArgs),
    /// Split a feature matrix by participant and train one model
    Train(TrainArgs),
    /// Evaluate a trained model on the held-out participants
    Eval(EvalArgs),
    /// SHAP attributions for a trained tree ensemble
    Explain(ExplainArgs),
    /// 5x2-CV paired t-test between two model families
    Compare(CompareArgs),
    /// Run the whole pipeline and write a report bundle
    Run(RunArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Directory to write <id>.sensor.csv / <id>.events.csv into
    #[arg(long)]
    pub out: PathBuf,
    /// Cohort configuration JSON; flags below override its fields
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of participants
    #[arg(long)]
    pub participants: Option<usize>,
    /// Recording span per participant, in days
    #[arg(long)]
    pub days: Option<f64>,
    /// Expected stress events per day
    #[arg(long)]
    pub events_per_day: Option<f64>,
    /// Switch off every planted stress effect
    #[arg(long)]
    pub zero_effect: bool,
}

#[derive(Debug, Args)]
pub struct WindowArgs {
    /// Half-width of stress windows around each event, seconds
    #[arg(long, default_value_t = 30)]
    pub half_width: i64,
    /// Length of non-stress tiles, seconds
    #[arg(long, default_value_t = 60)]
    pub length: i64,
    /// Minimum fraction of expected samples a window must hold
    #[arg(long, default_value_t = 0.8)]
    pub min_coverage: f64,
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    /// Directory of participant CSVs
    #[arg(long)]
    pub input: PathBuf,
    /// Feature matrix CSV to write
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub window: WindowArgs,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Target fraction of rows assigned to training participants
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    /// Seed for the split, upsampling and model randomness
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Feature matrix CSV
    #[arg(long)]
    pub features: PathBuf,
    /// Model family
    #[arg(long, value_parser = family_parser())]
    pub model: Family,
    /// Hyperparameter override NAME=VALUE (repeatable)
    #[arg(long = "param", value_name = "NAME=VALUE")]
    pub params: Vec<String>,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Train without upsampling the stress class
    #[arg(long)]
    pub no_upsample: bool,
    /// Trained model JSON to write
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the split description (needed by eval and explain)
    #[arg(long)]
    pub split_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Feature matrix CSV
    #[arg(long)]
    pub features: PathBuf,
    /// Trained model JSON
    #[arg(long)]
    pub model: PathBuf,
    /// Split JSON written by `train --split-out`
    #[arg(long)]
    pub split: PathBuf,
    /// Directory for metrics.json, scenarios.json, roc.csv and roc.svg
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    /// Feature matrix CSV
    #[arg(long)]
    pub features: PathBuf,
    /// Trained gbt or random_forest model JSON
    #[arg(long)]
    pub model: PathBuf,
    /// Split JSON; attributions are computed on its test participants
    #[arg(long)]
    pub split: PathBuf,
    /// Feature for a dependence plot (repeatable; default std_hr, min_hr, std_acc)
    #[arg(long = "feature")]
    pub features_to_plot: Vec<String>,
    /// Also write per-row attributions (shap.csv)
    #[arg(long)]
    pub per_row: bool,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// First model family
    #[arg(value_parser = family_parser())]
    pub family_a: Family,
    /// Second model family
    #[arg(value_parser = family_parser())]
    pub family_b: Family,
    /// Run configuration supplying the data and model specs
    #[arg(long, conflicts_with = "features")]
    pub config: Option<PathBuf>,
    /// Feature matrix CSV (default specs for both families)
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Seed for fold assignment; overrides the configuration's seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the report here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Run configuration JSON
    #[arg(long, required_unless_present = "synth_default", conflicts_with = "synth_default")]
    pub config: Option<PathBuf>,
    /// Use the default synthetic cohort and default settings
    #[arg(long)]
    pub synth_default: bool,
    /// Seed override
    #[arg(long)]
    pub seed: Option<u64>,
    /// Report directory (overrides the configuration)
    #[arg(long, env = "STRESSDETECT_REPORT_DIR", hide_env_values = true)]
    pub out: Option<PathBuf>,
    /// Replace an existing report directory
    #[arg(long)]
    pub force: bool,
}

fn family_parser() -> impl TypedValueParser<Value = Family> {
    clap::builder::PossibleValuesParser::new(Family::ALL.map(Family::name))
        .map(|s| s.parse::<Family>().expect("possible values are family names"))
}
