#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use jsonschema::{Retrieve, Uri, Validator};
use serde_json::Value;

pub fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas")
}

/// Resolves `$ref`s between the shipped schema files by file name.
struct ShippedSchemas;

impl Retrieve for ShippedSchemas {
    fn retrieve(&self, uri: &Uri<String>) -> Result<Value, Box<dyn std::error::Error + Send + Sync>> {
        let name = uri.as_str().rsplit('/').next().unwrap_or_default();
        let text = std::fs::read_to_string(schema_dir().join(name))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn validator(name: &str) -> Validator {
    let path = schema_dir().join(format!("{name}.schema.json"));
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    jsonschema::options().with_retriever(ShippedSchemas).build(&schema).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Panics with every violation when `doc` does not match schema `name`.
pub fn assert_valid(name: &str, doc: &Value) {
    let v = validator(name);
    let errors: Vec<String> = v.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{name} schema violations:\n{}", errors.join("\n"));
}

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stressdetect"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("STRESSDETECT_REPORT_DIR").output().expect("spawn stressdetect")
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display())))
        .unwrap()
}

/// A cohort small enough that a full run with every family takes a few seconds.
pub fn small_config(seed: u64) -> Value {
    serde_json::json!({
        "seed": seed,
        "input": { "synth": { "n_participants": 6 } },
        "grid": {
            "family": "gbt",
            "parameters": { "max_depth": [2, 3], "n_estimators": [10, 20] }
        },
        "cv": { "k": 3 },
        "explain": { "model": "gbt", "dependence": ["std_hr"], "per_row": true }
    })
}
