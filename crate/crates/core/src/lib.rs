//! Stress detection from 1 Hz wrist-worn heart rate and hand acceleration.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! - [`ingest`]: sensor and self-report CSV parsing into [`ingest::ParticipantRecord`]s
//! - [`windowing`]: 60 s stress windows centred on self-reports, non-stress tiles elsewhere
//! - [`features`]: ten time-domain statistics per window
//! - [`dataset`]: participant-level train/test split and stress upsampling
//! - [`models`]: six classifiers behind one scoring interface, plus grid search
//! - [`evaluation`]: ROC/AUC, operating-point scenarios, grouped k-fold CV, 5x2-CV t-test
//! - [`explain`]: exact path-dependent TreeSHAP for the tree ensembles
//! - [`synth`]: deterministic synthetic cohorts with planted stress signatures
//! - [`plot`]: small SVG renderers for ROC and SHAP figures

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod explain;
pub mod features;
pub mod ingest;
pub mod models;
pub mod plot;
pub mod rng;
pub mod synth;
pub mod windowing;

pub use error::{Error, Result};

/// Version of this library, recorded in report manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
