//! Ten time-domain features per window.
//!
//! Heart-rate statistics are taken over the raw samples. Acceleration
//! statistics are taken over the per-sample magnitude
//! `sqrt(ax² + ay² + az²)`. Standard deviations use the `n - 1` divisor and
//! are 0 for a single sample.

use std::fmt::Write as _;
use std::io::Read;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingest::ParticipantRecord;
use crate::windowing::{window_participant, Label, Window, WindowConfig, WindowReport};
use crate::{Error, Result};

pub const N_FEATURES: usize = 10;

/// Column order used by every feature matrix, model and SHAP export.
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "mean_hr", "max_hr", "min_hr", "std_hr", "range_hr", "mean_acc", "max_acc", "min_acc",
    "std_acc", "range_acc",
];

pub const FEATURE_CSV_HEADER: &str = "participant_id,label,mean_hr,max_hr,min_hr,std_hr,range_hr,mean_acc,max_acc,min_acc,std_acc,range_acc";

pub fn feature_index(name: &str) -> Option<usize> {
    FEATURE_NAMES.iter().position(|&f| f == name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub participant_id: String,
    pub label: Label,
    pub mean_hr: f64,
    pub max_hr: f64,
    pub min_hr: f64,
    pub std_hr: f64,
    pub range_hr: f64,
    pub mean_acc: f64,
    pub max_acc: f64,
    pub min_acc: f64,
    pub std_acc: f64,
    pub range_acc: f64,
}

impl FeatureVector {
    pub fn values(&self) -> [f64; N_FEATURES] {
        [
            self.mean_hr,
            self.max_hr,
            self.min_hr,
            self.std_hr,
            self.range_hr,
            self.mean_acc,
            self.max_acc,
            self.min_acc,
            self.std_acc,
            self.range_acc,
        ]
    }

    pub fn from_values(participant_id: impl Into<String>, label: Label, v: [f64; N_FEATURES]) -> Self {
        FeatureVector {
            participant_id: participant_id.into(),
            label,
            mean_hr: v[0],
            max_hr: v[1],
            min_hr: v[2],
            std_hr: v[3],
            range_hr: v[4],
            mean_acc: v[5],
            max_acc: v[6],
            min_acc: v[7],
            std_acc: v[8],
            range_acc: v[9],
        }
    }

    pub fn is_stress(&self) -> bool {
        self.label.is_stress()
    }
}

/// Magnitude of the hand acceleration vector.
pub fn acc_magnitude(ax: f64, ay: f64, az: f64) -> f64 {
    (ax * ax + ay * ay + az * az).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Summary {
    mean: f64,
    max: f64,
    min: f64,
    std: f64,
}

fn summarize(values: impl Iterator<Item = f64> + Clone) -> Summary {
    let mut n = 0usize;
    let mut sum = 0.0;
    let mut max = f64::NEG_INFINITY;
    let mut min = f64::INFINITY;
    for v in values.clone() {
        n += 1;
        sum += v;
        max = max.max(v);
        min = min.min(v);
    }
    let mean = sum / n as f64;
    let std = if n > 1 {
        let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    // rounding in the mean can push it a hair outside [min, max]
    Summary { mean: mean.clamp(min, max), max, min, std }
}

pub fn featurize(window: &Window) -> Result<FeatureVector> {
    if window.samples.is_empty() {
        return Err(Error::Contract(format!(
            "window [{}, {}) of {} has no samples; apply the coverage filter first",
            window.start_t, window.end_t, window.participant_id
        )));
    }
    let hr = summarize(window.samples.iter().map(|s| s.hr));
    let acc = summarize(window.samples.iter().map(|s| acc_magnitude(s.ax, s.ay, s.az)));
    Ok(FeatureVector {
        participant_id: window.participant_id.clone(),
        label: window.label,
        mean_hr: hr.mean,
        max_hr: hr.max,
        min_hr: hr.min,
        std_hr: hr.std,
        range_hr: hr.max - hr.min,
        mean_acc: acc.mean,
        max_acc: acc.max,
        min_acc: acc.min,
        std_acc: acc.std,
        range_acc: acc.max - acc.min,
    })
}

/// Window and featurize every participant; rows keep participant order,
/// then stress windows before non-stress tiles.
pub fn featurize_cohort(
    records: &[ParticipantRecord],
    cfg: &WindowConfig,
) -> Result<(Vec<FeatureVector>, Vec<WindowReport>)> {
    let per: Vec<(Vec<FeatureVector>, WindowReport)> = records
        .par_iter()
        .map(|r| {
            let (windows, report) = window_participant(r, cfg)?;
            let rows = windows.iter().map(featurize).collect::<Result<Vec<_>>>()?;
            Ok((rows, report))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut reports = Vec::with_capacity(per.len());
    for (r, rep) in per {
        rows.extend(r);
        reports.push(rep);
    }
    Ok((rows, reports))
}

/// Feature matrix CSV, label `1` = stress.
pub fn feature_csv(rows: &[FeatureVector]) -> String {
    let mut out = String::from(FEATURE_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{},{}", r.participant_id, u8::from(r.is_stress()));
        for v in r.values() {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn parse_feature_csv<R: Read>(mut source: R) -> Result<Vec<FeatureVector>> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| Error::Format(format!("feature matrix is not UTF-8 text: {e}")))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("").trim();
    if header != FEATURE_CSV_HEADER {
        return Err(Error::Format(format!("unexpected feature matrix header `{header}`")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |what: &str| Error::Format(format!("feature matrix line {}: {what}", i + 2));
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != N_FEATURES + 2 {
            return Err(bad("wrong field count"));
        }
        let label = match fields[1].trim() {
            "1" => Label::Stress,
            "0" => Label::NonStress,
            _ => return Err(bad("label must be 0 or 1")),
        };
        let mut v = [0.0; N_FEATURES];
        for (slot, f) in v.iter_mut().zip(&fields[2..]) {
            *slot = f.trim().parse().map_err(|_| bad("non-numeric feature"))?;
        }
        rows.push(FeatureVector::from_values(fields[0].trim(), label, v));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::SensorSample;
    use proptest::prelude::*;

    fn window(samples: Vec<(f64, f64, f64, f64)>) -> Window {
        Window {
            participant_id: "p".into(),
            start_t: 0,
            end_t: 60,
            label: Label::Stress,
            samples: samples
                .into_iter()
                .enumerate()
                .map(|(i, (hr, ax, ay, az))| SensorSample { t: i as i64, hr, ax, ay, az })
                .collect(),
        }
    }

    #[test]
    fn magnitude_examples() {
        assert_eq!(acc_magnitude(3.0, 4.0, 0.0), 5.0);
        assert_eq!(acc_magnitude(0.0, 0.0, 0.0), 0.0);
        assert_eq!(acc_magnitude(1.0, 2.0, 2.0), 3.0);
    }

    #[test]
    fn constant_heart_rate() {
        let f = featurize(&window(vec![(70.0, 0.0, 0.0, 0.0); 60])).unwrap();
        assert_eq!((f.mean_hr, f.std_hr, f.range_hr), (70.0, 0.0, 0.0));
    }

    #[test]
    fn two_sample_heart_rate() {
        let f = featurize(&window(vec![(60.0, 0.0, 0.0, 0.0), (80.0, 0.0, 0.0, 0.0)])).unwrap();
        assert_eq!((f.mean_hr, f.min_hr, f.max_hr, f.range_hr), (70.0, 60.0, 80.0, 20.0));
        // sqrt((100 + 100) / 1)
        assert!((f.std_hr - 14.142135623730951).abs() < 1e-12);
    }

    #[test]
    fn constant_acceleration_magnitude() {
        let f = featurize(&window(vec![(70.0, 3.0, 4.0, 0.0); 50])).unwrap();
        assert_eq!((f.mean_acc, f.max_acc, f.min_acc), (5.0, 5.0, 5.0));
        assert_eq!((f.range_acc, f.std_acc), (0.0, 0.0));
    }

    #[test]
    fn single_sample_has_zero_std() {
        let f = featurize(&window(vec![(65.0, 1.0, 2.0, 2.0)])).unwrap();
        assert_eq!(f.std_hr, 0.0);
        assert_eq!(f.std_acc, 0.0);
        assert_eq!(f.mean_acc, 3.0);
    }

    #[test]
    fn empty_window_is_contract_violation() {
        assert!(matches!(featurize(&window(vec![])), Err(Error::Contract(_))));
    }

    #[test]
    fn csv_reads_back() {
        let rows = vec![
            featurize(&window(vec![(60.0, 1.0, 2.0, 2.0), (80.0, 3.0, 4.0, 0.0)])).unwrap(),
            FeatureVector::from_values("q", Label::NonStress, [1.5; N_FEATURES]),
        ];
        let back = parse_feature_csv(feature_csv(&rows).as_bytes()).unwrap();
        assert_eq!(back, rows);
        assert!(parse_feature_csv("a,b\n".as_bytes()).is_err());
    }

    fn samples() -> impl Strategy<Value = Vec<(f64, f64, f64, f64)>> {
        proptest::collection::vec(
            (30.0f64..200.0, -20.0f64..20.0, -20.0f64..20.0, -20.0f64..20.0),
            1..60,
        )
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
    }

    proptest! {
        #[test]
        fn invariants_hold(s in samples()) {
            let f = featurize(&window(s)).unwrap();
            prop_assert_eq!(f.range_hr, f.max_hr - f.min_hr);
            prop_assert_eq!(f.range_acc, f.max_acc - f.min_acc);
            prop_assert!(f.min_hr <= f.mean_hr && f.mean_hr <= f.max_hr);
            prop_assert!(f.min_acc <= f.mean_acc && f.mean_acc <= f.max_acc);
            prop_assert!(f.std_hr >= 0.0 && f.std_acc >= 0.0);
        }

        #[test]
        fn permutation_invariant(s in samples(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut shuffled = s.clone();
            shuffled.shuffle(&mut crate::rng::seeded(seed));
            let a = featurize(&window(s)).unwrap().values();
            let b = featurize(&window(shuffled)).unwrap().values();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!(close(*x, *y), "{} vs {}", x, y);
            }
        }

        #[test]
        fn heart_rate_shift(s in samples(), c in -20.0f64..20.0) {
            let shifted: Vec<_> = s.iter().map(|&(h, x, y, z)| (h + c, x, y, z)).collect();
            let a = featurize(&window(s)).unwrap();
            let b = featurize(&window(shifted)).unwrap();
            prop_assert!(close(b.mean_hr, a.mean_hr + c));
            prop_assert!(close(b.min_hr, a.min_hr + c));
            prop_assert!(close(b.max_hr, a.max_hr + c));
            prop_assert!((b.std_hr - a.std_hr).abs() < 1e-9);
            prop_assert!((b.range_hr - a.range_hr).abs() < 1e-9);
        }

        #[test]
        fn rotation_invariant(s in samples(), yaw in 0.0f64..6.3, pitch in 0.0f64..6.3) {
            // rotation about z then x
            let (cy, sy, cp, sp) = (yaw.cos(), yaw.sin(), pitch.cos(), pitch.sin());
            let rot: Vec<_> = s.iter().map(|&(h, x, y, z)| {
                let (x1, y1) = (cy * x - sy * y, sy * x + cy * y);
                let (y2, z2) = (cp * y1 - sp * z, sp * y1 + cp * z);
                (h, x1, y2, z2)
            }).collect();
            let a = featurize(&window(s)).unwrap().values();
            let b = featurize(&window(rot)).unwrap().values();
            for i in 5..N_FEATURES {
                prop_assert!((a[i] - b[i]).abs() < 1e-9, "feature {} {} vs {}", i, a[i], b[i]);
            }
        }
    }
}
