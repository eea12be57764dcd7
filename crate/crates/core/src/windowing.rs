//! Event-anchored windowing.
//!
//! Stress windows are centred on retained self-reports. Non-stress windows are
//! consecutive fixed-length tiles anchored at the participant's first sample,
//! skipping every tile that touches a stress window. Windows with too few
//! samples are removed by [`coverage_filter`].

use serde::{Deserialize, Serialize};

use crate::ingest::{ParticipantRecord, SensorSample};
use crate::{Error, Result};

pub const DEFAULT_HALF_WIDTH: i64 = 30;
pub const DEFAULT_LENGTH: i64 = 60;
pub const DEFAULT_MIN_COVERAGE: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Label {
    NonStress,
    Stress,
}

impl Label {
    pub fn is_stress(self) -> bool {
        self == Label::Stress
    }

    pub fn from_stress(stress: bool) -> Self {
        if stress {
            Label::Stress
        } else {
            Label::NonStress
        }
    }
}

/// A labelled slice `[start_t, end_t)` of one participant's samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub participant_id: String,
    pub start_t: i64,
    pub end_t: i64,
    pub label: Label,
    pub samples: Vec<SensorSample>,
}

impl Window {
    pub fn length(&self) -> i64 {
        self.end_t - self.start_t
    }

    fn overlaps(&self, start: i64, end: i64) -> bool {
        self.start_t < end && start < self.end_t
    }
}

fn samples_in(samples: &[SensorSample], start: i64, end: i64) -> Vec<SensorSample> {
    let lo = samples.partition_point(|s| s.t < start);
    let hi = samples.partition_point(|s| s.t < end);
    samples[lo..hi].to_vec()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StressWindows {
    pub windows: Vec<Window>,
    /// Events folded into an earlier retained event.
    pub merged: usize,
}

/// One window `[t - half_width, t + half_width)` per retained event.
///
/// Events are visited in time order; an event starting less than
/// `2 * half_width` seconds after the last retained one is merged into it.
pub fn extract_stress_windows(record: &ParticipantRecord, half_width: i64) -> Result<StressWindows> {
    if half_width <= 0 {
        return Err(Error::Invalid(format!("half_width must be positive, got {half_width}")));
    }
    let mut windows: Vec<Window> = Vec::new();
    let mut merged = 0;
    let mut last_retained: Option<i64> = None;
    for event in &record.events {
        if let Some(prev) = last_retained {
            if event.t - prev < 2 * half_width {
                merged += 1;
                continue;
            }
        }
        last_retained = Some(event.t);
        let (start, end) = (event.t - half_width, event.t + half_width);
        windows.push(Window {
            participant_id: record.id.clone(),
            start_t: start,
            end_t: end,
            label: Label::Stress,
            samples: samples_in(&record.samples, start, end),
        });
    }
    Ok(StressWindows { windows, merged })
}

/// Tile the sample span with `length`-second windows, dropping tiles that
/// intersect any of `stress`.
pub fn extract_nonstress_windows(
    record: &ParticipantRecord,
    stress: &[Window],
    length: i64,
) -> Result<Vec<Window>> {
    if length <= 0 {
        return Err(Error::Invalid(format!("window length must be positive, got {length}")));
    }
    let (Some(first), Some(last)) = (record.samples.first(), record.samples.last()) else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    let mut start = first.t;
    while start <= last.t {
        let end = start + length;
        if !stress.iter().any(|w| w.overlaps(start, end)) {
            out.push(Window {
                participant_id: record.id.clone(),
                start_t: start,
                end_t: end,
                label: Label::NonStress,
                samples: samples_in(&record.samples, start, end),
            });
        }
        start = end;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub required_samples: usize,
    pub dropped_stress: usize,
    pub dropped_nonstress: usize,
}

/// Minimum sample count for a window of `length` seconds at 1 Hz.
pub fn required_samples(min_fraction: f64, length: i64) -> usize {
    // nudge down so that e.g. 0.8 * 60 lands on 48 despite rounding
    ((min_fraction * length as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Keep windows holding at least `ceil(min_fraction * length)` samples.
pub fn coverage_filter(windows: Vec<Window>, min_fraction: f64) -> Result<(Vec<Window>, CoverageReport)> {
    if !(min_fraction > 0.0 && min_fraction <= 1.0) {
        return Err(Error::Invalid(format!("min_fraction must lie in (0, 1], got {min_fraction}")));
    }
    let mut report = CoverageReport::default();
    let mut kept = Vec::with_capacity(windows.len());
    for w in windows {
        let need = required_samples(min_fraction, w.length());
        report.required_samples = report.required_samples.max(need);
        if w.samples.len() >= need {
            kept.push(w);
        } else if w.label.is_stress() {
            report.dropped_stress += 1;
        } else {
            report.dropped_nonstress += 1;
        }
    }
    Ok((kept, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub half_width: i64,
    pub length: i64,
    pub min_coverage: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            half_width: DEFAULT_HALF_WIDTH,
            length: DEFAULT_LENGTH,
            min_coverage: DEFAULT_MIN_COVERAGE,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.half_width <= 0 || self.length <= 0 {
            return Err(Error::Invalid(format!(
                "window half_width and length must be positive, got {} and {}",
                self.half_width, self.length
            )));
        }
        if !(self.min_coverage > 0.0 && self.min_coverage <= 1.0) {
            return Err(Error::Invalid(format!("min_coverage must lie in (0, 1], got {}", self.min_coverage)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    pub participant_id: String,
    pub stress_windows: usize,
    pub nonstress_windows: usize,
    pub merged_events: usize,
    pub coverage: CoverageReport,
}

/// Stress windows followed by non-stress tiles, both coverage filtered.
pub fn window_participant(
    record: &ParticipantRecord,
    config: &WindowConfig,
) -> Result<(Vec<Window>, WindowReport)> {
    let stress = extract_stress_windows(record, config.half_width)?;
    let nonstress = extract_nonstress_windows(record, &stress.windows, config.length)?;
    let mut all = stress.windows;
    all.extend(nonstress);
    let (kept, coverage) = coverage_filter(all, config.min_coverage)?;
    let stress_windows = kept.iter().filter(|w| w.label.is_stress()).count();
    let report = WindowReport {
        participant_id: record.id.clone(),
        stress_windows,
        nonstress_windows: kept.len() - stress_windows,
        merged_events: stress.merged,
        coverage,
    };
    Ok((kept, report))
}

/// One JSON object per line, for debugging window boundaries.
pub fn windows_jsonl(windows: &[Window]) -> Result<String> {
    let mut out = String::new();
    for w in windows {
        out.push_str(&serde_json::to_string(w)?);
        out.push('\n');
    }
    Ok(out)
}
