//! Deterministic synthetic cohorts with planted stress signatures.
//!
//! Each participant gets a 1 Hz stream: heart rate is a mean-reverting AR(1)
//! process around a participant-specific mean, acceleration is gravity plus
//! small sensor noise. Stress events are placed at Poisson-distributed counts
//! with a minimum spacing. Within ±30 s of an event the heart rate swings
//! between two levels above and below its running value, clipped from below
//! at a raised floor, and the wrist picks up a two-level tremor along the
//! gravity axis. Two-level swings inflate the standard deviation far more than
//! the extremes, so the signal lands on `std_hr`, `min_hr` and `std_acc`.
//! Brief upward heart-rate artifacts and two-sided motion spikes occur
//! everywhere, keeping the extreme-value features noisy.

use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingest::{write_participant, ParticipantRecord, SensorSample, StressEvent};
use crate::rng::{seeded, sub_seed};
use crate::{Error, Result};

const GRAVITY: f64 = 9.81;
const SECONDS_PER_DAY: f64 = 86_400.0;
/// Half-width of the interval around an event that carries the signature.
pub const EFFECT_HALF_WIDTH: i64 = 30;
/// Minimum spacing between events, so their windows never merge.
pub const MIN_EVENT_GAP: i64 = 90;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortConfig {
    pub n_participants: usize,
    /// Recording span per participant, in days.
    pub days: f64,
    pub events_per_day: f64,
    /// Mean of the participant-level heart-rate means (bpm).
    pub baseline_hr_mean: f64,
    /// Spread of the participant-level means (bpm).
    pub baseline_hr_sd: f64,
    /// Stationary standard deviation of the within-participant fluctuation (bpm).
    pub hr_noise_sd: f64,
    /// Lag-one autocorrelation of the fluctuation.
    pub hr_autocorrelation: f64,
    /// Amplitude of the two-level heart-rate swing during stress (bpm).
    pub stress_hr_sd: f64,
    /// Heart-rate floor during stress, in bpm above the participant mean
    /// minus one fluctuation sd; 0 disables the floor.
    pub stress_min_hr: f64,
    /// Per-axis accelerometer noise at rest (m/s²).
    pub acc_noise_sd: f64,
    /// Amplitude of the acceleration tremor during stress, in multiples of
    /// `acc_noise_sd`.
    pub acc_burst_gain: f64,
    /// Per-second probability of a brief upward heart-rate artifact.
    pub hr_artifact_rate: f64,
    /// Per-second probability of a motion spike.
    pub acc_spike_rate: f64,
    /// Unix time of the first sample.
    pub start_t: i64,
    pub seed: u64,
}

impl Default for CohortConfig {
    fn default() -> Self {
        CohortConfig {
            n_participants: 12,
            days: 2.0 / 24.0,
            events_per_day: 96.0,
            baseline_hr_mean: 72.0,
            baseline_hr_sd: 1.0,
            hr_noise_sd: 3.0,
            hr_autocorrelation: 0.95,
            stress_hr_sd: 5.0,
            stress_min_hr: 1.0,
            acc_noise_sd: 0.05,
            acc_burst_gain: 4.0,
            hr_artifact_rate: 0.02,
            acc_spike_rate: 0.06,
            start_t: 1_700_000_000,
            seed: 0,
        }
    }
}

impl CohortConfig {
    /// Same cohort shape with every stress effect switched off.
    pub fn zero_effect(mut self) -> Self {
        self.stress_hr_sd = 0.0;
        self.stress_min_hr = 0.0;
        self.acc_burst_gain = 0.0;
        self
    }

    pub fn span_seconds(&self) -> i64 {
        (self.days * SECONDS_PER_DAY).round() as i64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(format!("cohort config: {m}")));
        if self.n_participants == 0 {
            return bad("n_participants must be positive".into());
        }
        if !(self.days.is_finite() && self.days > 0.0) || self.span_seconds() < 2 * EFFECT_HALF_WIDTH + 1 {
            return bad(format!("days must give at least {} seconds", 2 * EFFECT_HALF_WIDTH + 1));
        }
        if !(self.events_per_day.is_finite() && self.events_per_day >= 0.0) {
            return bad("events_per_day must be finite and non-negative".into());
        }
        if !(0.0..1.0).contains(&self.hr_autocorrelation) {
            return bad("hr_autocorrelation must lie in [0, 1)".into());
        }
        for (name, v) in [
            ("baseline_hr_mean", self.baseline_hr_mean),
            ("baseline_hr_sd", self.baseline_hr_sd),
            ("hr_noise_sd", self.hr_noise_sd),
            ("stress_hr_sd", self.stress_hr_sd),
            ("stress_min_hr", self.stress_min_hr),
            ("acc_noise_sd", self.acc_noise_sd),
            ("acc_burst_gain", self.acc_burst_gain),
        ] {
            if !v.is_finite() || v < 0.0 {
                return bad(format!("{name} must be finite and non-negative"));
            }
        }
        for (name, v) in [("hr_artifact_rate", self.hr_artifact_rate), ("acc_spike_rate", self.acc_spike_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Event times: Poisson count, uniformly placed subject to `MIN_EVENT_GAP`
/// spacing and a margin of `EFFECT_HALF_WIDTH` from both ends of the span.
fn place_events(cfg: &CohortConfig, rng: &mut ChaCha8Rng) -> Vec<i64> {
    let span = cfg.span_seconds();
    let mean = cfg.events_per_day * cfg.days;
    let drawn = if mean > 0.0 { Poisson::new(mean).expect("positive mean").sample(rng) as i64 } else { 0 };
    // usable length for the first event after reserving the gaps
    let usable = span - 1 - 2 * EFFECT_HALF_WIDTH;
    let max_fit = usable / MIN_EVENT_GAP + 1;
    let n = drawn.min(max_fit).max(0);
    if n == 0 {
        return Vec::new();
    }
    let free = usable - (n - 1) * MIN_EVENT_GAP;
    let mut offsets: Vec<i64> = (0..n).map(|_| rng.random_range(0..=free)).collect();
    offsets.sort_unstable();
    offsets
        .into_iter()
        .enumerate()
        .map(|(i, o)| cfg.start_t + EFFECT_HALF_WIDTH + o + i as i64 * MIN_EVENT_GAP)
        .collect()
}

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

fn generate_participant(cfg: &CohortConfig, index: usize) -> ParticipantRecord {
    let mut rng = seeded(sub_seed(cfg.seed, index as u64));
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mu = cfg.baseline_hr_mean + cfg.baseline_hr_sd * std_normal.sample(&mut rng);
    let events = place_events(cfg, &mut rng);
    let span = cfg.span_seconds();

    let mut stressed = vec![false; span as usize];
    for &e in &events {
        let c = e - cfg.start_t;
        for k in (c - EFFECT_HALF_WIDTH).max(0)..(c + EFFECT_HALF_WIDTH).min(span - 1) + 1 {
            stressed[k as usize] = true;
        }
    }

    let phi = cfg.hr_autocorrelation;
    let innovation = cfg.hr_noise_sd * (1.0 - phi * phi).sqrt();
    let mut level = cfg.hr_noise_sd * std_normal.sample(&mut rng);
    let mut samples = Vec::with_capacity(span as usize);
    for (k, &is_stress) in stressed.iter().enumerate() {
        level = phi * level + innovation * std_normal.sample(&mut rng);
        let mut hr = mu + level;
        let mut acc = [0.0, 0.0, GRAVITY];
        for a in &mut acc {
            *a += cfg.acc_noise_sd * std_normal.sample(&mut rng);
        }
        if is_stress {
            // two-level swings around the running rate and the gravity axis:
            // spread rises sharply while the extremes move comparatively little
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            hr += cfg.stress_hr_sd * sign;
            if cfg.stress_min_hr > 0.0 {
                hr = hr.max(mu - cfg.hr_noise_sd + cfg.stress_min_hr);
            }
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            acc[2] += sign * cfg.acc_burst_gain * cfg.acc_noise_sd;
        }
        if rng.random::<f64>() < cfg.hr_artifact_rate {
            hr += rng.random_range(5.0..20.0);
        }
        if rng.random::<f64>() < cfg.acc_spike_rate {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            acc[2] += sign * rng.random_range(0.3..1.0);
        }
        samples.push(SensorSample {
            t: cfg.start_t + k as i64,
            hr: round3(hr.max(30.0)),
            ax: round3(acc[0]),
            ay: round3(acc[1]),
            az: round3(acc[2]),
        });
    }
    ParticipantRecord {
        id: format!("P{:02}", index + 1),
        samples,
        events: events.into_iter().map(|t| StressEvent { t }).collect(),
    }
}

/// Generate the cohort; participant `i` depends only on `(seed, i)`.
pub fn generate_cohort(cfg: &CohortConfig) -> Result<Vec<ParticipantRecord>> {
    cfg.validate()?;
    Ok((0..cfg.n_participants).into_par_iter().map(|i| generate_participant(cfg, i)).collect())
}

/// Write one sensor CSV and one event CSV per participant into `dir`.
pub fn write_cohort(dir: &Path, records: &[ParticipantRecord]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    records.iter().try_for_each(|r| write_participant(dir, r))
}
