//! Sensor and self-report ingestion.
//!
//! Each participant is stored as two files: `<id>.sensor.csv` with header
//! `t,hr,ax,ay,az` and `<id>.events.csv` with header `t`. Timestamps are
//! integral unix seconds. Rows that fail to parse are collected into a
//! rejects report and parsing continues; a bad header is fatal.

use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const SENSOR_HEADER: &str = "t,hr,ax,ay,az";
pub const EVENT_HEADER: &str = "t";

/// One 1 Hz reading from the watch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSample {
    pub t: i64,
    pub hr: f64,
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
}

/// A self-reported stress tap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StressEvent {
    pub t: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub id: String,
    pub samples: Vec<SensorSample>,
    pub events: Vec<StressEvent>,
}

/// A data row that could not be parsed. `line` is 1-based and counts the header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowReject {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub rejects: Vec<RowReject>,
}

impl<T> Parsed<T> {
    pub fn data_rows(&self) -> usize {
        self.records.len() + self.rejects.len()
    }
}

/// What [`assemble_participant`] had to clean up.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssemblyReport {
    pub duplicate_samples_collapsed: usize,
}

fn read_text<R: Read>(mut source: R) -> Result<String> {
    let mut buf = Vec::new();
    source.read_to_end(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Format(format!("input is not UTF-8: {e}")))
}

fn parse_timestamp(field: &str) -> std::result::Result<i64, String> {
    field
        .trim()
        .parse::<i64>()
        .map_err(|_| format!("timestamp `{}` is not an integer number of seconds", field.trim()))
}

fn parse_real(name: &str, field: &str) -> std::result::Result<f64, String> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| format!("{name} `{}` is not a number", field.trim()))?;
    if !v.is_finite() {
        return Err(format!("{name} `{}` is not finite", field.trim()));
    }
    Ok(v)
}

/// Walks the data rows of a CSV body, handing each non-blank row to `parse_row`.
fn parse_rows<T>(
    text: &str,
    header: &str,
    mut parse_row: impl FnMut(&[&str]) -> std::result::Result<T, String>,
) -> Result<Parsed<T>> {
    let mut lines = text.split('\n');
    let first = lines.next().unwrap_or("");
    let first = first.strip_prefix('\u{feff}').unwrap_or(first);
    if first.trim_end_matches('\r').trim() != header {
        return Err(Error::Format(format!(
            "expected header `{header}`, found `{}`",
            first.trim_end_matches('\r')
        )));
    }
    let columns = header.split(',').count();
    let mut out = Parsed { records: Vec::new(), rejects: Vec::new() };
    for (i, raw) in lines.enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let result = if fields.len() != columns {
            Err(format!("expected {columns} fields, found {}", fields.len()))
        } else {
            parse_row(&fields)
        };
        match result {
            Ok(r) => out.records.push(r),
            Err(reason) => out.rejects.push(RowReject { line: i + 2, reason }),
        }
    }
    Ok(out)
}

/// Parse a sensor CSV (`t,hr,ax,ay,az`).
pub fn parse_sensor_stream<R: Read>(source: R) -> Result<Parsed<SensorSample>> {
    let text = read_text(source)?;
    parse_rows(&text, SENSOR_HEADER, |f| {
        let t = parse_timestamp(f[0])?;
        let hr = parse_real("hr", f[1])?;
        if hr < 0.0 {
            return Err(format!("hr {hr} is negative"));
        }
        Ok(SensorSample {
            t,
            hr,
            ax: parse_real("ax", f[2])?,
            ay: parse_real("ay", f[3])?,
            az: parse_real("az", f[4])?,
        })
    })
}

/// Parse a self-report event CSV (`t`). Duplicates are kept.
pub fn parse_event_log<R: Read>(source: R) -> Result<Parsed<StressEvent>> {
    let text = read_text(source)?;
    parse_rows(&text, EVENT_HEADER, |f| Ok(StressEvent { t: parse_timestamp(f[0])? }))
}

/// Sort samples and events; collapse samples sharing a timestamp, keeping the first seen.
pub fn assemble_participant(
    id: impl Into<String>,
    mut samples: Vec<SensorSample>,
    mut events: Vec<StressEvent>,
) -> (ParticipantRecord, AssemblyReport) {
    // stable sort keeps the first occurrence ahead of later duplicates
    samples.sort_by_key(|s| s.t);
    let before = samples.len();
    samples.dedup_by_key(|s| s.t);
    events.sort();
    let report = AssemblyReport { duplicate_samples_collapsed: before - samples.len() };
    (ParticipantRecord { id: id.into(), samples, events }, report)
}

pub fn sensor_csv(samples: &[SensorSample]) -> String {
    let mut out = String::with_capacity(32 * (samples.len() + 1));
    out.push_str(SENSOR_HEADER);
    out.push('\n');
    for s in samples {
        let _ = writeln!(out, "{},{},{},{},{}", s.t, s.hr, s.ax, s.ay, s.az);
    }
    out
}

pub fn event_csv(events: &[StressEvent]) -> String {
    let mut out = String::from(EVENT_HEADER);
    out.push('\n');
    for e in events {
        let _ = writeln!(out, "{}", e.t);
    }
    out
}

/// Write `<id>.sensor.csv` and `<id>.events.csv` into `dir`.
pub fn write_participant(dir: &Path, record: &ParticipantRecord) -> Result<()> {
    std::fs::write(dir.join(format!("{}.sensor.csv", record.id)), sensor_csv(&record.samples))?;
    std::fs::write(dir.join(format!("{}.events.csv", record.id)), event_csv(&record.events))?;
    Ok(())
}

/// Per-participant quality summary produced when loading a directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub participant_id: String,
    pub samples: usize,
    pub events: usize,
    pub sample_rejects: Vec<RowReject>,
    pub event_rejects: Vec<RowReject>,
    pub duplicate_samples_collapsed: usize,
}

/// Load every `<id>.sensor.csv` in `dir` (with its optional `<id>.events.csv`), sorted by id.
pub fn load_directory(dir: &Path) -> Result<(Vec<ParticipantRecord>, Vec<IngestReport>)> {
    let mut ids = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if let Some(id) = name.strip_suffix(".sensor.csv") {
            ids.push(id.to_string());
        }
    }
    ids.sort();
    let mut records = Vec::with_capacity(ids.len());
    let mut reports = Vec::with_capacity(ids.len());
    for id in ids {
        let sensor = std::fs::File::open(dir.join(format!("{id}.sensor.csv")))?;
        let samples = parse_sensor_stream(std::io::BufReader::new(sensor))
            .map_err(|e| Error::Format(format!("{id}.sensor.csv: {e}")))?;
        let events_path = dir.join(format!("{id}.events.csv"));
        let events = if events_path.exists() {
            parse_event_log(std::io::BufReader::new(std::fs::File::open(&events_path)?))
                .map_err(|e| Error::Format(format!("{id}.events.csv: {e}")))?
        } else {
            Parsed { records: Vec::new(), rejects: Vec::new() }
        };
        let (record, asm) = assemble_participant(id.clone(), samples.records, events.records);
        reports.push(IngestReport {
            participant_id: id,
            samples: record.samples.len(),
            events: record.events.len(),
            sample_rejects: samples.rejects,
            event_rejects: events.rejects,
            duplicate_samples_collapsed: asm.duplicate_samples_collapsed,
        });
        records.push(record);
    }
    Ok((records, reports))
}
