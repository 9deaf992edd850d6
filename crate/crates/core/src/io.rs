//! Line-delimited dataset files.
//!
//! ```text
//! #grasp-sentinel v1 k=2 units=m,deg,ms
//! trial_id,condition,grasp_label,t_ms,px,py,pz,qw,qx,qy,qz,a1,a2
//! ```
//!
//! The first line is the header; every following non-empty line is one state.
//! Rows of a trial are contiguous. Floats are written in shortest round-trip
//! form, so a save/load cycle is lossless.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::geometry::Quaternion;
use crate::model::{validate_dataset, Condition, Dataset, GraspLabel, Trial, Violation, WristState};

pub const HEADER_MAGIC: &str = "#grasp-sentinel v1";
pub const UNITS: &str = "m,deg,ms";

/// Columns preceding the activation values.
const FIXED_COLUMNS: usize = 11;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("trial id {0:?} cannot be written (empty, or contains a comma or line break)")]
    BadTrialId(String),
    #[error("invalid dataset:\n  {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("\n  "))]
    Invalid(Vec<Violation>),
}

fn parse_err(line: usize, message: impl Into<String>) -> DatasetError {
    DatasetError::Parse { line, message: message.into() }
}

fn parse_header(line: &str) -> Result<usize, DatasetError> {
    let rest = line
        .strip_prefix(HEADER_MAGIC)
        .ok_or_else(|| parse_err(1, format!("expected header starting with '{HEADER_MAGIC}'")))?;
    let mut k = None;
    let mut units = None;
    for token in rest.split_whitespace() {
        match token.split_once('=') {
            Some(("k", v)) => k = Some(v.parse::<usize>().map_err(|_| parse_err(1, format!("bad k '{v}'")))?),
            Some(("units", v)) => units = Some(v),
            _ => return Err(parse_err(1, format!("unexpected header field '{token}'"))),
        }
    }
    match units {
        Some(UNITS) => {}
        Some(u) => return Err(parse_err(1, format!("unsupported units '{u}', expected '{UNITS}'"))),
        None => return Err(parse_err(1, "header is missing units")),
    }
    k.ok_or_else(|| parse_err(1, "header is missing k"))
}

/// Parses dataset text and validates it.
pub fn parse_dataset(text: &str) -> Result<Dataset, DatasetError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let k = parse_header(header.trim_end())?;

    let mut trials: Vec<Trial> = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != FIXED_COLUMNS + k {
            return Err(parse_err(
                line_no,
                format!(
                    "expected {} columns for k={k}, found {} ({} activation values)",
                    FIXED_COLUMNS + k,
                    fields.len(),
                    fields.len().saturating_sub(FIXED_COLUMNS)
                ),
            ));
        }
        let trial_id = fields[0];
        let condition = Condition::parse(fields[1])
            .ok_or_else(|| parse_err(line_no, format!("unknown condition '{}'", fields[1])))?;
        let grasp_label = GraspLabel::parse(fields[2])
            .ok_or_else(|| parse_err(line_no, format!("unknown grasp label '{}'", fields[2])))?;
        let mut nums = Vec::with_capacity(fields.len() - 3);
        for (col, f) in fields[3..].iter().enumerate() {
            let v: f64 = f.parse().map_err(|_| parse_err(line_no, format!("column {}: bad number '{f}'", col + 4)))?;
            nums.push(v);
        }
        let state = WristState {
            timestamp_ms: nums[0],
            position: [nums[1], nums[2], nums[3]],
            orientation: Quaternion::new(nums[4], nums[5], nums[6], nums[7]),
            activation: nums[8..].to_vec(),
        };

        match trials.last_mut() {
            Some(t) if t.trial_id == trial_id => {
                if t.condition != condition || t.grasp_label != grasp_label {
                    return Err(parse_err(line_no, format!("trial '{trial_id}' changes condition or label")));
                }
                t.states.push(state);
            }
            _ => {
                if trials.iter().any(|t| t.trial_id == trial_id) {
                    return Err(parse_err(line_no, format!("rows of trial '{trial_id}' are not contiguous")));
                }
                trials.push(Trial { trial_id: trial_id.to_string(), grasp_label, condition, states: vec![state] });
            }
        }
    }

    let mut dataset = Dataset::new(k, trials);
    let violations = validate_dataset(&mut dataset);
    if violations.is_empty() {
        Ok(dataset)
    } else {
        Err(DatasetError::Invalid(violations))
    }
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let text =
        fs::read_to_string(path).map_err(|source| DatasetError::Io { path: path.display().to_string(), source })?;
    parse_dataset(&text)
}

/// Canonical text form; identical datasets always give identical bytes.
pub fn format_dataset(dataset: &Dataset) -> String {
    let mut out = format!("{HEADER_MAGIC} k={} units={UNITS}\n", dataset.k);
    for trial in &dataset.trials {
        for s in &trial.states {
            let q = &s.orientation;
            let _ = write!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                trial.trial_id,
                trial.condition,
                trial.grasp_label,
                s.timestamp_ms,
                s.position[0],
                s.position[1],
                s.position[2],
                q.w,
                q.x,
                q.y,
                q.z
            );
            for a in &s.activation {
                let _ = write!(out, ",{a}");
            }
            out.push('\n');
        }
    }
    out
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let path = path.as_ref();
    if let Some(t) = dataset.trials.iter().find(|t| t.trial_id.is_empty() || t.trial_id.contains([',', '\n', '\r'])) {
        return Err(DatasetError::BadTrialId(t.trial_id.clone()));
    }
    fs::write(path, format_dataset(dataset))
        .map_err(|source| DatasetError::Io { path: path.display().to_string(), source })
}
