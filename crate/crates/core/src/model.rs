//! Domain types: wrist states, trials, datasets and error-function parameters.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{AngleConvention, Quaternion, UNIT_NORM_TOLERANCE};

/// One sampled instant of a reach.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WristState {
    /// Wrist position in metres.
    pub position: [f64; 3],
    pub orientation: Quaternion,
    /// Proportional activation per degree of control, each in [0, 1].
    pub activation: Vec<f64>,
    /// Milliseconds since the start of the trial.
    pub timestamp_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraspLabel {
    Rest,
    Power,
    Tridigital,
    Unknown,
}

impl GraspLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            GraspLabel::Rest => "rest",
            GraspLabel::Power => "power",
            GraspLabel::Tridigital => "tridigital",
            GraspLabel::Unknown => "unknown",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rest" => Some(GraspLabel::Rest),
            "power" => Some(GraspLabel::Power),
            "tridigital" => Some(GraspLabel::Tridigital),
            "unknown" => Some(GraspLabel::Unknown),
            _ => None,
        }
    }
}

impl fmt::Display for GraspLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which experimental sample a trial belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Training,
    Success,
    Failure,
}

impl Condition {
    pub fn as_str(&self) -> &'static str {
        match self {
            Condition::Training => "training",
            Condition::Success => "success",
            Condition::Failure => "failure",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "training" => Some(Condition::Training),
            "success" => Some(Condition::Success),
            "failure" => Some(Condition::Failure),
            _ => None,
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub trial_id: String,
    pub grasp_label: GraspLabel,
    pub condition: Condition,
    pub states: Vec<WristState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    /// Number of degrees of control (activation vector length).
    pub k: usize,
    pub trials: Vec<Trial>,
}

impl Dataset {
    pub fn new(k: usize, trials: Vec<Trial>) -> Self {
        Self { k, trials }
    }

    /// Total number of states over all trials.
    pub fn state_count(&self) -> usize {
        self.trials.iter().map(|t| t.states.len()).sum()
    }

    pub fn states(&self) -> impl Iterator<Item = &WristState> {
        self.trials.iter().flat_map(|t| t.states.iter())
    }
}

/// Whether the focal area is bounded in position and orientation or in
/// orientation alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContextMode {
    #[default]
    PositionAndRotation,
    RotationOnly,
}

/// Parameters of the context-weighted error function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorParams {
    pub k: usize,
    /// Minimum number of training states with nonzero weight for a query to be evaluable.
    pub n_min: usize,
    /// Relative weight of a training state sitting on the edge of the focal area.
    pub r: f64,
    /// Position cutoff in metres.
    pub delta: f64,
    /// Rotation cutoff in degrees.
    pub phi: f64,
    /// Position sharpness in 1/m^2.
    pub alpha: f64,
    /// Rotation sharpness in 1/deg^2.
    pub beta: f64,
    pub mode: ContextMode,
    #[serde(default)]
    pub angle_convention: AngleConvention,
}

#[derive(Debug, Error, PartialEq)]
pub enum ParamsError {
    #[error("r must lie in (0, 1), got {0}")]
    RatioOutOfRange(f64),
    #[error("delta must be positive, got {0}")]
    NonPositiveDelta(f64),
    #[error("phi must be positive, got {0}")]
    NonPositivePhi(f64),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("n_min must be at least 1")]
    ZeroNMin,
}

/// Builds [`ErrorParams`], deriving the sharpness terms so that a training
/// state at either cutoff gets a per-factor weight of `sqrt(r)`:
/// `alpha = -ln(sqrt(r)) / delta^2`, `beta = -ln(sqrt(r)) / phi^2`.
pub fn derive_params(
    k: usize,
    n_min: usize,
    r: f64,
    delta: f64,
    phi: f64,
    mode: ContextMode,
) -> Result<ErrorParams, ParamsError> {
    if k == 0 {
        return Err(ParamsError::ZeroK);
    }
    if n_min == 0 {
        return Err(ParamsError::ZeroNMin);
    }
    if !(r > 0.0 && r < 1.0) {
        return Err(ParamsError::RatioOutOfRange(r));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(ParamsError::NonPositiveDelta(delta));
    }
    if !(phi > 0.0 && phi.is_finite()) {
        return Err(ParamsError::NonPositivePhi(phi));
    }
    let edge = -r.sqrt().ln();
    Ok(ErrorParams {
        k,
        n_min,
        r,
        delta,
        phi,
        alpha: edge / (delta * delta),
        beta: edge / (phi * phi),
        mode,
        angle_convention: AngleConvention::default(),
    })
}

impl ErrorParams {
    /// Default configuration: k=2, n=5, r=0.25, delta=0.02 m, phi=20 deg.
    pub fn table_defaults(mode: ContextMode) -> Self {
        derive_params(2, 5, 0.25, 0.02, 20.0, mode).expect("default parameters are valid")
    }

    pub fn with_angle_convention(mut self, convention: AngleConvention) -> Self {
        self.angle_convention = convention;
        self
    }
}

/// Result of scoring one query state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateEvaluation {
    /// Weighted mean error, `None` when fewer than `n_min` neighbours were found.
    pub error: Option<f64>,
    /// Training states with strictly positive weight.
    pub neighbour_count: usize,
    pub total_weight: f64,
}

impl StateEvaluation {
    pub fn is_evaluable(&self) -> bool {
        self.error.is_some()
    }
}

/// Where in a dataset a violation was found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub trial_id: String,
    pub state_index: Option<usize>,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.state_index {
            Some(i) => write!(f, "trial '{}' state {}", self.trial_id, i),
            None => write!(f, "trial '{}'", self.trial_id),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    ZeroK,
    EmptyTrial(Location),
    ActivationOutOfRange { at: Location, component: usize, value: f64 },
    ActivationLength { at: Location, expected: usize, found: usize },
    NonUnitQuaternion { at: Location, norm: f64 },
    NonIncreasingTimestamp { at: Location, previous: f64, current: f64 },
    NonFinite { at: Location, field: &'static str },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ZeroK => write!(f, "k must be at least 1"),
            Violation::EmptyTrial(at) => write!(f, "{at}: empty trial"),
            Violation::ActivationOutOfRange { at, component, value } => {
                write!(f, "{at}: activation out of [0,1] (component {component} = {value})")
            }
            Violation::ActivationLength { at, expected, found } => {
                write!(f, "{at}: activation length {found}, expected k={expected}")
            }
            Violation::NonUnitQuaternion { at, norm } => {
                write!(f, "{at}: non-unit quaternion (norm {norm})")
            }
            Violation::NonIncreasingTimestamp { at, previous, current } => {
                write!(f, "{at}: timestamps not strictly increasing ({previous} then {current})")
            }
            Violation::NonFinite { at, field } => write!(f, "{at}: non-finite {field}"),
        }
    }
}

const RENORMALISE_ABOVE: f64 = 1e-12;

/// Checks every dataset invariant. Quaternions within the unit-norm tolerance
/// are renormalised in place; the rest are reported.
pub fn validate_dataset(dataset: &mut Dataset) -> Vec<Violation> {
    let mut out = Vec::new();
    if dataset.k == 0 {
        out.push(Violation::ZeroK);
    }
    let k = dataset.k;
    for trial in &mut dataset.trials {
        if trial.states.is_empty() {
            out.push(Violation::EmptyTrial(Location { trial_id: trial.trial_id.clone(), state_index: None }));
            continue;
        }
        let mut previous: Option<f64> = None;
        for (i, state) in trial.states.iter_mut().enumerate() {
            let at = || Location { trial_id: trial.trial_id.clone(), state_index: Some(i) };

            if state.position.iter().any(|v| !v.is_finite()) {
                out.push(Violation::NonFinite { at: at(), field: "position" });
            }
            if !state.timestamp_ms.is_finite() {
                out.push(Violation::NonFinite { at: at(), field: "timestamp" });
            } else {
                if let Some(prev) = previous {
                    if state.timestamp_ms <= prev {
                        out.push(Violation::NonIncreasingTimestamp {
                            at: at(),
                            previous: prev,
                            current: state.timestamp_ms,
                        });
                    }
                }
                previous = Some(state.timestamp_ms);
            }

            if state.activation.len() != k {
                out.push(Violation::ActivationLength { at: at(), expected: k, found: state.activation.len() });
            }
            for (c, &a) in state.activation.iter().enumerate() {
                if !(0.0..=1.0).contains(&a) {
                    out.push(Violation::ActivationOutOfRange { at: at(), component: c, value: a });
                }
            }

            let q = state.orientation;
            if q.to_array().iter().any(|v| !v.is_finite()) {
                out.push(Violation::NonFinite { at: at(), field: "orientation" });
                continue;
            }
            let norm = q.norm();
            if (norm - 1.0).abs() <= UNIT_NORM_TOLERANCE {
                // leave already-normalised values bit-identical
                if (norm - 1.0).abs() > RENORMALISE_ABOVE {
                    state.orientation = q.normalized();
                }
            } else {
                out.push(Violation::NonUnitQuaternion { at: at(), norm });
            }
        }
    }
    out
}
