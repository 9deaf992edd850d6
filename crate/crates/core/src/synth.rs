//! Synthetic reach-to-grasp experiment.
//!
//! A capsule-shaped object stands upright on a table. Each simulated reach
//! starts near the body and ends at a contact pose on the object, following a
//! minimum-jerk position profile with slerped orientation. Two contact regions
//! select the grasp: reaching over the top of the object implies a tridigital
//! grasp on the cap, reaching to the side implies a power grasp on the body.
//! The wrist keeps its start orientation for the first part of the reach and
//! then turns towards the contact orientation. The hand closes from rest
//! towards the grasp vector over the last 10 cm of the approach, which with
//! the decelerating profile falls in the last few hundred milliseconds.
//!
//! Failure trials use the same pose sampler but carry the activation of the
//! other grasp type, as if the myoelectric mapping had the two grasp labels
//! swapped. Trial `grasp_label` always records the grasp implied by context.
//!
//! World frame: x points away from the user, y to the user's left, z up.
//! All kinematic defaults are assumptions for a desk-scale replica, not
//! measured human statistics.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{euclidean_distance, Quaternion};
use crate::model::{Condition, Dataset, GraspLabel, Trial, WristState};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("config file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Generator settings. Every key is optional in the config file; missing keys
/// take the defaults below. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub training_trials: usize,
    pub success_trials: usize,
    pub failure_trials: usize,

    /// Centre of the object's base on the table (m).
    pub object_position: [f64; 3],
    pub object_radius: f64,
    pub object_height: f64,
    /// Distance from the grasped surface to the tracked wrist point (m).
    pub hand_offset: f64,

    pub start_position: [f64; 3],
    /// Per-axis standard deviation of the start position (m).
    pub start_position_sd: f64,
    pub start_orientation_sd_deg: f64,

    /// Fraction of the movement time before the wrist starts rotating towards
    /// the contact orientation.
    pub rotation_onset: f64,

    pub duration_min_ms: f64,
    pub duration_max_ms: f64,
    pub sample_interval_ms: f64,

    pub power_vector: Vec<f64>,
    pub tridigital_vector: Vec<f64>,
    /// Remaining distance to the contact pose at which the hand starts closing (m).
    pub closure_start_distance: f64,
    /// Remaining distance at which the hand is fully closed (m).
    pub closure_end_distance: f64,

    pub activation_noise_sd: f64,
    pub position_noise_sd: f64,
    pub orientation_noise_sd_deg: f64,

    /// Fraction of trials reaching for the cap (tridigital context).
    pub top_fraction: f64,
    /// Half-width of the azimuth range of side contacts (deg).
    pub side_azimuth_spread_deg: f64,
    /// Half-width of the contact height range on the object's side (m).
    pub side_height_spread: f64,
    /// Half-width of the horizontal contact offset above the cap (m).
    pub top_offset_spread: f64,
    /// Half-width of the hand yaw range for top grasps (deg).
    pub top_yaw_spread_deg: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            training_trials: 22,
            success_trials: 8,
            failure_trials: 20,
            object_position: [0.45, 0.0, 0.0],
            object_radius: 0.035,
            object_height: 0.20,
            hand_offset: 0.07,
            start_position: [0.05, -0.20, 0.05],
            start_position_sd: 0.06,
            start_orientation_sd_deg: 8.0,
            rotation_onset: 0.5,
            duration_min_ms: 1300.0,
            duration_max_ms: 1700.0,
            sample_interval_ms: 12.0,
            power_vector: vec![0.85, 0.85],
            tridigital_vector: vec![0.80, 0.05],
            closure_start_distance: 0.10,
            closure_end_distance: 0.005,
            activation_noise_sd: 0.03,
            position_noise_sd: 0.002,
            orientation_noise_sd_deg: 2.0,
            top_fraction: 0.5,
            side_azimuth_spread_deg: 30.0,
            side_height_spread: 0.02,
            top_offset_spread: 0.01,
            top_yaw_spread_deg: 30.0,
        }
    }
}

impl SynthConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, SynthError> {
        let config: SynthConfig = toml::from_str(text).map_err(|e| SynthError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SynthError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| SynthError::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Activation length shared by both grasp vectors.
    pub fn k(&self) -> usize {
        self.power_vector.len()
    }

    pub fn grasp_vector(&self, label: GraspLabel) -> Vec<f64> {
        match label {
            GraspLabel::Power => self.power_vector.clone(),
            GraspLabel::Tridigital => self.tridigital_vector.clone(),
            GraspLabel::Rest | GraspLabel::Unknown => vec![0.0; self.k()],
        }
    }

    // Negated comparisons so that NaN fails every check.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Invalid(m));
        if !(self.sample_interval_ms > 0.0) {
            return bad(format!("sample_interval_ms must be positive, got {}", self.sample_interval_ms));
        }
        if !(self.duration_min_ms >= self.sample_interval_ms) {
            return bad(format!(
                "duration_min_ms ({}) must be at least one sample interval, trials would be empty",
                self.duration_min_ms
            ));
        }
        if !(self.duration_max_ms >= self.duration_min_ms) {
            return bad("duration_max_ms must not be below duration_min_ms".into());
        }
        if self.power_vector.is_empty() || self.power_vector.len() != self.tridigital_vector.len() {
            return bad("power_vector and tridigital_vector must be non-empty and equally long".into());
        }
        for (name, v) in [("power_vector", &self.power_vector), ("tridigital_vector", &self.tridigital_vector)] {
            if v.iter().any(|a| !(0.0..=1.0).contains(a)) {
                return bad(format!("{name} components must lie in [0, 1]"));
            }
        }
        for (name, v) in [
            ("start_position_sd", self.start_position_sd),
            ("start_orientation_sd_deg", self.start_orientation_sd_deg),
            ("activation_noise_sd", self.activation_noise_sd),
            ("position_noise_sd", self.position_noise_sd),
            ("orientation_noise_sd_deg", self.orientation_noise_sd_deg),
            ("closure_start_distance", self.closure_start_distance),
            ("closure_end_distance", self.closure_end_distance),
            ("side_azimuth_spread_deg", self.side_azimuth_spread_deg),
            ("side_height_spread", self.side_height_spread),
            ("top_offset_spread", self.top_offset_spread),
            ("top_yaw_spread_deg", self.top_yaw_spread_deg),
            ("object_radius", self.object_radius),
            ("object_height", self.object_height),
            ("hand_offset", self.hand_offset),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be a finite non-negative number, got {v}"));
            }
        }
        if !(self.closure_start_distance > self.closure_end_distance) {
            return bad("closure_start_distance must exceed closure_end_distance".into());
        }
        if !(0.0..1.0).contains(&self.rotation_onset) {
            return bad(format!("rotation_onset must lie in [0, 1), got {}", self.rotation_onset));
        }
        if !(0.0..=1.0).contains(&self.top_fraction) {
            return bad(format!("top_fraction must lie in [0, 1], got {}", self.top_fraction));
        }
        Ok(())
    }
}

/// The three samples of one synthetic session.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub training: Dataset,
    pub success: Dataset,
    pub failure: Dataset,
}

/// Normalised minimum-jerk position profile, `s(0) = 0`, `s(1) = 1`.
pub fn minimum_jerk(tau: f64) -> f64 {
    let t = tau.clamp(0.0, 1.0);
    t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
}

fn smoothstep(x: f64) -> f64 {
    let t = x.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Contact {
    Top,
    Side,
}

impl Contact {
    fn grasp(self) -> GraspLabel {
        match self {
            Contact::Top => GraspLabel::Tridigital,
            Contact::Side => GraspLabel::Power,
        }
    }
}

struct Generator<'a> {
    config: &'a SynthConfig,
    rng: ChaCha8Rng,
}

impl Generator<'_> {
    fn uniform(&mut self, half_width: f64) -> f64 {
        if half_width == 0.0 {
            0.0
        } else {
            self.rng.random_range(-half_width..=half_width)
        }
    }

    fn gaussian(&mut self, sd: f64) -> f64 {
        if sd == 0.0 {
            return 0.0;
        }
        Normal::new(0.0, sd).expect("sd validated").sample(&mut self.rng)
    }

    /// Small random rotation with per-axis rotation-vector sd in degrees.
    fn jitter_rotation(&mut self, sd_deg: f64) -> Quaternion {
        let v = [self.gaussian(sd_deg), self.gaussian(sd_deg), self.gaussian(sd_deg)];
        let angle = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        Quaternion::from_axis_angle(v, angle)
    }

    fn contact_pose(&mut self, contact: Contact) -> ([f64; 3], Quaternion) {
        let c = self.config;
        let [ox, oy, oz] = c.object_position;
        match contact {
            Contact::Top => {
                let dx = self.uniform(c.top_offset_spread);
                let dy = self.uniform(c.top_offset_spread);
                let yaw = self.uniform(c.top_yaw_spread_deg);
                let pos = [ox + dx, oy + dy, oz + c.object_height + c.hand_offset];
                (pos, Quaternion::from_euler_zyx(yaw, 90.0, -90.0))
            }
            Contact::Side => {
                // azimuth 180 deg is the side of the object facing the user
                let azimuth = (180.0 + self.uniform(c.side_azimuth_spread_deg)).to_radians();
                let reach = c.object_radius + c.hand_offset;
                let height = oz + 0.45 * c.object_height + self.uniform(c.side_height_spread);
                let pos = [ox + reach * azimuth.cos(), oy + reach * azimuth.sin(), height];
                // fingers point at the object axis
                let yaw = azimuth.to_degrees() - 180.0;
                (pos, Quaternion::from_euler_zyx(yaw, 0.0, -90.0))
            }
        }
    }

    fn trial(&mut self, id: String, condition: Condition, contact: Contact) -> Trial {
        let c = self.config;
        let start = [
            c.start_position[0] + self.gaussian(c.start_position_sd),
            c.start_position[1] + self.gaussian(c.start_position_sd),
            c.start_position[2] + self.gaussian(c.start_position_sd),
        ];
        // forearm pointing forward, palm down
        let start_q = Quaternion::from_euler_zyx(0.0, 30.0, 0.0)
            .mul(&self.jitter_rotation(c.start_orientation_sd_deg))
            .normalized();
        let (end, end_q) = self.contact_pose(contact);

        let duration = if c.duration_max_ms > c.duration_min_ms {
            self.rng.random_range(c.duration_min_ms..=c.duration_max_ms)
        } else {
            c.duration_min_ms
        };
        let samples = (duration / c.sample_interval_ms).floor() as usize + 1;
        let total = (samples - 1) as f64 * c.sample_interval_ms;

        let label = contact.grasp();
        let commanded = match (condition, label) {
            (Condition::Failure, GraspLabel::Power) => c.grasp_vector(GraspLabel::Tridigital),
            (Condition::Failure, GraspLabel::Tridigital) => c.grasp_vector(GraspLabel::Power),
            _ => c.grasp_vector(label),
        };
        let reach = euclidean_distance(&start, &end);
        let closing_span = c.closure_start_distance - c.closure_end_distance;

        let mut states = Vec::with_capacity(samples);
        for i in 0..samples {
            let t = i as f64 * c.sample_interval_ms;
            let tau = t / total;
            let s = minimum_jerk(tau);
            let turned = minimum_jerk((tau - c.rotation_onset) / (1.0 - c.rotation_onset));
            let mut position = [0.0; 3];
            for (axis, p) in position.iter_mut().enumerate() {
                *p = start[axis] + (end[axis] - start[axis]) * s + self.gaussian(c.position_noise_sd);
            }
            let orientation =
                start_q.slerp(&end_q, turned).mul(&self.jitter_rotation(c.orientation_noise_sd_deg)).normalized();
            let remaining = (1.0 - s) * reach;
            let closure = smoothstep((c.closure_start_distance - remaining) / closing_span);
            let activation = commanded
                .iter()
                .map(|g| (g * closure + self.gaussian(c.activation_noise_sd)).clamp(0.0, 1.0))
                .collect();
            states.push(WristState { position, orientation, activation, timestamp_ms: t });
        }
        Trial { trial_id: id, grasp_label: label, condition, states }
    }

    fn dataset(&mut self, condition: Condition, count: usize) -> Dataset {
        let tops = (count as f64 * self.config.top_fraction).round() as usize;
        let mut contacts: Vec<Contact> =
            (0..count).map(|i| if i < tops { Contact::Top } else { Contact::Side }).collect();
        contacts.shuffle(&mut self.rng);
        let trials = contacts
            .into_iter()
            .enumerate()
            .map(|(i, contact)| self.trial(format!("{}-{i:02}", condition.as_str()), condition, contact))
            .collect();
        Dataset::new(self.config.k(), trials)
    }
}

/// Generates the training, success and failure samples. Each sample draws from
/// its own ChaCha8 stream of `config.seed`, so output is fixed per seed.
pub fn generate_experiment(config: &SynthConfig) -> Result<Experiment, SynthError> {
    config.validate()?;
    let make = |stream: u64, condition: Condition, count: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(stream);
        Generator { config, rng }.dataset(condition, count)
    };
    Ok(Experiment {
        training: make(0, Condition::Training, config.training_trials),
        success: make(1, Condition::Success, config.success_trials),
        failure: make(2, Condition::Failure, config.failure_trials),
    })
}
