//! Context-weighted failure detection for myoelectric grasp control.
//!
//! New hand-configuration commands are scored against demonstrated reaches:
//! the error of a state is the mean squared activation difference to the
//! demonstrations recorded in a similar wrist position and orientation,
//! weighted by how similar that context is. High errors flag commands that
//! are unlikely to match what the user intended.
//!
//! Modules, bottom up:
//! - [`model`]: states, trials, datasets, parameters
//! - [`geometry`]: distances and the cutoff weight functions
//! - [`engine`]: the weighted error and dataset evaluation
//! - [`analysis`]: descriptives, permutation test, threshold classification
//! - [`io`] and [`synth`]: dataset files and the synthetic experiment
//! - [`cli`]: the command-line workflow

pub mod analysis;
pub mod cli;
pub mod engine;
pub mod geometry;
pub mod io;
pub mod model;
pub mod synth;

pub use engine::{activation_mse, evaluate_dataset, evaluate_state, extract_target_area, EvaluationRun, TrainingScope};
pub use geometry::{
    combined_weight, euclidean_distance, position_weight, quaternion_angle, rotation_weight, AngleConvention,
    Quaternion,
};
pub use model::{
    derive_params, validate_dataset, Condition, ContextMode, Dataset, ErrorParams, GraspLabel, StateEvaluation, Trial,
    WristState,
};
