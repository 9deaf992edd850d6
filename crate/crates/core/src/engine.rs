//! Context-weighted error scoring.
//!
//! A query state is compared against every training state. Each comparison is
//! the mean squared difference of the activation vectors, weighted by how close
//! the training state sits to the query in position and orientation. The score
//! is the weighted mean over training states with nonzero weight, so it does
//! not grow with the amount of training data.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::combined_weight;
use crate::model::{Dataset, ErrorParams, StateEvaluation, Trial, WristState};

/// Number of trailing states per demonstration kept in the target-area set.
pub const DEFAULT_TARGET_COUNT: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("activation length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("k mismatch: training has k={training}, query has k={query}")]
    KMismatch { training: usize, query: usize },
}

/// Training data used for an evaluation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "scope")]
pub enum TrainingScope {
    /// Every recorded training state.
    Full,
    /// Only the last `count` states of each demonstration.
    TargetArea { count: usize },
}

impl TrainingScope {
    pub fn name(&self) -> &'static str {
        match self {
            TrainingScope::Full => "full",
            TrainingScope::TargetArea { .. } => "target-area",
        }
    }
}

/// Per-state evaluations for one test trial, aligned with its states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialEvaluation {
    pub trial_id: String,
    pub states: Vec<StateEvaluation>,
}

impl TrialEvaluation {
    /// Errors of the evaluable states, in state order.
    pub fn evaluable_errors(&self) -> Vec<f64> {
        self.states.iter().filter_map(|s| s.error).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRun {
    pub params: ErrorParams,
    pub scope: TrainingScope,
    /// Number of training states the run compared against.
    pub training_states: usize,
    pub trials: Vec<TrialEvaluation>,
}

impl EvaluationRun {
    pub fn total_states(&self) -> usize {
        self.trials.iter().map(|t| t.states.len()).sum()
    }

    pub fn evaluable_states(&self) -> usize {
        self.trials.iter().flat_map(|t| &t.states).filter(|s| s.is_evaluable()).count()
    }

    /// All evaluable errors, trial by trial.
    pub fn evaluable_errors(&self) -> Vec<f64> {
        self.trials.iter().flat_map(|t| t.states.iter().filter_map(|s| s.error)).collect()
    }
}

/// `<mx - mj, mx - mj> / k`.
pub fn activation_mse(mx: &[f64], mj: &[f64]) -> Result<f64, EngineError> {
    if mx.len() != mj.len() || mx.is_empty() {
        return Err(EngineError::LengthMismatch(mx.len(), mj.len()));
    }
    Ok(squared_diff(mx, mj) / mx.len() as f64)
}

fn squared_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Pairwise (cascade) summation; error grows with log(n) instead of n.
pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Scores one state against a flat slice of training states.
///
/// Callers are responsible for the k check; see [`evaluate_state`].
fn score_against(x: &WristState, training: &[&WristState], params: &ErrorParams) -> StateEvaluation {
    let k = x.activation.len() as f64;
    let mut weights = Vec::new();
    let mut weighted = Vec::new();
    for s in training {
        let w = combined_weight(x, s, params);
        if w > 0.0 {
            weights.push(w);
            weighted.push(squared_diff(&x.activation, &s.activation) / k * w);
        }
    }
    let neighbour_count = weights.len();
    let total_weight = pairwise_sum(&weights);
    let error = if neighbour_count >= params.n_min && total_weight > 0.0 {
        Some((pairwise_sum(&weighted) / total_weight).clamp(0.0, 1.0))
    } else {
        None
    };
    StateEvaluation { error, neighbour_count, total_weight }
}

/// Weighted mean activation error of `x` relative to the training states in
/// its focal area, or not-evaluable when fewer than `n_min` training states
/// carry nonzero weight.
pub fn evaluate_state(
    x: &WristState,
    training: &Dataset,
    params: &ErrorParams,
) -> Result<StateEvaluation, EngineError> {
    if x.activation.len() != training.k {
        return Err(EngineError::KMismatch { training: training.k, query: x.activation.len() });
    }
    let flat: Vec<&WristState> = training.states().collect();
    Ok(score_against(x, &flat, params))
}

/// Keeps the final `count` states of every trial (all of them for shorter trials).
pub fn extract_target_area(training: &Dataset, count: usize) -> Dataset {
    let trials = training
        .trials
        .iter()
        .map(|t| {
            let start = t.states.len().saturating_sub(count);
            Trial { states: t.states[start..].to_vec(), ..t.clone() }
        })
        .collect();
    Dataset::new(training.k, trials)
}

/// Scores every state of every test trial. States are evaluated in parallel
/// against a read-only training set.
pub fn evaluate_dataset(
    test: &Dataset,
    training: &Dataset,
    params: &ErrorParams,
    scope: TrainingScope,
) -> Result<EvaluationRun, EngineError> {
    if test.k != training.k {
        return Err(EngineError::KMismatch { training: training.k, query: test.k });
    }
    let reference = match scope {
        TrainingScope::Full => None,
        TrainingScope::TargetArea { count } => Some(extract_target_area(training, count)),
    };
    let reference = reference.as_ref().unwrap_or(training);
    let flat: Vec<&WristState> = reference.states().collect();

    let mut trials = Vec::with_capacity(test.trials.len());
    for trial in &test.trials {
        if let Some(bad) = trial.states.iter().find(|s| s.activation.len() != training.k) {
            return Err(EngineError::KMismatch { training: training.k, query: bad.activation.len() });
        }
        let states = trial.states.par_iter().map(|x| score_against(x, &flat, params)).collect();
        trials.push(TrialEvaluation { trial_id: trial.trial_id.clone(), states });
    }
    Ok(EvaluationRun { params: *params, scope, training_states: flat.len(), trials })
}
