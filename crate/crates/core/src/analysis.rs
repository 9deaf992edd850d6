//! Statistical comparison of error samples and threshold classification.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::EvaluationRun;
use crate::model::Condition;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("empty sample")]
    EmptySample,
    #[error("at least one permutation is required")]
    NoPermutations,
    #[error("reference range is zero")]
    ZeroRange,
    #[error("length mismatch: {0} predictions vs {1} labels")]
    LengthMismatch(usize, usize),
    #[error("trial has no evaluable errors")]
    Unclassifiable,
    #[error("ground truth must be success or failure, got {0}")]
    NotATestCondition(Condition),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 for a single value.
    pub sd: f64,
    /// False when `count == 1` and `sd` is the zero placeholder.
    pub sd_defined: bool,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub range: f64,
}

pub fn descriptives(values: &[f64]) -> Result<DescriptiveStats, AnalysisError> {
    if values.is_empty() {
        return Err(AnalysisError::EmptySample);
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let (sd, sd_defined) = if n > 1 {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        ((ss / (n - 1) as f64).sqrt(), true)
    } else {
        (0.0, false)
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 { sorted[n / 2] } else { (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0 };
    let (min, max) = (sorted[0], sorted[n - 1]);
    Ok(DescriptiveStats { count: n, mean, sd, sd_defined, median, min, max, range: max - min })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermutationResult {
    /// `(exceedances + 1) / (permutations + 1)`.
    pub p_value: f64,
    /// `mean(b) - mean(a)` on the unpermuted samples.
    pub observed: f64,
    pub exceedances: usize,
    pub permutations: usize,
    pub seed: u64,
}

/// One-sided permutation test of `mean(b) > mean(a)`.
///
/// Condition labels are reshuffled `permutations` times with a ChaCha8
/// generator seeded from `seed` (Fisher-Yates via `SliceRandom`). The +1 in
/// numerator and denominator keeps the p-value away from zero.
pub fn permutation_test(
    a: &[f64],
    b: &[f64],
    permutations: usize,
    seed: u64,
) -> Result<PermutationResult, AnalysisError> {
    if a.is_empty() || b.is_empty() {
        return Err(AnalysisError::EmptySample);
    }
    if permutations == 0 {
        return Err(AnalysisError::NoPermutations);
    }
    let (na, nb) = (a.len(), b.len());
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let total: f64 = pooled.iter().sum();
    let statistic = |sum_a: f64| (total - sum_a) / nb as f64 - sum_a / na as f64;
    let observed = statistic(a.iter().sum());
    // Permuted statistics that equal the observed one mathematically can
    // differ from it by summation round-off.
    let tolerance = 1e-12 * observed.abs().max(1.0);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut exceedances = 0usize;
    for _ in 0..permutations {
        // Only the first-group membership matters, so a partial shuffle suffices.
        let (group_a, _) = pooled.partial_shuffle(&mut rng, na);
        let sum_a: f64 = group_a.iter().sum();
        if statistic(sum_a) >= observed - tolerance {
            exceedances += 1;
        }
    }
    Ok(PermutationResult {
        p_value: (exceedances + 1) as f64 / (permutations + 1) as f64,
        observed,
        exceedances,
        permutations,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial_id: String,
    pub state_count: usize,
    pub evaluable_count: usize,
    /// Mean over the trial's evaluable states; `None` if it has none.
    pub corrected_mean: Option<f64>,
    pub range: Option<f64>,
    pub max_error: Option<f64>,
    /// Distance in states from the trial's last state to its maximum error.
    pub max_states_from_end: Option<usize>,
}

impl TrialSummary {
    pub fn is_evaluable(&self) -> bool {
        self.evaluable_count > 0
    }
}

pub fn trial_summaries(run: &EvaluationRun) -> Vec<TrialSummary> {
    run.trials
        .iter()
        .map(|t| {
            let errors = t.evaluable_errors();
            let stats = descriptives(&errors).ok();
            let argmax = t.states.iter().enumerate().filter_map(|(i, s)| s.error.map(|e| (i, e))).fold(
                None::<(usize, f64)>,
                |best, (i, e)| match best {
                    Some((_, be)) if be >= e => best,
                    _ => Some((i, e)),
                },
            );
            TrialSummary {
                trial_id: t.trial_id.clone(),
                state_count: t.states.len(),
                evaluable_count: errors.len(),
                corrected_mean: stats.map(|s| s.mean),
                range: stats.map(|s| s.range),
                max_error: stats.map(|s| s.max),
                max_states_from_end: argmax.map(|(i, _)| t.states.len() - 1 - i),
            }
        })
        .collect()
}

/// Condition-level aggregates over evaluable trials only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialAggregate {
    pub evaluable_trials: usize,
    pub excluded_trials: usize,
    pub mean_of_means: Option<f64>,
    pub mean_of_ranges: Option<f64>,
    pub mean_max_states_from_end: Option<f64>,
}

pub fn aggregate_trials(summaries: &[TrialSummary]) -> TrialAggregate {
    let usable: Vec<&TrialSummary> = summaries.iter().filter(|s| s.is_evaluable()).collect();
    let mean_of = |f: &dyn Fn(&TrialSummary) -> Option<f64>| {
        let v: Vec<f64> = usable.iter().filter_map(|s| f(s)).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    TrialAggregate {
        evaluable_trials: usable.len(),
        excluded_trials: summaries.len() - usable.len(),
        mean_of_means: mean_of(&|s| s.corrected_mean),
        mean_of_ranges: mean_of(&|s| s.range),
        mean_max_states_from_end: mean_of(&|s| s.max_states_from_end.map(|v| v as f64)),
    }
}

/// Ratio of `b`'s range to `a`'s.
pub fn range_ratio(a: &DescriptiveStats, b: &DescriptiveStats) -> Result<f64, AnalysisError> {
    if a.range <= 0.0 {
        return Err(AnalysisError::ZeroRange);
    }
    Ok(b.range / a.range)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrialClass {
    Failure,
    NonFailure,
}

/// How per-state errors are reduced to one trial score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregate {
    #[default]
    Max,
    Mean,
}

impl Aggregate {
    pub fn score(&self, errors: &[f64]) -> Option<f64> {
        if errors.is_empty() {
            return None;
        }
        Some(match self {
            Aggregate::Max => errors.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Aggregate::Mean => errors.iter().sum::<f64>() / errors.len() as f64,
        })
    }
}

/// A trial is a failure when its aggregated error is strictly above the threshold.
pub fn classify_trial(trial_errors: &[f64], threshold: f64, aggregate: Aggregate) -> Result<TrialClass, AnalysisError> {
    let score = aggregate.score(trial_errors).ok_or(AnalysisError::Unclassifiable)?;
    Ok(if score > threshold { TrialClass::Failure } else { TrialClass::NonFailure })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMetrics {
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
    /// `TP / (TP + FN)`, `None` without failure trials.
    pub sensitivity: Option<f64>,
    /// `TN / (TN + FP)`, `None` without success trials.
    pub specificity: Option<f64>,
}

impl ConfusionMetrics {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        Self {
            true_positives: tp,
            false_positives: fp,
            true_negatives: tn,
            false_negatives: fn_,
            sensitivity: ratio(tp, tp + fn_),
            specificity: ratio(tn, tn + fp),
        }
    }

    pub fn total(&self) -> usize {
        self.true_positives + self.false_positives + self.true_negatives + self.false_negatives
    }
}

/// Failure trials are the positive class.
pub fn confusion_metrics(
    predictions: &[TrialClass],
    ground_truth: &[Condition],
) -> Result<ConfusionMetrics, AnalysisError> {
    if predictions.len() != ground_truth.len() {
        return Err(AnalysisError::LengthMismatch(predictions.len(), ground_truth.len()));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (p, t) in predictions.iter().zip(ground_truth) {
        match (t, p) {
            (Condition::Failure, TrialClass::Failure) => tp += 1,
            (Condition::Failure, TrialClass::NonFailure) => fn_ += 1,
            (Condition::Success, TrialClass::Failure) => fp += 1,
            (Condition::Success, TrialClass::NonFailure) => tn += 1,
            (Condition::Training, _) => return Err(AnalysisError::NotATestCondition(*t)),
        }
    }
    Ok(ConfusionMetrics::from_counts(tp, fp, tn, fn_))
}

/// One candidate threshold with its operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

/// Operating points at every midpoint between adjacent distinct trial scores,
/// plus one below the smallest and one at the largest score.
pub fn roc_points(success_scores: &[f64], failure_scores: &[f64]) -> Vec<RocPoint> {
    let mut values: Vec<f64> = success_scores.iter().chain(failure_scores).copied().collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let mut thresholds = Vec::with_capacity(values.len() + 1);
    if let (Some(&lo), Some(&hi)) = (values.first(), values.last()) {
        thresholds.push(lo - 1.0);
        thresholds.extend(values.windows(2).map(|w| (w[0] + w[1]) / 2.0));
        thresholds.push(hi);
    }
    thresholds.into_iter().map(|t| operating_point(t, success_scores, failure_scores)).collect()
}

fn operating_point(threshold: f64, success: &[f64], failure: &[f64]) -> RocPoint {
    let detected = failure.iter().filter(|&&v| v > threshold).count();
    let passed = success.iter().filter(|&&v| v <= threshold).count();
    RocPoint {
        threshold,
        sensitivity: detected as f64 / failure.len().max(1) as f64,
        specificity: passed as f64 / success.len().max(1) as f64,
    }
}

/// Picks the midpoint between adjacent distinct trial scores that maximises
/// Youden's J (sensitivity + specificity - 1), preferring higher specificity
/// on ties. Falls back to the median of all scores when no midpoint has J > 0.
pub fn tune_threshold(success_maxima: &[f64], failure_maxima: &[f64]) -> Result<f64, AnalysisError> {
    if success_maxima.is_empty() || failure_maxima.is_empty() {
        return Err(AnalysisError::EmptySample);
    }
    let mut values: Vec<f64> = success_maxima.iter().chain(failure_maxima).copied().collect();
    values.sort_by(f64::total_cmp);
    values.dedup();

    let mut best: Option<(f64, RocPoint)> = None;
    for w in values.windows(2) {
        let point = operating_point((w[0] + w[1]) / 2.0, success_maxima, failure_maxima);
        let j = point.sensitivity + point.specificity - 1.0;
        let better = match best {
            None => true,
            Some((bj, bp)) => j > bj || (j == bj && point.specificity > bp.specificity),
        };
        if better {
            best = Some((j, point));
        }
    }
    match best {
        Some((j, point)) if j > 0.0 => Ok(point.threshold),
        _ => {
            let pooled: Vec<f64> = success_maxima.iter().chain(failure_maxima).copied().collect();
            Ok(descriptives(&pooled)?.median)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{TrainingScope, TrialEvaluation};
    use crate::model::{ContextMode, ErrorParams, StateEvaluation};

    #[test]
    fn descriptives_examples() {
        let s = descriptives(&[0.5]).unwrap();
        assert_eq!((s.mean, s.sd, s.sd_defined, s.range), (0.5, 0.0, false, 0.0));

        let s = descriptives(&[0.0, 1.0]).unwrap();
        assert_eq!((s.mean, s.median, s.range), (0.5, 0.5, 1.0));
        assert!((s.sd - 0.5f64.sqrt()).abs() < 1e-15);

        let s = descriptives(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!((s.median, s.min, s.max), (2.0, 1.0, 3.0));
        assert_eq!(descriptives(&[]), Err(AnalysisError::EmptySample));
    }

    #[test]
    fn permutation_identical_samples() {
        let a = [0.1, 0.2, 0.3, 0.4, 0.5];
        let r = permutation_test(&a, &a, 999, 7).unwrap();
        assert!(r.p_value > 0.4, "{}", r.p_value);
    }

    #[test]
    fn permutation_constant_samples_never_significant() {
        let a = [0.2; 6];
        let r = permutation_test(&a, &a, 500, 1).unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn permutation_tiny_separated_samples() {
        // With four values per group only 1 in C(8,4) = 70 relabelings keeps
        // every 1 in the second group, so the p-value sits near 1/70 rather than
        // at the 1/(m+1) floor.
        let r = permutation_test(&[0.0; 4], &[1.0; 4], 5000, 3).unwrap();
        assert!((r.p_value - 1.0 / 70.0).abs() < 0.006, "{}", r.p_value);
        assert!(r.p_value > 1.0 / 5001.0);
    }

    #[test]
    fn permutation_errors() {
        assert_eq!(permutation_test(&[], &[1.0], 10, 0), Err(AnalysisError::EmptySample));
        assert_eq!(permutation_test(&[1.0], &[1.0], 0, 0), Err(AnalysisError::NoPermutations));
    }

    #[test]
    fn summaries_and_aggregate() {
        let ev = |e: Option<f64>| StateEvaluation { error: e, neighbour_count: 0, total_weight: 0.0 };
        let run = EvaluationRun {
            params: ErrorParams::table_defaults(ContextMode::PositionAndRotation),
            scope: TrainingScope::Full,
            training_states: 0,
            trials: vec![
                TrialEvaluation {
                    trial_id: "a".into(),
                    states: vec![ev(Some(0.1)), ev(None), ev(Some(0.3)), ev(None)],
                },
                TrialEvaluation { trial_id: "b".into(), states: vec![ev(None), ev(None)] },
            ],
        };
        let s = trial_summaries(&run);
        assert!((s[0].corrected_mean.unwrap() - 0.2).abs() < 1e-15);
        assert!((s[0].range.unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(s[0].evaluable_count, 2);
        assert_eq!(s[0].max_states_from_end, Some(1));
        assert!(!s[1].is_evaluable());
        assert_eq!(s[1].corrected_mean, None);

        let agg = aggregate_trials(&s);
        assert_eq!(agg.evaluable_trials, 1);
        assert_eq!(agg.excluded_trials, 1);
        assert!((agg.mean_of_means.unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn range_ratio_examples() {
        let a = descriptives(&[0.0, 0.1]).unwrap();
        let b = descriptives(&[0.0, 0.265]).unwrap();
        assert!((range_ratio(&a, &b).unwrap() - 2.65).abs() < 1e-12);
        assert_eq!(range_ratio(&a, &a).unwrap(), 1.0);
        let flat = descriptives(&[0.3, 0.3]).unwrap();
        assert_eq!(range_ratio(&flat, &a), Err(AnalysisError::ZeroRange));
    }

    #[test]
    fn classify_examples() {
        let m = Aggregate::Max;
        assert_eq!(classify_trial(&[0.01, 0.02], 0.0249, m).unwrap(), TrialClass::NonFailure);
        assert_eq!(classify_trial(&[0.01, 0.30], 0.0249, m).unwrap(), TrialClass::Failure);
        assert_eq!(classify_trial(&[0.01, 0.0249], 0.0249, m).unwrap(), TrialClass::NonFailure);
        assert_eq!(classify_trial(&[], 0.0249, m), Err(AnalysisError::Unclassifiable));
        assert_eq!(classify_trial(&[0.01, 0.03], 0.0249, Aggregate::Mean).unwrap(), TrialClass::NonFailure);
    }

    #[test]
    fn confusion_examples() {
        let (fail, pass) = (TrialClass::Failure, TrialClass::NonFailure);
        let mut preds = vec![fail; 18];
        preds.extend([pass; 2]);
        preds.extend([pass; 6]);
        preds.extend([fail; 2]);
        let mut truth = vec![Condition::Failure; 20];
        truth.extend([Condition::Success; 8]);
        let m = confusion_metrics(&preds, &truth).unwrap();
        assert_eq!(m.sensitivity, Some(0.9));
        assert_eq!(m.specificity, Some(0.75));
        assert_eq!(m.total(), 28);

        let all = confusion_metrics(&[fail, pass], &[Condition::Failure, Condition::Success]).unwrap();
        assert_eq!((all.sensitivity, all.specificity), (Some(1.0), Some(1.0)));

        assert_eq!(confusion_metrics(&[fail], &[]), Err(AnalysisError::LengthMismatch(1, 0)));
        assert_eq!(
            confusion_metrics(&[fail], &[Condition::Training]),
            Err(AnalysisError::NotATestCondition(Condition::Training))
        );
    }

    #[test]
    fn tune_examples() {
        let success = [0.01, 0.02, 0.03];
        let failure = [0.2, 0.25, 0.4];
        let t = tune_threshold(&success, &failure).unwrap();
        assert!((t - 0.115).abs() < 1e-12);
        let p = operating_point(t, &success, &failure);
        assert_eq!((p.sensitivity, p.specificity), (1.0, 1.0));

        let same = [0.1, 0.2, 0.3];
        assert_eq!(tune_threshold(&same, &same).unwrap(), 0.2);
        assert_eq!(tune_threshold(&[], &same), Err(AnalysisError::EmptySample));
    }

    #[test]
    fn tune_prefers_specificity_on_ties() {
        // Two cuts reach J = 0.5: (sens 1, spec 0.5) at 0.15 and (sens 0.5, spec 1) at 0.35.
        let success = [0.1, 0.2];
        let failure = [0.3, 0.4];
        let t = tune_threshold(&[0.1, 0.3], &[0.2, 0.4]).unwrap();
        assert!((t - 0.35).abs() < 1e-12, "{t}");
        // separable case is unaffected
        assert!((tune_threshold(&success, &failure).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn roc_covers_extremes() {
        let pts = roc_points(&[0.1, 0.2], &[0.3]);
        assert_eq!(pts.first().unwrap().sensitivity, 1.0);
        assert_eq!(pts.first().unwrap().specificity, 0.0);
        assert_eq!(pts.last().unwrap().sensitivity, 0.0);
        assert_eq!(pts.last().unwrap().specificity, 1.0);
    }
}
