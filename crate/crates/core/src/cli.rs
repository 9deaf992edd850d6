//! Command-line workflow: `synth` -> `eval` -> `analyze` -> `classify`.
//!
//! Every command reads and writes plain files. Evaluation and analysis
//! reports are JSON documents that record the inputs, parameters and seed
//! they were produced from.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 for data or config errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    aggregate_trials, confusion_metrics, descriptives, permutation_test, range_ratio, roc_points, trial_summaries,
    tune_threshold, Aggregate, AnalysisError, ConfusionMetrics, DescriptiveStats, PermutationResult, RocPoint,
    TrialAggregate, TrialClass, TrialSummary,
};
use crate::engine::{
    evaluate_dataset, EngineError, EvaluationRun, TrainingScope, TrialEvaluation, DEFAULT_TARGET_COUNT,
};
use crate::geometry::AngleConvention;
use crate::io::{load_dataset, save_dataset, DatasetError};
use crate::model::{derive_params, Condition, ContextMode, ErrorParams, ParamsError};
use crate::synth::{generate_experiment, SynthConfig, SynthError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

pub const TRAINING_FILE: &str = "training.csv";
pub const SUCCESS_FILE: &str = "success.csv";
pub const FAILURE_FILE: &str = "failure.csv";
pub const CONFIG_FILE: &str = "config.toml";

const TOOL: &str = concat!("grasp-sentinel ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error("{context}: {source}")]
    Analysis { context: String, source: AnalysisError },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: not a valid report: {source}")]
    Report { path: String, source: serde_json::Error },
    #[error("{0}")]
    Mismatch(String),
}

impl CliError {
    fn analysis(context: impl Into<String>) -> impl FnOnce(AnalysisError) -> CliError {
        let context = context.into();
        move |source| CliError::Analysis { context, source }
    }
}

#[derive(Debug, Parser)]
#[command(name = "grasp-sentinel", version, about = "Context-weighted failure detection for myoelectric grasp control")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic training, success and failure datasets.
    Synth(SynthArgs),
    /// Score every state of a test dataset against a training dataset.
    Eval(EvalArgs),
    /// Compare a success and a failure evaluation report.
    Analyze(AnalyzeArgs),
    /// Classify the trials of an analysis report with an error threshold.
    Classify(ClassifyArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// TOML generator config; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// `k,n,r,delta,phi` as given on the command line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamsFlag {
    pub k: usize,
    pub n_min: usize,
    pub r: f64,
    pub delta: f64,
    pub phi: f64,
}

impl Default for ParamsFlag {
    fn default() -> Self {
        Self { k: 2, n_min: 5, r: 0.25, delta: 0.02, phi: 20.0 }
    }
}

impl FromStr for ParamsFlag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 5 {
            return Err(format!("expected k,n,r,delta,phi (5 values), got {}", parts.len()));
        }
        let int = |i: usize, name: &str| parts[i].parse::<usize>().map_err(|_| format!("bad {name} '{}'", parts[i]));
        let float = |i: usize, name: &str| parts[i].parse::<f64>().map_err(|_| format!("bad {name} '{}'", parts[i]));
        Ok(Self {
            k: int(0, "k")?,
            n_min: int(1, "n")?,
            r: float(2, "r")?,
            delta: float(3, "delta")?,
            phi: float(4, "phi")?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum ModeArg {
    #[default]
    Combined,
    RotationOnly,
}

impl From<ModeArg> for ContextMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Combined => ContextMode::PositionAndRotation,
            ModeArg::RotationOnly => ContextMode::RotationOnly,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum ScopeArg {
    #[default]
    Full,
    TargetArea,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum ConventionArg {
    /// `acos(|<q1,q2>|)`: q and -q are the same rotation.
    #[default]
    Absolute,
    /// `acos(<q1,q2>)` without the absolute value.
    Literal,
}

impl From<ConventionArg> for AngleConvention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Absolute => AngleConvention::Absolute,
            ConventionArg::Literal => AngleConvention::Literal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum AggregateArg {
    #[default]
    Max,
    Mean,
}

impl From<AggregateArg> for Aggregate {
    fn from(a: AggregateArg) -> Self {
        match a {
            AggregateArg::Max => Aggregate::Max,
            AggregateArg::Mean => Aggregate::Mean,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub training: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// k,n,r,delta,phi with delta in metres and phi in degrees.
    #[arg(long, default_value = "2,5,0.25,0.02,20")]
    pub params: ParamsFlag,
    #[arg(long, value_enum, default_value_t)]
    pub mode: ModeArg,
    #[arg(long, value_enum, default_value_t)]
    pub scope: ScopeArg,
    /// Trailing states per training trial kept by `--scope target-area`.
    #[arg(long, default_value_t = DEFAULT_TARGET_COUNT)]
    pub target_count: usize,
    #[arg(long, value_enum, default_value_t)]
    pub angle_convention: ConventionArg,
    /// Report path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    /// Evaluation report of the success condition.
    #[arg(long)]
    pub success: PathBuf,
    /// Evaluation report of the failure condition.
    #[arg(long)]
    pub failure: PathBuf,
    #[arg(long, default_value_t = 5000)]
    pub permutations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
#[command(group(clap::ArgGroup::new("cut").required(true).args(["threshold", "tune"])))]
pub struct ClassifyArgs {
    /// Analysis report written by `analyze`.
    #[arg(long)]
    pub report: PathBuf,
    /// Trials scoring strictly above this are failures.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Pick the threshold that maximises sensitivity + specificity.
    #[arg(long)]
    pub tune: bool,
    #[arg(long, value_enum, default_value_t)]
    pub aggregate: AggregateArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Output of `eval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tool: String,
    pub training: String,
    pub test: String,
    /// Condition shared by all test trials, `None` when they are mixed.
    pub condition: Option<Condition>,
    pub params: ErrorParams,
    pub scope: TrainingScope,
    pub training_states: usize,
    pub total_states: usize,
    pub evaluable_states: usize,
    pub trials: Vec<TrialEvaluation>,
}

impl EvalReport {
    pub fn to_run(&self) -> EvaluationRun {
        EvaluationRun {
            params: self.params,
            scope: self.scope,
            training_states: self.training_states,
            trials: self.trials.clone(),
        }
    }
}

/// Per-state errors of one trial; `null` marks a non-evaluable state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorTrace {
    pub trial_id: String,
    pub errors: Vec<Option<f64>>,
}

impl ErrorTrace {
    fn evaluable(&self) -> Vec<f64> {
        self.errors.iter().flatten().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// Evaluation report this section was built from.
    pub source: String,
    pub total_states: usize,
    pub evaluable_states: usize,
    pub descriptives: DescriptiveStats,
    pub trials: Vec<TrialSummary>,
    pub aggregate: TrialAggregate,
    pub traces: Vec<ErrorTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialLabel {
    pub trial_id: String,
    pub condition: Condition,
    pub score: f64,
    pub class: TrialClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub aggregate: Aggregate,
    pub threshold: f64,
    pub tuned: bool,
    pub labels: Vec<TrialLabel>,
    /// Trials without a single evaluable state.
    pub unclassifiable: Vec<String>,
    pub metrics: ConfusionMetrics,
    pub roc: Vec<RocPoint>,
}

/// Output of `analyze`, extended in place by `classify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub tool: String,
    pub params: ErrorParams,
    pub scope: TrainingScope,
    pub training: String,
    pub training_states: usize,
    pub success: ConditionReport,
    pub failure: ConditionReport,
    /// Failure range over success range; `None` when the success range is zero.
    pub range_ratio: Option<f64>,
    pub permutation: PermutationResult,
    pub classification: Option<Classification>,
}

/// Files written by `synth`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub training: PathBuf,
    pub success: PathBuf,
    pub failure: PathBuf,
    pub config: PathBuf,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| CliError::Report { path: path.display().to_string(), source })
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialise");
    text.push('\n');
    match out {
        Some(path) => fs::write(path, text).map_err(io_err(path)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn cmd_synth(args: &SynthArgs) -> Result<SynthOutput, CliError> {
    let mut config = match &args.config {
        Some(path) => SynthConfig::load(path)?,
        None => SynthConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let experiment = generate_experiment(&config)?;

    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    let output = SynthOutput {
        training: args.out.join(TRAINING_FILE),
        success: args.out.join(SUCCESS_FILE),
        failure: args.out.join(FAILURE_FILE),
        config: args.out.join(CONFIG_FILE),
    };
    save_dataset(&experiment.training, &output.training)?;
    save_dataset(&experiment.success, &output.success)?;
    save_dataset(&experiment.failure, &output.failure)?;
    // The effective config, so the files can be regenerated.
    fs::write(&output.config, config.to_toml_string()).map_err(io_err(&output.config))?;
    Ok(output)
}

pub fn cmd_eval(args: &EvalArgs) -> Result<EvalReport, CliError> {
    let p = args.params;
    let params = derive_params(p.k, p.n_min, p.r, p.delta, p.phi, args.mode.into())?
        .with_angle_convention(args.angle_convention.into());
    let training = load_dataset(&args.training)?;
    let test = load_dataset(&args.test)?;
    if training.k != params.k {
        return Err(CliError::Mismatch(format!(
            "--params gives k={} but {} has k={}",
            params.k,
            args.training.display(),
            training.k
        )));
    }
    let scope = match args.scope {
        ScopeArg::Full => TrainingScope::Full,
        ScopeArg::TargetArea => TrainingScope::TargetArea { count: args.target_count },
    };
    let run = evaluate_dataset(&test, &training, &params, scope)?;

    let condition = match test.trials.split_first() {
        Some((first, rest)) if rest.iter().all(|t| t.condition == first.condition) => Some(first.condition),
        _ => None,
    };
    let report = EvalReport {
        tool: TOOL.to_string(),
        training: args.training.display().to_string(),
        test: args.test.display().to_string(),
        condition,
        params: run.params,
        scope: run.scope,
        training_states: run.training_states,
        total_states: run.total_states(),
        evaluable_states: run.evaluable_states(),
        trials: run.trials,
    };
    write_json(&report, args.out.as_deref())?;
    Ok(report)
}

fn condition_report(report: &EvalReport, source: &Path, label: &str) -> Result<ConditionReport, CliError> {
    let run = report.to_run();
    let errors = run.evaluable_errors();
    let descriptives =
        descriptives(&errors).map_err(CliError::analysis(format!("{label} report has no evaluable states")))?;
    let trials = trial_summaries(&run);
    let aggregate = aggregate_trials(&trials);
    let traces = report
        .trials
        .iter()
        .map(|t| ErrorTrace { trial_id: t.trial_id.clone(), errors: t.states.iter().map(|s| s.error).collect() })
        .collect();
    Ok(ConditionReport {
        source: source.display().to_string(),
        total_states: report.total_states,
        evaluable_states: report.evaluable_states,
        descriptives,
        trials,
        aggregate,
        traces,
    })
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<ReportDocument, CliError> {
    let success: EvalReport = read_json(&args.success)?;
    let failure: EvalReport = read_json(&args.failure)?;
    if success.params != failure.params || success.scope != failure.scope || success.training != failure.training {
        return Err(CliError::Mismatch(
            "success and failure reports were evaluated with different training data, parameters or scope".into(),
        ));
    }
    let success_section = condition_report(&success, &args.success, "success")?;
    let failure_section = condition_report(&failure, &args.failure, "failure")?;
    let permutation = permutation_test(
        &success.to_run().evaluable_errors(),
        &failure.to_run().evaluable_errors(),
        args.permutations,
        args.seed,
    )
    .map_err(CliError::analysis("permutation test"))?;

    let document = ReportDocument {
        tool: TOOL.to_string(),
        params: success.params,
        scope: success.scope,
        training: success.training.clone(),
        training_states: success.training_states,
        range_ratio: range_ratio(&success_section.descriptives, &failure_section.descriptives).ok(),
        success: success_section,
        failure: failure_section,
        permutation,
        classification: None,
    };
    write_json(&document, args.out.as_deref())?;
    Ok(document)
}

/// Labels every trial of an analysis report. Either `threshold` is used as
/// given or, with `threshold = None`, tuned on the report itself.
pub fn classify_report(
    document: &ReportDocument,
    threshold: Option<f64>,
    aggregate: Aggregate,
) -> Result<Classification, CliError> {
    let mut scored = Vec::new();
    let mut unclassifiable = Vec::new();
    for (section, condition) in [(&document.success, Condition::Success), (&document.failure, Condition::Failure)] {
        for trace in &section.traces {
            match aggregate.score(&trace.evaluable()) {
                Some(score) => scored.push((trace.trial_id.clone(), condition, score)),
                None => unclassifiable.push(trace.trial_id.clone()),
            }
        }
    }
    let scores_of = |c: Condition| scored.iter().filter(|s| s.1 == c).map(|s| s.2).collect::<Vec<_>>();
    let (success_scores, failure_scores) = (scores_of(Condition::Success), scores_of(Condition::Failure));

    let (threshold, tuned) = match threshold {
        Some(t) => (t, false),
        None => {
            (tune_threshold(&success_scores, &failure_scores).map_err(CliError::analysis("threshold tuning"))?, true)
        }
    };
    let labels: Vec<TrialLabel> = scored
        .into_iter()
        .map(|(trial_id, condition, score)| TrialLabel {
            trial_id,
            condition,
            score,
            class: if score > threshold { TrialClass::Failure } else { TrialClass::NonFailure },
        })
        .collect();
    let predictions: Vec<TrialClass> = labels.iter().map(|l| l.class).collect();
    let truth: Vec<Condition> = labels.iter().map(|l| l.condition).collect();
    let metrics = confusion_metrics(&predictions, &truth).map_err(CliError::analysis("confusion metrics"))?;
    Ok(Classification {
        aggregate,
        threshold,
        tuned,
        labels,
        unclassifiable,
        metrics,
        roc: roc_points(&success_scores, &failure_scores),
    })
}

pub fn cmd_classify(args: &ClassifyArgs) -> Result<ReportDocument, CliError> {
    let mut document: ReportDocument = read_json(&args.report)?;
    let threshold = if args.tune { None } else { args.threshold };
    document.classification = Some(classify_report(&document, threshold, args.aggregate.into())?);
    write_json(&document, args.out.as_deref())?;
    Ok(document)
}

fn summary_line(command: &Command) -> Result<Option<String>, CliError> {
    Ok(match command {
        Command::Synth(a) => {
            let out = cmd_synth(a)?;
            Some(format!("wrote {}, {}, {}", out.training.display(), out.success.display(), out.failure.display()))
        }
        Command::Eval(a) => {
            let r = cmd_eval(a)?;
            a.out.as_ref().map(|path| {
                format!(
                    "{}: {}/{} states evaluable against {} training states",
                    path.display(),
                    r.evaluable_states,
                    r.total_states,
                    r.training_states
                )
            })
        }
        Command::Analyze(a) => {
            let d = cmd_analyze(a)?;
            a.out.as_ref().map(|path| {
                format!(
                    "{}: success mean {:.4}, failure mean {:.4}, p = {:.6}",
                    path.display(),
                    d.success.descriptives.mean,
                    d.failure.descriptives.mean,
                    d.permutation.p_value
                )
            })
        }
        Command::Classify(a) => {
            let d = cmd_classify(a)?;
            let c = d.classification.as_ref().expect("classification was just set");
            let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.3}"));
            a.out.as_ref().map(|path| {
                format!(
                    "{}: threshold {:.6}, sensitivity {}, specificity {}, {} unclassifiable",
                    path.display(),
                    c.threshold,
                    fmt(c.metrics.sensitivity),
                    fmt(c.metrics.specificity),
                    c.unclassifiable.len()
                )
            })
        }
    })
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match summary_line(&cli.command) {
        Ok(line) => {
            if let Some(line) = line {
                // Reports written to stdout stay parseable; the summary goes to stderr.
                eprintln!("{line}");
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}
