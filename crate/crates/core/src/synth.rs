//! Seeded synthetic ground truth and classifier noise.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{evaluate, tune_epsilon, CalibrationError, Evaluation, LabeledProbTrace, SplitFractions, TuningResult};
use crate::discovery::{select_best, threshold_sweep, DiscoveryError};
use crate::eventdata::{ActivityAlphabet, Distribution, EventDataError, EventLog, LabeledTrace, ProbTrace};
use crate::petri::{Marking, PetriNet, TransitionId};
use crate::report::format_float;

const SILENT_SEARCH_LIMIT: usize = 10_000;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("walk did not reach a final marking within {0} visible steps")]
    MaxLenExceeded(usize),
    #[error("walk reached the dead marking {0}")]
    Deadlock(String),
    #[error("walk finished without any visible activity")]
    EmptyWalk,
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error("label `{0}` is not in the alphabet")]
    UnknownLabel(String),
    #[error("trace count must be positive")]
    NoTraces,
    #[error(transparent)]
    Data(#[from] EventDataError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Discovery(#[from] DiscoveryError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionPair {
    /// True activity whose mass is moved.
    pub from: String,
    /// Activity receiving the mass.
    pub to: String,
    pub swap_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    /// Per-event Dirichlet draw with parameter `concentration` on the true
    /// label and 1 elsewhere.
    Dirichlet { concentration: f64 },
    /// One-hot truth with `swap_mass` moved to a confusable partner.
    Confusion { pairs: Vec<ConfusionPair> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    #[serde(flatten)]
    pub kind: NoiseKind,
    #[serde(default)]
    pub seed: u64,
}

impl NoiseModel {
    pub fn dirichlet(concentration: f64, seed: u64) -> Self {
        NoiseModel {
            kind: NoiseKind::Dirichlet { concentration },
            seed,
        }
    }

    pub fn confusion(pairs: &[(&str, &str, f64)], seed: u64) -> Self {
        let pairs = pairs
            .iter()
            .map(|&(from, to, swap_mass)| ConfusionPair {
                from: from.into(),
                to: to.into(),
                swap_mass,
            })
            .collect();
        NoiseModel {
            kind: NoiseKind::Confusion { pairs },
            seed,
        }
    }

    /// No noise: every event is the one-hot truth.
    pub fn none() -> Self {
        NoiseModel::confusion(&[], 0)
    }

    pub fn validate(&self, alphabet: &ActivityAlphabet) -> Result<(), SynthError> {
        match &self.kind {
            NoiseKind::Dirichlet { concentration } => {
                if !(concentration.is_finite() && *concentration > 0.0) {
                    return Err(SynthError::InvalidNoise(format!("concentration {concentration} must be positive")));
                }
            }
            NoiseKind::Confusion { pairs } => {
                for p in pairs {
                    for label in [&p.from, &p.to] {
                        if !alphabet.contains(label) {
                            return Err(SynthError::UnknownLabel(label.clone()));
                        }
                    }
                    if !(0.0..1.0).contains(&p.swap_mass) {
                        return Err(SynthError::InvalidNoise(format!("swap mass {} outside [0, 1)", p.swap_mass)));
                    }
                    if p.from == p.to {
                        return Err(SynthError::InvalidNoise(format!("`{}` confused with itself", p.from)));
                    }
                }
                for label in alphabet.labels() {
                    let total: f64 = pairs.iter().filter(|p| &p.from == label).map(|p| p.swap_mass).sum();
                    if total >= 1.0 {
                        return Err(SynthError::InvalidNoise(format!("swap masses from `{label}` sum to {total}")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Generator for stream `stream` of `seed`; distinct streams are independent.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

enum Choice {
    Fire(Marking, TransitionId),
    Finish,
}

fn walk<R: Rng>(net: &PetriNet, rng: &mut R, max_len: usize) -> Result<Vec<String>, SynthError> {
    let mut marking = net.initial_marking().clone();
    let mut labels = Vec::new();
    loop {
        let closure = net.silent_closure(&marking, SILENT_SEARCH_LIMIT);
        let mut choices: Vec<Choice> = Vec::new();
        let mut seen: Vec<TransitionId> = Vec::new();
        for (m, _) in &closure {
            for t in net.enabled(m) {
                if !net.transition(t).is_silent() && !seen.contains(&t) {
                    seen.push(t);
                    choices.push(Choice::Fire(m.clone(), t));
                }
            }
        }
        if closure.iter().any(|(m, _)| net.is_final(m)) {
            choices.push(Choice::Finish);
        }
        if choices.is_empty() {
            return Err(SynthError::Deadlock(net.format_marking(&marking)));
        }
        match &choices[rng.random_range(0..choices.len())] {
            Choice::Finish => return Ok(labels),
            Choice::Fire(m, t) => {
                if labels.len() == max_len {
                    return Err(SynthError::MaxLenExceeded(max_len));
                }
                let transition = net.transition(*t);
                labels.push(transition.label.clone().unwrap_or_default());
                marking = net.fire_unchecked(m, *t);
            }
        }
    }
}

/// Uniform random walk over the enabled visible transitions, silent ones
/// being fired as needed. Where a final marking is reachable silently,
/// stopping is one more option of the uniform choice.
pub fn sample_trace(net: &PetriNet, seed: u64, max_len: usize) -> Result<LabeledTrace, SynthError> {
    sample_trace_with(net, &mut stream_rng(seed, 0), max_len, seed.to_string())
}

fn sample_trace_with<R: Rng>(net: &PetriNet, rng: &mut R, max_len: usize, case_id: String) -> Result<LabeledTrace, SynthError> {
    let labels = walk(net, rng, max_len)?;
    if labels.is_empty() {
        return Err(SynthError::EmptyWalk);
    }
    Ok(LabeledTrace::new(case_id, labels, None)?)
}

fn noisy_event<R: Rng>(truth: usize, noise: &NoiseModel, alphabet: &ActivityAlphabet, rng: &mut R) -> Vec<f64> {
    let n = alphabet.len();
    match &noise.kind {
        NoiseKind::Dirichlet { concentration } => {
            let mut raw: Vec<f64> = (0..n)
                .map(|i| {
                    let shape = if i == truth { *concentration } else { 1.0 };
                    Gamma::new(shape, 1.0).expect("validated shape").sample(rng)
                })
                .collect();
            let total: f64 = raw.iter().sum();
            raw.iter_mut().for_each(|x| *x /= total);
            if raw[truth] == 0.0 {
                raw[truth] = f64::MIN_POSITIVE;
            }
            raw
        }
        NoiseKind::Confusion { pairs } => {
            let mut raw = vec![0.0; n];
            raw[truth] = 1.0;
            let label = alphabet.label(truth);
            for p in pairs.iter().filter(|p| p.from == label) {
                let to = alphabet.index_of(&p.to).expect("validated label");
                raw[truth] -= p.swap_mass;
                raw[to] += p.swap_mass;
            }
            raw
        }
    }
}

/// Probabilistic version of `truth` under `noise`, seeded by `noise.seed`.
pub fn corrupt(truth: &LabeledTrace, noise: &NoiseModel, alphabet: &ActivityAlphabet) -> Result<LabeledProbTrace, SynthError> {
    corrupt_with(truth, noise, alphabet, &mut stream_rng(noise.seed, 0))
}

fn corrupt_with<R: Rng>(
    truth: &LabeledTrace,
    noise: &NoiseModel,
    alphabet: &ActivityAlphabet,
    rng: &mut R,
) -> Result<LabeledProbTrace, SynthError> {
    noise.validate(alphabet)?;
    let mut events = Vec::with_capacity(truth.len());
    for label in truth.activities() {
        let idx = alphabet.index_of(label).ok_or_else(|| SynthError::UnknownLabel(label.clone()))?;
        let raw = noisy_event(idx, noise, alphabet, rng);
        let dist = Distribution::normalized(raw).map_err(|source| EventDataError::InvalidEvent {
            event: events.len(),
            source,
        })?;
        events.push(dist);
    }
    let trace = ProbTrace::new(truth.case_id(), alphabet.clone(), events)?;
    Ok(LabeledProbTrace::new(trace, truth.activities().to_vec())?)
}

/// Alphabet of the visible labels of `net`, in transition order.
pub fn net_alphabet(net: &PetriNet) -> Result<ActivityAlphabet, SynthError> {
    Ok(ActivityAlphabet::new(net.visible_labels())?)
}

/// `n` seeded traces sampled from `net` and corrupted with `noise`. Trace
/// `i` uses stream `i` of `seed` for sampling and of `noise.seed` for noise.
pub fn generate_corpus(
    net: &PetriNet,
    n: usize,
    max_len: usize,
    noise: &NoiseModel,
    seed: u64,
) -> Result<Vec<LabeledProbTrace>, SynthError> {
    let alphabet = net_alphabet(net)?;
    noise.validate(&alphabet)?;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let truth = sample_trace_with(net, &mut stream_rng(seed, i as u64), max_len, format!("case{i:05}"))?;
            corrupt_with(&truth, noise, &alphabet, &mut stream_rng(noise.seed, i as u64))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentParams {
    pub n_traces: usize,
    pub max_len: usize,
    pub noise: NoiseModel,
    pub epsilon_grid: Vec<f64>,
    #[serde(default)]
    pub fractions: SplitFractions,
    #[serde(default)]
    pub seed: u64,
    /// When set, the model is discovered from the training truths with this
    /// threshold grid instead of using the generating net.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discovery_grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub noise_seed: u64,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub discovery_threshold: Option<f64>,
    pub best_epsilon: f64,
    pub baseline_accuracy: f64,
    pub calibrated_accuracy: f64,
    pub baseline_macro_f1: f64,
    pub calibrated_macro_f1: f64,
    /// Calibrated minus baseline test accuracy.
    pub improvement: f64,
    pub tuning: TuningResult,
    pub evaluation: Evaluation,
}

pub struct Experiment {
    pub report: ExperimentReport,
    pub model: PetriNet,
    pub corpus: Vec<LabeledProbTrace>,
}

/// Samples a corpus, splits it by whole traces, tunes epsilon on the
/// validation part and evaluates both labelings on the test part.
pub fn run_experiment(net: &PetriNet, params: &ExperimentParams) -> Result<Experiment, SynthError> {
    if params.n_traces == 0 {
        return Err(SynthError::NoTraces);
    }
    params.fractions.validate()?;
    let corpus = generate_corpus(net, params.n_traces, params.max_len, &params.noise, params.seed)?;
    let (train, val, test) = params.fractions.split(&corpus)?;

    let (model, discovery_threshold) = match &params.discovery_grid {
        None => (net.clone(), None),
        Some(grid) => {
            let source = if train.is_empty() { val } else { train };
            let log = EventLog::from_sequences(source.iter().map(|t| t.truth().iter().cloned()))?;
            let sweep = threshold_sweep(&log, grid)?;
            let reports: Vec<_> = sweep.iter().map(|e| e.report.clone()).collect();
            let best = select_best(&reports).expect("sweep over a non-empty grid");
            (sweep[best].net.clone(), Some(reports[best].threshold))
        }
    };

    let tuning = tune_epsilon(val, &model, &params.epsilon_grid)?;
    let evaluation = evaluate(test, &model, tuning.best_epsilon)?;
    let report = ExperimentReport {
        seed: params.seed,
        noise_seed: params.noise.seed,
        n_train: train.len(),
        n_val: val.len(),
        n_test: test.len(),
        discovery_threshold,
        best_epsilon: tuning.best_epsilon,
        baseline_accuracy: evaluation.baseline.accuracy,
        calibrated_accuracy: evaluation.calibrated.accuracy,
        baseline_macro_f1: evaluation.baseline.macro_f1,
        calibrated_macro_f1: evaluation.calibrated.macro_f1,
        improvement: evaluation.accuracy_gain(),
        tuning,
        evaluation,
    };
    Ok(Experiment {
        report,
        model,
        corpus,
    })
}

/// Runs `repetitions` experiments; repetition `r` offsets both the sampling
/// and the noise seed by `r`.
pub fn run_repetitions(net: &PetriNet, params: &ExperimentParams, repetitions: u64) -> Result<Vec<ExperimentReport>, SynthError> {
    (0..repetitions)
        .into_par_iter()
        .map(|r| {
            let mut p = params.clone();
            p.seed = params.seed.wrapping_add(r);
            p.noise.seed = params.noise.seed.wrapping_add(r);
            run_experiment(net, &p).map(|e| e.report)
        })
        .collect()
}

/// Per-seed accuracy table.
pub fn write_seed_csv<W: Write>(reports: &[ExperimentReport], writer: W) -> Result<(), SynthError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "seed",
        "best_epsilon",
        "baseline_accuracy",
        "calibrated_accuracy",
        "baseline_macro_f1",
        "calibrated_macro_f1",
        "improvement",
    ])?;
    for r in reports {
        w.write_record([
            r.seed.to_string(),
            format_float(r.best_epsilon),
            format_float(r.baseline_accuracy),
            format_float(r.calibrated_accuracy),
            format_float(r.baseline_macro_f1),
            format_float(r.calibrated_macro_f1),
            format_float(r.improvement),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::default_epsilon_grid;
    use crate::petri::fixtures::drink_or_phone;

    fn disambiguable_noise(seed: u64) -> NoiseModel {
        NoiseModel::confusion(
            &[("DrinkFromCup", "AnswerPhone", 0.55), ("AnswerPhone", "DrinkFromCup", 0.55)],
            seed,
        )
    }

    #[test]
    fn fixture_walks_yield_the_two_sequences() {
        let net = drink_or_phone();
        let mut seen = std::collections::BTreeSet::new();
        for seed in 0..50 {
            let t = sample_trace(&net, seed, 10).unwrap();
            seen.insert(t.activities().join(","));
        }
        let expected: std::collections::BTreeSet<String> = ["PickUpCup,DrinkFromCup,PutDownCup", "PickUpCup,AnswerPhone"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(seen, expected);
    }

    #[test]
    fn walk_respects_max_len() {
        assert!(matches!(sample_trace(&drink_or_phone(), 3, 1), Err(SynthError::MaxLenExceeded(1))));
        assert_eq!(sample_trace(&drink_or_phone(), 42, 10).unwrap(), sample_trace(&drink_or_phone(), 42, 10).unwrap());
    }

    #[test]
    fn confusion_moves_mass() {
        let net = drink_or_phone();
        let alphabet = net_alphabet(&net).unwrap();
        let truth = LabeledTrace::new("c", vec!["PickUpCup".into(), "DrinkFromCup".into()], None).unwrap();
        let t = corrupt(&truth, &disambiguable_noise(1), &alphabet).unwrap();
        let e = &t.trace().events()[1];
        let drink = alphabet.index_of("DrinkFromCup").unwrap();
        let phone = alphabet.index_of("AnswerPhone").unwrap();
        assert!((e.prob(drink) - 0.45).abs() < 1e-12);
        assert!((e.prob(phone) - 0.55).abs() < 1e-12);
        assert_eq!(e.argmax(), phone);
        assert_eq!(t.trace().events()[0].argmax(), alphabet.index_of("PickUpCup").unwrap());

        let mild = NoiseModel::confusion(&[("DrinkFromCup", "AnswerPhone", 0.49)], 1);
        let t = corrupt(&truth, &mild, &alphabet).unwrap();
        assert_eq!(t.trace().events()[1].argmax(), drink);
    }

    #[test]
    fn dirichlet_is_seeded_and_keeps_truth_positive() {
        let net = drink_or_phone();
        let alphabet = net_alphabet(&net).unwrap();
        let truth = sample_trace(&net, 5, 10).unwrap();
        let noise = NoiseModel::dirichlet(2.0, 9);
        let a = corrupt(&truth, &noise, &alphabet).unwrap();
        assert_eq!(a, corrupt(&truth, &noise, &alphabet).unwrap());
        for (e, label) in a.trace().events().iter().zip(truth.activities()) {
            assert!(e.prob(alphabet.index_of(label).unwrap()) > 0.0);
        }
        let sharp = corrupt(&truth, &NoiseModel::dirichlet(1e6, 9), &alphabet).unwrap();
        for (e, label) in sharp.trace().events().iter().zip(truth.activities()) {
            assert!(e.prob(alphabet.index_of(label).unwrap()) > 0.999);
        }
    }

    #[test]
    fn invalid_noise_is_rejected() {
        let alphabet = net_alphabet(&drink_or_phone()).unwrap();
        assert!(NoiseModel::dirichlet(0.0, 0).validate(&alphabet).is_err());
        assert!(NoiseModel::confusion(&[("PickUpCup", "X", 0.2)], 0).validate(&alphabet).is_err());
        assert!(NoiseModel::confusion(&[("PickUpCup", "PutDownCup", 1.0)], 0).validate(&alphabet).is_err());
    }

    fn params(noise: NoiseModel, grid: Vec<f64>) -> ExperimentParams {
        ExperimentParams {
            n_traces: 40,
            max_len: 20,
            noise,
            epsilon_grid: grid,
            fractions: SplitFractions::default(),
            seed: 11,
            discovery_grid: None,
        }
    }

    #[test]
    fn zero_noise_experiment() {
        let e = run_experiment(&drink_or_phone(), &params(NoiseModel::none(), default_epsilon_grid())).unwrap();
        assert_eq!(e.report.baseline_accuracy, 1.0);
        assert_eq!(e.report.calibrated_accuracy, 1.0);
        assert_eq!(e.report.improvement, 0.0);
        assert_eq!((e.report.n_train, e.report.n_val, e.report.n_test), (24, 8, 8));
    }

    #[test]
    fn disambiguable_confusion_improves_accuracy() {
        let e = run_experiment(&drink_or_phone(), &params(disambiguable_noise(3), default_epsilon_grid())).unwrap();
        assert!(e.report.calibrated_accuracy > e.report.baseline_accuracy);
        assert_eq!(e.report.calibrated_accuracy, 1.0);
        assert!(e.report.best_epsilon <= 0.5);
    }

    #[test]
    fn top_of_grid_gives_no_improvement() {
        let e = run_experiment(&drink_or_phone(), &params(disambiguable_noise(3), vec![0.95])).unwrap();
        assert!(e.report.improvement.abs() < 1e-12);
    }

    #[test]
    fn discovered_model_experiment() {
        let mut p = params(disambiguable_noise(4), default_epsilon_grid());
        p.discovery_grid = Some(vec![0.8, 0.9]);
        let e = run_experiment(&drink_or_phone(), &p).unwrap();
        assert!(e.report.discovery_threshold.is_some());
        assert!(e.report.improvement >= 0.0);
    }

    #[test]
    fn repetitions_and_csv() {
        let reports = run_repetitions(&drink_or_phone(), &params(disambiguable_noise(0), vec![0.1, 0.9]), 3).unwrap();
        assert_eq!(reports.iter().map(|r| r.seed).collect::<Vec<_>>(), [11, 12, 13]);
        let mut buf = Vec::new();
        write_seed_csv(&reports, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    }
}
