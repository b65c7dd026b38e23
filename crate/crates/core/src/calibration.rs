//! Epsilon tuning on validation traces and event-level evaluation.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alignment::{align, retrieve_activities, AlignmentError, CostParams};
use crate::eventdata::{argmax_labeling, ActivityAlphabet, EventDataError, ProbTrace, ProbTraceRecord};
use crate::petri::PetriNet;
use crate::report::format_float;

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("{pred} predictions for {truth} ground-truth labels")]
    LengthMismatch { pred: usize, truth: usize },
    #[error("trace `{case_id}` has {events} events but {truth} ground-truth labels")]
    TruthLength { case_id: String, events: usize, truth: usize },
    #[error("ground-truth label `{label}` of trace `{case_id}` is not in the trace alphabet")]
    UnknownTruthLabel { case_id: String, label: String },
    #[error("record `{0}` has no ground-truth labels")]
    MissingTruth(String),
    #[error("validation set is empty")]
    EmptyValidation,
    #[error("test set is empty")]
    EmptyTest,
    #[error("epsilon grid is empty")]
    EmptyGrid,
    #[error("split fractions {0:?} must be non-negative and sum to 1")]
    InvalidFractions([f64; 3]),
    #[error("{n} traces leave the {part} split empty")]
    EmptySplit { n: usize, part: &'static str },
    #[error("aligning trace `{case_id}` at epsilon {epsilon}: {source}")]
    Align {
        case_id: String,
        epsilon: f64,
        #[source]
        source: AlignmentError,
    },
    #[error(transparent)]
    Data(#[from] EventDataError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// A probabilistic trace paired with its ground-truth activities.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledProbTrace {
    trace: ProbTrace,
    truth: Vec<String>,
}

impl LabeledProbTrace {
    pub fn new(trace: ProbTrace, truth: Vec<String>) -> Result<Self, CalibrationError> {
        if truth.len() != trace.len() {
            return Err(CalibrationError::TruthLength {
                case_id: trace.case_id().to_owned(),
                events: trace.len(),
                truth: truth.len(),
            });
        }
        if let Some(label) = truth.iter().find(|l| !trace.alphabet().contains(l)) {
            return Err(CalibrationError::UnknownTruthLabel {
                case_id: trace.case_id().to_owned(),
                label: label.clone(),
            });
        }
        Ok(LabeledProbTrace { trace, truth })
    }

    pub fn trace(&self) -> &ProbTrace {
        &self.trace
    }

    pub fn truth(&self) -> &[String] {
        &self.truth
    }

    pub fn to_record(&self) -> ProbTraceRecord {
        ProbTraceRecord {
            truth: Some(self.truth.clone()),
            ..self.trace.to_record()
        }
    }

    pub fn from_record(record: &ProbTraceRecord) -> Result<Self, CalibrationError> {
        let truth = record
            .truth
            .clone()
            .ok_or_else(|| CalibrationError::MissingTruth(record.case_id.clone()))?;
        LabeledProbTrace::new(record.to_trace()?, truth)
    }
}

/// Reads a labeled dataset: a JSON array of trace records, each with a
/// `truth` field.
pub fn read_dataset<R: Read>(reader: R) -> Result<Vec<LabeledProbTrace>, CalibrationError> {
    let records: Vec<ProbTraceRecord> = serde_json::from_reader(reader)?;
    records.iter().map(LabeledProbTrace::from_record).collect()
}

pub fn dataset_to_records(dataset: &[LabeledProbTrace]) -> Vec<ProbTraceRecord> {
    dataset.iter().map(LabeledProbTrace::to_record).collect()
}

pub fn accuracy(pred: &[String], truth: &[String]) -> Result<f64, CalibrationError> {
    if pred.len() != truth.len() {
        return Err(CalibrationError::LengthMismatch {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    if truth.is_empty() {
        return Ok(0.0);
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
}

fn safe_div(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Accuracy plus per-class and macro-averaged F1. The average runs over the
/// classes occurring in `truth` or `pred`, listed in alphabet order (labels
/// outside the alphabet follow, sorted).
pub fn macro_f1(pred: &[String], truth: &[String], alphabet: &ActivityAlphabet) -> Result<MetricsReport, CalibrationError> {
    let accuracy = accuracy(pred, truth)?;
    let present: BTreeSet<&str> = pred.iter().chain(truth).map(String::as_str).collect();
    let mut classes: Vec<&str> = alphabet
        .labels()
        .iter()
        .map(String::as_str)
        .filter(|l| present.contains(l))
        .collect();
    classes.extend(present.iter().filter(|l| !alphabet.contains(l)));

    let per_class: Vec<ClassMetrics> = classes
        .iter()
        .map(|&c| {
            let tp = pred.iter().zip(truth).filter(|(p, t)| *p == c && *t == c).count() as f64;
            let predicted = pred.iter().filter(|p| *p == c).count() as f64;
            let support = truth.iter().filter(|t| *t == c).count();
            let precision = safe_div(tp, predicted);
            let recall = safe_div(tp, support as f64);
            ClassMetrics {
                label: c.to_owned(),
                precision,
                recall,
                f1: safe_div(2.0 * precision * recall, precision + recall),
                support,
            }
        })
        .collect();
    let macro_f1 = safe_div(per_class.iter().map(|m| m.f1).sum(), per_class.len() as f64);
    Ok(MetricsReport {
        accuracy,
        macro_f1,
        per_class,
    })
}

/// Grid 0.05, 0.10, ..., 1.00.
pub fn default_epsilon_grid() -> Vec<f64> {
    (1..=20).map(|k| k as f64 / 20.0).collect()
}

/// Activities retrieved by aligning `trace` against `net` at `epsilon`.
pub fn calibrate(net: &PetriNet, trace: &ProbTrace, epsilon: f64) -> Result<Vec<String>, CalibrationError> {
    let wrap = |source| CalibrationError::Align {
        case_id: trace.case_id().to_owned(),
        epsilon,
        source,
    };
    let params = CostParams::new(epsilon).map_err(wrap)?;
    let alignment = align(net, trace, params).map_err(wrap)?;
    Ok(retrieve_activities(&alignment))
}

fn pooled<'a, I>(items: I) -> (Vec<String>, Vec<String>)
where
    I: IntoIterator<Item = (Vec<String>, &'a [String])>,
{
    let mut pred = Vec::new();
    let mut truth = Vec::new();
    for (p, t) in items {
        pred.extend(p);
        truth.extend_from_slice(t);
    }
    (pred, truth)
}

fn calibrate_all(
    net: &PetriNet,
    traces: &[LabeledProbTrace],
    epsilon: f64,
) -> Result<(Vec<String>, Vec<String>), CalibrationError> {
    let preds = traces
        .par_iter()
        .map(|t| calibrate(net, &t.trace, epsilon))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(pooled(preds.into_iter().zip(traces.iter().map(|t| t.truth.as_slice()))))
}

/// Train, validation and test shares of a dataset split by whole traces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.6,
            val: 0.2,
            test: 0.2,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<(), CalibrationError> {
        let parts = [self.train, self.val, self.test];
        let valid = parts.iter().all(|f| f.is_finite() && *f >= 0.0) && (parts.iter().sum::<f64>() - 1.0).abs() <= 1e-9;
        if valid {
            Ok(())
        } else {
            Err(CalibrationError::InvalidFractions(parts))
        }
    }

    /// Sizes of the three parts for `n` items; train and validation sizes
    /// are rounded, the test part takes the rest.
    pub fn counts(&self, n: usize) -> Result<(usize, usize, usize), CalibrationError> {
        self.validate()?;
        let train = ((n as f64) * self.train).round() as usize;
        let val = (((n as f64) * self.val).round() as usize).min(n - train.min(n));
        let train = train.min(n);
        let test = n - train - val;
        if val == 0 && self.val > 0.0 {
            return Err(CalibrationError::EmptySplit { n, part: "validation" });
        }
        if test == 0 && self.test > 0.0 {
            return Err(CalibrationError::EmptySplit { n, part: "test" });
        }
        Ok((train, val, test))
    }

    /// Consecutive train, validation and test slices of `items`.
    pub fn split<'a, T>(&self, items: &'a [T]) -> Result<(&'a [T], &'a [T], &'a [T]), CalibrationError> {
        let (train, val, _) = self.counts(items.len())?;
        let (a, rest) = items.split_at(train);
        let (b, c) = rest.split_at(val);
        Ok((a, b, c))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub grid: Vec<f64>,
    pub accuracy_per_epsilon: Vec<f64>,
    pub best_epsilon: f64,
}

impl TuningResult {
    pub fn best_accuracy(&self) -> f64 {
        self.grid
            .iter()
            .position(|&e| e == self.best_epsilon)
            .map_or(0.0, |i| self.accuracy_per_epsilon[i])
    }

    /// `epsilon,accuracy` rows in grid order.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), CalibrationError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["epsilon", "accuracy"])?;
        for (e, a) in self.grid.iter().zip(&self.accuracy_per_epsilon) {
            w.write_record([format_float(*e), format_float(*a)])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Pooled validation accuracy for every grid point; the best epsilon is the
/// smallest one reaching the maximum.
pub fn tune_epsilon(val: &[LabeledProbTrace], net: &PetriNet, grid: &[f64]) -> Result<TuningResult, CalibrationError> {
    if val.is_empty() {
        return Err(CalibrationError::EmptyValidation);
    }
    if grid.is_empty() {
        return Err(CalibrationError::EmptyGrid);
    }
    let accuracy_per_epsilon = grid
        .par_iter()
        .map(|&epsilon| {
            let (pred, truth) = calibrate_all(net, val, epsilon)?;
            accuracy(&pred, &truth)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut best = 0;
    for i in 1..grid.len() {
        let (a, b) = (accuracy_per_epsilon[i], accuracy_per_epsilon[best]);
        if a > b || (a == b && grid[i] < grid[best]) {
            best = i;
        }
    }
    Ok(TuningResult {
        grid: grid.to_vec(),
        accuracy_per_epsilon,
        best_epsilon: grid[best],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub epsilon: f64,
    pub calibrated: MetricsReport,
    pub baseline: MetricsReport,
}

impl Evaluation {
    pub fn accuracy_gain(&self) -> f64 {
        self.calibrated.accuracy - self.baseline.accuracy
    }
}

/// Pooled metrics of the aligned labeling and of the argmax labeling.
pub fn evaluate(test: &[LabeledProbTrace], net: &PetriNet, epsilon: f64) -> Result<Evaluation, CalibrationError> {
    let first = test.first().ok_or(CalibrationError::EmptyTest)?;
    let alphabet = first.trace.alphabet();
    let (pred, truth) = calibrate_all(net, test, epsilon)?;
    let (base, _) = pooled(test.iter().map(|t| (argmax_labeling(&t.trace), t.truth.as_slice())));
    Ok(Evaluation {
        epsilon,
        calibrated: macro_f1(&pred, &truth, alphabet)?,
        baseline: macro_f1(&base, &truth, alphabet)?,
    })
}
