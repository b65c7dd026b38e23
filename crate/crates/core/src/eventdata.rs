//! Activity alphabets, labeled event logs and probabilistic event traces.
//!
//! Two ingestion formats are supported:
//!
//! * event logs as CSV with a `case`, an `activity` and an optional
//!   `timestamp` column, grouped into one [`LabeledTrace`] per case;
//! * probabilistic traces either as CSV (header = activity labels, one row
//!   per event in chronological order) or as JSON
//!   (`{"case_id": .., "labels": [..], "events": [[..], ..]}`).
//!
//! Every parsed event distribution is checked to sum to one within
//! [`SUM_TOLERANCE`] and then renormalized.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};

use chrono::{DateTime, FixedOffset, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Accepted deviation of a raw event distribution's sum from one.
pub const SUM_TOLERANCE: f64 = 1e-2;

#[derive(Debug, Error)]
pub enum EventDataError {
    #[error("input is empty")]
    Empty,
    #[error("missing column `{0}` in header")]
    MissingColumn(&'static str),
    #[error("line {line}: empty value in column `{column}`")]
    EmptyCell { line: u64, column: &'static str },
    #[error("line {line}, column `timestamp`: cannot parse `{value}` as an ISO-8601 instant")]
    Timestamp { line: u64, value: String },
    #[error("event {event}: expected {expected} probabilities, found {found}")]
    RowLength {
        event: usize,
        expected: usize,
        found: usize,
    },
    #[error("event {event}, column {column}: `{value}` is not a number")]
    NotANumber {
        event: usize,
        column: usize,
        value: String,
    },
    #[error("event {event}: {source}")]
    InvalidEvent {
        event: usize,
        #[source]
        source: ProbabilityError,
    },
    #[error("trace has no events")]
    NoEvents,
    #[error("activity label must not be empty")]
    EmptyLabel,
    #[error("duplicate activity label `{0}`")]
    DuplicateLabel(String),
    #[error("activity `{0}` is not in the alphabet")]
    UnknownLabel(String),
    #[error("duplicate case id `{0}`")]
    DuplicateCase(String),
    #[error("case `{0}`: timestamps are not in chronological order")]
    UnorderedTimestamps(String),
    #[error("case `{case}`: {activities} activities but {timestamps} timestamps")]
    TimestampCount {
        case: String,
        activities: usize,
        timestamps: usize,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProbabilityError {
    #[error("negative probability {value} for activity {index}")]
    Negative { index: usize, value: f64 },
    #[error("non-finite probability for activity {index}")]
    NotFinite { index: usize },
    #[error("probabilities sum to {sum}, outside tolerance {SUM_TOLERANCE} of 1")]
    SumOutsideTolerance { sum: f64 },
    #[error("empty distribution")]
    Empty,
}

/// Ordered set of activity names. Positions define the identity of
/// distribution entries.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(into = "Vec<String>", try_from = "Vec<String>")]
pub struct ActivityAlphabet {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl ActivityAlphabet {
    pub fn new<I, S>(labels: I) -> Result<Self, EventDataError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut alphabet = ActivityAlphabet::default();
        for label in labels {
            let label = label.into();
            if alphabet.index.contains_key(&label) {
                return Err(EventDataError::DuplicateLabel(label));
            }
            alphabet.push(label)?;
        }
        Ok(alphabet)
    }

    /// Builds an alphabet of the distinct labels in order of first appearance.
    pub fn from_appearance<I, S>(labels: I) -> Result<Self, EventDataError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut alphabet = ActivityAlphabet::default();
        for label in labels {
            let label = label.as_ref();
            if !alphabet.index.contains_key(label) {
                alphabet.push(label.to_owned())?;
            }
        }
        Ok(alphabet)
    }

    fn push(&mut self, label: String) -> Result<usize, EventDataError> {
        if label.is_empty() {
            return Err(EventDataError::EmptyLabel);
        }
        let idx = self.labels.len();
        self.index.insert(label.clone(), idx);
        self.labels.push(label);
        Ok(idx)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index.contains_key(label)
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

impl From<ActivityAlphabet> for Vec<String> {
    fn from(alphabet: ActivityAlphabet) -> Self {
        alphabet.labels
    }
}

impl TryFrom<Vec<String>> for ActivityAlphabet {
    type Error = EventDataError;

    fn try_from(labels: Vec<String>) -> Result<Self, Self::Error> {
        ActivityAlphabet::new(labels)
    }
}

/// A probability distribution over an [`ActivityAlphabet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    /// Validates raw classifier output and renormalizes it to sum to one.
    ///
    /// Entries must be finite and non-negative and their sum must lie within
    /// [`SUM_TOLERANCE`] of one. Zeros stay exact zeros.
    pub fn normalized(raw: Vec<f64>) -> Result<Self, ProbabilityError> {
        if raw.is_empty() {
            return Err(ProbabilityError::Empty);
        }
        for (index, &value) in raw.iter().enumerate() {
            if !value.is_finite() {
                return Err(ProbabilityError::NotFinite { index });
            }
            if value < 0.0 {
                return Err(ProbabilityError::Negative { index, value });
            }
        }
        let sum: f64 = raw.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(ProbabilityError::SumOutsideTolerance { sum });
        }
        let probs = raw.into_iter().map(|p| p / sum).collect();
        Ok(Distribution { probs })
    }

    /// A distribution putting all mass on `index`.
    pub fn one_hot(len: usize, index: usize) -> Self {
        let mut probs = vec![0.0; len];
        probs[index] = 1.0;
        Distribution { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, index: usize) -> f64 {
        self.probs[index]
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Index of the most probable activity; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate().skip(1) {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn max(&self) -> f64 {
        self.probs[self.argmax()]
    }
}

/// Chronologically ordered per-event distributions of one case.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbTrace {
    case_id: String,
    alphabet: ActivityAlphabet,
    events: Vec<Distribution>,
}

impl ProbTrace {
    pub fn new(
        case_id: impl Into<String>,
        alphabet: ActivityAlphabet,
        events: Vec<Distribution>,
    ) -> Result<Self, EventDataError> {
        if events.is_empty() {
            return Err(EventDataError::NoEvents);
        }
        for (event, dist) in events.iter().enumerate() {
            if dist.len() != alphabet.len() {
                return Err(EventDataError::RowLength {
                    event,
                    expected: alphabet.len(),
                    found: dist.len(),
                });
            }
        }
        Ok(ProbTrace {
            case_id: case_id.into(),
            alphabet,
            events,
        })
    }

    /// Builds a trace from raw rows, validating and renormalizing each.
    pub fn from_rows(
        case_id: impl Into<String>,
        alphabet: ActivityAlphabet,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self, EventDataError> {
        let mut events = Vec::with_capacity(rows.len());
        for (event, row) in rows.into_iter().enumerate() {
            if row.len() != alphabet.len() {
                return Err(EventDataError::RowLength {
                    event,
                    expected: alphabet.len(),
                    found: row.len(),
                });
            }
            let dist = Distribution::normalized(row)
                .map_err(|source| EventDataError::InvalidEvent { event, source })?;
            events.push(dist);
        }
        ProbTrace::new(case_id, alphabet, events)
    }

    pub fn case_id(&self) -> &str {
        &self.case_id
    }

    pub fn with_case_id(mut self, case_id: impl Into<String>) -> Self {
        self.case_id = case_id.into();
        self
    }

    pub fn alphabet(&self) -> &ActivityAlphabet {
        &self.alphabet
    }

    pub fn events(&self) -> &[Distribution] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn to_record(&self) -> ProbTraceRecord {
        ProbTraceRecord {
            case_id: self.case_id.clone(),
            labels: self.alphabet.labels().to_vec(),
            events: self.events.iter().map(|d| d.probs.clone()).collect(),
            truth: None,
        }
    }
}

/// Serialized form of a [`ProbTrace`], optionally carrying ground-truth
/// labels (one per event).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbTraceRecord {
    #[serde(default)]
    pub case_id: String,
    pub labels: Vec<String>,
    pub events: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Vec<String>>,
}

impl ProbTraceRecord {
    pub fn to_trace(&self) -> Result<ProbTrace, EventDataError> {
        let alphabet = ActivityAlphabet::new(self.labels.iter().cloned())?;
        ProbTrace::from_rows(self.case_id.clone(), alphabet, self.events.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceFormat {
    Csv,
    Json,
}

impl TraceFormat {
    /// Guesses the format from a file extension (`.json` vs anything else).
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => TraceFormat::Json,
            _ => TraceFormat::Csv,
        }
    }
}

impl fmt::Display for TraceFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceFormat::Csv => f.write_str("csv"),
            TraceFormat::Json => f.write_str("json"),
        }
    }
}

/// Parses a probabilistic trace. CSV input carries no case id; set one with
/// [`ProbTrace::with_case_id`].
pub fn parse_prob_trace<R: Read>(reader: R, format: TraceFormat) -> Result<ProbTrace, EventDataError> {
    match format {
        TraceFormat::Json => {
            let record: ProbTraceRecord = serde_json::from_reader(reader)?;
            record.to_trace()
        }
        TraceFormat::Csv => parse_prob_trace_csv(reader),
    }
}

fn parse_prob_trace_csv<R: Read>(reader: R) -> Result<ProbTrace, EventDataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(EventDataError::Empty);
    }
    let alphabet = ActivityAlphabet::new(header.iter().map(str::to_owned))?;
    let mut rows = Vec::new();
    for (event, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != alphabet.len() {
            return Err(EventDataError::RowLength {
                event,
                expected: alphabet.len(),
                found: record.len(),
            });
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(column, cell)| {
                cell.parse::<f64>().map_err(|_| EventDataError::NotANumber {
                    event,
                    column,
                    value: cell.to_owned(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    ProbTrace::from_rows(String::new(), alphabet, rows)
}

pub fn write_prob_trace<W: Write>(
    trace: &ProbTrace,
    writer: W,
    format: TraceFormat,
) -> Result<(), EventDataError> {
    match format {
        TraceFormat::Json => {
            serde_json::to_writer_pretty(writer, &trace.to_record())?;
        }
        TraceFormat::Csv => {
            let mut wtr = csv::Writer::from_writer(writer);
            wtr.write_record(trace.alphabet().labels())?;
            for dist in trace.events() {
                wtr.write_record(dist.probs().iter().map(|p| p.to_string()))?;
            }
            wtr.flush()?;
        }
    }
    Ok(())
}

/// Most probable label per event, ties broken by alphabet position.
pub fn argmax_labeling(trace: &ProbTrace) -> Vec<String> {
    trace
        .events()
        .iter()
        .map(|d| trace.alphabet().label(d.argmax()).to_owned())
        .collect()
}

pub type Timestamp = DateTime<FixedOffset>;

/// Parses an ISO-8601 instant. Values without an offset are read as UTC.
pub fn parse_timestamp(value: &str) -> Option<Timestamp> {
    if let Ok(ts) = DateTime::parse_from_rfc3339(value) {
        return Some(ts);
    }
    let utc = FixedOffset::east_opt(0)?;
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(value, fmt) {
            return Some(naive.and_utc().with_timezone(&utc));
        }
    }
    NaiveDate::parse_from_str(value, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|naive| naive.and_utc().with_timezone(&utc))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTrace {
    case_id: String,
    activities: Vec<String>,
    timestamps: Option<Vec<Timestamp>>,
}

impl LabeledTrace {
    pub fn new(
        case_id: impl Into<String>,
        activities: Vec<String>,
        timestamps: Option<Vec<Timestamp>>,
    ) -> Result<Self, EventDataError> {
        let case_id = case_id.into();
        if activities.is_empty() {
            return Err(EventDataError::NoEvents);
        }
        if activities.iter().any(String::is_empty) {
            return Err(EventDataError::EmptyLabel);
        }
        if let Some(ts) = &timestamps {
            if ts.len() != activities.len() {
                return Err(EventDataError::TimestampCount {
                    case: case_id,
                    activities: activities.len(),
                    timestamps: ts.len(),
                });
            }
            if ts.windows(2).any(|w| w[0] > w[1]) {
                return Err(EventDataError::UnorderedTimestamps(case_id));
            }
        }
        Ok(LabeledTrace {
            case_id,
            activities,
            timestamps,
        })
    }

    pub fn case_id(&self) -> &str {
        &self.case_id
    }

    pub fn activities(&self) -> &[String] {
        &self.activities
    }

    pub fn timestamps(&self) -> Option<&[Timestamp]> {
        self.timestamps.as_deref()
    }

    pub fn len(&self) -> usize {
        self.activities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.activities.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    traces: Vec<LabeledTrace>,
    alphabet: ActivityAlphabet,
}

impl EventLog {
    /// Builds a log whose alphabet is the distinct activities in order of
    /// first appearance.
    pub fn new(traces: Vec<LabeledTrace>) -> Result<Self, EventDataError> {
        let alphabet =
            ActivityAlphabet::from_appearance(traces.iter().flat_map(|t| t.activities().iter()))?;
        EventLog::with_alphabet(traces, alphabet)
    }

    pub fn with_alphabet(
        traces: Vec<LabeledTrace>,
        alphabet: ActivityAlphabet,
    ) -> Result<Self, EventDataError> {
        let mut seen = HashSet::new();
        for trace in &traces {
            if !seen.insert(trace.case_id()) {
                return Err(EventDataError::DuplicateCase(trace.case_id().to_owned()));
            }
            if let Some(a) = trace.activities().iter().find(|a| !alphabet.contains(a)) {
                return Err(EventDataError::UnknownLabel(a.clone()));
            }
        }
        Ok(EventLog { traces, alphabet })
    }

    /// Convenience constructor from bare activity sequences; case ids are
    /// the sequence positions.
    pub fn from_sequences<I, T, S>(sequences: I) -> Result<Self, EventDataError>
    where
        I: IntoIterator<Item = T>,
        T: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let traces = sequences
            .into_iter()
            .enumerate()
            .map(|(i, seq)| {
                LabeledTrace::new(i.to_string(), seq.into_iter().map(Into::into).collect(), None)
            })
            .collect::<Result<Vec<_>, _>>()?;
        EventLog::new(traces)
    }

    pub fn traces(&self) -> &[LabeledTrace] {
        &self.traces
    }

    pub fn alphabet(&self) -> &ActivityAlphabet {
        &self.alphabet
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }
}

/// Reads an event log from CSV with columns `case`, `activity` and an
/// optional `timestamp`.
///
/// Cases appear in order of first occurrence. Within a case, events are
/// sorted by timestamp (stable, so equal instants keep file order) or kept
/// in file order when the column is absent.
pub fn parse_event_log_csv<R: Read>(reader: R) -> Result<EventLog, EventDataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(EventDataError::Empty);
    }
    let find = |name: &str| header.iter().position(|h| h.eq_ignore_ascii_case(name));
    let case_col = find("case").ok_or(EventDataError::MissingColumn("case"))?;
    let activity_col = find("activity").ok_or(EventDataError::MissingColumn("activity"))?;
    let timestamp_col = find("timestamp");

    let mut order: Vec<String> = Vec::new();
    let mut seen_activities: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<(Option<Timestamp>, String)>> = HashMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let case = record.get(case_col).unwrap_or_default();
        if case.is_empty() {
            return Err(EventDataError::EmptyCell { line, column: "case" });
        }
        let activity = record.get(activity_col).unwrap_or_default();
        if activity.is_empty() {
            return Err(EventDataError::EmptyCell {
                line,
                column: "activity",
            });
        }
        let ts = match timestamp_col {
            Some(col) => {
                let raw = record.get(col).unwrap_or_default();
                Some(parse_timestamp(raw).ok_or_else(|| EventDataError::Timestamp {
                    line,
                    value: raw.to_owned(),
                })?)
            }
            None => None,
        };
        let events = groups.entry(case.to_owned()).or_insert_with(|| {
            order.push(case.to_owned());
            Vec::new()
        });
        events.push((ts, activity.to_owned()));
        seen_activities.push(activity.to_owned());
    }
    if order.is_empty() {
        return Err(EventDataError::Empty);
    }

    let mut traces = Vec::with_capacity(order.len());
    for case in order {
        let mut events = groups.remove(&case).unwrap_or_default();
        let timestamps = if timestamp_col.is_some() {
            events.sort_by_key(|(ts, _)| *ts);
            Some(events.iter().filter_map(|(ts, _)| *ts).collect())
        } else {
            None
        };
        let activities = events.into_iter().map(|(_, a)| a).collect();
        traces.push(LabeledTrace::new(case, activities, timestamps)?);
    }
    let alphabet = ActivityAlphabet::from_appearance(&seen_activities)?;
    EventLog::with_alphabet(traces, alphabet)
}

/// Writes a log in the layout read by [`parse_event_log_csv`].
pub fn write_event_log_csv<W: Write>(log: &EventLog, writer: W) -> Result<(), EventDataError> {
    let mut wtr = csv::Writer::from_writer(writer);
    let with_ts = log.traces().iter().all(|t| t.timestamps().is_some());
    if with_ts {
        wtr.write_record(["case", "activity", "timestamp"])?;
    } else {
        wtr.write_record(["case", "activity"])?;
    }
    for trace in log.traces() {
        for (i, activity) in trace.activities().iter().enumerate() {
            match trace.timestamps() {
                Some(ts) if with_ts => {
                    wtr.write_record([trace.case_id(), activity.as_str(), &ts[i].to_rfc3339()])?
                }
                _ => wtr.write_record([trace.case_id(), activity.as_str()])?,
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const EQ1_CSV: &str = "PickUpCup,DrinkFromCup,PutDownCup,AnswerPhone\n\
                           0.6,0,0.4,0\n\
                           0,0.3,0,0.7\n\
                           0.4,0,0.6,0\n";

    #[test]
    fn groups_rows_by_case() {
        let log = parse_event_log_csv("case,activity\nc1,PickUpCup\nc1,DrinkFromCup\n".as_bytes())
            .unwrap();
        assert_eq!(log.len(), 1);
        assert_eq!(log.traces()[0].activities(), ["PickUpCup", "DrinkFromCup"]);
        assert_eq!(log.alphabet().labels(), ["PickUpCup", "DrinkFromCup"]);
    }

    #[test]
    fn sorts_events_by_timestamp() {
        let csv = "case,activity,timestamp\n\
                   c1,B,2024-01-01T10:00:05Z\n\
                   c2,X,2024-01-01T09:00:00\n\
                   c1,A,2024-01-01T10:00:00+00:00\n\
                   c1,C,2024-01-01 10:00:09\n";
        let log = parse_event_log_csv(csv.as_bytes()).unwrap();
        assert_eq!(log.traces()[0].case_id(), "c1");
        assert_eq!(log.traces()[0].activities(), ["A", "B", "C"]);
        assert_eq!(log.traces()[1].activities(), ["X"]);
        assert_eq!(log.alphabet().labels(), ["B", "X", "A", "C"]);
    }

    #[test]
    fn missing_activity_column() {
        let err = parse_event_log_csv("case,timestamp\nc1,2024-01-01\n".as_bytes()).unwrap_err();
        assert!(matches!(err, EventDataError::MissingColumn("activity")));
        assert!(err.to_string().contains("missing column"));
    }

    #[test]
    fn bad_timestamp_names_line() {
        let err = parse_event_log_csv("case,activity,timestamp\nc1,A,yesterday\n".as_bytes())
            .unwrap_err();
        match err {
            EventDataError::Timestamp { line, value } => {
                assert_eq!(line, 2);
                assert_eq!(value, "yesterday");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_log_file() {
        assert!(matches!(parse_event_log_csv("".as_bytes()), Err(EventDataError::Empty)));
        assert!(matches!(
            parse_event_log_csv("case,activity\n".as_bytes()),
            Err(EventDataError::Empty)
        ));
    }

    #[test]
    fn parses_probability_matrix() {
        let trace = parse_prob_trace(EQ1_CSV.as_bytes(), TraceFormat::Csv).unwrap();
        assert_eq!(trace.len(), 3);
        assert_eq!(trace.events()[0].probs(), [0.6, 0.0, 0.4, 0.0]);
        assert_eq!(
            argmax_labeling(&trace),
            ["PickUpCup", "AnswerPhone", "PutDownCup"]
        );
    }

    #[test]
    fn json_layout() {
        let json = r#"{"case_id":"v1","labels":["A","B"],"events":[[0.25,0.75],[1,0]]}"#;
        let trace = parse_prob_trace(json.as_bytes(), TraceFormat::Json).unwrap();
        assert_eq!(trace.case_id(), "v1");
        assert_eq!(argmax_labeling(&trace), ["B", "A"]);
    }

    #[test]
    fn rejects_sum_outside_tolerance() {
        let err = parse_prob_trace("A,B\n0.5,0.4\n".as_bytes(), TraceFormat::Csv).unwrap_err();
        assert!(matches!(
            err,
            EventDataError::InvalidEvent {
                event: 0,
                source: ProbabilityError::SumOutsideTolerance { .. }
            }
        ));
        assert!(err.to_string().contains("outside tolerance"));
    }

    #[test]
    fn rejects_negative_and_short_rows() {
        let err = parse_prob_trace("A,B\n1.1,-0.1\n".as_bytes(), TraceFormat::Csv).unwrap_err();
        assert!(matches!(
            err,
            EventDataError::InvalidEvent {
                source: ProbabilityError::Negative { index: 1, .. },
                ..
            }
        ));
        let err = parse_prob_trace("A,B\n1\n".as_bytes(), TraceFormat::Csv).unwrap_err();
        assert!(matches!(err, EventDataError::RowLength { expected: 2, found: 1, .. }));
        let err = parse_prob_trace("A,B\n".as_bytes(), TraceFormat::Csv).unwrap_err();
        assert!(matches!(err, EventDataError::NoEvents));
    }

    #[test]
    fn argmax_ties_go_to_first_label() {
        let alphabet = ActivityAlphabet::new(["A", "B", "C", "D"]).unwrap();
        let trace =
            ProbTrace::from_rows("t", alphabet, vec![vec![0.5, 0.5, 0.0, 0.0], vec![0.0, 0.0, 0.0, 1.0]])
                .unwrap();
        assert_eq!(argmax_labeling(&trace), ["A", "D"]);
    }

    #[test]
    fn alphabet_rejects_duplicates() {
        assert!(matches!(
            ActivityAlphabet::new(["A", "A"]),
            Err(EventDataError::DuplicateLabel(_))
        ));
        assert!(matches!(ActivityAlphabet::new([""]), Err(EventDataError::EmptyLabel)));
    }

    #[test]
    fn labeled_trace_checks_timestamp_order() {
        let t0 = parse_timestamp("2024-01-01T00:00:01Z").unwrap();
        let t1 = parse_timestamp("2024-01-01T00:00:00Z").unwrap();
        let err = LabeledTrace::new("c", vec!["A".into(), "B".into()], Some(vec![t0, t1]));
        assert!(matches!(err, Err(EventDataError::UnorderedTimestamps(_))));
    }

    #[test]
    fn event_log_csv_round_trip() {
        let csv = "case,activity,timestamp\nc1,A,2024-01-01T00:00:00+00:00\nc1,B,2024-01-01T00:01:00+00:00\n";
        let log = parse_event_log_csv(csv.as_bytes()).unwrap();
        let mut out = Vec::new();
        write_event_log_csv(&log, &mut out).unwrap();
        assert_eq!(parse_event_log_csv(out.as_slice()).unwrap(), log);
    }
}
