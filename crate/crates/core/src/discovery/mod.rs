//! Heuristic-miner discovery and model quality metrics.
//!
//! Discovery counts directly-follows relations, scores them with the
//! dependency measure, keeps edges at or above a threshold and repairs the
//! graph so that every observed activity is connected. The resulting
//! dependency graph is turned into a workflow net in which every choice is
//! an exclusive one routed through silent transitions.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eventdata::{ActivityAlphabet, EventLog};
use crate::petri::{PetriError, PetriNet};

mod replay;

pub use replay::{precision_escaping_edges, replay_trace, token_replay_fitness, TraceReplay};

/// Dependency thresholds swept by default.
pub const DEFAULT_THRESHOLD_GRID: [f64; 4] = [0.8, 0.85, 0.9, 0.95];

#[derive(Debug, Error)]
pub enum DiscoveryError {
    #[error("event log is empty")]
    EmptyLog,
    #[error("dependency threshold {0} outside [0, 1)")]
    InvalidThreshold(f64),
    #[error("threshold grid is empty")]
    EmptyGrid,
    #[error(transparent)]
    Petri(#[from] PetriError),
}

/// Directly-follows statistics of an event log, indexed by alphabet position.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectlyFollowsMatrix {
    alphabet: ActivityAlphabet,
    counts: Vec<Vec<u64>>,
    loops2: Vec<Vec<u64>>,
    start: Vec<u64>,
    end: Vec<u64>,
    occurrences: Vec<u64>,
}

impl DirectlyFollowsMatrix {
    pub fn alphabet(&self) -> &ActivityAlphabet {
        &self.alphabet
    }

    /// `|a>b|`: how often `b` directly follows `a`.
    pub fn count(&self, a: usize, b: usize) -> u64 {
        self.counts[a][b]
    }

    /// `|a>>b|`: how often the pattern `a b a` occurs.
    pub fn loop2_count(&self, a: usize, b: usize) -> u64 {
        self.loops2[a][b]
    }

    pub fn start_count(&self, a: usize) -> u64 {
        self.start[a]
    }

    pub fn end_count(&self, a: usize) -> u64 {
        self.end[a]
    }

    pub fn occurrences(&self, a: usize) -> u64 {
        self.occurrences[a]
    }

    /// Count lookup by label; unknown labels count zero.
    pub fn follows(&self, a: &str, b: &str) -> u64 {
        match (self.alphabet.index_of(a), self.alphabet.index_of(b)) {
            (Some(a), Some(b)) => self.counts[a][b],
            _ => 0,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

pub fn count_directly_follows(log: &EventLog) -> DirectlyFollowsMatrix {
    let alphabet = log.alphabet().clone();
    let n = alphabet.len();
    let mut df = DirectlyFollowsMatrix {
        alphabet,
        counts: vec![vec![0; n]; n],
        loops2: vec![vec![0; n]; n],
        start: vec![0; n],
        end: vec![0; n],
        occurrences: vec![0; n],
    };
    for trace in log.traces() {
        let seq: Vec<usize> = trace
            .activities()
            .iter()
            .filter_map(|a| df.alphabet.index_of(a))
            .collect();
        let (Some(&first), Some(&last)) = (seq.first(), seq.last()) else {
            continue;
        };
        df.start[first] += 1;
        df.end[last] += 1;
        for &a in &seq {
            df.occurrences[a] += 1;
        }
        for w in seq.windows(2) {
            df.counts[w[0]][w[1]] += 1;
        }
        for w in seq.windows(3) {
            if w[0] == w[2] && w[0] != w[1] {
                df.loops2[w[0]][w[1]] += 1;
            }
        }
    }
    df
}

/// Dependency of `b` on `a` from raw counts, for `a != b`:
/// `(|a>b| - |b>a|) / (|a>b| + |b>a| + 1)`.
pub fn dependency_from_counts(ab: u64, ba: u64) -> f64 {
    (ab as f64 - ba as f64) / (ab as f64 + ba as f64 + 1.0)
}

/// Length-one loop dependency `|a>a| / (|a>a| + 1)`.
pub fn self_loop_dependency(aa: u64) -> f64 {
    aa as f64 / (aa as f64 + 1.0)
}

pub fn dependency_measure(df: &DirectlyFollowsMatrix, a: usize, b: usize) -> f64 {
    if a == b {
        self_loop_dependency(df.count(a, a))
    } else {
        dependency_from_counts(df.count(a, b), df.count(b, a))
    }
}

/// Length-two loop measure `(|a>>b| + |b>>a|) / (|a>>b| + |b>>a| + 1)`.
pub fn loop2_measure(df: &DirectlyFollowsMatrix, a: usize, b: usize) -> f64 {
    let n = (df.loop2_count(a, b) + df.loop2_count(b, a)) as f64;
    n / (n + 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DependencyGraph {
    df: DirectlyFollowsMatrix,
    dependency: Vec<Vec<f64>>,
    threshold: f64,
    kept_edges: BTreeSet<(usize, usize)>,
    start_activities: Vec<usize>,
    end_activities: Vec<usize>,
}

impl DependencyGraph {
    pub fn alphabet(&self) -> &ActivityAlphabet {
        self.df.alphabet()
    }

    pub fn directly_follows(&self) -> &DirectlyFollowsMatrix {
        &self.df
    }

    pub fn dependency(&self, a: usize, b: usize) -> f64 {
        self.dependency[a][b]
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn kept_edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.kept_edges
    }

    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        match (self.alphabet().index_of(a), self.alphabet().index_of(b)) {
            (Some(a), Some(b)) => self.kept_edges.contains(&(a, b)),
            _ => false,
        }
    }

    pub fn start_activities(&self) -> &[usize] {
        &self.start_activities
    }

    pub fn end_activities(&self) -> &[usize] {
        &self.end_activities
    }

    /// Activity occurrence counts keyed by label.
    pub fn activity_frequencies(&self) -> BTreeMap<String, u64> {
        (0..self.alphabet().len())
            .map(|a| (self.alphabet().label(a).to_owned(), self.df.occurrences(a)))
            .collect()
    }

    fn activities(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.alphabet().len()).filter(|&a| self.df.occurrences(a) > 0)
    }

    /// Converts the graph into a workflow net with a unique source and sink.
    ///
    /// Every activity gets one visible transition between its own input and
    /// output place. Start, end and dependency edges become silent
    /// transitions; a silent transition is contracted away when it is the
    /// only consumer of its input place and the only producer of its output
    /// place, so plain sequences come out without any silent step.
    pub fn to_petri_net(&self) -> Result<PetriNet, PetriError> {
        let alphabet = self.alphabet();
        let activities: Vec<usize> = self.activities().collect();

        // abstract places: 0 = source, 1 = sink, then in/out per activity
        let mut place_names = vec!["source".to_owned(), "sink".to_owned()];
        let mut in_place = HashMap::new();
        let mut out_place = HashMap::new();
        for &a in &activities {
            in_place.insert(a, place_names.len());
            place_names.push(format!("in:{}", alphabet.label(a)));
            out_place.insert(a, place_names.len());
            place_names.push(format!("out:{}", alphabet.label(a)));
        }

        let mut silent: Vec<(String, usize, usize)> = Vec::new();
        for &s in &self.start_activities {
            silent.push((format!("tau:start:{}", alphabet.label(s)), 0, in_place[&s]));
        }
        for &(a, b) in &self.kept_edges {
            silent.push((
                format!("tau:{}->{}", alphabet.label(a), alphabet.label(b)),
                out_place[&a],
                in_place[&b],
            ));
        }
        for &e in &self.end_activities {
            silent.push((format!("tau:end:{}", alphabet.label(e)), out_place[&e], 1));
        }

        let mut consumers = vec![0usize; place_names.len()];
        let mut producers = vec![0usize; place_names.len()];
        for &a in &activities {
            consumers[in_place[&a]] += 1;
            producers[out_place[&a]] += 1;
        }
        for (_, from, to) in &silent {
            consumers[*from] += 1;
            producers[*to] += 1;
        }

        let mut parent: Vec<usize> = (0..place_names.len()).collect();
        fn find(parent: &mut [usize], x: usize) -> usize {
            let mut root = x;
            while parent[root] != root {
                root = parent[root];
            }
            let mut cur = x;
            while parent[cur] != root {
                let next = parent[cur];
                parent[cur] = root;
                cur = next;
            }
            root
        }
        let mut contracted = vec![false; silent.len()];
        for (i, (_, from, to)) in silent.iter().enumerate() {
            if consumers[*from] == 1 && producers[*to] == 1 {
                let (rf, rt) = (find(&mut parent, *from), find(&mut parent, *to));
                if rf != rt {
                    // keep the smaller index as root so source/sink names win
                    let (root, child) = if rf < rt { (rf, rt) } else { (rt, rf) };
                    parent[child] = root;
                    contracted[i] = true;
                }
            }
        }

        let mut b = PetriNet::builder();
        let mut ids = HashMap::new();
        for i in 0..place_names.len() {
            let root = find(&mut parent, i);
            if let std::collections::hash_map::Entry::Vacant(e) = ids.entry(root) {
                e.insert(b.place(place_names[root].clone()));
            }
        }
        let mut place_of = |i: usize| ids[&find(&mut parent, i)];
        for &a in &activities {
            let label = alphabet.label(a);
            let t = b.transition(label, Some(label));
            let (pi, po) = (place_of(in_place[&a]), place_of(out_place[&a]));
            b.arc_in(pi, t).arc_out(t, po);
        }
        for (i, (name, from, to)) in silent.iter().enumerate() {
            if contracted[i] {
                continue;
            }
            let t = b.transition(name.clone(), None);
            let (pf, pt) = (place_of(*from), place_of(*to));
            b.arc_in(pf, t).arc_out(t, pt);
        }
        let (source, sink) = (place_of(0), place_of(1));
        b.initial(source, 1).final_marking(vec![(sink, 1)]);
        b.build()
    }

    /// Graphviz view of the dependency graph with activity and path
    /// frequencies.
    pub fn to_dot(&self) -> String {
        let alphabet = self.alphabet();
        let mut out = String::from("digraph dependency_graph {\n  rankdir=TB;\n  node [shape=box, fontname=\"Helvetica\"];\n");
        out.push_str("  \"start\" [shape=circle, label=\"\"];\n  \"end\" [shape=doublecircle, label=\"\"];\n");
        for a in self.activities() {
            let _ = writeln!(
                out,
                "  \"a{a}\" [label=\"{} ({})\"];",
                alphabet.label(a).replace('"', "\\\""),
                self.df.occurrences(a)
            );
        }
        for &s in &self.start_activities {
            let _ = writeln!(out, "  \"start\" -> \"a{s}\" [label=\"{}\"];", self.df.start_count(s));
        }
        for &(a, b) in &self.kept_edges {
            let _ = writeln!(out, "  \"a{a}\" -> \"a{b}\" [label=\"{}\"];", self.df.count(a, b));
        }
        for &e in &self.end_activities {
            let _ = writeln!(out, "  \"a{e}\" -> \"end\" [label=\"{}\"];", self.df.end_count(e));
        }
        out.push_str("}\n");
        out
    }
}

fn check_threshold(threshold: f64) -> Result<(), DiscoveryError> {
    if (0.0..1.0).contains(&threshold) {
        Ok(())
    } else {
        Err(DiscoveryError::InvalidThreshold(threshold))
    }
}

/// Picks the candidate edge with the highest dependency; ties go to the
/// lexicographically smallest pair.
fn best_edge(dep: &[Vec<f64>], candidates: impl Iterator<Item = (usize, usize)>) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for (a, b) in candidates {
        match best {
            Some((x, y)) if dep[x][y] >= dep[a][b] => {}
            _ => best = Some((a, b)),
        }
    }
    best
}

pub fn dependency_graph(log: &EventLog, threshold: f64) -> Result<DependencyGraph, DiscoveryError> {
    check_threshold(threshold)?;
    if log.is_empty() {
        return Err(DiscoveryError::EmptyLog);
    }
    let df = count_directly_follows(log);
    let n = df.alphabet().len();
    let dependency: Vec<Vec<f64>> = (0..n)
        .map(|a| (0..n).map(|b| dependency_measure(&df, a, b)).collect())
        .collect();
    let observed = |a: usize, b: usize| df.count(a, b) > 0;
    let activities: Vec<usize> = (0..n).filter(|&a| df.occurrences(a) > 0).collect();
    let start_activities: Vec<usize> = activities.iter().copied().filter(|&a| df.start_count(a) > 0).collect();
    let end_activities: Vec<usize> = activities.iter().copied().filter(|&a| df.end_count(a) > 0).collect();

    let mut kept = BTreeSet::new();
    for &a in &activities {
        for &b in &activities {
            if observed(a, b) && dependency[a][b] >= threshold {
                kept.insert((a, b));
            }
        }
    }
    for &a in &activities {
        for &b in &activities {
            if a < b
                && !kept.contains(&(a, a))
                && !kept.contains(&(b, b))
                && observed(a, b)
                && observed(b, a)
                && loop2_measure(&df, a, b) >= threshold
            {
                kept.insert((a, b));
                kept.insert((b, a));
            }
        }
    }

    // all-activities-connected: best incoming for non-start, best outgoing for non-end
    for &a in &activities {
        if df.start_count(a) == 0 {
            let incoming = activities.iter().map(|&b| (b, a)).filter(|&(b, a)| b != a && observed(b, a));
            if let Some(e) = best_edge(&dependency, incoming) {
                kept.insert(e);
            }
        }
        if df.end_count(a) == 0 {
            let outgoing = activities.iter().map(|&b| (a, b)).filter(|&(a, b)| a != b && observed(a, b));
            if let Some(e) = best_edge(&dependency, outgoing) {
                kept.insert(e);
            }
        }
    }

    // every activity reachable from a start and able to reach an end
    loop {
        let reach = closure(&kept, &start_activities, n, false);
        let missing = activities.iter().map(|&b| b).filter(|&b| !reach[b]);
        let candidates: Vec<(usize, usize)> = missing
            .flat_map(|b| activities.iter().map(move |&a| (a, b)))
            .filter(|&(a, b)| reach[a] && observed(a, b))
            .collect();
        match best_edge(&dependency, candidates.into_iter()) {
            Some(e) => {
                kept.insert(e);
            }
            None => break,
        }
    }
    loop {
        let coreach = closure(&kept, &end_activities, n, true);
        let candidates: Vec<(usize, usize)> = activities
            .iter()
            .filter(|&&a| !coreach[a])
            .flat_map(|&a| activities.iter().map(move |&b| (a, b)))
            .filter(|&(a, b)| coreach[b] && observed(a, b))
            .collect();
        match best_edge(&dependency, candidates.into_iter()) {
            Some(e) => {
                kept.insert(e);
            }
            None => break,
        }
    }

    // make sure the most frequent variant stays replayable
    let supported = |kept: &BTreeSet<(usize, usize)>, seq: &[usize]| {
        seq.windows(2).all(|w| kept.contains(&(w[0], w[1])))
    };
    let sequences: Vec<Vec<usize>> = log
        .traces()
        .iter()
        .map(|t| t.activities().iter().filter_map(|a| df.alphabet().index_of(a)).collect())
        .collect();
    if !sequences.iter().any(|s| supported(&kept, s)) {
        let mut variants: Vec<(&Vec<usize>, usize)> = Vec::new();
        for s in &sequences {
            match variants.iter_mut().find(|(v, _)| *v == s) {
                Some((_, c)) => *c += 1,
                None => variants.push((s, 1)),
            }
        }
        let top = variants.iter().max_by(|x, y| x.1.cmp(&y.1).then(std::cmp::Ordering::Greater));
        if let Some((seq, _)) = top {
            for w in seq.windows(2) {
                kept.insert((w[0], w[1]));
            }
        }
    }

    Ok(DependencyGraph {
        df,
        dependency,
        threshold,
        kept_edges: kept,
        start_activities,
        end_activities,
    })
}

fn closure(edges: &BTreeSet<(usize, usize)>, seeds: &[usize], n: usize, backward: bool) -> Vec<bool> {
    let mut seen = vec![false; n];
    let mut stack: Vec<usize> = seeds.to_vec();
    for &s in seeds {
        seen[s] = true;
    }
    while let Some(x) = stack.pop() {
        for &(a, b) in edges {
            let (from, to) = if backward { (b, a) } else { (a, b) };
            if from == x && !seen[to] {
                seen[to] = true;
                stack.push(to);
            }
        }
    }
    seen
}

/// Heuristic-miner discovery at the given dependency threshold.
pub fn discover(log: &EventLog, threshold: f64) -> Result<PetriNet, DiscoveryError> {
    Ok(dependency_graph(log, threshold)?.to_petri_net()?)
}

/// Harmonic mean of fitness and precision; zero when both are zero.
pub fn f_score(fitness: f64, precision: f64) -> f64 {
    if fitness + precision == 0.0 {
        0.0
    } else {
        2.0 * fitness * precision / (fitness + precision)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub threshold: f64,
    pub fitness: f64,
    pub precision: f64,
    pub f_score: f64,
}

impl QualityReport {
    pub fn measure(net: &PetriNet, log: &EventLog, threshold: f64) -> Self {
        let fitness = token_replay_fitness(net, log);
        let precision = precision_escaping_edges(net, log);
        QualityReport {
            threshold,
            fitness,
            precision,
            f_score: f_score(fitness, precision),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub graph: DependencyGraph,
    pub net: PetriNet,
    pub report: QualityReport,
}

/// Discovers and scores one model per threshold, in grid order.
pub fn threshold_sweep(log: &EventLog, grid: &[f64]) -> Result<Vec<SweepEntry>, DiscoveryError> {
    if grid.is_empty() {
        return Err(DiscoveryError::EmptyGrid);
    }
    grid.par_iter()
        .map(|&threshold| {
            let graph = dependency_graph(log, threshold)?;
            let net = graph.to_petri_net()?;
            let report = QualityReport::measure(&net, log, threshold);
            Ok(SweepEntry { graph, net, report })
        })
        .collect()
}

/// Index of the report with the highest F-score; ties go to the lower
/// threshold. `None` for an empty slice.
pub fn select_best(reports: &[QualityReport]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, r) in reports.iter().enumerate() {
        best = match best {
            None => Some(i),
            Some(j) => {
                let b = &reports[j];
                if r.f_score > b.f_score || (r.f_score == b.f_score && r.threshold < b.threshold) {
                    Some(i)
                } else {
                    Some(j)
                }
            }
        };
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::petri::fixtures::drink_or_phone;

    fn log(seqs: &[&[&str]]) -> EventLog {
        EventLog::from_sequences(seqs.iter().map(|s| s.iter().copied())).unwrap()
    }

    fn repeat<'a>(seq: &'a [&'a str], n: usize) -> Vec<&'a [&'a str]> {
        vec![seq; n]
    }

    #[test]
    fn directly_follows_counts() {
        let df = count_directly_follows(&log(&[&["A", "B"], &["A", "B"], &["A", "C"]]));
        assert_eq!(df.follows("A", "B"), 2);
        assert_eq!(df.follows("A", "C"), 1);
        assert_eq!(df.total(), 3);

        let single = count_directly_follows(&log(&[&["A"]]));
        assert_eq!(single.total(), 0);
        assert_eq!(single.start_count(0), 1);
        assert_eq!(single.end_count(0), 1);

        let five = repeat(&["PickUpCup", "DrinkFromCup", "PutDownCup"], 5);
        let df = count_directly_follows(&log(&five));
        assert_eq!(df.follows("PickUpCup", "DrinkFromCup"), 5);
    }

    #[test]
    fn dependency_values() {
        assert!((dependency_from_counts(5, 0) - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(dependency_from_counts(4, 4), 0.0);
        assert!((self_loop_dependency(3) - 0.75).abs() < 1e-12);
        let df = count_directly_follows(&log(&[&["A", "A", "A", "A"]]));
        assert!((dependency_measure(&df, 0, 0) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn loop2_counts_aba_patterns() {
        let df = count_directly_follows(&log(&[&["A", "B", "A", "B", "A"]]));
        assert_eq!(df.loop2_count(0, 1), 2);
        assert_eq!(df.loop2_count(1, 0), 1);
        assert!((loop2_measure(&df, 0, 1) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn linear_log_gives_linear_net() {
        let seqs = repeat(&["A", "B", "C"], 10);
        let net = discover(&log(&seqs), 0.8).unwrap();
        assert_eq!(net.transitions().len(), 3);
        assert!(net.transitions().iter().all(|t| !t.is_silent()));
        assert_eq!(net.places().len(), 4);
        let mut m = net.initial_marking().clone();
        for label in ["A", "B", "C"] {
            let enabled = net.enabled(&m);
            assert_eq!(enabled.len(), 1);
            assert_eq!(net.transition(enabled[0]).label.as_deref(), Some(label));
            m = net.fire(&m, enabled[0]).unwrap();
        }
        assert!(net.is_final(&m));
    }

    #[test]
    fn low_dependency_edge_dropped_but_connected() {
        let mut seqs = repeat(&["A", "B", "C"], 9);
        seqs.push(&["A", "C"]);
        let l = log(&seqs);
        let graph = dependency_graph(&l, 0.95).unwrap();
        assert!((graph.dependency(0, 2) - 0.5).abs() < 1e-12);
        assert!(!graph.has_edge("A", "C"));
        assert!(graph.has_edge("A", "B"));
        assert!(graph.has_edge("B", "C"));
        let net = graph.to_petri_net().unwrap();
        let fitting = l.traces().iter().filter(|t| replay_trace(&net, t.activities()).fits()).count();
        assert_eq!(fitting, 9);
    }

    #[test]
    fn single_activity_log() {
        let net = discover(&log(&[&["A"]]), 0.9).unwrap();
        assert_eq!(net.transitions().len(), 1);
        assert_eq!(net.places().len(), 2);
        let t = net.enabled(net.initial_marking());
        assert!(net.is_final(&net.fire(net.initial_marking(), t[0]).unwrap()));
    }

    #[test]
    fn empty_log_and_bad_threshold() {
        let empty = EventLog::new(Vec::new()).unwrap();
        assert!(matches!(discover(&empty, 0.9), Err(DiscoveryError::EmptyLog)));
        assert!(matches!(
            discover(&log(&[&["A"]]), 1.0),
            Err(DiscoveryError::InvalidThreshold(_))
        ));
    }

    #[test]
    fn exclusive_choice_uses_silent_routing() {
        let mut seqs = repeat(&["A", "B", "D"], 20);
        seqs.extend(repeat(&["A", "C", "D"], 20));
        let l = log(&seqs);
        let net = discover(&l, 0.9).unwrap();
        assert!(net.transitions().iter().any(|t| t.is_silent()));
        assert_eq!(token_replay_fitness(&net, &l), 1.0);
        // the choice between B and C is exclusive
        assert_eq!(token_replay_fitness(&net, &log(&[&["A", "B", "C", "D"]])) < 1.0, true);
    }

    #[test]
    fn self_loop_is_kept() {
        let mut seqs = repeat(&["A", "B", "B", "C"], 30);
        seqs.extend(repeat(&["A", "B", "C"], 5));
        let l = log(&seqs);
        let graph = dependency_graph(&l, 0.95).unwrap();
        assert!(graph.has_edge("B", "B"));
        let net = graph.to_petri_net().unwrap();
        assert_eq!(token_replay_fitness(&net, &l), 1.0);
    }

    #[test]
    fn length_two_loop_detected() {
        let mut seqs = repeat(&["A", "B", "C", "B", "C", "D"], 20);
        seqs.extend(repeat(&["A", "B", "C", "D"], 20));
        let l = log(&seqs);
        let graph = dependency_graph(&l, 0.9).unwrap();
        assert!(graph.has_edge("C", "B"));
        let net = graph.to_petri_net().unwrap();
        assert_eq!(token_replay_fitness(&net, &l), 1.0);
    }

    #[test]
    fn f_score_is_harmonic_mean() {
        assert!((f_score(0.72, 0.54) - 0.617142857142857).abs() < 1e-12);
        assert!((f_score(0.84, 0.42) - 0.56).abs() < 1e-12);
        assert_eq!(f_score(1.0, 1.0), 1.0);
        assert_eq!(f_score(0.0, 0.0), 0.0);
    }

    #[test]
    fn sweep_cardinality_and_tie_break() {
        let seqs = repeat(&["A", "B", "C"], 10);
        let entries = threshold_sweep(&log(&seqs), &DEFAULT_THRESHOLD_GRID).unwrap();
        assert_eq!(entries.len(), 4);
        let reports: Vec<QualityReport> = entries.iter().map(|e| e.report).collect();
        assert_eq!(select_best(&reports), Some(0));
        assert!(matches!(threshold_sweep(&log(&seqs), &[]), Err(DiscoveryError::EmptyGrid)));

        let r = |threshold, f_score| QualityReport {
            threshold,
            fitness: 1.0,
            precision: 1.0,
            f_score,
        };
        assert_eq!(select_best(&[r(0.9, 0.5), r(0.85, 0.5), r(0.95, 0.4)]), Some(1));
        assert_eq!(select_best(&[r(0.8, 0.5), r(0.85, 0.6)]), Some(1));
    }

    #[test]
    fn fixture_log_rediscovered() {
        let mut seqs = repeat(&["PickUpCup", "DrinkFromCup", "PutDownCup"], 3);
        seqs.extend(repeat(&["PickUpCup", "AnswerPhone"], 2));
        let l = log(&seqs);
        for &t in &DEFAULT_THRESHOLD_GRID {
            let net = discover(&l, t).unwrap();
            assert_eq!(token_replay_fitness(&net, &l), 1.0, "threshold {t}");
        }
        let reference = drink_or_phone();
        assert_eq!(token_replay_fitness(&reference, &l), 1.0);
    }

    #[test]
    fn dot_views() {
        let seqs = repeat(&["A", "B"], 3);
        let graph = dependency_graph(&log(&seqs), 0.5).unwrap();
        let dot = graph.to_dot();
        assert!(dot.contains("A (3)"));
        assert!(dot.contains("\"a0\" -> \"a1\" [label=\"3\"]"));
        let freq = graph.activity_frequencies();
        assert_eq!(freq["B"], 3);
    }
}
