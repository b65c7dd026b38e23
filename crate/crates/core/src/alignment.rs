//! Cost-based alignment of probabilistic traces against Petri nets.
//!
//! The search runs A* over the implicit synchronous product: a state is a
//! model marking plus the index of the next unconsumed event. From a state
//! three kinds of move are possible:
//!
//! | move        | effect                              | cost                 |
//! |-------------|-------------------------------------|----------------------|
//! | synchronous | fire `t`, consume event `j`         | `-ln w`              |
//! | log         | consume event `j` only              | `-ln w - ln eps`     |
//! | model       | fire `t` only                       | `-ln eps` (0 if tau) |
//!
//! where `w` is the probability event `j` assigns to the move's activity.
//! Moves with `w = 0` do not exist. A log move always commits to the event's
//! most probable activity, since every other choice costs more and leaves
//! the marking unchanged.
//!
//! Costs are accumulated in fixed point (2^-40 resolution) for ordering so
//! equal-cost paths compare equal regardless of summation order or log
//! base; reported costs are plain `f64` sums.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eventdata::ProbTrace;
use crate::petri::{Marking, PetriNet, TransitionId};

/// Expanded-state budget used by [`align`].
pub const DEFAULT_MAX_EXPANDED: usize = 1_000_000;

const FIXED_POINT_SCALE: f64 = (1u64 << 40) as f64;

#[derive(Debug, Error)]
pub enum AlignmentError {
    #[error("epsilon {0} outside (0, 1]")]
    InvalidEpsilon(f64),
    #[error("logarithm base {0} must be greater than 1")]
    InvalidLogBase(f64),
    #[error("model cannot complete: no final marking reachable ({expanded} states explored)")]
    ModelCannotComplete { expanded: usize },
    #[error("state budget of {budget} exceeded after exploring {expanded} states")]
    StateBudgetExceeded { budget: usize, expanded: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    epsilon: f64,
    /// `ln(base)` of the logarithm used in move costs; 1 for natural log.
    log_divisor: f64,
}

impl CostParams {
    pub fn new(epsilon: f64) -> Result<Self, AlignmentError> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(AlignmentError::InvalidEpsilon(epsilon));
        }
        Ok(CostParams {
            epsilon,
            log_divisor: 1.0,
        })
    }

    /// Uses base-`base` logarithms instead of natural ones. All costs scale by
    /// `1 / ln(base)`, so `base` must exceed 1.
    pub fn with_log_base(self, base: f64) -> Result<Self, AlignmentError> {
        if !(base > 1.0 && base.is_finite()) {
            return Err(AlignmentError::InvalidLogBase(base));
        }
        Ok(CostParams {
            log_divisor: base.ln(),
            ..self
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn neg_log(&self, x: f64) -> f64 {
        let v = -x.ln();
        if self.log_divisor == 1.0 {
            v
        } else {
            v / self.log_divisor
        }
    }

    pub fn sync_cost(&self, w: f64) -> Option<f64> {
        (w > 0.0).then(|| self.neg_log(w))
    }

    pub fn log_move_cost(&self, w: f64) -> Option<f64> {
        (w > 0.0).then(|| self.neg_log(w) + self.neg_log(self.epsilon))
    }

    pub fn model_move_cost(&self, silent: bool) -> f64 {
        if silent {
            0.0
        } else {
            self.neg_log(self.epsilon)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Move {
    Sync {
        event_index: usize,
        activity: String,
        transition: String,
    },
    #[serde(rename = "log")]
    LogMove { event_index: usize, activity: String },
    #[serde(rename = "model")]
    ModelMove {
        transition: String,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        activity: Option<String>,
    },
}

impl Move {
    pub fn event_index(&self) -> Option<usize> {
        match self {
            Move::Sync { event_index, .. } | Move::LogMove { event_index, .. } => Some(*event_index),
            Move::ModelMove { .. } => None,
        }
    }

    pub fn is_sync(&self) -> bool {
        matches!(self, Move::Sync { .. })
    }

    pub fn is_log_move(&self) -> bool {
        matches!(self, Move::LogMove { .. })
    }

    pub fn is_model_move(&self) -> bool {
        matches!(self, Move::ModelMove { .. })
    }
}

/// Cost of a single move against `trace`, or `None` when the move is
/// inadmissible (zero probability, unknown activity or event out of range).
pub fn move_cost(mv: &Move, trace: &ProbTrace, params: &CostParams) -> Option<f64> {
    let weight = |event_index: usize, activity: &str| -> Option<f64> {
        let dist = trace.events().get(event_index)?;
        let a = trace.alphabet().index_of(activity)?;
        Some(dist.prob(a))
    };
    match mv {
        Move::Sync {
            event_index,
            activity,
            ..
        } => params.sync_cost(weight(*event_index, activity)?),
        Move::LogMove {
            event_index,
            activity,
        } => params.log_move_cost(weight(*event_index, activity)?),
        Move::ModelMove { activity, .. } => Some(params.model_move_cost(activity.is_none())),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchStats {
    /// States popped from the queue and expanded.
    pub expanded: usize,
    /// Distinct states discovered.
    pub discovered: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    moves: Vec<Move>,
    move_costs: Vec<f64>,
    total_cost: f64,
    epsilon: f64,
    stats: SearchStats,
}

impl Alignment {
    pub fn moves(&self) -> &[Move] {
        &self.moves
    }

    pub fn move_costs(&self) -> &[f64] {
        &self.move_costs
    }

    pub fn total_cost(&self) -> f64 {
        self.total_cost
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn stats(&self) -> SearchStats {
        self.stats
    }

    pub fn to_record(&self) -> AlignmentRecord {
        AlignmentRecord {
            epsilon: self.epsilon,
            total_cost: self.total_cost,
            moves: self.moves.clone(),
            retrieved: retrieve_activities(self),
        }
    }

    /// Checks the structural invariants of an alignment against the net and
    /// trace it was computed for.
    pub fn verify(&self, net: &PetriNet, trace: &ProbTrace, params: &CostParams) -> Result<(), String> {
        let mut next_event = 0;
        let mut marking = net.initial_marking().clone();
        let mut total = 0.0;
        for mv in &self.moves {
            if let Some(j) = mv.event_index() {
                if j != next_event {
                    return Err(format!("event {j} out of order, expected {next_event}"));
                }
                next_event += 1;
            }
            match mv {
                Move::Sync { transition, .. } | Move::ModelMove { transition, .. } => {
                    let t = net
                        .transition_id(transition)
                        .ok_or_else(|| format!("unknown transition {transition}"))?;
                    marking = net.fire(&marking, t).map_err(|e| e.to_string())?;
                }
                Move::LogMove { .. } => {}
            }
            total += move_cost(mv, trace, params).ok_or_else(|| format!("inadmissible move {mv:?}"))?;
        }
        if next_event != trace.len() {
            return Err(format!("{next_event} of {} events consumed", trace.len()));
        }
        if !net.is_final(&marking) {
            return Err(format!("ends in non-final marking {}", net.format_marking(&marking)));
        }
        if (total - self.total_cost).abs() > 1e-9 {
            return Err(format!("cost {} differs from move sum {total}", self.total_cost));
        }
        Ok(())
    }
}

/// Serialized form of an [`Alignment`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentRecord {
    pub epsilon: f64,
    pub total_cost: f64,
    pub moves: Vec<Move>,
    pub retrieved: Vec<String>,
}

/// Position of the search: a marking and the next unconsumed event.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchState {
    pub marking: Marking,
    pub next_event: usize,
    pub g: f64,
    pub h: f64,
}

/// Sum over the remaining events of `-ln` of their highest probability.
pub fn admissible_heuristic(state: &SearchState, trace: &ProbTrace) -> f64 {
    trace
        .events()
        .iter()
        .skip(state.next_event)
        .map(|d| -d.max().ln())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Heuristic {
    /// Remaining-event lower bound, see [`admissible_heuristic`].
    Admissible,
    /// `h = 0`, i.e. uniform-cost search.
    Zero,
}

#[derive(Debug, Clone, Copy)]
pub struct Aligner {
    pub params: CostParams,
    pub heuristic: Heuristic,
    pub max_expanded: usize,
}

impl Aligner {
    pub fn new(params: CostParams) -> Self {
        Aligner {
            params,
            heuristic: Heuristic::Admissible,
            max_expanded: DEFAULT_MAX_EXPANDED,
        }
    }

    pub fn heuristic(mut self, heuristic: Heuristic) -> Self {
        self.heuristic = heuristic;
        self
    }

    pub fn max_expanded(mut self, budget: usize) -> Self {
        self.max_expanded = budget;
        self
    }

    pub fn align(&self, net: &PetriNet, trace: &ProbTrace) -> Result<Alignment, AlignmentError> {
        Search::new(self, net, trace).run()
    }
}

/// Optimal alignment with the admissible heuristic and default budget.
pub fn align(net: &PetriNet, trace: &ProbTrace, params: CostParams) -> Result<Alignment, AlignmentError> {
    Aligner::new(params).align(net, trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    Sync(TransitionId),
    Log,
    Model(TransitionId),
}

impl Step {
    /// Queue tie-break key: synchronous before log before model moves, then
    /// lower transition id.
    fn rank(self) -> (u8, usize) {
        match self {
            Step::Sync(t) => (0, t.0),
            Step::Log => (1, 0),
            Step::Model(t) => (2, t.0),
        }
    }
}

fn fixed(cost: f64) -> u64 {
    (cost * FIXED_POINT_SCALE).round() as u64
}

struct Node {
    marking: Marking,
    event: usize,
    g: u64,
    parent: Option<(usize, Step)>,
    closed: bool,
}

struct Search<'a> {
    net: &'a PetriNet,
    trace: &'a ProbTrace,
    params: CostParams,
    max_expanded: usize,
    /// alphabet index of each transition's label
    labels: Vec<Option<usize>>,
    /// per event: most probable activity and log-move cost
    log_moves: Vec<(usize, u64)>,
    /// suffix sums of the per-event lower bound
    h: Vec<u64>,
    model_cost: u64,
}

impl<'a> Search<'a> {
    fn new(aligner: &Aligner, net: &'a PetriNet, trace: &'a ProbTrace) -> Self {
        let params = aligner.params;
        let labels = net
            .transitions()
            .iter()
            .map(|t| t.label.as_deref().and_then(|l| trace.alphabet().index_of(l)))
            .collect();
        let model_cost = fixed(params.model_move_cost(false));
        // both terms of a log move are rounded separately
        let log_moves = trace
            .events()
            .iter()
            .map(|d| {
                let a = d.argmax();
                let sync = params.sync_cost(d.prob(a)).expect("argmax has positive mass");
                (a, fixed(sync) + model_cost)
            })
            .collect();
        let m = trace.len();
        let mut h = vec![0u64; m + 1];
        if aligner.heuristic == Heuristic::Admissible {
            for j in (0..m).rev() {
                let bound = params.sync_cost(trace.events()[j].max()).expect("max is positive");
                h[j] = h[j + 1] + fixed(bound);
            }
        }
        Search {
            net,
            trace,
            params,
            max_expanded: aligner.max_expanded,
            labels,
            log_moves,
            h,
            model_cost,
        }
    }

    fn run(self) -> Result<Alignment, AlignmentError> {
        let m = self.trace.len();
        let mut nodes: Vec<Node> = Vec::new();
        let mut index: HashMap<(Marking, usize), usize> = HashMap::new();
        // (f, rank, insertion order, node)
        let mut queue: BinaryHeap<Reverse<(u64, (u8, usize), u64, usize)>> = BinaryHeap::new();
        let mut seq = 0u64;

        let start = self.net.initial_marking().clone();
        index.insert((start.clone(), 0), 0);
        nodes.push(Node {
            marking: start,
            event: 0,
            g: 0,
            parent: None,
            closed: false,
        });
        queue.push(Reverse((self.h[0], (0, 0), seq, 0)));

        let mut expanded = 0;
        while let Some(Reverse((f, _, _, id))) = queue.pop() {
            let node = &nodes[id];
            if node.closed || node.g + self.h[node.event] != f {
                continue;
            }
            if node.event == m && self.net.is_final(&node.marking) {
                let stats = SearchStats {
                    expanded,
                    discovered: nodes.len(),
                };
                return Ok(self.reconstruct(&nodes, id, stats));
            }
            if expanded >= self.max_expanded {
                return Err(AlignmentError::StateBudgetExceeded {
                    budget: self.max_expanded,
                    expanded,
                });
            }
            expanded += 1;
            nodes[id].closed = true;

            let marking = nodes[id].marking.clone();
            let (event, g) = (nodes[id].event, nodes[id].g);
            for (step, cost) in self.successors(&marking, event) {
                let (next_marking, next_event) = match step {
                    Step::Sync(t) => (self.net.fire_unchecked(&marking, t), event + 1),
                    Step::Log => (marking.clone(), event + 1),
                    Step::Model(t) => (self.net.fire_unchecked(&marking, t), event),
                };
                let next_g = g + cost;
                let key = (next_marking, next_event);
                let target = match index.get(&key) {
                    Some(&existing) => {
                        let n = &mut nodes[existing];
                        if n.closed || n.g <= next_g {
                            continue;
                        }
                        n.g = next_g;
                        n.parent = Some((id, step));
                        existing
                    }
                    None => {
                        let new_id = nodes.len();
                        nodes.push(Node {
                            marking: key.0.clone(),
                            event: next_event,
                            g: next_g,
                            parent: Some((id, step)),
                            closed: false,
                        });
                        index.insert(key, new_id);
                        new_id
                    }
                };
                seq += 1;
                queue.push(Reverse((next_g + self.h[next_event], step.rank(), seq, target)));
            }
        }
        Err(AlignmentError::ModelCannotComplete { expanded })
    }

    fn successors(&self, marking: &Marking, event: usize) -> Vec<(Step, u64)> {
        let mut out = Vec::new();
        let enabled = self.net.enabled(marking);
        if let Some(dist) = self.trace.events().get(event) {
            for &t in &enabled {
                if let Some(a) = self.labels[t.0] {
                    if let Some(cost) = self.params.sync_cost(dist.prob(a)) {
                        out.push((Step::Sync(t), fixed(cost)));
                    }
                }
            }
            out.push((Step::Log, self.log_moves[event].1));
        }
        for &t in &enabled {
            let cost = if self.net.transition(t).is_silent() {
                0
            } else {
                self.model_cost
            };
            out.push((Step::Model(t), cost));
        }
        out
    }

    fn reconstruct(&self, nodes: &[Node], goal: usize, stats: SearchStats) -> Alignment {
        let mut steps = Vec::new();
        let mut cur = goal;
        while let Some((parent, step)) = nodes[cur].parent {
            steps.push((step, nodes[parent].event));
            cur = parent;
        }
        steps.reverse();

        let alphabet = self.trace.alphabet();
        let mut moves = Vec::with_capacity(steps.len());
        let mut move_costs = Vec::with_capacity(steps.len());
        for (step, event) in steps {
            let (mv, cost) = match step {
                Step::Sync(t) => {
                    let a = self.labels[t.0].expect("sync moves carry a known label");
                    let w = self.trace.events()[event].prob(a);
                    (
                        Move::Sync {
                            event_index: event,
                            activity: alphabet.label(a).to_owned(),
                            transition: self.net.transition(t).name.clone(),
                        },
                        self.params.sync_cost(w).expect("positive weight"),
                    )
                }
                Step::Log => {
                    let a = self.log_moves[event].0;
                    let w = self.trace.events()[event].prob(a);
                    (
                        Move::LogMove {
                            event_index: event,
                            activity: alphabet.label(a).to_owned(),
                        },
                        self.params.log_move_cost(w).expect("positive weight"),
                    )
                }
                Step::Model(t) => {
                    let tr = self.net.transition(t);
                    (
                        Move::ModelMove {
                            transition: tr.name.clone(),
                            activity: tr.label.clone(),
                        },
                        self.params.model_move_cost(tr.is_silent()),
                    )
                }
            };
            moves.push(mv);
            move_costs.push(cost);
        }
        Alignment {
            total_cost: move_costs.iter().sum(),
            moves,
            move_costs,
            epsilon: self.params.epsilon,
            stats,
        }
    }
}

/// Recognized activities: the activity of each event's synchronous or log
/// move, in event order.
pub fn retrieve_activities(alignment: &Alignment) -> Vec<String> {
    alignment
        .moves()
        .iter()
        .filter_map(|mv| match mv {
            Move::Sync { activity, .. } | Move::LogMove { activity, .. } => Some(activity.clone()),
            Move::ModelMove { .. } => None,
        })
        .collect()
}

/// Two-row table of an alignment: the log side on top, the model side
/// below, `≫` marking the missing side and `τ` silent transitions.
pub struct TwoRowRendering<'a>(pub &'a Alignment);

impl fmt::Display for TwoRowRendering<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const SKIP: &str = "≫";
        let mut top = vec!["Event log".to_owned()];
        let mut bottom = vec!["Process model".to_owned()];
        for mv in self.0.moves() {
            let (log, model) = match mv {
                Move::Sync { activity, .. } => (activity.clone(), activity.clone()),
                Move::LogMove { activity, .. } => (activity.clone(), SKIP.to_owned()),
                Move::ModelMove { activity, .. } => {
                    (SKIP.to_owned(), activity.clone().unwrap_or_else(|| "τ".to_owned()))
                }
            };
            top.push(log);
            bottom.push(model);
        }
        let widths: Vec<usize> = top
            .iter()
            .zip(&bottom)
            .map(|(a, b)| a.chars().count().max(b.chars().count()))
            .collect();
        let line = |row: &[String]| {
            let mut s = String::new();
            for (i, (cell, &w)) in row.iter().zip(&widths).enumerate() {
                if i > 0 {
                    s.push_str(" | ");
                }
                let pad = w - cell.chars().count();
                let _ = write!(s, "{cell}{}", " ".repeat(pad));
            }
            s.trim_end().to_owned()
        };
        writeln!(f, "{}", line(&top))?;
        writeln!(f, "{}", line(&bottom))
    }
}

pub fn render_two_rows(alignment: &Alignment) -> String {
    TwoRowRendering(alignment).to_string()
}
