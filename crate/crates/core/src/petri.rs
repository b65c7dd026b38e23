//! Labeled Petri nets with weight-one arcs, initial and final markings.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt::{self, Write as _};

use serde::Serialize;
use thiserror::Error;

mod pnml;

pub use pnml::{pnml_read, pnml_write};

#[derive(Debug, Error)]
pub enum PetriError {
    #[error("duplicate place id `{0}`")]
    DuplicatePlace(String),
    #[error("duplicate transition id `{0}`")]
    DuplicateTransition(String),
    #[error("transition `{0}` has no input place")]
    NoInputs(String),
    #[error("transition `{0}` has no output place")]
    NoOutputs(String),
    #[error("net has no final marking")]
    NoFinalMarking,
    #[error("transition `{0}` is not enabled")]
    NotEnabled(String),
    #[error("unknown place `{0}`")]
    UnknownPlace(String),
    #[error("unknown transition `{0}`")]
    UnknownTransition(String),
    #[error("arc `{arc}` references unknown node `{node}`")]
    DanglingArc { arc: String, node: String },
    #[error("arc `{0}` must connect a place and a transition")]
    InvalidArc(String),
    #[error("malformed PNML: {0}")]
    Pnml(String),
    #[error(transparent)]
    Xml(#[from] roxmltree::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct PlaceId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct TransitionId(pub usize);

impl fmt::Display for TransitionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Place {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    /// Unique id of the transition within its net.
    pub name: String,
    /// Activity label, `None` for a silent (tau) transition.
    pub label: Option<String>,
}

impl Transition {
    pub fn is_silent(&self) -> bool {
        self.label.is_none()
    }
}

/// Token counts, one entry per place of the owning net.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Marking(Vec<u32>);

impl Marking {
    pub fn empty(places: usize) -> Self {
        Marking(vec![0; places])
    }

    pub fn from_counts(counts: Vec<u32>) -> Self {
        Marking(counts)
    }

    pub fn get(&self, place: PlaceId) -> u32 {
        self.0[place.0]
    }

    pub fn set(&mut self, place: PlaceId, tokens: u32) {
        self.0[place.0] = tokens;
    }

    pub fn add(&mut self, place: PlaceId, tokens: u32) {
        self.0[place.0] += tokens;
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&c| u64::from(c)).sum()
    }

    /// Marked places with their token counts.
    pub fn support(&self) -> impl Iterator<Item = (PlaceId, u32)> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (PlaceId(i), c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arc {
    PlaceToTransition(PlaceId, TransitionId),
    TransitionToPlace(TransitionId, PlaceId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PetriNet {
    places: Vec<Place>,
    transitions: Vec<Transition>,
    preset: Vec<Vec<PlaceId>>,
    postset: Vec<Vec<PlaceId>>,
    initial: Marking,
    finals: Vec<Marking>,
    place_index: HashMap<String, PlaceId>,
    transition_index: HashMap<String, TransitionId>,
}

impl PetriNet {
    pub fn builder() -> PetriNetBuilder {
        PetriNetBuilder::default()
    }

    pub fn places(&self) -> &[Place] {
        &self.places
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn transition(&self, t: TransitionId) -> &Transition {
        &self.transitions[t.0]
    }

    pub fn place(&self, p: PlaceId) -> &Place {
        &self.places[p.0]
    }

    pub fn place_id(&self, name: &str) -> Option<PlaceId> {
        self.place_index.get(name).copied()
    }

    pub fn transition_id(&self, name: &str) -> Option<TransitionId> {
        self.transition_index.get(name).copied()
    }

    pub fn transition_ids(&self) -> impl Iterator<Item = TransitionId> {
        (0..self.transitions.len()).map(TransitionId)
    }

    pub fn preset(&self, t: TransitionId) -> &[PlaceId] {
        &self.preset[t.0]
    }

    pub fn postset(&self, t: TransitionId) -> &[PlaceId] {
        &self.postset[t.0]
    }

    pub fn arcs(&self) -> impl Iterator<Item = Arc> + '_ {
        self.transition_ids().flat_map(move |t| {
            let ins = self.preset(t).iter().map(move |&p| Arc::PlaceToTransition(p, t));
            let outs = self.postset(t).iter().map(move |&p| Arc::TransitionToPlace(t, p));
            ins.chain(outs)
        })
    }

    pub fn initial_marking(&self) -> &Marking {
        &self.initial
    }

    pub fn final_markings(&self) -> &[Marking] {
        &self.finals
    }

    pub fn is_final(&self, marking: &Marking) -> bool {
        self.finals.iter().any(|f| f == marking)
    }

    /// Builds a marking from `(place name, tokens)` pairs.
    pub fn marking(&self, tokens: &[(&str, u32)]) -> Result<Marking, PetriError> {
        let mut m = Marking::empty(self.places.len());
        for &(name, n) in tokens {
            let p = self
                .place_id(name)
                .ok_or_else(|| PetriError::UnknownPlace(name.to_owned()))?;
            m.add(p, n);
        }
        Ok(m)
    }

    /// Distinct non-silent labels in transition order.
    pub fn visible_labels(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.transitions
            .iter()
            .filter_map(|t| t.label.as_deref())
            .filter(|l| seen.insert(*l))
            .collect()
    }

    pub fn transitions_with_label<'a>(&'a self, label: &'a str) -> impl Iterator<Item = TransitionId> + 'a {
        self.transition_ids()
            .filter(move |&t| self.transitions[t.0].label.as_deref() == Some(label))
    }

    pub fn is_enabled(&self, marking: &Marking, t: TransitionId) -> bool {
        self.preset[t.0].iter().all(|&p| marking.get(p) >= 1)
    }

    /// Transitions enabled in `marking`, in id order.
    pub fn enabled(&self, marking: &Marking) -> Vec<TransitionId> {
        self.transition_ids()
            .filter(|&t| self.is_enabled(marking, t))
            .collect()
    }

    pub fn fire(&self, marking: &Marking, t: TransitionId) -> Result<Marking, PetriError> {
        if !self.is_enabled(marking, t) {
            return Err(PetriError::NotEnabled(self.transitions[t.0].name.clone()));
        }
        Ok(self.fire_unchecked(marking, t))
    }

    /// Fires `t`, assuming it is enabled.
    pub(crate) fn fire_unchecked(&self, marking: &Marking, t: TransitionId) -> Marking {
        let mut next = marking.clone();
        for &p in &self.preset[t.0] {
            next.0[p.0] -= 1;
        }
        for &p in &self.postset[t.0] {
            next.0[p.0] += 1;
        }
        next
    }

    /// Breadth-first exploration of the markings reachable from `start` by
    /// firing silent transitions only. The first entry is `start` itself with
    /// an empty path. Exploration stops after `limit` markings.
    pub fn silent_closure(&self, start: &Marking, limit: usize) -> Vec<(Marking, Vec<TransitionId>)> {
        let mut seen: HashSet<Marking> = HashSet::new();
        let mut out = Vec::new();
        let mut queue = VecDeque::new();
        seen.insert(start.clone());
        queue.push_back((start.clone(), Vec::new()));
        while let Some((m, path)) = queue.pop_front() {
            for t in self.enabled(&m) {
                if !self.transitions[t.0].is_silent() {
                    continue;
                }
                let next = self.fire_unchecked(&m, t);
                if seen.len() < limit && seen.insert(next.clone()) {
                    let mut p = path.clone();
                    p.push(t);
                    queue.push_back((next, p));
                }
            }
            out.push((m, path));
        }
        out
    }

    /// Renders the marking as `{place:count, ..}` using place names.
    pub fn format_marking(&self, marking: &Marking) -> String {
        let parts: Vec<String> = marking
            .support()
            .map(|(p, c)| format!("{}:{}", self.places[p.0].name, c))
            .collect();
        format!("{{{}}}", parts.join(", "))
    }
}

#[derive(Debug, Default)]
pub struct PetriNetBuilder {
    places: Vec<Place>,
    transitions: Vec<Transition>,
    preset: Vec<Vec<PlaceId>>,
    postset: Vec<Vec<PlaceId>>,
    initial: Vec<(PlaceId, u32)>,
    finals: Vec<Vec<(PlaceId, u32)>>,
}

impl PetriNetBuilder {
    pub fn place(&mut self, name: impl Into<String>) -> PlaceId {
        self.places.push(Place { name: name.into() });
        PlaceId(self.places.len() - 1)
    }

    pub fn transition(&mut self, name: impl Into<String>, label: Option<&str>) -> TransitionId {
        self.transitions.push(Transition {
            name: name.into(),
            label: label.map(str::to_owned),
        });
        self.preset.push(Vec::new());
        self.postset.push(Vec::new());
        TransitionId(self.transitions.len() - 1)
    }

    pub fn arc_in(&mut self, p: PlaceId, t: TransitionId) -> &mut Self {
        if !self.preset[t.0].contains(&p) {
            self.preset[t.0].push(p);
        }
        self
    }

    pub fn arc_out(&mut self, t: TransitionId, p: PlaceId) -> &mut Self {
        if !self.postset[t.0].contains(&p) {
            self.postset[t.0].push(p);
        }
        self
    }

    pub fn initial(&mut self, p: PlaceId, tokens: u32) -> &mut Self {
        self.initial.push((p, tokens));
        self
    }

    pub fn final_marking(&mut self, tokens: Vec<(PlaceId, u32)>) -> &mut Self {
        self.finals.push(tokens);
        self
    }

    pub fn build(self) -> Result<PetriNet, PetriError> {
        let mut place_index = HashMap::new();
        for (i, p) in self.places.iter().enumerate() {
            if place_index.insert(p.name.clone(), PlaceId(i)).is_some() {
                return Err(PetriError::DuplicatePlace(p.name.clone()));
            }
        }
        let mut transition_index = HashMap::new();
        for (i, t) in self.transitions.iter().enumerate() {
            if transition_index.insert(t.name.clone(), TransitionId(i)).is_some() {
                return Err(PetriError::DuplicateTransition(t.name.clone()));
            }
            if self.preset[i].is_empty() {
                return Err(PetriError::NoInputs(t.name.clone()));
            }
            if self.postset[i].is_empty() {
                return Err(PetriError::NoOutputs(t.name.clone()));
            }
        }
        if self.finals.is_empty() {
            return Err(PetriError::NoFinalMarking);
        }
        let n = self.places.len();
        let to_marking = |tokens: &[(PlaceId, u32)]| {
            let mut m = Marking::empty(n);
            for &(p, c) in tokens {
                m.add(p, c);
            }
            m
        };
        let initial = to_marking(&self.initial);
        let mut finals: Vec<Marking> = Vec::new();
        for f in &self.finals {
            let m = to_marking(f);
            if !finals.contains(&m) {
                finals.push(m);
            }
        }
        let mut preset = self.preset;
        let mut postset = self.postset;
        preset.iter_mut().for_each(|s| s.sort());
        postset.iter_mut().for_each(|s| s.sort());
        Ok(PetriNet {
            places: self.places,
            transitions: self.transitions,
            preset,
            postset,
            initial,
            finals,
            place_index,
            transition_index,
        })
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz rendering. With `frequencies`, visible transitions whose label
/// appears in the map are labeled `"<activity> (<count>)"`.
pub fn dot_export(net: &PetriNet, frequencies: Option<&BTreeMap<String, u64>>) -> String {
    let mut out = String::new();
    out.push_str("digraph petrinet {\n  rankdir=LR;\n  node [fontname=\"Helvetica\"];\n");
    for (i, place) in net.places().iter().enumerate() {
        let p = PlaceId(i);
        let tokens = net.initial_marking().get(p);
        let shape = if net.final_markings().iter().any(|f| f.get(p) > 0) {
            "doublecircle"
        } else {
            "circle"
        };
        let label = if tokens > 0 { tokens.to_string() } else { String::new() };
        let _ = writeln!(
            out,
            "  \"p_{i}\" [shape={shape}, label=\"{label}\", xlabel=\"{}\"];",
            dot_escape(&place.name)
        );
    }
    for (i, t) in net.transitions().iter().enumerate() {
        match &t.label {
            Some(label) => {
                let text = match frequencies.and_then(|f| f.get(label)) {
                    Some(n) => format!("{label} ({n})"),
                    None => label.clone(),
                };
                let _ = writeln!(out, "  \"t_{i}\" [shape=box, label=\"{}\"];", dot_escape(&text));
            }
            None => {
                let _ = writeln!(
                    out,
                    "  \"t_{i}\" [shape=box, style=filled, fillcolor=black, label=\"\", width=0.15];"
                );
            }
        }
    }
    for arc in net.arcs() {
        let _ = match arc {
            Arc::PlaceToTransition(p, t) => writeln!(out, "  \"p_{}\" -> \"t_{}\";", p.0, t.0),
            Arc::TransitionToPlace(t, p) => writeln!(out, "  \"t_{}\" -> \"p_{}\";", t.0, p.0),
        };
    }
    out.push_str("}\n");
    out
}

/// Small reference nets.
pub mod fixtures {
    use super::PetriNet;

    /// `PickUpCup` followed either by `DrinkFromCup, PutDownCup` or by
    /// `AnswerPhone`.
    ///
    /// Places `p_start, p1, p2, p_end`; initial `{p_start:1}`, final
    /// `{p_end:1}`.
    pub fn drink_or_phone() -> PetriNet {
        let mut b = PetriNet::builder();
        let start = b.place("p_start");
        let p1 = b.place("p1");
        let p2 = b.place("p2");
        let end = b.place("p_end");
        let pick = b.transition("PickUpCup", Some("PickUpCup"));
        let drink = b.transition("DrinkFromCup", Some("DrinkFromCup"));
        let put = b.transition("PutDownCup", Some("PutDownCup"));
        let phone = b.transition("AnswerPhone", Some("AnswerPhone"));
        b.arc_in(start, pick).arc_out(pick, p1);
        b.arc_in(p1, drink).arc_out(drink, p2);
        b.arc_in(p2, put).arc_out(put, end);
        b.arc_in(p1, phone).arc_out(phone, end);
        b.initial(start, 1).final_marking(vec![(end, 1)]);
        b.build().expect("fixture net is well-formed")
    }

    /// A sequence of visible transitions, one per label.
    pub fn sequence(labels: &[&str]) -> PetriNet {
        let mut b = PetriNet::builder();
        let mut prev = b.place("p0");
        b.initial(prev, 1);
        for (i, label) in labels.iter().enumerate() {
            let next = b.place(format!("p{}", i + 1));
            let t = b.transition(format!("t{i}_{label}"), Some(label));
            b.arc_in(prev, t).arc_out(t, next);
            prev = next;
        }
        b.final_marking(vec![(prev, 1)]);
        b.build().expect("sequence net is well-formed")
    }
}
