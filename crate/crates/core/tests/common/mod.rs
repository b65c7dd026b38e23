//! Shared helpers for integration tests: random block-structured nets,
//! random probabilistic traces and an exhaustive reference for optimal
//! alignment cost.
#![allow(dead_code)]

use std::collections::{HashMap, VecDeque};

use procalign::alignment::CostParams;
use procalign::eventdata::{ActivityAlphabet, Distribution, ProbTrace};
use procalign::petri::{Marking, PetriNet, PetriNetBuilder, PlaceId};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const LABELS: [&str; 5] = ["A", "B", "C", "D", "E"];

#[derive(Debug, Clone)]
pub enum Tree {
    Leaf(Option<&'static str>),
    Seq(Vec<Tree>),
    Xor(Vec<Tree>),
    And(Vec<Tree>),
    Loop(Box<Tree>, Box<Tree>),
}

impl Tree {
    pub fn transitions(&self) -> usize {
        match self {
            Tree::Leaf(_) => 1,
            Tree::Seq(c) | Tree::Xor(c) => c.iter().map(Tree::transitions).sum(),
            Tree::And(c) => 2 + c.iter().map(Tree::transitions).sum::<usize>(),
            Tree::Loop(a, b) => 1 + a.transitions() + b.transitions(),
        }
    }
}

pub fn random_tree<R: Rng>(rng: &mut R, depth: usize) -> Tree {
    if depth == 0 || rng.random_bool(0.35) {
        let label = if rng.random_bool(0.15) {
            None
        } else {
            Some(*LABELS.choose(rng).unwrap())
        };
        return Tree::Leaf(label);
    }
    let width = rng.random_range(2..=3);
    let children = |rng: &mut R| (0..width).map(|_| random_tree(rng, depth - 1)).collect();
    match rng.random_range(0..10) {
        0..=3 => Tree::Seq(children(rng)),
        4..=6 => Tree::Xor(children(rng)),
        7..=8 => Tree::And(children(rng)),
        _ => Tree::Loop(Box::new(random_tree(rng, depth - 1)), Box::new(random_tree(rng, depth - 1))),
    }
}

struct NetBuild {
    b: PetriNetBuilder,
    places: usize,
    transitions: usize,
}

impl NetBuild {
    fn place(&mut self) -> PlaceId {
        self.places += 1;
        self.b.place(format!("p{}", self.places))
    }

    fn transition(&mut self, label: Option<&str>, from: PlaceId, to: PlaceId) {
        self.transitions += 1;
        let t = self.b.transition(format!("t{}", self.transitions), label);
        self.b.arc_in(from, t).arc_out(t, to);
    }

    fn add(&mut self, tree: &Tree, from: PlaceId, to: PlaceId) {
        match tree {
            Tree::Leaf(label) => self.transition(*label, from, to),
            Tree::Seq(children) => {
                let mut cur = from;
                for (i, c) in children.iter().enumerate() {
                    let next = if i + 1 == children.len() { to } else { self.place() };
                    self.add(c, cur, next);
                    cur = next;
                }
            }
            Tree::Xor(children) => {
                for c in children {
                    self.add(c, from, to);
                }
            }
            Tree::And(children) => {
                self.transitions += 1;
                let split = self.b.transition(format!("t{}", self.transitions), None);
                self.transitions += 1;
                let join = self.b.transition(format!("t{}", self.transitions), None);
                self.b.arc_in(from, split).arc_out(join, to);
                for c in children {
                    let (i, o) = (self.place(), self.place());
                    self.b.arc_out(split, i).arc_in(o, join);
                    self.add(c, i, o);
                }
            }
            Tree::Loop(body, redo) => {
                let mid = self.place();
                self.add(body, from, mid);
                self.add(redo, mid, from);
                self.transition(None, mid, to);
            }
        }
    }
}

pub fn tree_to_net(tree: &Tree) -> PetriNet {
    let mut nb = NetBuild {
        b: PetriNet::builder(),
        places: 0,
        transitions: 0,
    };
    let source = nb.place();
    let sink = nb.place();
    nb.add(tree, source, sink);
    nb.b.initial(source, 1).final_marking(vec![(sink, 1)]);
    nb.b.build().expect("block-structured nets are well formed")
}

/// Random workflow net with at most `max_transitions` transitions, silent
/// ones included.
pub fn random_net<R: Rng>(rng: &mut R, max_transitions: usize) -> PetriNet {
    loop {
        let tree = random_tree(rng, 3);
        if tree.transitions() <= max_transitions {
            return tree_to_net(&tree);
        }
    }
}

pub fn alphabet() -> ActivityAlphabet {
    ActivityAlphabet::new(LABELS).unwrap()
}

/// Random trace over [`LABELS`] with some zero entries per event.
pub fn random_trace<R: Rng>(rng: &mut R, max_len: usize) -> ProbTrace {
    let len = rng.random_range(1..=max_len);
    let events = (0..len)
        .map(|_| {
            let mut raw: Vec<f64> = LABELS
                .iter()
                .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random::<f64>() })
                .collect();
            if raw.iter().all(|&x| x == 0.0) {
                raw[rng.random_range(0..LABELS.len())] = 1.0;
            }
            let total: f64 = raw.iter().sum();
            Distribution::normalized(raw.into_iter().map(|x| x / total).collect()).unwrap()
        })
        .collect();
    ProbTrace::new("random", alphabet(), events).unwrap()
}

/// Random trace whose per-event maximum is unique.
pub fn random_trace_unique_max<R: Rng>(rng: &mut R, max_len: usize) -> ProbTrace {
    loop {
        let t = random_trace(rng, max_len);
        let unique = t.events().iter().all(|d| {
            let max = d.max();
            d.probs().iter().filter(|&&p| p == max).count() == 1
        });
        if unique {
            return t;
        }
    }
}

pub struct Instance {
    pub net: PetriNet,
    pub trace: ProbTrace,
    pub epsilon: f64,
}

/// `n` instances with nets of at most 8 transitions, traces of at most 5
/// events and epsilon cycling through 0.1, 0.5, 0.9.
pub fn oracle_instances(n: usize, seed: u64) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| Instance {
            net: random_net(&mut rng, 8),
            trace: random_trace(&mut rng, 5),
            epsilon: [0.1, 0.5, 0.9][i % 3],
        })
        .collect()
}

pub fn reachable_markings(net: &PetriNet, limit: usize) -> Vec<Marking> {
    let mut seen: HashMap<Marking, usize> = HashMap::new();
    let mut order = vec![net.initial_marking().clone()];
    seen.insert(net.initial_marking().clone(), 0);
    let mut queue = VecDeque::from([net.initial_marking().clone()]);
    while let Some(m) = queue.pop_front() {
        for t in net.enabled(&m) {
            let next = net.fire(&m, t).unwrap();
            if !seen.contains_key(&next) {
                assert!(order.len() < limit, "net exceeds {limit} reachable markings");
                seen.insert(next.clone(), order.len());
                order.push(next.clone());
                queue.push_back(next);
            }
        }
    }
    order
}

/// Minimal alignment cost by Bellman-Ford relaxation over every
/// (marking, events consumed) pair, with log moves for every activity of
/// positive probability. `None` when no final marking can be reached.
pub fn brute_force_cost(net: &PetriNet, trace: &ProbTrace, params: &CostParams) -> Option<f64> {
    let markings = reachable_markings(net, 10_000);
    let index: HashMap<&Marking, usize> = markings.iter().enumerate().map(|(i, m)| (m, i)).collect();
    let m = trace.len();
    let width = m + 1;
    let mut dist = vec![f64::INFINITY; markings.len() * width];
    dist[0] = 0.0;

    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for (mi, marking) in markings.iter().enumerate() {
        for j in 0..=m {
            let from = mi * width + j;
            for t in net.enabled(marking) {
                let next = index[&net.fire(marking, t).unwrap()];
                let tr = net.transition(t);
                edges.push((from, next * width + j, params.model_move_cost(tr.is_silent())));
                if j < m {
                    if let Some(a) = tr.label.as_deref().and_then(|l| trace.alphabet().index_of(l)) {
                        if let Some(c) = params.sync_cost(trace.events()[j].prob(a)) {
                            edges.push((from, next * width + j + 1, c));
                        }
                    }
                }
            }
            if j < m {
                for &p in trace.events()[j].probs() {
                    if let Some(c) = params.log_move_cost(p) {
                        edges.push((from, from + 1, c));
                    }
                }
            }
        }
    }
    for _ in 0..dist.len() {
        let mut changed = false;
        for &(u, v, c) in &edges {
            if dist[u] + c < dist[v] {
                dist[v] = dist[u] + c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    markings
        .iter()
        .enumerate()
        .filter(|(_, mk)| net.is_final(mk))
        .map(|(i, _)| dist[i * width + m])
        .filter(|c| c.is_finite())
        .min_by(f64::total_cmp)
}
