//! Process-aware calibration of probabilistic activity recognition.
//!
//! A classifier's per-event probability distributions are aligned against a
//! Petri net process model; the optimal alignment yields a corrected label
//! sequence. The crate covers event data ingestion, Petri nets with PNML
//! exchange, heuristic process discovery, cost-based A* alignment, epsilon
//! tuning with evaluation, and seeded synthetic corpora.

pub mod alignment;
pub mod calibration;
pub mod discovery;
pub mod eventdata;
pub mod petri;
pub mod report;
pub mod synth;
