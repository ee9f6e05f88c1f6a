//! Per-run records: every bench call with its cost, plus one record per
//! learner round, and the metered feedback wrapper that produces them.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bench::{BenchTarget, Feedback};
use crate::error::{Error, Result};
use crate::network::{LinkId, PathId, Topology};
use crate::TrialRng;

/// Default cap on bench calls per run.
pub const DEFAULT_MAX_ROUNDS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchEvent {
    pub target: BenchTarget,
    pub cost_units: u32,
    pub feedback: f64,
}

/// One iteration of the link-level learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkRound {
    pub t: u64,
    pub k_hat: PathId,
    pub k_tilde: PathId,
    pub chosen_link: Option<LinkId>,
    pub feedback: Option<f64>,
    #[serde(rename = "N_after")]
    pub n_after: Option<u64>,
}

/// One inner (pruning) iteration of the path-level learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneRound {
    pub h: u32,
    pub s: u32,
    #[serde(rename = "|S|")]
    pub set_size: usize,
    pub delta_hs: f64,
    pub eps_hs: f64,
    #[serde(rename = "N")]
    pub n: u64,
    pub k_best: PathId,
    pub pruned: Vec<PathId>,
}

/// One phase of an elimination baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EliminationRound {
    pub round: u64,
    pub survivors: usize,
    pub samples_per_arm: u64,
    pub eliminated: Vec<PathId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RoundRecord {
    Link(LinkRound),
    Prune(PruneRound),
    Elimination(EliminationRound),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LearnerTrace {
    pub events: Vec<BenchEvent>,
    pub rounds: Vec<RoundRecord>,
}

impl LearnerTrace {
    /// Sum of cost units over all recorded bench calls.
    pub fn audited_cost(&self) -> u64 {
        self.events.iter().map(|e| e.cost_units as u64).sum()
    }

    /// Round records as JSON lines.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.rounds {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n").map_err(|source| Error::Io {
                path: "<trace>".into(),
                source,
            })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub output_path: PathId,
    /// Quantum resource units consumed.
    pub total_cost: u64,
    /// Number of bench calls.
    pub rounds: u64,
    pub trace: LearnerTrace,
    /// The round cap was hit before the stopping rule fired; `output_path`
    /// is the best guess at that point.
    pub budget_exhausted: bool,
}

/// Feedback wrapper that meters cost and enforces the round cap.
pub struct Meter<'a> {
    feedback: &'a dyn Feedback,
    trace: LearnerTrace,
    cost: u64,
    max_rounds: u64,
}

impl<'a> Meter<'a> {
    pub fn new(feedback: &'a dyn Feedback, max_rounds: u64) -> Self {
        Meter {
            feedback,
            trace: LearnerTrace::default(),
            cost: 0,
            max_rounds,
        }
    }

    pub fn topology(&self) -> &'a Topology {
        self.feedback.topology()
    }

    pub fn rounds(&self) -> u64 {
        self.trace.events.len() as u64
    }

    pub fn cost(&self) -> u64 {
        self.cost
    }

    pub fn exhausted(&self) -> bool {
        self.rounds() >= self.max_rounds
    }

    /// One bench call, or `None` once the cap is reached.
    pub fn bench(&mut self, target: BenchTarget, rng: &mut TrialRng) -> Option<f64> {
        if self.exhausted() {
            return None;
        }
        let value = self.feedback.observe(target, rng);
        let cost_units = target.cost_units(self.feedback.topology());
        self.cost += cost_units;
        self.trace.events.push(BenchEvent {
            target,
            cost_units: cost_units as u32,
            feedback: value,
        });
        Some(value)
    }

    pub fn record(&mut self, round: RoundRecord) {
        self.trace.rounds.push(round);
    }

    pub fn finish(self, output_path: PathId, budget_exhausted: bool) -> RunResult {
        RunResult {
            output_path,
            total_cost: self.cost,
            rounds: self.trace.events.len() as u64,
            trace: self.trace,
            budget_exhausted,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::ExactFeedback;
    use crate::network::{build_segmented_topology, Instance};
    use rand::SeedableRng;

    #[test]
    fn meter_accounts_and_caps() {
        let inst = Instance::new(build_segmented_topology(&[2, 3]).unwrap(), vec![0.9; 5]).unwrap();
        let fb = ExactFeedback::new(&inst);
        let mut rng = TrialRng::seed_from_u64(0);
        let mut m = Meter::new(&fb, 3);
        assert_eq!(m.bench(BenchTarget::Link(LinkId(0)), &mut rng), Some(0.9));
        assert!(m.bench(BenchTarget::Path(PathId(0)), &mut rng).is_some());
        assert!(m.bench(BenchTarget::Path(PathId(1)), &mut rng).is_some());
        assert_eq!(m.bench(BenchTarget::Link(LinkId(1)), &mut rng), None);
        assert!(m.exhausted());
        let r = m.finish(PathId(0), true);
        assert_eq!(r.total_cost, 5);
        assert_eq!(r.rounds, 3);
        assert_eq!(r.trace.audited_cost(), 5);
    }

    #[test]
    fn jsonl_round_records() {
        let mut trace = LearnerTrace::default();
        trace.rounds.push(RoundRecord::Link(LinkRound {
            t: 4,
            k_hat: PathId(0),
            k_tilde: PathId(1),
            chosen_link: Some(LinkId(1)),
            feedback: Some(0.8),
            n_after: Some(2),
        }));
        let mut buf = Vec::new();
        trace.write_jsonl(&mut buf).unwrap();
        let line = String::from_utf8(buf).unwrap();
        assert_eq!(
            line,
            "{\"t\":4,\"k_hat\":0,\"k_tilde\":1,\"chosen_link\":1,\"feedback\":0.8,\"N_after\":2}\n"
        );
    }
}
