#![allow(dead_code)]

use bequp::bench::BenchTarget;
use bequp::network::{build_segmented_topology, Instance, PathId};
use bequp::qkd::Metric;
use bequp::trace::RunResult;
use bequp::TrialRng;
use rand::Rng;

/// Random segmented instance whose best path beats the runner-up by at
/// least `min_gap` in the path score of both metrics.
pub fn random_instance(rng: &mut TrialRng, min_gap: f64) -> Instance {
    loop {
        let segments: Vec<usize> = (0..rng.random_range(1..=3)).map(|_| rng.random_range(1..=4)).collect();
        let topology = build_segmented_topology(&segments).unwrap();
        if topology.num_paths() < 2 {
            continue;
        }
        let p: Vec<f64> = (0..topology.num_links()).map(|_| rng.random_range(0.6..0.99)).collect();
        let instance = Instance::new(topology, p).unwrap();
        if Metric::ALL.iter().all(|&m| runner_up_gap(&instance, m) >= min_gap) {
            return instance;
        }
    }
}

/// Score difference between the best and second-best path.
pub fn runner_up_gap(instance: &Instance, metric: Metric) -> f64 {
    let mut values: Vec<f64> = instance
        .topology
        .path_ids()
        .map(|k| metric.path_value(instance, k))
        .collect();
    values.sort_by(|a, b| b.partial_cmp(a).unwrap());
    values[0] - values[1]
}

/// Cost recomputed from the event targets and the topology alone.
pub fn independent_cost(instance: &Instance, run: &RunResult) -> u64 {
    run.trace
        .events
        .iter()
        .map(|e| match e.target {
            BenchTarget::Link(_) => 1,
            BenchTarget::Path(k) => instance.topology.links_of(k).len() as u64,
        })
        .sum()
}

pub fn path_events(run: &RunResult) -> Vec<PathId> {
    run.trace
        .events
        .iter()
        .filter_map(|e| match e.target {
            BenchTarget::Path(k) => Some(k),
            _ => None,
        })
        .collect()
}
