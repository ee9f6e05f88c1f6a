//! Link-level best path identification: benchmark individual links until
//! the empirical best path is confirmed by pessimistic/optimistic bounds.

use serde::{Deserialize, Serialize};

use crate::bench::{BenchTarget, Feedback, DEFAULT_CONCENTRATION_C, P_CLIP_LO};
use crate::error::{Error, Result};
use crate::network::{best_path_oracle, LinkId, PathId, Topology};
use crate::qkd::Metric;
use crate::trace::{LinkRound, Meter, RoundRecord, RunResult, DEFAULT_MAX_ROUNDS};
use crate::TrialRng;

/// Largest adjusted estimate; keeps the optimistic value a valid parameter.
pub const P_TILDE_MAX: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusConfig {
    pub c: f64,
    pub delta: f64,
}

impl RadiusConfig {
    pub fn new(c: f64, delta: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::OutOfRange { name: "C", value: c });
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::OutOfRange {
                name: "delta",
                value: delta,
            });
        }
        Ok(RadiusConfig { c, delta })
    }
}

/// `sqrt(C ln(2 L t^3 / delta) / N)`.
pub fn radius(t: u64, n: u64, cfg: &RadiusConfig, num_links: usize) -> f64 {
    let t = t as f64;
    (cfg.c * (2.0 * num_links as f64 * t * t * t / cfg.delta).ln() / n as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkEstimates {
    pub p_hat: Vec<f64>,
    pub counts: Vec<u64>,
    pub t: u64,
}

impl LinkEstimates {
    /// Folds one more observation of `l` into its running mean.
    pub fn update(&mut self, l: LinkId, x: f64) {
        let n = self.counts[l.0];
        self.p_hat[l.0] = (x + n as f64 * self.p_hat[l.0]) / (n + 1) as f64;
        self.counts[l.0] = n + 1;
    }
}

/// Pessimistic estimates on the links of `k_hat`, optimistic elsewhere,
/// clamped to `[P_CLIP_LO, 1)`.
pub fn confidence_estimates(topology: &Topology, est: &LinkEstimates, k_hat: PathId, cfg: &RadiusConfig) -> Vec<f64> {
    (0..topology.num_links())
        .map(|l| {
            let rad = radius(est.t, est.counts[l], cfg, topology.num_links());
            let p = if topology.contains(k_hat, LinkId(l)) {
                est.p_hat[l] - rad
            } else {
                est.p_hat[l] + rad
            };
            p.clamp(P_CLIP_LO, P_TILDE_MAX)
        })
        .collect()
}

/// Link in the symmetric difference of the two paths with the widest radius
/// (fewest samples), ties to the smallest id.
pub fn select_link(topology: &Topology, k_hat: PathId, k_tilde: PathId, est: &LinkEstimates) -> Result<LinkId> {
    topology
        .symmetric_difference(k_hat, k_tilde)
        .into_iter()
        .min_by_key(|l| (est.counts[l.0], l.0))
        .ok_or(Error::EqualLinkSets)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkLearnerConfig {
    pub radius: RadiusConfig,
    pub metric: Metric,
    pub max_rounds: u64,
}

impl LinkLearnerConfig {
    pub fn new(delta: f64) -> Result<Self> {
        Ok(LinkLearnerConfig {
            radius: RadiusConfig::new(DEFAULT_CONCENTRATION_C, delta)?,
            metric: Metric::Fidelity,
            max_rounds: DEFAULT_MAX_ROUNDS,
        })
    }

    pub fn with_metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    pub fn with_c(mut self, c: f64) -> Result<Self> {
        self.radius = RadiusConfig::new(c, self.radius.delta)?;
        Ok(self)
    }
}

fn weights(metric: Metric, p: &[f64]) -> Vec<f64> {
    p.iter().map(|&v| metric.link_weight(v.clamp(P_CLIP_LO, 1.0))).collect()
}

pub fn run_bequp_link(feedback: &dyn Feedback, cfg: &LinkLearnerConfig, rng: &mut TrialRng) -> Result<RunResult> {
    let topology = feedback.topology();
    if topology.num_paths() < 2 {
        return Err(Error::Degenerate("fewer than two paths".into()));
    }
    let all: Vec<PathId> = topology.path_ids().collect();
    let num_links = topology.num_links();
    let mut meter = Meter::new(feedback, cfg.max_rounds);

    let mut p_hat = Vec::with_capacity(num_links);
    for l in 0..num_links {
        match meter.bench(BenchTarget::Link(LinkId(l)), rng) {
            Some(x) => p_hat.push(x),
            None => {
                return Err(Error::Config(format!(
                    "round cap {} is below the {num_links} initial link benchmarks",
                    cfg.max_rounds
                )))
            }
        }
    }
    let mut est = LinkEstimates {
        p_hat,
        counts: vec![1; num_links],
        t: num_links as u64,
    };

    loop {
        let k_hat = best_path_oracle(topology, &weights(cfg.metric, &est.p_hat), &all)?;
        let p_tilde = confidence_estimates(topology, &est, k_hat, &cfg.radius);
        let k_tilde = best_path_oracle(topology, &cfg.metric.link_weights(&p_tilde), &all)?;
        if k_hat == k_tilde {
            meter.record(RoundRecord::Link(LinkRound {
                t: est.t,
                k_hat,
                k_tilde,
                chosen_link: None,
                feedback: None,
                n_after: None,
            }));
            return Ok(meter.finish(k_hat, false));
        }
        let l = select_link(topology, k_hat, k_tilde, &est)?;
        let Some(x) = meter.bench(BenchTarget::Link(l), rng) else {
            return Ok(meter.finish(k_hat, true));
        };
        est.update(l, x);
        meter.record(RoundRecord::Link(LinkRound {
            t: est.t,
            k_hat,
            k_tilde,
            chosen_link: Some(l),
            feedback: Some(x),
            n_after: Some(est.counts[l.0]),
        }));
        est.t += 1;
    }
}
