//! Comparison algorithms: uniform allocation over links or paths, successive
//! elimination over paths, and a halving eliminator that treats every path
//! as an independent arm.
//!
//! The path-level baselines see only a path's own depolarizing parameter, so
//! under SKF they score each path as one link with that parameter. That score
//! is monotone in the parameter and their pick is the same under both metrics.
//! It is the SKF-best path whenever the two metrics share a best path, which
//! holds on every segmented topology.

use serde::{Deserialize, Serialize};

use crate::bench::{BenchTarget, Feedback, DEFAULT_CONCENTRATION_C, P_CLIP_LO};
use crate::error::{Error, Result};
use crate::network::{best_path_oracle, LinkId, PathId};
use crate::qkd::Metric;
use crate::trace::{EliminationRound, Meter, RoundRecord, RunResult, DEFAULT_MAX_ROUNDS};
use crate::TrialRng;

pub const DEFAULT_SAMPLES_PER_ARM: u64 = 20;
/// Resolution of the halving eliminator, in path depolarizing parameter.
pub const DEFAULT_HALVING_EPS: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub samples_per_arm: u64,
    pub delta: f64,
    pub c: f64,
    pub halving_eps: f64,
    pub metric: Metric,
    pub max_rounds: u64,
}

impl BaselineConfig {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::OutOfRange {
                name: "delta",
                value: delta,
            });
        }
        Ok(BaselineConfig {
            samples_per_arm: DEFAULT_SAMPLES_PER_ARM,
            delta,
            c: DEFAULT_CONCENTRATION_C,
            halving_eps: DEFAULT_HALVING_EPS,
            metric: Metric::Fidelity,
            max_rounds: DEFAULT_MAX_ROUNDS,
        })
    }

    pub fn with_metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }
}

fn check_paths(feedback: &dyn Feedback) -> Result<()> {
    if feedback.topology().num_paths() < 2 {
        return Err(Error::Degenerate("fewer than two paths".into()));
    }
    Ok(())
}

/// Index of the largest mean among `arms`, ties to the smallest path id.
fn best_arm(arms: &[PathId], means: &[f64]) -> PathId {
    let mut best = arms[0];
    for &k in &arms[1..] {
        if means[k.0] > means[best.0] {
            best = k;
        }
    }
    best
}

/// Benchmarks every link `samples_per_arm` times and picks the best path
/// under the averaged estimates.
pub fn uniform_link(feedback: &dyn Feedback, cfg: &BaselineConfig, rng: &mut TrialRng) -> Result<RunResult> {
    check_paths(feedback)?;
    if cfg.samples_per_arm == 0 {
        return Err(Error::Config("samples_per_arm must be at least 1".into()));
    }
    let topology = feedback.topology();
    let mut meter = Meter::new(feedback, cfg.max_rounds);
    let mut means = vec![0.0; topology.num_links()];
    let mut exhausted = false;
    'links: for (l, mean) in means.iter_mut().enumerate() {
        let mut sum = 0.0;
        for i in 0..cfg.samples_per_arm {
            match meter.bench(BenchTarget::Link(LinkId(l)), rng) {
                Some(x) => sum += x,
                None => {
                    exhausted = true;
                    *mean = if i > 0 { sum / i as f64 } else { P_CLIP_LO };
                    break 'links;
                }
            }
        }
        *mean = sum / cfg.samples_per_arm as f64;
    }
    let weights: Vec<f64> = means
        .iter()
        .map(|&p| cfg.metric.link_weight(p.clamp(P_CLIP_LO, 1.0)))
        .collect();
    let all: Vec<PathId> = topology.path_ids().collect();
    let out = best_path_oracle(topology, &weights, &all)?;
    Ok(meter.finish(out, exhausted))
}

/// Benchmarks every path `samples_per_arm` times and picks the largest mean.
pub fn uniform_path(feedback: &dyn Feedback, cfg: &BaselineConfig, rng: &mut TrialRng) -> Result<RunResult> {
    check_paths(feedback)?;
    if cfg.samples_per_arm == 0 {
        return Err(Error::Config("samples_per_arm must be at least 1".into()));
    }
    let topology = feedback.topology();
    let mut meter = Meter::new(feedback, cfg.max_rounds);
    let arms: Vec<PathId> = topology.path_ids().collect();
    let mut means = vec![f64::NEG_INFINITY; arms.len()];
    let mut exhausted = false;
    'paths: for &k in &arms {
        let mut sum = 0.0;
        for _ in 0..cfg.samples_per_arm {
            match meter.bench(BenchTarget::Path(k), rng) {
                Some(x) => sum += x,
                None => {
                    exhausted = true;
                    break 'paths;
                }
            }
        }
        means[k.0] = sum / cfg.samples_per_arm as f64;
    }
    Ok(meter.finish(best_arm(&arms, &means), exhausted))
}

/// Successive elimination radius after `r` samples per arm.
pub fn elimination_radius(r: u64, num_arms: usize, c: f64, delta: f64) -> f64 {
    let rf = r as f64;
    (c * (4.0 * num_arms as f64 * rf * rf / delta).ln() / rf).sqrt()
}

/// Samples every surviving path once per round and drops paths whose mean
/// trails the leader by more than twice the radius.
pub fn succ_elim(feedback: &dyn Feedback, cfg: &BaselineConfig, rng: &mut TrialRng) -> Result<RunResult> {
    check_paths(feedback)?;
    let topology = feedback.topology();
    let k_total = topology.num_paths();
    let mut meter = Meter::new(feedback, cfg.max_rounds);
    let mut arms: Vec<PathId> = topology.path_ids().collect();
    let mut sums = vec![0.0; k_total];
    let mut means = vec![0.0; k_total];
    let mut r = 0u64;
    while arms.len() > 1 {
        r += 1;
        for &k in &arms {
            let Some(x) = meter.bench(BenchTarget::Path(k), rng) else {
                let out = if r > 1 { best_arm(&arms, &means) } else { arms[0] };
                return Ok(meter.finish(out, true));
            };
            sums[k.0] += x;
            means[k.0] = sums[k.0] / r as f64;
        }
        let leader = means[best_arm(&arms, &means).0];
        let rad = elimination_radius(r, k_total, cfg.c, cfg.delta);
        let (keep, gone): (Vec<PathId>, Vec<PathId>) = arms.iter().partition(|&&k| leader - means[k.0] <= 2.0 * rad);
        meter.record(RoundRecord::Elimination(EliminationRound {
            round: r,
            survivors: arms.len(),
            samples_per_arm: 1,
            eliminated: gone,
        }));
        arms = keep;
    }
    Ok(meter.finish(arms[0], false))
}

/// Per-arm sample count and tolerance of halving phase `i` (from 1).
/// Tolerances shrink by `sqrt 2` per phase so counts roughly double, and sum
/// to `eps` over all phases.
pub fn halving_phase(i: u32, eps: f64, delta: f64, c: f64) -> (u64, f64) {
    let eps_i = eps * (1.0 - std::f64::consts::FRAC_1_SQRT_2) * std::f64::consts::FRAC_1_SQRT_2.powi(i as i32 - 1);
    let delta_i = delta / 2f64.powi(i as i32);
    let n = (c * (3.0 / delta_i).ln() / (eps_i / 2.0).powi(2)).ceil() as u64;
    (n.max(1), eps_i)
}

/// Median-elimination style halving over paths treated as independent arms:
/// each phase benchmarks the survivors afresh and keeps the better half.
pub fn linkselfie_style(feedback: &dyn Feedback, cfg: &BaselineConfig, rng: &mut TrialRng) -> Result<RunResult> {
    check_paths(feedback)?;
    let topology = feedback.topology();
    let mut meter = Meter::new(feedback, cfg.max_rounds);
    let mut arms: Vec<PathId> = topology.path_ids().collect();
    let mut phase = 0u32;
    let mut means = vec![0.0; topology.num_paths()];
    while arms.len() > 1 {
        phase += 1;
        let (n, _) = halving_phase(phase, cfg.halving_eps, cfg.delta, cfg.c);
        for &k in &arms {
            let mut sum = 0.0;
            for _ in 0..n {
                let Some(x) = meter.bench(BenchTarget::Path(k), rng) else {
                    let out = if phase > 1 { best_arm(&arms, &means) } else { arms[0] };
                    return Ok(meter.finish(out, true));
                };
                sum += x;
            }
            means[k.0] = sum / n as f64;
        }
        let mut ranked = arms.clone();
        ranked.sort_by(|a, b| means[b.0].total_cmp(&means[a.0]).then(a.0.cmp(&b.0)));
        let keep = ranked.len().div_ceil(2);
        let mut gone = ranked.split_off(keep);
        gone.sort_unstable();
        ranked.sort_unstable();
        meter.record(RoundRecord::Elimination(EliminationRound {
            round: phase as u64,
            survivors: arms.len(),
            samples_per_arm: n,
            eliminated: gone,
        }));
        arms = ranked;
    }
    Ok(meter.finish(arms[0], false))
}
