//! Path-level best path identification: link parameters are regressed from
//! path benchmarks drawn from an optimal design, and the candidate set is
//! pruned with shrinking tolerances until one path remains.

use nalgebra::{DMatrix, DVector};
use rand::distr::{weighted::WeightedIndex, Distribution};
use serde::{Deserialize, Serialize};

use crate::bench::{BenchTarget, Feedback};
use crate::design::{optimal_design, pinv_sym, DesignWeights};
use crate::error::{Error, Result};
use crate::network::{best_path_oracle, PathId, Topology};
use crate::qkd::Metric;
use crate::trace::{Meter, PruneRound, RoundRecord, RunResult, DEFAULT_MAX_ROUNDS};
use crate::TrialRng;

/// Sample-count constant of the path-level learner. Output of
/// [`calibrate_c0`] on the `n = 3` experiment instance at
/// `eps = 0.25, delta = 0.1` (see `tests/calibration.rs`).
pub const DEFAULT_C0: f64 = 3.19e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkLogEstimate {
    /// Regressed `ln p` per link; zero along directions no sampled path sees.
    pub log_p_hat: Vec<f64>,
    pub samples_used: u64,
    pub cost_units: u64,
}

/// Least squares of per-sample `ln Y` on the incidence rows of the sampled
/// paths, solved with the pseudo-inverse of the empirical Gram matrix.
pub fn regress(topology: &Topology, samples: &[(PathId, f64)]) -> Vec<f64> {
    let dim = topology.num_links();
    let mut counts = vec![0.0; topology.num_paths()];
    let mut sums = vec![0.0; topology.num_paths()];
    for &(k, log_y) in samples {
        counts[k.0] += 1.0;
        sums[k.0] += log_y;
    }
    let mut gram = DMatrix::zeros(dim, dim);
    let mut b = DVector::zeros(dim);
    for k in topology.path_ids() {
        if counts[k.0] > 0.0 {
            let x = topology.incidence_row(k);
            gram += (&x * x.transpose()) * counts[k.0];
            b += x * sums[k.0];
        }
    }
    let (g_pinv, _) = pinv_sym(&gram);
    (g_pinv * b).iter().cloned().collect()
}

/// Draws `n` paths i.i.d. from the design, benchmarks each and regresses.
/// Returns `None` if the round cap interrupts the sampling.
pub fn link_est(
    meter: &mut Meter<'_>,
    design: &DesignWeights,
    n: u64,
    rng: &mut TrialRng,
) -> Result<Option<LinkLogEstimate>> {
    let topology = meter.topology();
    let dist = WeightedIndex::new(&design.lambda).map_err(|e| Error::Config(format!("design weights: {e}")))?;
    let cost_before = meter.cost();
    let mut samples = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let k = design.support[dist.sample(rng)];
        let Some(y) = meter.bench(BenchTarget::Path(k), rng) else {
            return Ok(None);
        };
        samples.push((k, y.ln()));
    }
    Ok(Some(LinkLogEstimate {
        log_p_hat: regress(topology, &samples),
        samples_used: n,
        cost_units: meter.cost() - cost_before,
    }))
}

/// Keeps the paths of `subset` whose estimated score is within `threshold`
/// of the best one. Returns the best path and the survivors.
pub fn prune(topology: &Topology, subset: &[PathId], weights: &[f64], threshold: f64) -> Result<(PathId, Vec<PathId>)> {
    let best = best_path_oracle(topology, weights, subset)?;
    let top = topology.score(best, weights);
    let kept = subset
        .iter()
        .copied()
        .filter(|&k| k == best || top - topology.score(k, weights) < threshold)
        .collect();
    Ok((best, kept))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    pub delta_hs: f64,
    pub eps_hs: f64,
    pub n: u64,
}

/// Confidence, tolerance and sample count of inner iteration `s` (from 1)
/// of outer iteration `h` (from 0).
pub fn schedule_params(h: u32, s: u32, delta: f64, num_links: usize, s1_size: usize, c0: f64) -> ScheduleParams {
    let delta_hs = 36.0 / std::f64::consts::PI.powi(4) * delta / (((h + 1) as f64).powi(2) * (s as f64).powi(2));
    let eps_hs = 0.5f64.powi(s as i32);
    let e4 = eps_hs / 4.0;
    let l = num_links as f64;
    let raw = c0 * (2.0 + (6.0 + e4) * l) / (e4 * e4) * (5.0 * s1_size as f64 / delta_hs).ln();
    ScheduleParams {
        delta_hs,
        eps_hs,
        n: (raw.ceil() as u64).max(1),
    }
}

/// Sample count sufficient for `max_k |x(k)^T (ln p - estimate)| <= eps`
/// with probability `1 - delta` on a full path set.
pub fn link_est_sample_count(c0: f64, num_links: usize, eps: f64, delta: f64) -> u64 {
    let l = num_links as f64;
    let raw = c0 * (4.0 * l + (6.0 + eps) * l * l) / (eps * eps) * (5.0 * l / delta).ln();
    (raw.ceil() as u64).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLearnerConfig {
    pub delta: f64,
    pub c0: f64,
    pub metric: Metric,
    pub max_rounds: u64,
}

impl PathLearnerConfig {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::OutOfRange {
                name: "delta",
                value: delta,
            });
        }
        Ok(PathLearnerConfig {
            delta,
            c0: DEFAULT_C0,
            metric: Metric::Fidelity,
            max_rounds: DEFAULT_MAX_ROUNDS,
        })
    }

    pub fn with_metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    pub fn with_c0(mut self, c0: f64) -> Result<Self> {
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(Error::OutOfRange { name: "C0", value: c0 });
        }
        self.c0 = c0;
        Ok(self)
    }
}

pub fn run_bequp_path(feedback: &dyn Feedback, cfg: &PathLearnerConfig, rng: &mut TrialRng) -> Result<RunResult> {
    let topology = feedback.topology();
    if topology.num_paths() < 2 {
        return Err(Error::Degenerate("fewer than two paths".into()));
    }
    let num_links = topology.num_links();
    let outer = (num_links as f64).log2().ceil() as u32;
    let mut meter = Meter::new(feedback, cfg.max_rounds);
    let mut set: Vec<PathId> = topology.path_ids().collect();
    let mut last_best: Option<PathId> = None;

    'outer: for h in 0..=outer {
        if set.len() == 1 {
            break;
        }
        let frozen = set.clone();
        let design = optimal_design(topology, &frozen)?;
        let threshold = (num_links >> h).max(1);
        let mut s = 1;
        while set.len() > threshold {
            let params = schedule_params(h, s, cfg.delta, num_links, frozen.len(), cfg.c0);
            let Some(est) = link_est(&mut meter, &design, params.n, rng)? else {
                break 'outer;
            };
            let weights = cfg.metric.weights_from_log(&est.log_p_hat);
            let (k_best, kept) = prune(topology, &set, &weights, cfg.metric.prune_factor() * params.eps_hs)?;
            let pruned = set.iter().copied().filter(|k| !kept.contains(k)).collect();
            meter.record(RoundRecord::Prune(PruneRound {
                h,
                s,
                set_size: set.len(),
                delta_hs: params.delta_hs,
                eps_hs: params.eps_hs,
                n: params.n,
                k_best,
                pruned,
            }));
            last_best = Some(k_best);
            set = kept;
            s += 1;
        }
    }

    let exhausted = set.len() > 1;
    let output = if exhausted {
        last_best.filter(|k| set.contains(k)).unwrap_or(set[0])
    } else {
        set[0]
    };
    Ok(meter.finish(output, exhausted))
}

/// `max_k |x(k)^T (ln p - ln p_hat)|` over all paths for `runs` independent
/// estimates from `n` samples drawn from the optimal design over all paths.
pub fn link_est_deviations(
    feedback: &dyn Feedback,
    true_log_p: &[f64],
    n: u64,
    runs: usize,
    rng: &mut TrialRng,
) -> Result<Vec<f64>> {
    let topology = feedback.topology();
    let all: Vec<PathId> = topology.path_ids().collect();
    let design = optimal_design(topology, &all)?;
    let mut out = Vec::with_capacity(runs);
    for _ in 0..runs {
        let mut meter = Meter::new(feedback, u64::MAX);
        let est = link_est(&mut meter, &design, n, rng)?.expect("uncapped meter");
        let dev = all
            .iter()
            .map(|&k| (topology.score(k, true_log_p) - topology.score(k, &est.log_p_hat)).abs())
            .fold(0.0, f64::max);
        out.push(dev);
    }
    Ok(out)
}

/// Smallest `C0` whose [`link_est_sample_count`] reaches an empirical coverage
/// of `1 - delta / 2` for `max_k |x(k)^T (ln p - ln p_hat)| <= eps`, with
/// coverage estimated from `runs` estimates per candidate sample count
/// (doubling, then bisection). The halved miss rate leaves room for the
/// sampling error of a finite coverage check.
pub fn calibrate_c0(
    feedback: &dyn Feedback,
    true_log_p: &[f64],
    eps: f64,
    delta: f64,
    runs: usize,
    rng: &mut TrialRng,
) -> Result<f64> {
    let target = 1.0 - delta / 2.0;
    let covers = |n: u64, rng: &mut TrialRng| -> Result<bool> {
        let devs = link_est_deviations(feedback, true_log_p, n, runs, rng)?;
        Ok(devs.iter().filter(|&&d| d <= eps).count() as f64 >= target * runs as f64)
    };
    let mut hi = 1u64;
    while !covers(hi, rng)? {
        if hi > 1 << 24 {
            return Err(Error::Config(
                "LinkEst coverage not reached; estimator is biased at this setting".into(),
            ));
        }
        hi *= 2;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 && lo > 0 {
        let mid = (lo + hi) / 2;
        if covers(mid, rng)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let l = feedback.topology().num_links() as f64;
    let per_unit = (4.0 * l + (6.0 + eps) * l * l) / (eps * eps) * (5.0 * l / delta).ln();
    Ok(hi as f64 / per_unit)
}
