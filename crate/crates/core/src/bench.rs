//! Network benchmarking: bounce sequences over a link or path channel, the
//! exponential-decay fit, and the feedback interface the learners consume.
//!
//! Two simulation modes are provided. `Surrogate` draws survival bits
//! directly from `A p^{2m}`. `Ptm` runs every shot through the channel's
//! Pauli transfer matrix with uniformly random Cliffords applied at both
//! ends of each bounce and the exact inverse at the end; its raw survival
//! mean is `(1 + p^{2m}) / 2`, so the bench centres it as `2 b - 1` before
//! fitting.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector4;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::channel::{compose_chain, ptm_of, strength_from_fidelity, ChannelPtm, NoiseKind, NoiseModel, CLIFFORDS};
use crate::error::{Error, Result};
use crate::network::{Instance, LinkId, PathId, Topology};
use crate::TrialRng;

/// Lower clamp on a single depolarizing estimate.
pub const P_CLIP_LO: f64 = 0.01;
/// Upper clamp on a single depolarizing estimate.
pub const P_CLIP_HI: f64 = 0.9999;
const A_CLIP_HI: f64 = 1.2;

/// Concentration constant used by the link-level learner and successive
/// elimination. Output of [`calibrate_concentration`] at `T0 = 10`,
/// bounces 1..=10, over the link and path parameters of the experiment
/// family (see `tests/calibration.rs`).
pub const DEFAULT_CONCENTRATION_C: f64 = 8.4e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BenchMode {
    Ptm,
    #[default]
    Surrogate,
}

impl fmt::Display for BenchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            BenchMode::Ptm => "ptm",
            BenchMode::Surrogate => "surrogate",
        })
    }
}

impl FromStr for BenchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ptm" => Ok(BenchMode::Ptm),
            "surrogate" => Ok(BenchMode::Surrogate),
            other => Err(Error::Config(format!("unknown bench mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub bounces: Vec<u32>,
    pub t0: u32,
    pub spam: f64,
    pub mode: BenchMode,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            bounces: (1..=10).collect(),
            t0: 10,
            spam: 1.0,
            mode: BenchMode::Surrogate,
        }
    }
}

impl BenchConfig {
    pub fn with_t0(mut self, t0: u32) -> Self {
        self.t0 = t0;
        self
    }

    pub fn with_mode(mut self, mode: BenchMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.bounces.is_empty() || self.bounces[0] == 0 || self.bounces.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "bounce set must be non-empty, positive and strictly increasing".into(),
            ));
        }
        if self.t0 == 0 {
            return Err(Error::Config("T0 must be at least 1".into()));
        }
        if !(self.spam > 0.0 && self.spam <= 1.0) {
            return Err(Error::OutOfRange {
                name: "spam constant",
                value: self.spam,
            });
        }
        Ok(())
    }
}

/// One shot of the surrogate model: survival with probability `A p^{2m}`.
pub fn surrogate_outcome<R: Rng + ?Sized>(p: f64, m: u32, spam: f64, rng: &mut R) -> bool {
    let prob = (spam * p.powi(2 * m as i32)).clamp(0.0, 1.0);
    rng.random_bool(prob)
}

/// Survival probability of one random bounce sequence of length `m` over
/// `channel`. Each bounce applies a random Clifford at the source, the
/// channel, a random Clifford at the destination, and the channel again.
pub fn ptm_survival_probability<R: Rng + ?Sized>(channel: &ChannelPtm, m: u32, rng: &mut R) -> f64 {
    let table = &*CLIFFORDS;
    let mut state = Vector4::new(1.0, 0.0, 0.0, 1.0);
    let mut word = 0;
    for _ in 0..(2 * m) {
        let c = table.random(rng);
        state = channel.0 * (table.ptm(c) * state);
        word = table.product(c, word);
    }
    state = table.ptm(table.inverse(word)) * state;
    ((1.0 + state[3]) / 2.0).clamp(0.0, 1.0)
}

pub fn ptm_bounce_outcome<R: Rng + ?Sized>(channel: &ChannelPtm, m: u32, rng: &mut R) -> bool {
    let prob = ptm_survival_probability(channel, m, rng);
    rng.random_bool(prob)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpFit {
    pub a_hat: f64,
    pub p_hat: f64,
}

/// Log-domain weighted least squares of `ln b_m = ln A + 2m ln p` over the
/// bounce numbers whose mean exceeds `1 / (2 T0)`, for means of `T0`
/// Bernoulli shots with success probability `b_m`.
///
/// Points are weighted by the inverse delta-method variance of `ln b`,
/// `T0 b / (1 - b)`, evaluated at the fitted decay rather than the observed
/// means (weights computed from the data correlate with the noise and bias the
/// slope), and shifted up by half that variance to undo the bias of taking
/// the log of a noisy mean. Starts from the unweighted fit and reweights a
/// fixed number of times.
pub fn fit_exponential(means: &[(u32, f64)], t0: u32) -> Result<ExpFit> {
    fit_log_wls(means, t0, |t0, b| t0 * b / (1.0 - b))
}

/// As [`fit_exponential`] for centred means `y = 2 s - 1` of survival
/// frequencies `s`, whose variance is `(1 - y^2) / T0` instead of binomial.
pub fn fit_exponential_centred(means: &[(u32, f64)], t0: u32) -> Result<ExpFit> {
    fit_log_wls(means, t0, |t0, y| t0 * y * y / (1.0 - y * y))
}

/// Largest modelled variance of `ln b` that still receives the half-variance
/// bias correction (relative standard deviation 0.5).
const MAX_CORRECTED_VARIANCE: f64 = 0.25;

fn fit_log_wls(means: &[(u32, f64)], t0: u32, weight: impl Fn(f64, f64) -> f64) -> Result<ExpFit> {
    const REWEIGHT_ROUNDS: usize = 3;
    let t0 = t0 as f64;
    let floor = 1.0 / (2.0 * t0);
    let observed: Vec<(f64, f64)> = means
        .iter()
        .filter(|(_, b)| *b > floor)
        .map(|&(m, b)| (m as f64, b.min(1.0).ln()))
        .collect();
    if observed.len() < 2 {
        return Err(Error::InsufficientSignal);
    }
    let mut points: Vec<(f64, f64, f64)> = observed.iter().map(|&(x, y)| (x, y, 1.0)).collect();
    let (mut slope, mut intercept) = weighted_line(&points);
    for _ in 0..REWEIGHT_ROUNDS {
        for (pt, &(x, y)) in points.iter_mut().zip(&observed) {
            let model = (intercept + slope * x).exp().clamp(floor, 1.0 - floor);
            let w = weight(t0, model);
            // E[ln mean] sits about half a variance below ln of the true mean;
            // the expansion is only trusted while the relative spread is small
            let correction = if 1.0 / w <= MAX_CORRECTED_VARIANCE {
                0.5 / w
            } else {
                0.0
            };
            *pt = (x, y + correction, w);
        }
        (slope, intercept) = weighted_line(&points);
    }
    Ok(ExpFit {
        a_hat: intercept.exp().clamp(f64::MIN_POSITIVE, A_CLIP_HI),
        p_hat: (slope / 2.0).exp().clamp(P_CLIP_LO, P_CLIP_HI),
    })
}

/// Weighted least-squares line through `(x, y, w)`; returns `(slope, intercept)`.
fn weighted_line(points: &[(f64, f64, f64)]) -> (f64, f64) {
    let sw: f64 = points.iter().map(|p| p.2).sum();
    let mx = points.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = points.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = points.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "lowercase")]
pub enum BenchTarget {
    Link(LinkId),
    Path(PathId),
}

impl BenchTarget {
    pub fn cost_units(&self, topology: &Topology) -> u64 {
        match self {
            BenchTarget::Link(_) => 1,
            BenchTarget::Path(k) => topology.path_len(*k) as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub p_hat: f64,
    pub a_hat: f64,
    pub raw_means: Vec<(u32, f64)>,
    pub cost_units: u64,
    /// The fit had fewer than two usable points; `p_hat` is the clip floor.
    pub insufficient_signal: bool,
}

/// Source of depolarizing-parameter feedback for a link or path.
pub trait Feedback: Sync {
    fn topology(&self) -> &Topology;

    /// One estimate of the target's depolarizing parameter.
    fn observe(&self, target: BenchTarget, rng: &mut TrialRng) -> f64;
}

/// Returns the true parameter on every call.
pub struct ExactFeedback<'a> {
    instance: &'a Instance,
}

impl<'a> ExactFeedback<'a> {
    pub fn new(instance: &'a Instance) -> Self {
        ExactFeedback { instance }
    }
}

impl Feedback for ExactFeedback<'_> {
    fn topology(&self) -> &Topology {
        &self.instance.topology
    }

    fn observe(&self, target: BenchTarget, _rng: &mut TrialRng) -> f64 {
        match target {
            BenchTarget::Link(l) => self.instance.link_p()[l.0],
            BenchTarget::Path(k) => self.instance.path_depolarizing(k),
        }
    }
}

/// Simulated benchmarking of an instance under a per-link noise assignment.
pub struct Simulator<'a> {
    instance: &'a Instance,
    channels: Vec<ChannelPtm>,
    path_channels: Vec<ChannelPtm>,
    config: BenchConfig,
}

impl<'a> Simulator<'a> {
    pub fn new(instance: &'a Instance, noise: &[NoiseModel], config: BenchConfig) -> Result<Self> {
        config.validate()?;
        if noise.len() != instance.num_links() {
            return Err(Error::Config(format!(
                "{} noise models for {} links",
                noise.len(),
                instance.num_links()
            )));
        }
        let channels = noise.iter().map(|m| ptm_of(*m)).collect::<Result<Vec<_>>>()?;
        let path_channels = instance
            .topology
            .path_ids()
            .map(|k| {
                let chain: Vec<ChannelPtm> = instance.topology.links_of(k).iter().map(|l| channels[l.0]).collect();
                compose_chain(&chain)
            })
            .collect();
        Ok(Simulator {
            instance,
            channels,
            path_channels,
            config,
        })
    }

    /// Assigns every link the `kind` channel whose fidelity matches the
    /// instance's link parameter.
    pub fn uniform_noise(instance: &'a Instance, kind: NoiseKind, config: BenchConfig) -> Result<Self> {
        let noise = noise_assignment(instance, kind)?;
        Self::new(instance, &noise, config)
    }

    pub fn config(&self) -> &BenchConfig {
        &self.config
    }

    pub fn channel(&self, target: BenchTarget) -> &ChannelPtm {
        match target {
            BenchTarget::Link(l) => &self.channels[l.0],
            BenchTarget::Path(k) => &self.path_channels[k.0],
        }
    }

    fn surrogate_p(&self, target: BenchTarget) -> f64 {
        match target {
            BenchTarget::Link(l) => self.instance.link_p()[l.0],
            BenchTarget::Path(k) => self.instance.path_depolarizing(k),
        }
    }

    /// Runs `T0` sequences per bounce number and fits the decay.
    pub fn bench(&self, target: BenchTarget, rng: &mut TrialRng) -> BenchResult {
        let t0 = self.config.t0;
        let raw_means: Vec<(u32, f64)> = match self.config.mode {
            BenchMode::Surrogate => {
                let p = self.surrogate_p(target);
                self.config
                    .bounces
                    .iter()
                    .map(|&m| {
                        let prob = (self.config.spam * p.powi(2 * m as i32)).clamp(0.0, 1.0);
                        // sum of T0 independent surrogate shots
                        let hits = Binomial::new(t0 as u64, prob).expect("valid binomial").sample(rng);
                        (m, hits as f64 / t0 as f64)
                    })
                    .collect()
            }
            BenchMode::Ptm => {
                let channel = *self.channel(target);
                self.config
                    .bounces
                    .iter()
                    .map(|&m| {
                        let hits = (0..t0).filter(|_| ptm_bounce_outcome(&channel, m, rng)).count();
                        (m, hits as f64 / t0 as f64)
                    })
                    .collect()
            }
        };
        let fit = match self.config.mode {
            BenchMode::Surrogate => fit_exponential(&raw_means, t0),
            BenchMode::Ptm => {
                let centred: Vec<(u32, f64)> = raw_means.iter().map(|&(m, b)| (m, 2.0 * b - 1.0)).collect();
                fit_exponential_centred(&centred, t0)
            }
        };
        let cost_units = target.cost_units(&self.instance.topology);
        match fit {
            Ok(fit) => BenchResult {
                p_hat: fit.p_hat,
                a_hat: fit.a_hat,
                raw_means,
                cost_units,
                insufficient_signal: false,
            },
            Err(_) => BenchResult {
                p_hat: P_CLIP_LO,
                a_hat: 1.0,
                raw_means,
                cost_units,
                insufficient_signal: true,
            },
        }
    }
}

impl Feedback for Simulator<'_> {
    fn topology(&self) -> &Topology {
        &self.instance.topology
    }

    fn observe(&self, target: BenchTarget, rng: &mut TrialRng) -> f64 {
        self.bench(target, rng).p_hat
    }
}

/// Per-link noise models of one kind matching each link's fidelity `(1 + p) / 2`.
pub fn noise_assignment(instance: &Instance, kind: NoiseKind) -> Result<Vec<NoiseModel>> {
    instance
        .link_p()
        .iter()
        .map(|&p| strength_from_fidelity(kind, (1.0 + p) / 2.0))
        .collect()
}

/// Smallest `C` such that the mean of `N` bench estimates stays within
/// `sqrt(C ln(1/delta) / N)` of the truth with empirical frequency at least
/// `1 - delta`, maximised over the given parameters, sample counts and
/// confidence levels.
///
/// For each `(p, N)` the absolute deviations of `reps` independent N-sample
/// means are sorted; the `(1 - delta)` empirical quantile `q` gives the
/// requirement `C >= N q^2 / ln(1/delta)`.
pub fn calibrate_concentration(
    params: &[f64],
    config: &BenchConfig,
    sample_counts: &[usize],
    deltas: &[f64],
    reps: usize,
    log_domain: bool,
    rng: &mut TrialRng,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &p in params {
        let topo = crate::network::build_segmented_topology(&[1])?;
        let inst = Instance::new(topo, vec![p])?;
        let sim = Simulator::new(
            &inst,
            &[NoiseModel::new(NoiseKind::Depolarizing, 1.0 - p)?],
            config.clone(),
        )?;
        for &n in sample_counts {
            let mut devs: Vec<f64> = (0..reps)
                .map(|_| {
                    let mean = (0..n)
                        .map(|_| {
                            let v = sim.observe(BenchTarget::Link(LinkId(0)), rng);
                            if log_domain {
                                v.ln()
                            } else {
                                v
                            }
                        })
                        .sum::<f64>()
                        / n as f64;
                    let truth = if log_domain { p.ln() } else { p };
                    (mean - truth).abs()
                })
                .collect();
            devs.sort_by(f64::total_cmp);
            for &delta in deltas {
                let idx = (((1.0 - delta) * reps as f64).ceil() as usize).clamp(1, reps) - 1;
                let q = devs[idx];
                worst = worst.max(n as f64 * q * q / (1.0 / delta).ln());
            }
        }
    }
    Ok(worst)
}
