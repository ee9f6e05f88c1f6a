//! Secret key fraction of BB84 over a path of Werner-state links, and the
//! metric adapters that let the learners target it instead of fidelity.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{best_path_oracle, gaps_for_weights, GapReport, Instance, PathId};

/// Werner parameter of a link with depolarizing parameter `p`.
pub fn werner_from_p(p: f64) -> f64 {
    (2.0 * p + 1.0) / 3.0
}

/// Base-2 binary entropy, continuous at both endpoints.
pub fn binary_entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
}

/// BB84 secret key fraction `1 - 2 h((1 - w) / 2)`.
pub fn skf(w_path: f64) -> Result<f64> {
    if !(w_path > 0.0 && w_path <= 1.0) {
        return Err(Error::OutOfRange {
            name: "path Werner parameter",
            value: w_path,
        });
    }
    Ok(1.0 - 2.0 * binary_entropy((1.0 - w_path) / 2.0))
}

pub fn path_werner(instance: &Instance, k: PathId) -> f64 {
    instance
        .topology
        .links_of(k)
        .iter()
        .map(|l| werner_from_p(instance.link_p()[l.0]))
        .product()
}

/// `U(k) = sum of ln((2 p + 1) / 3)` over the path's links.
pub fn transformed_skf(instance: &Instance, k: PathId) -> f64 {
    instance
        .topology
        .links_of(k)
        .iter()
        .map(|l| werner_from_p(instance.link_p()[l.0]).ln())
        .sum()
}

/// Checks `|ln w(a) - ln w(b)| <= 2 eps` for a pair with `|ln a - ln b| <= eps`.
/// Pairs outside the premise are reported as passing.
pub fn werner_widening_holds(a: f64, b: f64, eps: f64) -> bool {
    if (a.ln() - b.ln()).abs() > eps {
        return true;
    }
    (werner_from_p(a).ln() - werner_from_p(b).ln()).abs() <= 2.0 * eps
}

/// Path score the learners maximise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Fidelity,
    Skf,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::Fidelity, Metric::Skf];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Fidelity => "fidelity",
            Metric::Skf => "skf",
        }
    }

    /// Per-link weight used by path selection, from a depolarizing parameter.
    pub fn link_weight(&self, p: f64) -> f64 {
        match self {
            Metric::Fidelity => p.ln(),
            Metric::Skf => werner_from_p(p).ln(),
        }
    }

    pub fn link_weights(&self, p: &[f64]) -> Vec<f64> {
        p.iter().map(|&v| self.link_weight(v)).collect()
    }

    /// Per-link weights from regressed `ln p` values. For SKF the log is
    /// undone before the Werner transform.
    pub fn weights_from_log(&self, log_p: &[f64]) -> Vec<f64> {
        match self {
            Metric::Fidelity => log_p.to_vec(),
            Metric::Skf => log_p.iter().map(|&x| werner_from_p(x.exp()).ln()).collect(),
        }
    }

    /// Multiplier on the prune threshold of the path-level learner.
    pub fn prune_factor(&self) -> f64 {
        match self {
            Metric::Fidelity => 1.0,
            Metric::Skf => 2.0,
        }
    }

    /// True per-link weights of an instance.
    pub fn true_weights(&self, instance: &Instance) -> Vec<f64> {
        self.link_weights(instance.link_p())
    }

    pub fn path_value(&self, instance: &Instance, k: PathId) -> f64 {
        instance.topology.score(k, &self.true_weights(instance))
    }

    /// The unique best path under this metric.
    pub fn best_path(&self, instance: &Instance) -> Result<PathId> {
        instance.unique_best(&self.true_weights(instance))
    }

    pub fn gaps(&self, instance: &Instance) -> Result<GapReport> {
        gaps_for_weights(&instance.topology, &self.true_weights(instance))
    }

    /// Argmax of the metric's own (untransformed) path value by enumeration:
    /// path fidelity or path SKF.
    pub fn brute_force_best(&self, instance: &Instance) -> PathId {
        let values: Vec<f64> = instance
            .topology
            .path_ids()
            .map(|k| match self {
                Metric::Fidelity => instance.path_fidelity(k),
                Metric::Skf => skf(path_werner(instance, k)).unwrap_or(f64::NEG_INFINITY),
            })
            .collect();
        // ties to the smallest id, like the oracle
        let all: Vec<PathId> = instance.topology.path_ids().collect();
        *all.iter()
            .max_by(|a, b| values[a.0].total_cmp(&values[b.0]).then(b.0.cmp(&a.0)))
            .unwrap_or(&PathId(0))
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fidelity" => Ok(Metric::Fidelity),
            "skf" => Ok(Metric::Skf),
            other => Err(Error::Config(format!("unknown metric '{other}'"))),
        }
    }
}

/// Best path under a metric among `subset` for the given per-link `p`.
pub fn best_path_for(metric: Metric, instance: &Instance, subset: &[PathId]) -> Result<PathId> {
    best_path_oracle(&instance.topology, &metric.true_weights(instance), subset)
}
