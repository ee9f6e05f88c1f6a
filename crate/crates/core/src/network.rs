//! Two-terminal network model: links, enumerated paths, ground-truth link
//! parameters and the analytical quantities derived from them.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on path scores when deciding whether the best path is unique.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinkId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PathId(pub usize);

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for PathId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Links and the explicit list of paths between the two terminals.
///
/// Each path is stored as its sorted link list; the binary incidence row
/// `x(k)` is derived from it on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    links: usize,
    paths: Vec<Vec<LinkId>>,
    segments: Option<Vec<usize>>,
    rank: usize,
}

impl Topology {
    /// Builds a topology from 0/1 incidence rows, one per path.
    pub fn from_incidence(rows: &[Vec<u8>]) -> Result<Self> {
        let links = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || links == 0 {
            return Err(Error::InvalidTopology("no paths or no links".into()));
        }
        let mut paths = Vec::with_capacity(rows.len());
        for (k, row) in rows.iter().enumerate() {
            if row.len() != links {
                return Err(Error::InvalidTopology(format!(
                    "row {k} has {} entries, expected {links}",
                    row.len()
                )));
            }
            let mut set = Vec::new();
            for (l, &v) in row.iter().enumerate() {
                match v {
                    0 => {}
                    1 => set.push(LinkId(l)),
                    other => return Err(Error::InvalidTopology(format!("row {k} has non-binary entry {other}"))),
                }
            }
            paths.push(set);
        }
        Self::from_paths(links, paths, None)
    }

    fn from_paths(links: usize, paths: Vec<Vec<LinkId>>, segments: Option<Vec<usize>>) -> Result<Self> {
        for (k, p) in paths.iter().enumerate() {
            if p.is_empty() {
                return Err(Error::InvalidTopology(format!("path {k} has no links")));
            }
            if let Some(l) = p.iter().find(|l| l.0 >= links) {
                return Err(Error::InvalidTopology(format!("path {k} uses unknown link {l}")));
            }
        }
        for i in 0..paths.len() {
            for j in (i + 1)..paths.len() {
                if paths[i] == paths[j] {
                    return Err(Error::InvalidTopology(format!(
                        "paths {i} and {j} have the same link set"
                    )));
                }
            }
        }
        let mut topo = Topology {
            links,
            paths,
            segments,
            rank: 0,
        };
        topo.rank = topo.incidence_matrix().rank(1e-9);
        Ok(topo)
    }

    pub fn num_links(&self) -> usize {
        self.links
    }

    pub fn num_paths(&self) -> usize {
        self.paths.len()
    }

    /// Rank of the K x L incidence matrix.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Parallel counts when this topology was built from segments.
    pub fn segments(&self) -> Option<&[usize]> {
        self.segments.as_deref()
    }

    pub fn path_ids(&self) -> impl Iterator<Item = PathId> + '_ {
        (0..self.paths.len()).map(PathId)
    }

    /// Sorted link set of a path.
    pub fn links_of(&self, k: PathId) -> &[LinkId] {
        &self.paths[k.0]
    }

    pub fn path_len(&self, k: PathId) -> usize {
        self.paths[k.0].len()
    }

    pub fn max_path_len(&self) -> usize {
        self.paths.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn contains(&self, k: PathId, l: LinkId) -> bool {
        self.paths[k.0].binary_search(&l).is_ok()
    }

    pub fn incidence_row(&self, k: PathId) -> DVector<f64> {
        let mut x = DVector::zeros(self.links);
        for l in &self.paths[k.0] {
            x[l.0] = 1.0;
        }
        x
    }

    pub fn incidence_rows(&self) -> Vec<Vec<u8>> {
        self.paths
            .iter()
            .map(|p| {
                let mut row = vec![0u8; self.links];
                for l in p {
                    row[l.0] = 1;
                }
                row
            })
            .collect()
    }

    pub fn incidence_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.paths.len(), self.links);
        for (k, p) in self.paths.iter().enumerate() {
            for l in p {
                m[(k, l.0)] = 1.0;
            }
        }
        m
    }

    /// `x(k)^T w`.
    pub fn score(&self, k: PathId, weights: &[f64]) -> f64 {
        self.paths[k.0].iter().map(|l| weights[l.0]).sum()
    }

    /// Links in exactly one of the two paths, ascending.
    pub fn symmetric_difference(&self, a: PathId, b: PathId) -> Vec<LinkId> {
        let (pa, pb) = (&self.paths[a.0], &self.paths[b.0]);
        let mut out: Vec<LinkId> = pa
            .iter()
            .filter(|l| pb.binary_search(l).is_err())
            .chain(pb.iter().filter(|l| pa.binary_search(l).is_err()))
            .copied()
            .collect();
        out.sort_unstable();
        out
    }

    pub fn validate_path(&self, k: PathId) -> Result<()> {
        if k.0 < self.paths.len() {
            Ok(())
        } else {
            Err(Error::InvalidTopology(format!("path {k} out of range")))
        }
    }
}

/// Series of parallel segments: one link group per segment and one path per
/// choice of a single link in every segment.
///
/// Links are numbered segment by segment; paths are listed in lexicographic
/// order of their link choices (last segment varies fastest).
pub fn build_segmented_topology(parallel_counts: &[usize]) -> Result<Topology> {
    if parallel_counts.is_empty() {
        return Err(Error::EmptySegments);
    }
    if let Some(i) = parallel_counts.iter().position(|&c| c == 0) {
        return Err(Error::ZeroSegment(i));
    }
    let offsets: Vec<usize> = parallel_counts
        .iter()
        .scan(0, |acc, &c| {
            let start = *acc;
            *acc += c;
            Some(start)
        })
        .collect();
    let links: usize = parallel_counts.iter().sum();

    let mut paths = vec![Vec::new()];
    for (seg, &count) in parallel_counts.iter().enumerate() {
        let offset = offsets[seg];
        paths = paths
            .into_iter()
            .flat_map(|prefix: Vec<LinkId>| {
                (0..count).map(move |j| {
                    let mut p = prefix.clone();
                    p.push(LinkId(offset + j));
                    p
                })
            })
            .collect();
    }
    Topology::from_paths(links, paths, Some(parallel_counts.to_vec()))
}

/// A topology together with the true per-link depolarizing parameters.
#[derive(Debug, Clone)]
pub struct Instance {
    pub topology: Topology,
    link_p: Vec<f64>,
}

impl Instance {
    pub fn new(topology: Topology, link_p: Vec<f64>) -> Result<Self> {
        if link_p.len() != topology.num_links() {
            return Err(Error::InvalidTopology(format!(
                "{} link parameters for {} links",
                link_p.len(),
                topology.num_links()
            )));
        }
        if let Some(&p) = link_p.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::OutOfRange {
                name: "link_p",
                value: p,
            });
        }
        Ok(Instance { topology, link_p })
    }

    /// Same as [`Instance::new`] but additionally allows `p = 1` (noiseless links).
    pub fn with_noiseless_links(topology: Topology, link_p: Vec<f64>) -> Result<Self> {
        if link_p.len() != topology.num_links() {
            return Err(Error::InvalidTopology("link parameter count mismatch".into()));
        }
        if let Some(&p) = link_p.iter().find(|&&p| !(p > 0.0 && p <= 1.0)) {
            return Err(Error::OutOfRange {
                name: "link_p",
                value: p,
            });
        }
        Ok(Instance { topology, link_p })
    }

    pub fn link_p(&self) -> &[f64] {
        &self.link_p
    }

    pub fn num_links(&self) -> usize {
        self.topology.num_links()
    }

    pub fn num_paths(&self) -> usize {
        self.topology.num_paths()
    }

    pub fn log_p(&self) -> Vec<f64> {
        self.link_p.iter().map(|p| p.ln()).collect()
    }

    /// Product of the link parameters along the path.
    pub fn path_depolarizing(&self, k: PathId) -> f64 {
        self.topology.links_of(k).iter().map(|l| self.link_p[l.0]).product()
    }

    /// Sum of `ln p` along the path.
    pub fn transformed_fidelity(&self, k: PathId) -> f64 {
        self.topology.score(k, &self.log_p())
    }

    pub fn path_fidelity(&self, k: PathId) -> f64 {
        (1.0 + self.path_depolarizing(k)) / 2.0
    }

    /// Best path under per-link weights, or an error if it is not unique.
    pub fn unique_best(&self, weights: &[f64]) -> Result<PathId> {
        if self.num_paths() < 2 {
            return Err(Error::Degenerate("fewer than two paths".into()));
        }
        let mut scores: Vec<(f64, PathId)> = self
            .topology
            .path_ids()
            .map(|k| (self.topology.score(k, weights), k))
            .collect();
        scores.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        if scores[0].0 - scores[1].0 <= TIE_TOLERANCE {
            return Err(Error::Degenerate(format!(
                "paths {} and {} tie for best",
                scores[0].1, scores[1].1
            )));
        }
        Ok(scores[0].1)
    }

    pub fn best_path(&self) -> Result<PathId> {
        self.unique_best(&self.log_p())
    }
}

pub fn fidelity_from_p(p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::OutOfRange { name: "p", value: p });
    }
    Ok((1.0 + p) / 2.0)
}

pub fn p_from_fidelity(f: f64) -> Result<f64> {
    if !(f > 0.5 && f <= 1.0) {
        return Err(Error::OutOfRange {
            name: "fidelity",
            value: f,
        });
    }
    Ok(2.0 * f - 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub link_gaps: Vec<f64>,
    pub path_gaps: Vec<f64>,
    pub best_path: PathId,
}

/// Link and path gaps with respect to the path score `F(k) = x(k)^T ln p`.
pub fn compute_gaps(instance: &Instance) -> Result<GapReport> {
    gaps_for_weights(&instance.topology, &instance.log_p())
}

/// Gap report for arbitrary per-link weights (used for the SKF score as well).
pub fn gaps_for_weights(topology: &Topology, weights: &[f64]) -> Result<GapReport> {
    if topology.num_paths() < 2 {
        return Err(Error::Degenerate("a single path has no competitor".into()));
    }
    let scores: Vec<f64> = topology.path_ids().map(|k| topology.score(k, weights)).collect();
    let best = best_path_oracle(topology, weights, &topology.path_ids().collect::<Vec<_>>())?;
    let best_score = scores[best.0];
    if scores
        .iter()
        .enumerate()
        .any(|(k, &s)| k != best.0 && best_score - s <= TIE_TOLERANCE)
    {
        return Err(Error::Degenerate("best path is not unique".into()));
    }

    let mut path_gaps: Vec<f64> = scores.iter().map(|s| best_score - s).collect();
    path_gaps[best.0] = path_gaps
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != best.0)
        .map(|(_, &g)| g)
        .fold(f64::INFINITY, f64::min);

    let link_gaps = (0..topology.num_links())
        .map(|l| {
            let in_best = topology.contains(best, LinkId(l));
            // best competitor: paths that disagree with k* about link l
            let competitor = topology
                .path_ids()
                .filter(|&k| topology.contains(k, LinkId(l)) != in_best)
                .map(|k| scores[k.0])
                .fold(f64::NEG_INFINITY, f64::max);
            best_score - competitor
        })
        .collect();

    Ok(GapReport {
        link_gaps,
        path_gaps,
        best_path: best,
    })
}

/// `argmax_{k in subset} x(k)^T weights`, ties to the smallest id.
pub fn best_path_oracle(topology: &Topology, weights: &[f64], subset: &[PathId]) -> Result<PathId> {
    let mut best: Option<(PathId, f64)> = None;
    for &k in subset {
        topology.validate_path(k)?;
        let s = topology.score(k, weights);
        match best {
            Some((bk, bs)) if s < bs || (s == bs && k > bk) => {}
            _ => best = Some((k, s)),
        }
    }
    best.map(|(k, _)| k).ok_or(Error::EmptySubset)
}

/// On-disk instance description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceSpec {
    Segmented { segments: Vec<usize>, link_p: Vec<f64> },
    Explicit { incidence: Vec<Vec<u8>>, link_p: Vec<f64> },
}

impl InstanceSpec {
    pub fn build(&self) -> Result<Instance> {
        match self {
            InstanceSpec::Segmented { segments, link_p } => {
                Instance::new(build_segmented_topology(segments)?, link_p.clone())
            }
            InstanceSpec::Explicit { incidence, link_p } => {
                Instance::new(Topology::from_incidence(incidence)?, link_p.clone())
            }
        }
    }

    pub fn from_instance(instance: &Instance) -> Self {
        match instance.topology.segments() {
            Some(s) => InstanceSpec::Segmented {
                segments: s.to_vec(),
                link_p: instance.link_p.clone(),
            },
            None => InstanceSpec::Explicit {
                incidence: instance.topology.incidence_rows(),
                link_p: instance.link_p.clone(),
            },
        }
    }
}

pub fn load_instance(path: &std::path::Path) -> Result<Instance> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let spec: InstanceSpec = serde_json::from_str(&text)?;
    spec.build()
}
