//! Experiment orchestration over the series-parallel instance family:
//! seeded trials across algorithms, noise models and sizes, with CSV output.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{self, BaselineConfig, DEFAULT_HALVING_EPS, DEFAULT_SAMPLES_PER_ARM};
use crate::bench::{BenchConfig, BenchMode, Feedback, Simulator, DEFAULT_CONCENTRATION_C};
use crate::channel::NoiseKind;
use crate::error::{Error, Result};
use crate::link_learner::{run_bequp_link, LinkLearnerConfig};
use crate::network::{build_segmented_topology, Instance};
use crate::path_learner::{run_bequp_path, PathLearnerConfig, DEFAULT_C0};
use crate::qkd::Metric;
use crate::trace::{RunResult, DEFAULT_MAX_ROUNDS};
use crate::TrialRng;

/// Exact CSV header of the results file.
pub const CSV_HEADER: &str =
    "algo,metric,noise_model,n,K,L,trial,seed,output_path,true_best,success,resource_cost,rounds,wall_time_ms";

/// Lowest link fidelity allowed without `allow_low_fidelity`.
pub const FIDELITY_FLOOR: f64 = 0.55;

/// Env var capping the worker pool.
pub const THREADS_ENV: &str = "BEQUP_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    BequpLink,
    BequpPath,
    UniformLink,
    UniformPath,
    SuccElim,
    Linkselfie,
}

impl Algo {
    pub const ALL: [Algo; 6] = [
        Algo::BequpLink,
        Algo::BequpPath,
        Algo::UniformLink,
        Algo::UniformPath,
        Algo::SuccElim,
        Algo::Linkselfie,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algo::BequpLink => "bequp-link",
            Algo::BequpPath => "bequp-path",
            Algo::UniformLink => "uniform-link",
            Algo::UniformPath => "uniform-path",
            Algo::SuccElim => "succ-elim",
            Algo::Linkselfie => "linkselfie",
        }
    }

    /// Repetitions per bench call when not overridden. The path learner's
    /// regression needs log-domain estimates that are close to unbiased on
    /// every design path, which `T0 = 10` does not give for weak paths.
    pub fn default_t0(&self) -> u32 {
        match self {
            Algo::UniformLink | Algo::UniformPath | Algo::BequpPath => 200,
            _ => 10,
        }
    }

    fn code(&self) -> u64 {
        *self as u64
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algo::ALL
            .iter()
            .copied()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm '{s}'")))
    }
}

/// Link fidelities of the `[2, 2, n]` instance in segment-major link order.
pub fn experiment_fidelities(n: usize, allow_low_fidelity: bool) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::Config(format!("n must be at least 2, got {n}")));
    }
    let mut f = vec![0.99, 0.90, 0.99, 0.90, 0.99];
    // 0.95, 0.85, ... in hundredths to keep the values exact decimals
    f.extend((0..n - 1).map(|i| (95 - 10 * i as i64) as f64 / 100.0));
    let lowest = f.iter().cloned().fold(f64::INFINITY, f64::min);
    if lowest < FIDELITY_FLOOR - 1e-12 && !allow_low_fidelity {
        return Err(Error::Config(format!(
            "n = {n} needs link fidelity {lowest:.2} below {FIDELITY_FLOOR}; pass --allow-low-fidelity to run it"
        )));
    }
    Ok(f)
}

/// The `[2, 2, n]` instance with `p = 2 f - 1` on every link.
pub fn build_experiment_instance(n: usize, allow_low_fidelity: bool) -> Result<Instance> {
    let f = experiment_fidelities(n, allow_low_fidelity)?;
    let topology = build_segmented_topology(&[2, 2, n])?;
    let p: Vec<f64> = f.iter().map(|&f| 2.0 * f - 1.0).collect();
    if let Some(&bad) = f.iter().find(|&&f| f <= 0.5) {
        return Err(Error::Config(format!(
            "link fidelity {bad:.2} has non-positive depolarizing parameter; n = {n} cannot be built"
        )));
    }
    let instance = Instance::new(topology, p)?;
    instance.best_path()?;
    Ok(instance)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub algos: Vec<Algo>,
    pub metric: Metric,
    pub noise_models: Vec<NoiseKind>,
    pub n_values: Vec<usize>,
    pub trials: u32,
    pub delta: f64,
    pub seed: u64,
    pub mode: BenchMode,
    /// Overrides every algorithm's default repetitions per bench call.
    pub t0: Option<u32>,
    pub bounces: Vec<u32>,
    pub output: Option<PathBuf>,
    /// Directory for per-trial JSON-lines traces.
    pub trace_dir: Option<PathBuf>,
    pub allow_low_fidelity: bool,
    pub c: f64,
    pub c0: f64,
    pub samples_per_arm: u64,
    pub halving_eps: f64,
    pub max_rounds: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            algos: Algo::ALL.to_vec(),
            metric: Metric::Fidelity,
            noise_models: NoiseKind::ALL.to_vec(),
            n_values: (2..=6).collect(),
            trials: 10,
            delta: 0.05,
            seed: 0,
            mode: BenchMode::Surrogate,
            t0: None,
            bounces: (1..=10).collect(),
            output: None,
            trace_dir: None,
            allow_low_fidelity: false,
            c: DEFAULT_CONCENTRATION_C,
            c0: DEFAULT_C0,
            samples_per_arm: DEFAULT_SAMPLES_PER_ARM,
            halving_eps: DEFAULT_HALVING_EPS,
            max_rounds: DEFAULT_MAX_ROUNDS,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.algos.is_empty() || self.noise_models.is_empty() || self.n_values.is_empty() {
            return Err(Error::Config(
                "algos, noise models and n values must be non-empty".into(),
            ));
        }
        if let Some(&n) = self.n_values.iter().find(|&&n| n < 2) {
            return Err(Error::Config(format!("n must be at least 2, got {n}")));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::OutOfRange {
                name: "delta",
                value: self.delta,
            });
        }
        self.bench_config(Algo::BequpLink).validate()
    }

    pub fn bench_config(&self, algo: Algo) -> BenchConfig {
        BenchConfig {
            bounces: self.bounces.clone(),
            t0: self.t0.unwrap_or_else(|| algo.default_t0()),
            spam: 1.0,
            mode: self.mode,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub algo: Algo,
    pub metric: Metric,
    pub noise_model: NoiseKind,
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub trial: u32,
    pub seed: u64,
    /// Empty when the trial failed before producing an output.
    pub output_path: Option<usize>,
    pub true_best: usize,
    pub success: bool,
    pub resource_cost: u64,
    pub rounds: u64,
    pub wall_time_ms: u64,
}

impl ExperimentRecord {
    fn sort_key(&self) -> (Algo, NoiseKind, usize, u32) {
        (self.algo, self.noise_model, self.n, self.trial)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of one trial: splitmix64 folded over
/// `(seed, algo code, noise code, n, trial)`, where the codes are the
/// positions in [`Algo::ALL`] and [`NoiseKind::ALL`].
pub fn child_seed(seed: u64, algo: Algo, noise: NoiseKind, n: usize, trial: u32) -> u64 {
    let noise_code = NoiseKind::ALL.iter().position(|&k| k == noise).unwrap_or(0) as u64;
    [algo.code(), noise_code, n as u64, trial as u64]
        .iter()
        .fold(splitmix64(seed), |h, &x| splitmix64(h ^ x))
}

/// Runs one algorithm against a feedback source.
pub fn run_algo(algo: Algo, feedback: &dyn Feedback, cfg: &ExperimentConfig, rng: &mut TrialRng) -> Result<RunResult> {
    match algo {
        Algo::BequpLink => {
            let mut lc = LinkLearnerConfig::new(cfg.delta)?
                .with_metric(cfg.metric)
                .with_c(cfg.c)?;
            lc.max_rounds = cfg.max_rounds;
            run_bequp_link(feedback, &lc, rng)
        }
        Algo::BequpPath => {
            let mut pc = PathLearnerConfig::new(cfg.delta)?
                .with_metric(cfg.metric)
                .with_c0(cfg.c0)?;
            pc.max_rounds = cfg.max_rounds;
            run_bequp_path(feedback, &pc, rng)
        }
        _ => {
            let mut bc = BaselineConfig::new(cfg.delta)?.with_metric(cfg.metric);
            bc.c = cfg.c;
            bc.samples_per_arm = cfg.samples_per_arm;
            bc.halving_eps = cfg.halving_eps;
            bc.max_rounds = cfg.max_rounds;
            match algo {
                Algo::UniformLink => baselines::uniform_link(feedback, &bc, rng),
                Algo::UniformPath => baselines::uniform_path(feedback, &bc, rng),
                Algo::SuccElim => baselines::succ_elim(feedback, &bc, rng),
                _ => baselines::linkselfie_style(feedback, &bc, rng),
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    algo: Algo,
    noise: NoiseKind,
    n: usize,
    trial: u32,
}

fn trace_file(dir: &Path, cfg: &ExperimentConfig, cell: &Cell) -> PathBuf {
    dir.join(format!(
        "{}_{}_{}_n{}_t{}.jsonl",
        cell.algo, cfg.metric, cell.noise, cell.n, cell.trial
    ))
}

fn run_cell(cfg: &ExperimentConfig, instance: &Instance, cell: Cell) -> ExperimentRecord {
    let seed = child_seed(cfg.seed, cell.algo, cell.noise, cell.n, cell.trial);
    let true_best = cfg.metric.best_path(instance).map(|k| k.0).unwrap_or(usize::MAX);
    let mut record = ExperimentRecord {
        algo: cell.algo,
        metric: cfg.metric,
        noise_model: cell.noise,
        n: cell.n,
        k: instance.num_paths(),
        l: instance.num_links(),
        trial: cell.trial,
        seed,
        output_path: None,
        true_best,
        success: false,
        resource_cost: 0,
        rounds: 0,
        wall_time_ms: 0,
    };
    let start = Instant::now();
    let outcome = Simulator::uniform_noise(instance, cell.noise, cfg.bench_config(cell.algo)).and_then(|sim| {
        let mut rng = TrialRng::seed_from_u64(seed);
        run_algo(cell.algo, &sim, cfg, &mut rng)
    });
    record.wall_time_ms = start.elapsed().as_millis() as u64;
    match outcome {
        Ok(run) => {
            record.output_path = Some(run.output_path.0);
            record.success = run.output_path.0 == true_best && run.total_cost == run.trace.audited_cost();
            record.resource_cost = run.total_cost;
            record.rounds = run.rounds;
            if let Some(dir) = &cfg.trace_dir {
                let path = trace_file(dir, cfg, &cell);
                let written = std::fs::File::create(&path)
                    .map_err(|source| Error::Io {
                        path: path.clone(),
                        source,
                    })
                    .and_then(|f| run.trace.write_jsonl(std::io::BufWriter::new(f)));
                if let Err(e) = written {
                    eprintln!("warning: trace not written: {e}");
                }
            }
        }
        Err(e) => eprintln!(
            "warning: {} {} n={} trial {} failed: {e}",
            cell.algo, cell.noise, cell.n, cell.trial
        ),
    }
    record
}

/// Worker count from [`THREADS_ENV`], if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.parse().ok().filter(|&n| n > 0)
}

/// Runs every `(algo, noise, n, trial)` cell. Records come back sorted by
/// that key regardless of scheduling.
pub fn run_matrix(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRecord>> {
    cfg.validate()?;
    let instances = cfg
        .n_values
        .iter()
        .map(|&n| build_experiment_instance(n, cfg.allow_low_fidelity).map(|i| (n, i)))
        .collect::<Result<Vec<_>>>()?;
    if let Some(dir) = &cfg.trace_dir {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.clone(),
            source,
        })?;
    }
    let mut cells = Vec::new();
    for &algo in &cfg.algos {
        for &noise in &cfg.noise_models {
            for (idx, (n, _)) in instances.iter().enumerate() {
                for trial in 0..cfg.trials {
                    cells.push((
                        idx,
                        Cell {
                            algo,
                            noise,
                            n: *n,
                            trial,
                        },
                    ));
                }
            }
        }
    }
    let work = || -> Vec<ExperimentRecord> {
        cells
            .par_iter()
            .map(|&(idx, cell)| run_cell(cfg, &instances[idx].1, cell))
            .collect()
    };
    let mut records = match thread_cap() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    records.sort_by_key(ExperimentRecord::sort_key);
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub algo: Algo,
    pub noise_model: NoiseKind,
    pub n: usize,
    pub k: usize,
    pub trials: usize,
    pub success_rate: f64,
    pub mean_cost: f64,
    /// Standard error of the mean cost.
    pub se_cost: f64,
}

pub fn summarize(records: &[ExperimentRecord]) -> Vec<CellSummary> {
    let mut out: Vec<CellSummary> = Vec::new();
    for chunk in records.chunk_by(|a, b| (a.algo, a.noise_model, a.n) == (b.algo, b.noise_model, b.n)) {
        let m = chunk.len() as f64;
        let costs: Vec<f64> = chunk.iter().map(|r| r.resource_cost as f64).collect();
        let mean = costs.iter().sum::<f64>() / m;
        let var = if chunk.len() > 1 {
            costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (m - 1.0)
        } else {
            0.0
        };
        out.push(CellSummary {
            algo: chunk[0].algo,
            noise_model: chunk[0].noise_model,
            n: chunk[0].n,
            k: chunk[0].k,
            trials: chunk.len(),
            success_rate: chunk.iter().filter(|r| r.success).count() as f64 / m,
            mean_cost: mean,
            se_cost: (var / m).sqrt(),
        });
    }
    out
}

/// Writes the results table with the exact [`CSV_HEADER`].
pub fn write_csv<W: std::io::Write>(records: &[ExperimentRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for r in records {
        w.write_record([
            r.algo.to_string(),
            r.metric.to_string(),
            r.noise_model.to_string(),
            r.n.to_string(),
            r.k.to_string(),
            r.l.to_string(),
            r.trial.to_string(),
            r.seed.to_string(),
            r.output_path.map(|k| k.to_string()).unwrap_or_default(),
            r.true_best.to_string(),
            r.success.to_string(),
            r.resource_cost.to_string(),
            r.rounds.to_string(),
            r.wall_time_ms.to_string(),
        ])?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<csv>".into(),
        source,
    })?;
    Ok(())
}

pub fn emit_csv(records: &[ExperimentRecord], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_csv(records, std::io::BufWriter::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

/// Reads back a file written by [`emit_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Config(format!("unexpected header: {}", header.join(","))));
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        let field = |i: usize| row.get(i).unwrap_or_default();
        let num = |i: usize| -> Result<u64> {
            field(i)
                .parse()
                .map_err(|_| Error::Config(format!("bad integer '{}' in column {}", field(i), i)))
        };
        out.push(ExperimentRecord {
            algo: field(0).parse()?,
            metric: field(1).parse()?,
            noise_model: field(2).parse()?,
            n: num(3)? as usize,
            k: num(4)? as usize,
            l: num(5)? as usize,
            trial: num(6)? as u32,
            seed: num(7)?,
            output_path: if field(8).is_empty() {
                None
            } else {
                Some(num(8)? as usize)
            },
            true_best: num(9)? as usize,
            success: field(10) == "true",
            resource_cost: num(11)?,
            rounds: num(12)?,
            wall_time_ms: num(13)?,
        });
    }
    Ok(out)
}
