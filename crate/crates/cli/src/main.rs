use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use bequp::bench::{BenchConfig, BenchMode, BenchTarget, Simulator};
use bequp::channel::{strength_from_fidelity, NoiseKind};
use bequp::harness::{emit_csv, run_matrix, summarize, write_csv, Algo, ExperimentConfig};
use bequp::network::{build_segmented_topology, fidelity_from_p, load_instance, p_from_fidelity, Instance, LinkId};
use bequp::qkd::Metric;
use bequp::TrialRng;
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;

#[derive(Parser)]
#[command(
    name = "bequp",
    version,
    about = "Best-path learning experiments on simulated quantum networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment matrix and write the results CSV.
    Run(RunArgs),
    /// Repeatedly benchmark a single link and print the estimates.
    Bench(BenchArgs),
    /// Print link and path gaps of an instance file.
    Gaps(GapsArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated algorithm names.
    #[arg(long, value_delimiter = ',')]
    algo: Option<Vec<Algo>>,
    #[arg(long)]
    metric: Option<Metric>,
    /// Comma-separated noise models.
    #[arg(long, value_delimiter = ',')]
    noise: Option<Vec<NoiseKind>>,
    /// Comma-separated values of n, or a range such as 2-6.
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    trials: Option<u32>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Repetitions per bench call for every algorithm.
    #[arg(long)]
    t0: Option<u32>,
    /// Bounce numbers, comma-separated or a range such as 1-10.
    #[arg(long)]
    bounces: Option<String>,
    #[arg(long)]
    mode: Option<BenchMode>,
    /// Results CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for per-trial JSON-lines traces.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    allow_low_fidelity: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Depolarizing parameter of the link.
    #[arg(long, conflicts_with = "fidelity", required_unless_present = "fidelity")]
    p: Option<f64>,
    /// Average fidelity of the link; converted to p = 2f - 1.
    #[arg(long)]
    fidelity: Option<f64>,
    #[arg(long, default_value = "depolarizing")]
    noise: NoiseKind,
    #[arg(long, default_value_t = 10)]
    t0: u32,
    #[arg(long, default_value = "1-10")]
    bounces: String,
    #[arg(long, default_value_t = 100)]
    samples: u32,
    #[arg(long, default_value = "surrogate")]
    mode: BenchMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GapsArgs {
    instance: PathBuf,
    #[arg(long, default_value = "fidelity")]
    metric: Metric,
}

fn parse_list(text: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = text.split_once('-') {
        let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
        if a > b {
            bail!("empty range '{text}'");
        }
        return Ok((a..=b).collect());
    }
    text.split(',')
        .map(|s| s.trim().parse::<u64>().with_context(|| format!("bad number '{s}'")))
        .collect()
}

fn parse_u32_list(text: &str) -> Result<Vec<u32>> {
    parse_list(text)?
        .into_iter()
        .map(|v| u32::try_from(v).context("value too large"))
        .collect()
}

fn run(args: RunArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = args.algo {
        cfg.algos = v;
    }
    if let Some(v) = args.metric {
        cfg.metric = v;
    }
    if let Some(v) = args.noise {
        cfg.noise_models = v;
    }
    if let Some(v) = &args.n {
        cfg.n_values = parse_list(v)?.into_iter().map(|n| n as usize).collect();
    }
    if let Some(v) = args.trials {
        cfg.trials = v;
    }
    if let Some(v) = args.delta {
        cfg.delta = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if args.t0.is_some() {
        cfg.t0 = args.t0;
    }
    if let Some(v) = &args.bounces {
        cfg.bounces = parse_u32_list(v)?;
    }
    if let Some(v) = args.mode {
        cfg.mode = v;
    }
    if args.out.is_some() {
        cfg.output = args.out;
    }
    if args.trace.is_some() {
        cfg.trace_dir = args.trace;
    }
    cfg.allow_low_fidelity |= args.allow_low_fidelity;

    let records = run_matrix(&cfg)?;
    match &cfg.output {
        Some(path) => emit_csv(&records, path)?,
        None => write_csv(&records, std::io::stdout().lock())?,
    }
    for s in summarize(&records) {
        eprintln!(
            "{:<13}{:<18} n={} K={:<3} success={:.2} cost={:.1} (se {:.1})",
            s.algo, s.noise_model, s.n, s.k, s.success_rate, s.mean_cost, s.se_cost
        );
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let p = match (args.p, args.fidelity) {
        (Some(p), _) => p,
        (None, Some(f)) => p_from_fidelity(f)?,
        (None, None) => bail!("one of --p or --fidelity is required"),
    };
    let instance = Instance::new(build_segmented_topology(&[1])?, vec![p])?;
    let model = strength_from_fidelity(args.noise, fidelity_from_p(p)?)?;
    let config = BenchConfig {
        bounces: parse_u32_list(&args.bounces)?,
        t0: args.t0,
        spam: 1.0,
        mode: args.mode,
    };
    let sim = Simulator::new(&instance, &[model], config)?;
    let mut rng = TrialRng::seed_from_u64(args.seed);
    let mut out = std::io::BufWriter::new(std::io::stdout().lock());
    writeln!(out, "sample_idx,p_hat,a_hat,cost_units")?;
    for i in 0..args.samples {
        let r = sim.bench(BenchTarget::Link(LinkId(0)), &mut rng);
        writeln!(out, "{i},{},{},{}", r.p_hat, r.a_hat, r.cost_units)?;
    }
    out.flush()?;
    Ok(())
}

fn gaps(args: GapsArgs) -> Result<()> {
    let instance = load_instance(&args.instance)?;
    let report = args.metric.gaps(&instance)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(a) => run(a),
        Command::Bench(a) => bench(a),
        Command::Gaps(a) => gaps(a),
    }
}
