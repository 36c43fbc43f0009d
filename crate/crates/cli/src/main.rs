use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use marollout::approx_pi::{pi_iterate, PiConfig};
use marollout::comms::CommsArchitecture;
use marollout::harness::{
    compare_grid, run_experiment, ExperimentConfig, ExperimentOutput, Instance, InstanceConfig, PolicySpec,
};
use marollout::pomdp::Policy;
use marollout::repair::{DamageChain, RepairGraph, RepairModel, SteadyStateTerminal};

#[derive(Parser)]
#[command(name = "marollout", version, about = "Multiagent rollout experiments on the graph-repair benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one or more policies on a shared seeded suite.
    Evaluate(GridArgs),
    /// Evaluate at least two policies and write paired comparisons.
    Compare(GridArgs),
    /// Approximate policy iteration; writes one classifier per iteration.
    TrainPi(TrainArgs),
    /// Sweep cloud probability for the intermittent-communication variants.
    SweepComms(SweepArgs),
    /// Write a graph and damage chain pair as JSON.
    MakeInstance(MakeArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// JSON experiment configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    agents: Option<usize>,
    /// Graph preset (desk, benchmark) or JSON file.
    #[arg(long)]
    graph: Option<String>,
    /// Chain preset (desk, benchmark) or JSON file.
    #[arg(long)]
    chain: Option<String>,
    /// Use the non-escalating chain variant.
    #[arg(long)]
    terminating: bool,
    #[arg(long)]
    discount: Option<f64>,
    #[arg(long)]
    lookahead: Option<usize>,
    #[arg(long)]
    truncation: Option<usize>,
    #[arg(long)]
    trajectories: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Number of random initial states.
    #[arg(long)]
    states: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    common: Common,
    /// Policy short form, repeatable: base, standard, one-at-a-time,
    /// order-optimized, multistep, classifier:FILE.., amr-b, amr-n:FILE,
    /// amr-pi:FILE:FILE, amr-lc:R, amr-ilc:RHO[:R], amr-ib1:RHO, amr-ib0:RHO.
    #[arg(long)]
    policy: Vec<String>,
    /// Overrides the cloud probability of every intermittent variant.
    #[arg(long)]
    rho: Option<f64>,
    /// Overrides the hop radius of every local-sharing variant.
    #[arg(long)]
    radius: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 3)]
    iterations: usize,
    /// Beliefs per iteration; each yields one sample per agent.
    #[arg(long, default_value_t = 2000)]
    beliefs: usize,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    /// Write classifiers as JSON instead of the binary format.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Cloud probabilities to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.3, 0.5, 0.8, 1.0])]
    rho: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    radius: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    /// 32-vertex benchmark network with the five-level chain.
    Benchmark,
    /// 12-vertex network with the three-level chain.
    Desk,
    /// 3-vertex path with a two-level chain, small enough to flatten.
    Tiny,
}

#[derive(Args)]
struct MakeArgs {
    #[arg(long, value_enum, default_value = "benchmark")]
    kind: Kind,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn source(s: &str) -> marollout::harness::Source {
    if s.ends_with(".json") {
        marollout::harness::Source::File(s.into())
    } else {
        marollout::harness::Source::Preset(s.into())
    }
}

fn base_config(c: &Common, policies: Vec<PolicySpec>) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => ExperimentConfig::new(InstanceConfig::default(), Vec::new()),
    };
    if !policies.is_empty() {
        cfg.policies = policies;
    }
    if let Some(s) = c.seed {
        cfg.evaluation.root_seed = s;
    }
    if let Some(m) = c.agents {
        cfg.instance.agents = m;
    }
    if let Some(g) = &c.graph {
        cfg.instance.graph = source(g);
    }
    if let Some(g) = &c.chain {
        cfg.instance.chain = source(g);
    }
    cfg.instance.terminating |= c.terminating;
    if let Some(a) = c.discount {
        cfg.evaluation.discount = a;
    }
    if let Some(l) = c.lookahead {
        cfg.rollout.lookahead = l;
    }
    if let Some(t) = c.truncation {
        cfg.rollout.truncation = t;
    }
    if let Some(n) = c.trajectories {
        cfg.rollout.n_traj = n;
    }
    if let Some(h) = c.horizon {
        cfg.evaluation.horizon = h;
    }
    if let Some(n) = c.states {
        cfg.evaluation.initial_states = n;
    }
    Ok(cfg)
}

fn override_comms(spec: &mut PolicySpec, rho: Option<f64>, radius: Option<usize>) {
    if let PolicySpec::Comms { architecture, .. } = spec {
        match architecture {
            CommsArchitecture::AmrLc { radius: r } => *r = radius.unwrap_or(*r),
            CommsArchitecture::AmrIlc { rho: p, radius: r } => {
                *p = rho.unwrap_or(*p);
                *r = radius.unwrap_or(*r);
            }
            CommsArchitecture::AmrIb1 { rho: p } | CommsArchitecture::AmrIb0 { rho: p } => *p = rho.unwrap_or(*p),
            _ => {}
        }
    }
}

fn with_outputs(mut cfg: ExperimentConfig, out: &Path, compare: bool) -> Result<ExperimentConfig> {
    std::fs::create_dir_all(out)?;
    cfg.output.results_csv = Some(out.join("results.csv"));
    cfg.output.timing_csv = Some(out.join("timing.csv"));
    cfg.output.manifest = Some(out.join("manifest.json"));
    if compare {
        cfg.output.comparison_csv = Some(out.join("comparison.csv"));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn summarize(out: &ExperimentOutput) {
    for r in &out.results {
        println!(
            "{:<26} mean {:>10.2} ± {:>7.2}  Q/stage {:>7.2}  oscillation {:.4}",
            r.label,
            r.mean(),
            r.stderr(),
            r.mean_q_per_stage(),
            r.oscillation_rate()
        );
    }
    for c in &out.comparisons {
        println!(
            "{} vs {}: diff {:.2} (t={:.2}, p={:.3}) {}",
            c.a,
            c.b,
            c.test.mean_diff,
            c.test.t,
            c.test.p_two_sided,
            c.verdict(0.05)
        );
    }
}

fn grid(args: GridArgs, compare: bool) -> Result<()> {
    let mut policies = args
        .policy
        .iter()
        .map(|p| PolicySpec::parse(p))
        .collect::<marollout::Result<Vec<_>>>()?;
    let mut cfg = base_config(&args.common, std::mem::take(&mut policies))?;
    for p in &mut cfg.policies {
        override_comms(p, args.rho, args.radius);
    }
    if cfg.policies.is_empty() {
        bail!("no policies given; use --policy or --config");
    }
    let cfg = with_outputs(cfg, &args.common.out, compare)?;
    let out = if compare { compare_grid(&cfg)? } else { run_experiment(&cfg)? };
    summarize(&out);
    println!("wrote {}", args.common.out.display());
    Ok(())
}

fn train_pi(args: TrainArgs) -> Result<()> {
    let mut cfg = base_config(&args.common, vec![PolicySpec::Base])?;
    cfg.validate()?;
    let instance = Instance::from_config(&cfg)?;
    let mut pi = PiConfig {
        iterations: args.iterations,
        beliefs_per_iteration: args.beliefs,
        rollout: cfg.rollout.clone(),
        evaluation_states: cfg.evaluation.initial_states,
        horizon: cfg.evaluation.horizon,
        ..Default::default()
    };
    pi.network.epochs = args.epochs;
    let base: Arc<dyn Policy<RepairModel>> = instance.greedy.clone();
    let result = pi_iterate(&instance, base, &SteadyStateTerminal, &pi, cfg.evaluation.root_seed)?;
    let out = &args.common.out;
    std::fs::create_dir_all(out)?;
    let ext = if args.json { "json" } else { "bin" };
    let mut files = Vec::new();
    for (k, p) in result.policies.iter().enumerate() {
        let f = out.join(format!("classifier-{}.{ext}", k + 1));
        p.network().save(&f)?;
        files.push(f);
    }
    cfg.policies = vec![PolicySpec::Classifier {
        files: files.iter().map(|f| f.file_name().unwrap().into()).collect(),
    }];
    cfg.output = Default::default();
    let summary = serde_json::json!({
        "cost_trace": result.cost_trace,
        "reports": result.reports,
        "classifiers": files,
        "pi": pi,
        "config": cfg,
    });
    std::fs::write(out.join("train-pi.json"), serde_json::to_string_pretty(&summary)?)?;
    for (k, c) in result.cost_trace.iter().enumerate() {
        let name = if k == 0 { "base".to_string() } else { format!("iteration {k}") };
        println!("{name:<12} mean cost {c:.2}");
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let mut policies = vec![PolicySpec::OneAtATime, PolicySpec::parse("amr-b")?];
    for &rho in &args.rho {
        for arch in [
            CommsArchitecture::AmrIlc { rho, radius: args.radius },
            CommsArchitecture::AmrIb1 { rho },
            CommsArchitecture::AmrIb0 { rho },
        ] {
            arch.validate()?;
            policies.push(PolicySpec::Comms {
                architecture: arch,
                classifiers: Vec::new(),
            });
        }
    }
    let cfg = with_outputs(base_config(&args.common, policies)?, &args.common.out, true)?;
    summarize(&compare_grid(&cfg)?);
    Ok(())
}

fn make_instance(args: MakeArgs) -> Result<()> {
    let (graph, chain) = match args.kind {
        Kind::Benchmark => (RepairGraph::benchmark(), DamageChain::benchmark()),
        Kind::Desk => (RepairGraph::desk(), DamageChain::desk()),
        Kind::Tiny => (RepairGraph::path(3)?, DamageChain::new(2, vec![0.1], vec![0.0, 1.0])?),
    };
    std::fs::create_dir_all(&args.out)?;
    graph.save(args.out.join("graph.json"))?;
    chain.save(args.out.join("chain.json"))?;
    println!(
        "wrote {} vertices, {} levels to {}",
        graph.num_vertices(),
        chain.levels(),
        args.out.display()
    );
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Evaluate(a) => grid(a, false),
        Command::Compare(a) => grid(a, true),
        Command::TrainPi(a) => train_pi(a),
        Command::SweepComms(a) => sweep(a),
        Command::MakeInstance(a) => make_instance(a),
    }
}
