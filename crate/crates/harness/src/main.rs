use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aggbandit_core::env::{make_adversary, make_lower_bound_instance, AdversarySpec, Gap};
use aggbandit_core::format::{write_loss_sequence, write_mdp};
use aggbandit_core::mdp::TabularMdp;
use aggbandit_core::rng::{purpose, RandomStream};
use aggbandit_harness::config::Overrides;
use aggbandit_harness::records::{summary_path, write_json, write_records};
use aggbandit_harness::{run_experiment, sweep_scaling, Algorithm, ExperimentConfig};
use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "aggbandit", version, about = "Policy optimization with aggregate bandit feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Run seed; repeat for several. Replaces the config's seed list.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    /// Output path (CSV for `run`, JSON report for `sweep`).
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Episode budget K.
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    algorithm: Option<Algorithm>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed and write the per-episode CSV plus a summary.
    Run(Common),
    /// Run a grid of episode budgets and fit the log-log regret slope.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated episode budgets.
        #[arg(long, value_delimiter = ',', required = true)]
        ks: Vec<usize>,
    },
    /// Check a config and build its instance without running.
    Validate {
        #[arg(long, short)]
        config: PathBuf,
    },
    /// Write an MDP (and optionally a fixed loss sequence) as JSON.
    GenInstance(GenArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum InstanceKind {
    Random,
    LowerBound,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value = "random")]
    kind: InstanceKind,
    #[arg(long)]
    states: usize,
    #[arg(long)]
    actions: usize,
    #[arg(long)]
    horizon: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Episode budget used for the automatic gap and for `--losses`.
    #[arg(long, default_value_t = 1000)]
    episodes: usize,
    /// Fixed gap for the lower-bound instance; automatic when absent.
    #[arg(long)]
    epsilon: Option<f64>,
    /// MDP output file.
    #[arg(long, short)]
    out: PathBuf,
    /// Also write `--episodes` loss tables here (iid uniform, or Bernoulli for
    /// the lower-bound instance).
    #[arg(long)]
    losses: Option<PathBuf>,
}

fn load(common: &Common) -> anyhow::Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(&common.config)?;
    config.apply(&Overrides {
        seeds: common.seeds.clone(),
        output: common.out.clone(),
        episodes: common.episodes,
        algorithm: common.algorithm,
    });
    config.apply_seed_env()?;
    Ok(config)
}

fn output(config: &ExperimentConfig, fallback: &str) -> PathBuf {
    config.output.clone().unwrap_or_else(|| PathBuf::from(fallback))
}

fn run(common: &Common) -> anyhow::Result<()> {
    let config = load(common)?;
    let exp = config.resolve()?;
    let result = run_experiment(&exp)?;
    let path = output(&config, "run.csv");
    write_records(&result.records(), &result.summary(&exp), &path)?;
    let (mean, se) = aggbandit_harness::runner::mean_and_se(&result.final_regrets());
    println!(
        "{} K={} seeds={} mean R_K={mean:.6} (se {se:.6})",
        exp.config.algorithm,
        exp.config.episodes,
        exp.config.seeds.len()
    );
    println!("wrote {} and {}", path.display(), summary_path(&path).display());
    Ok(())
}

fn sweep(common: &Common, ks: &[usize]) -> anyhow::Result<()> {
    let config = load(common)?;
    let report = sweep_scaling(&config, ks, &[])?;
    let path = output(&config, "sweep.json");
    write_json(&path, &report)?;
    for p in &report.points {
        println!("K={:>8} mean R_K={:.6} (se {:.6})", p.episodes, p.mean_regret, p.std_error);
    }
    match (&report.fit, &report.fit_error) {
        (Some(fit), _) => println!("slope {:.4} intercept {:.4}", fit.slope, fit.intercept),
        (None, Some(e)) => println!("no fit: {e}"),
        _ => {}
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn validate(path: &Path) -> anyhow::Result<()> {
    let mut config = ExperimentConfig::load(path)?;
    config.apply_seed_env()?;
    let exp = config.resolve()?;
    let d = exp.dims();
    println!(
        "ok: {} on S={} A={} H={}, K={}, {} seed(s), eta={:e}, gamma={:e}",
        config.algorithm,
        d.num_states,
        d.num_actions,
        d.horizon,
        config.episodes,
        config.seeds.len(),
        exp.eta,
        exp.gamma
    );
    Ok(())
}

fn gen_instance(args: &GenArgs) -> anyhow::Result<()> {
    let mut rng = RandomStream::for_purpose(args.seed, purpose::INSTANCE);
    let (mdp, spec) = match args.kind {
        InstanceKind::Random => {
            if args.epsilon.is_some() {
                bail!("--epsilon only applies to --kind lower-bound");
            }
            let mdp = TabularMdp::random(args.states, args.actions, args.horizon, &mut rng)?;
            (mdp, AdversarySpec::IidUniform)
        }
        InstanceKind::LowerBound => {
            let gap = args.epsilon.map_or(Gap::Auto, Gap::Fixed);
            let inst = make_lower_bound_instance(args.states, args.actions, args.horizon, args.episodes, gap, &mut rng)?;
            let spec = AdversarySpec::lower_bound(&inst);
            (inst.mdp, spec)
        }
    };
    write_mdp(&args.out, &mdp)?;
    println!("wrote {}", args.out.display());
    if let Some(path) = &args.losses {
        let tables: Vec<_> = make_adversary(
            &spec,
            mdp.dims(),
            args.episodes,
            RandomStream::for_purpose(args.seed, purpose::ADVERSARY),
        )?
        .collect();
        write_loss_sequence(path, mdp.dims(), &tables)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(common) => run(common).context("run failed"),
        Command::Sweep { common, ks } => sweep(common, ks).context("sweep failed"),
        Command::Validate { config } => validate(config).context("invalid config"),
        Command::GenInstance(args) => gen_instance(args).context("gen-instance failed"),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
