use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use constrained_kld::bounds::{self, ProblemConstants};
use constrained_kld::harness::{self, ExperimentConfig};
use constrained_kld::integrators::{run_chain, GradientMode};
use constrained_kld::metrics::{self, wasserstein, SampleSet};
use constrained_kld::{Error, KineticState, Scheme, Vector};

#[derive(Parser)]
#[command(
    name = "ckld",
    version,
    about = "Constrained kinetic Langevin samplers and experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one chain and write its trace as CSV
    Sample(SampleArgs),
    /// Run a preset or config file over schemes and seeds
    Experiment(ExperimentArgs),
    /// Weak and strong order ladders on a 1-D quadratic
    OrderTest(OrderArgs),
    /// Bound constants for a config, or a complexity schedule
    Bounds(BoundsArgs),
    /// Exact W_q distance between two CSV sample files
    Wasserstein(WassersteinArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Preset name: circle, triangle, square or lasso
    #[arg(long)]
    preset: Option<String>,
    /// JSON experiment config
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long, default_value = "cubu")]
    scheme: Scheme,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Use the preset's stochastic-gradient mode
    #[arg(long)]
    sg: bool,
    /// Output CSV; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    source: Source,
    /// Comma-separated schemes, e.g. cklmc,cubu,cbaoab
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<Scheme>>,
    /// Run seeds 0..N
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    sg: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderKind {
    Weak,
    Strong,
    Both,
}

#[derive(Args)]
struct OrderArgs {
    #[arg(long, value_enum, default_value = "both")]
    kind: OrderKind,
    #[arg(long, value_delimiter = ',', default_value = "cklmc,cubu,cbaoab")]
    schemes: Vec<Scheme>,
    /// Curvature of f(x) = k x^2 / 2
    #[arg(long, default_value_t = 1.0)]
    k: f64,
    #[arg(long, default_value_t = 2.0)]
    gamma: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.4,0.2,0.1,0.05")]
    ladder: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    paths: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Schedule id, 3.1a through 3.5b
    #[arg(long, requires = "epsilon")]
    schedule: Option<String>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Dimension for --schedule
    #[arg(long, default_value_t = 3)]
    p: usize,
}

#[derive(Args)]
struct WassersteinArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    q: f64,
}

type CliResult = Result<(), Error>;

fn load(source: &Source, sg: bool) -> Result<ExperimentConfig, Error> {
    match (&source.preset, &source.config) {
        (Some(name), _) if sg => harness::preset_sg(name),
        (Some(name), _) => harness::preset(name),
        (None, Some(path)) => ExperimentConfig::load(path),
        (None, None) => unreachable!("clap enforces one source"),
    }
}

fn print_json(value: &serde_json::Value) -> CliResult {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out).map_err(|e| Error::Io {
        path: "<stdout>".into(),
        source: e,
    })
}

fn sample(args: SampleArgs) -> CliResult {
    let mut cfg = load(&args.source, args.sg)?;
    cfg.h = args.h.unwrap_or(cfg.h);
    cfg.lambda = args.lambda.unwrap_or(cfg.lambda);
    cfg.gamma = args.gamma.unwrap_or(cfg.gamma);
    cfg.iterations = args.iterations.unwrap_or(cfg.iterations);
    let pot = cfg.potential()?;
    let trace = run_chain(
        None,
        cfg.iterations,
        &cfg.integrator(args.scheme)?,
        &pot,
        args.seed,
    )?;
    match args.out {
        Some(path) => {
            let mut bytes = Vec::new();
            trace.write_csv(&mut bytes)?;
            harness::write_atomic(&path, &bytes)
        }
        None => trace.write_csv(std::io::stdout().lock()),
    }
}

fn experiment(args: ExperimentArgs) -> CliResult {
    let mut cfg = load(&args.source, args.sg)?;
    if let Some(s) = args.schemes {
        cfg.scheme = s;
    }
    if let Some(n) = args.seeds {
        cfg.seeds = (0..n).collect();
    }
    if let Some(n) = args.iterations {
        cfg.iterations = n;
    }
    if let Some(out) = args.out {
        cfg.out = out;
    }
    let report = harness::run_experiment(&cfg)?;
    let summary: Vec<serde_json::Value> = report
        .runs
        .iter()
        .map(|r| {
            let metrics: serde_json::Map<String, serde_json::Value> = r
                .metrics
                .iter()
                .map(|m| (m.metric.clone(), serde_json::json!(m.value)))
                .collect();
            serde_json::json!({ "scheme": r.scheme, "samples": r.samples, "metrics": metrics })
        })
        .collect();
    print_json(&serde_json::json!({
        "report": cfg.out.join("report.json"),
        "runs": summary,
        "wall_seconds": report.wall_seconds,
    }))
}

fn order_test(args: OrderArgs) -> CliResult {
    let mut out = serde_json::Map::new();
    for scheme in &args.schemes {
        let mut entry = serde_json::Map::new();
        if matches!(args.kind, OrderKind::Weak | OrderKind::Both) {
            let weak = metrics::weak_bias_ladder(*scheme, args.k, args.gamma, &args.ladder)?;
            entry.insert("weak".into(), serde_json::to_value(weak)?);
        }
        if matches!(args.kind, OrderKind::Strong | OrderKind::Both) {
            let k = args.k;
            let grad = move |x: &Vector| Ok(x * k);
            let initial =
                KineticState::new(Vector::from_element(1, 0.5), Vector::from_element(1, 0.3))?;
            let strong = metrics::strong_error_ladder(
                *scheme,
                &grad,
                args.gamma,
                &args.ladder,
                1.0,
                &initial,
                args.paths,
                args.seed,
            )?;
            entry.insert("strong".into(), serde_json::to_value(strong)?);
        }
        out.insert(scheme.to_string(), entry.into());
    }
    print_json(&out.into())
}

fn bounds_cmd(args: BoundsArgs) -> CliResult {
    let mut out = serde_json::Map::new();
    let source = match (&args.preset, &args.config) {
        (Some(name), _) => Some(harness::preset(name)?),
        (None, Some(path)) => Some(ExperimentConfig::load(path)?),
        (None, None) => None,
    };
    if let Some(cfg) = source {
        let pot = cfg.potential()?;
        let sigma = match cfg.gradient.mode() {
            GradientMode::Full => (0.0, 0.0),
            GradientMode::Stochastic(sg) => sg.noise_levels(pot.base()),
        };
        let c = ProblemConstants::from_problem(&pot, sigma)?;
        out.insert(
            "bounds".into(),
            bounds::report(&c, cfg.gamma, cfg.h, cfg.iterations),
        );
    }
    if let (Some(id), Some(eps)) = (&args.schedule, args.epsilon) {
        out.insert(
            "schedule".into(),
            serde_json::to_value(bounds::schedule(id, eps, args.p)?)?,
        );
    }
    if out.is_empty() {
        return Err(Error::InvalidParameter {
            name: "bounds",
            reason: "give --preset, --config or --schedule with --epsilon".into(),
        });
    }
    print_json(&out.into())
}

fn wasserstein_cmd(args: WassersteinArgs) -> CliResult {
    let a = SampleSet::read_csv(&args.a)?;
    let b = SampleSet::read_csv(&args.b)?;
    println!("{}", wasserstein(&a, &b, args.q)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sample(a) => sample(a),
        Command::Experiment(a) => experiment(a),
        Command::OrderTest(a) => order_test(a),
        Command::Bounds(a) => bounds_cmd(a),
        Command::Wasserstein(a) => wasserstein_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{msg}");
            ExitCode::FAILURE
        }
    }
}
