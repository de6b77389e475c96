use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde_json::json;

use markgof::estimate::{bandwidth_from_c, estimate_covariance};
use markgof::harness::{emit_table, run_scenario, INCONCLUSIVE_LIMIT};
use markgof::io::{
    load_null_distribution, read_covariance, read_pattern, write_covariance, write_pattern,
};
use markgof::seeding::derive_seed;
use markgof::simulate::simulate_pattern;
use markgof::testkit::{mgm_test, monte_carlo_sigma, tmd_test};
use markgof::{
    window_for_expected_points, BoundaryCoxConfig, Error, EstimatorKind, KernelSpec, MarkBins,
    Result, ScenarioConfig, Window,
};

const DEFAULT_SEED: u64 = 1;

#[derive(Parser)]
#[command(
    name = "markgof",
    version,
    about = "Goodness-of-fit tests for direction marks of planar point patterns"
)]
struct Cli {
    /// Master seed for simulation and Monte Carlo.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// JSON config file (model for `simulate`/`test`, scenario for `experiment`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate boundary points of a Boolean model of ellipses.
    Simulate(SimulateArgs),
    /// Estimate the covariance matrix of the normalized mark counts.
    Estimate(EstimateArgs),
    /// Run the TMD or MGM goodness-of-fit test on a pattern.
    Test(TestArgs),
    /// Run a rejection-rate study.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct ModelFlags {
    #[arg(long)]
    germ_intensity: Option<f64>,
    #[arg(long)]
    radius_scale: Option<f64>,
    #[arg(long)]
    radius_shape: Option<f64>,
    #[arg(long)]
    elongation: Option<f64>,
    #[arg(long)]
    boundary_intensity: Option<f64>,
    #[arg(long)]
    margin_quantile: Option<f64>,
}

impl ModelFlags {
    fn apply(&self, mut cfg: BoundaryCoxConfig) -> BoundaryCoxConfig {
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut cfg.germ_intensity, self.germ_intensity);
        set(&mut cfg.radius_scale, self.radius_scale);
        set(&mut cfg.radius_shape, self.radius_shape);
        set(&mut cfg.elongation, self.elongation);
        set(&mut cfg.boundary_intensity, self.boundary_intensity);
        set(&mut cfg.margin_quantile, self.margin_quantile);
        cfg
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelFlags,
    /// Side length of the square window.
    #[arg(long, conflicts_with = "target_points")]
    side: Option<f64>,
    /// Size the window for this expected number of points instead.
    #[arg(long)]
    target_points: Option<usize>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Uniform,
    Triangular,
}

impl From<KernelArg> for KernelSpec {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Uniform => KernelSpec::uniform(),
            KernelArg::Triangular => KernelSpec::triangular(),
        }
    }
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    pattern: PathBuf,
    /// Number of direction bins ℓ.
    #[arg(long, default_value_t = 8)]
    bins: usize,
    /// `uniform` or a file of bin probabilities.
    #[arg(long, default_value = "uniform")]
    null: String,
    /// 1 = edge-corrected, 2 = naive, 3 = smoothed.
    #[arg(long, default_value = "1")]
    estimator: String,
    #[arg(long, value_enum, default_value = "uniform")]
    kernel: KernelArg,
    /// Bandwidth constant for the smoothed estimator.
    #[arg(long)]
    c: Option<f64>,
    /// Matrix CSV; printed to stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Mode {
    Tmd,
    Mgm,
}

#[derive(Args)]
struct TestArgs {
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long)]
    pattern: PathBuf,
    #[arg(long, default_value_t = 8)]
    bins: usize,
    #[arg(long, default_value = "uniform")]
    null: String,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, value_enum, default_value = "uniform")]
    kernel: KernelArg,
    /// Precomputed null covariance (MGM).
    #[arg(long, conflicts_with = "mc_model")]
    sigma0: Option<PathBuf>,
    /// Null model config to estimate the covariance by Monte Carlo (MGM).
    #[arg(long, requires = "mc_n")]
    mc_model: Option<PathBuf>,
    #[arg(long)]
    mc_n: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// JSON report file.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Rejection-rate CSV.
    #[arg(long)]
    output: PathBuf,
    /// Run metadata JSON (defaults to `<output>.meta.json`).
    #[arg(long)]
    metadata: Option<PathBuf>,
    /// 1000 replications per cell and targets up to 3000 points.
    #[arg(long)]
    full: bool,
}

fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
}

fn simulate(cli: &Cli, args: &SimulateArgs) -> Result<()> {
    let base = match &cli.config {
        Some(path) => load_json(path)?,
        None => BoundaryCoxConfig::default(),
    };
    let cfg = args.model.apply(base);
    cfg.validate()?;
    let window = match (args.side, args.target_points) {
        (Some(side), _) => Window::square(side)?,
        (None, Some(n)) => window_for_expected_points(&cfg, n, None)?,
        (None, None) => {
            return Err(Error::InvalidArgument(
                "one of --side or --target-points is required".into(),
            ))
        }
    };
    let pattern = simulate_pattern(&cfg, &window, cli.seed.unwrap_or(DEFAULT_SEED))?;
    write_pattern(&args.output, &pattern)?;
    eprintln!(
        "wrote {} points in a window of side {}",
        pattern.len(),
        window.sides()[0]
    );
    Ok(())
}

fn estimate(args: &EstimateArgs) -> Result<()> {
    let pattern = read_pattern(&args.pattern)?;
    let bins = MarkBins::new(args.bins)?;
    let null0 = load_null_distribution(&args.null, &bins)?;
    let kind: EstimatorKind = args.estimator.parse()?;
    let kernel = KernelSpec::from(args.kernel);
    let bandwidth = match (kind, args.c) {
        (EstimatorKind::Smoothed, Some(c)) => Some(bandwidth_from_c(c, pattern.window(), &kernel)?),
        (EstimatorKind::Smoothed, None) => {
            return Err(Error::InvalidArgument("--estimator 3 requires --c".into()))
        }
        _ => None,
    };
    if let Some(bw) = &bandwidth {
        if !bw.is_admissible() {
            eprintln!(
                "warning: bandwidth {} exceeds the upper bound {}",
                bw.b, bw.upper_bound
            );
        }
    }
    let est = estimate_covariance(
        kind,
        &pattern,
        &bins,
        &null0,
        bandwidth.as_ref().map(|b| (&kernel, b)),
    )?;
    match &args.output {
        Some(path) => write_covariance(path, &est)?,
        None => print!("{}", markgof::io::covariance_to_string(&est)),
    }
    Ok(())
}

fn test(cli: &Cli, args: &TestArgs) -> Result<()> {
    let pattern = read_pattern(&args.pattern)?;
    let bins = MarkBins::new(args.bins)?;
    let null0 = load_null_distribution(&args.null, &bins)?;
    let report = match args.mode {
        Mode::Tmd => tmd_test(
            &pattern,
            &bins,
            &null0,
            &KernelSpec::from(args.kernel),
            args.c,
            args.alpha,
        )?,
        Mode::Mgm => {
            let sigma0 = match (&args.sigma0, &args.mc_model, args.mc_n) {
                (Some(path), _, _) => read_covariance(path)?,
                (None, Some(model_path), Some(n)) => {
                    let model: BoundaryCoxConfig = load_json(model_path)?;
                    model.validate()?;
                    let seed = derive_seed(cli.seed.unwrap_or(DEFAULT_SEED), &[n as u64]);
                    monte_carlo_sigma(&model, pattern.window(), &bins, &null0, n, seed)?
                }
                _ => {
                    return Err(Error::InvalidArgument(
                        "--mode mgm requires --sigma0 or --mc-model with --mc-n".into(),
                    ))
                }
            };
            mgm_test(&pattern, &bins, &null0, &sigma0, args.alpha)?
        }
    };
    println!("{}", report.summary_line());
    if let Some(path) = &args.report {
        std::fs::write(path, serde_json::to_string_pretty(&report)?)?;
    }
    Ok(())
}

fn experiment(cli: &Cli, args: &ExperimentArgs) -> Result<ExitCode> {
    let mut cfg = match &cli.config {
        Some(path) => load_json(path)?,
        None if args.full => ScenarioConfig::full(),
        None => ScenarioConfig::default(),
    };
    if args.full && cli.config.is_some() {
        let full = ScenarioConfig::full();
        cfg.replications = full.replications;
        cfg.target_points = full.target_points;
    }
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    cfg.validate()?;

    let started = Instant::now();
    let run = run_scenario(&cfg)?;
    let wall = started.elapsed().as_secs_f64();
    emit_table(&run.table, &args.output)?;

    let inconclusive = run.table.inconclusive_fraction();
    let metadata = json!({
        "config": cfg,
        "versions": {
            "markgof": env!("CARGO_PKG_VERSION"),
        },
        "threads": rayon::current_num_threads(),
        "wall_time_seconds": wall,
        "windows": run.windows,
        "inconclusive_fraction": inconclusive,
    });
    let meta_path = args.metadata.clone().unwrap_or_else(|| {
        let mut p = args.output.clone().into_os_string();
        p.push(".meta.json");
        PathBuf::from(p)
    });
    std::fs::write(meta_path, serde_json::to_string_pretty(&metadata)?)?;

    if inconclusive > INCONCLUSIVE_LIMIT {
        eprintln!(
            "{:.1}% of test outcomes were inconclusive",
            100.0 * inconclusive
        );
        return Ok(ExitCode::from(3));
    }
    Ok(ExitCode::SUCCESS)
}

fn dispatch(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Simulate(args) => simulate(cli, args).map(|()| ExitCode::SUCCESS),
        Command::Estimate(args) => estimate(args).map(|()| ExitCode::SUCCESS),
        Command::Test(args) => test(cli, args).map(|()| ExitCode::SUCCESS),
        Command::Experiment(args) => experiment(cli, args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(code) => code,
        Err(e @ Error::InvalidConfig(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
