//! `glam`: fit generalized lambda models to benchmark simulators and run
//! convergence studies.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use glam_core::glam::GlamModel;
use glam_core::harness::{self, ExperimentConfig, ReferenceMode};
use glam_core::simulators::SimulatorId;

#[derive(Parser, Debug)]
#[command(name = "glam", version, about = "Generalized lambda model surrogates of stochastic simulators")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,
    /// Reduced protocol: sizes 250/500/1000, 10 repetitions, 200 test points,
    /// 2000-run references.
    #[arg(long, global = true)]
    quick: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit one model and write `model.json`.
    Fit(FitArgs),
    /// Sweep design sizes, replications and repetitions; write
    /// `results.csv` and `summary.json`.
    Convergence(ConvergenceArgs),
    /// Tabulate surrogate and reference densities at given inputs.
    PdfCompare(PdfArgs),
    /// Write raw simulator draws, one per line, to `samples.txt`.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long, value_parser = parse_simulator)]
    simulator: Option<SimulatorId>,
    /// Total number of simulator runs; defaults to the first configured size.
    #[arg(long)]
    size: Option<usize>,
    #[arg(long, default_value_t = 1)]
    replications: usize,
}

#[derive(Args, Debug)]
struct ConvergenceArgs {
    #[arg(long, value_parser = parse_simulator)]
    simulator: Option<SimulatorId>,
    /// Reference cache directory; defaults to `<out>/reference-cache`.
    #[arg(long, value_name = "DIR")]
    cache: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RefMode {
    Analytic,
    Replications,
}

#[derive(Args, Debug)]
struct PdfArgs {
    #[arg(long, value_name = "PATH")]
    model: PathBuf,
    #[arg(long, value_parser = parse_simulator)]
    simulator: SimulatorId,
    /// Input point as comma-separated values; repeat for several points.
    #[arg(long = "point", value_parser = parse_point, required = true)]
    points: Vec<Point>,
    #[arg(long, value_enum, default_value = "replications")]
    reference: RefMode,
    /// Simulator runs per point in replication mode.
    #[arg(long, default_value_t = 10_000)]
    runs: usize,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_parser = parse_simulator)]
    simulator: SimulatorId,
    #[arg(long, value_parser = parse_point)]
    point: Point,
    #[arg(long, short = 'n', default_value_t = 1000)]
    n: usize,
}

fn parse_simulator(s: &str) -> std::result::Result<SimulatorId, String> {
    s.parse().map_err(|e: glam_core::Error| e.to_string())
}

/// Comma-separated input point.
#[derive(Clone, Debug)]
struct Point(Vec<f64>);

fn parse_point(s: &str) -> std::result::Result<Point, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}")))
        .collect::<std::result::Result<_, _>>()
        .map(Point)
}

fn load_config(cli: &Cli, simulator: Option<SimulatorId>) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = simulator {
        cfg.simulator = s;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.quick {
        cfg = cfg.quick();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_fit(cli: &Cli, args: &FitArgs) -> Result<()> {
    let cfg = load_config(cli, args.simulator)?;
    let n = args.size.unwrap_or(cfg.sizes[0]);
    let seed = harness::run_seed(cfg.seed, cfg.simulator, n, args.replications, 0);
    let (model, _) = harness::fit_run(&cfg, n, args.replications, seed)?;
    std::fs::create_dir_all(&cli.out)?;
    let path = cli.out.join("model.json");
    model.save(&path)?;
    let meta = &model.metadata;
    println!("simulator          {}", cfg.simulator);
    println!("runs               {n} ({} per point)", args.replications);
    println!("neg log-likelihood {}", meta.neg_log_likelihood);
    let pq = |v: Option<(usize, f64)>| v.map_or("-".to_string(), |(p, q)| format!("p = {p}, q = {q}"));
    println!("mean truncation    {} ({} terms)", pq(meta.mean_pq), model.lambda1.truncation.len());
    println!("variance truncation {} ({} terms)", pq(meta.variance_pq), model.log_lambda2.truncation.len());
    for (i, r) in meta.rounds.iter().enumerate() {
        println!("round {}            {:?}: {} -> {}", i + 1, r.optimizer, r.start_nll, r.final_nll);
    }
    for w in &meta.warnings {
        println!("warning: {w}");
    }
    println!("model written to {}", path.display());
    Ok(())
}

fn cmd_convergence(cli: &Cli, args: &ConvergenceArgs) -> Result<()> {
    let cfg = load_config(cli, args.simulator)?;
    let cache = args.cache.clone().unwrap_or_else(|| cli.out.join("reference-cache"));
    let report = harness::run_convergence(&cfg, Some(&cache))?;
    report.write(&cli.out)?;
    println!("{:>6} {:>4} {:>5} {:>10} {:>10} {:>10} {:>10}", "N", "R", "runs", "mean", "median", "q1", "q3");
    for g in &report.summary.groups {
        if let Some(q) = &g.ws_error {
            println!("{:>6} {:>4} {:>5} {:>10.4} {:>10.4} {:>10.4} {:>10.4}", g.n, g.replications, g.runs, q.mean, q.median, q.q1, q.q3);
        }
    }
    println!("results written to {}", cli.out.display());
    if !report.failures.is_empty() {
        for f in &report.failures {
            eprintln!("run N={} R={} rep={} failed: {}", f.n, f.replications, f.repetition, f.message);
        }
        bail!("{} of {} runs failed", report.failures.len(), report.failures.len() + report.records.len());
    }
    Ok(())
}

fn cmd_pdf_compare(cli: &Cli, args: &PdfArgs) -> Result<()> {
    let model = GlamModel::load(&args.model).with_context(|| format!("loading {}", args.model.display()))?;
    let mode = match args.reference {
        RefMode::Analytic => ReferenceMode::Analytic,
        RefMode::Replications => ReferenceMode::Replications,
    };
    let seed = cli.seed.unwrap_or(0);
    let points: Vec<Vec<f64>> = args.points.iter().map(|p| p.0.clone()).collect();
    let results = harness::pdf_compare(&model, args.simulator, &points, mode, args.runs, seed)?;
    harness::write_pdf_compare(&results, &cli.out)?;
    for (i, r) in results.iter().enumerate() {
        println!("point {i} {:?}: surrogate mass on grid {:.6}", r.x, harness::trapezoid(&r.grid, &r.surrogate_pdf));
    }
    println!("tables written to {}", cli.out.display());
    Ok(())
}

fn cmd_simulate(cli: &Cli, args: &SimulateArgs) -> Result<()> {
    let draws = harness::simulate_draws(args.simulator, &args.point.0, args.n, cli.seed.unwrap_or(0))?;
    std::fs::create_dir_all(&cli.out)?;
    let path: &Path = &cli.out.join("samples.txt");
    let mut text = String::with_capacity(draws.len() * 20);
    for d in &draws {
        text.push_str(&d.to_string());
        text.push('\n');
    }
    std::fs::write(path, text)?;
    println!("{} draws written to {}", draws.len(), path.display());
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<glam_core::Error>() {
        Some(glam_core::Error::Config(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let out = match &cli.command {
        Command::Fit(a) => cmd_fit(&cli, a),
        Command::Convergence(a) => cmd_convergence(&cli, a),
        Command::PdfCompare(a) => cmd_pdf_compare(&cli, a),
        Command::Simulate(a) => cmd_simulate(&cli, a),
    };
    match out {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
