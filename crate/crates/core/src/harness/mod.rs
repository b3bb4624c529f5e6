//! Experiment runner: designs, simulator runs, fits and error metrics over
//! sweeps of design size, replication count and repetition.

mod config;
mod pdf;
mod reference;

use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::doe::{replicated_design, Design};
use crate::error::{Error, Result};
use crate::glam::{fit, Dataset, GlamModel};
use crate::metrics::{mean_ws_error, normalized_mse};
use crate::seed::{self, purpose};
use crate::simulators::SimulatorId;

pub use config::{ExperimentConfig, ReferenceConfig, ReferenceMode};
pub use pdf::{pdf_compare, trapezoid, write_pdf_compare, Histogram, PdfComparison, PDF_GRID_POINTS};
pub use reference::{analytic_reference, build_test_set, cached_replications, replicate_at_points, Reference, TestSet};

/// Quantity fitted for a raw simulator output. The SIR simulator returns
/// `S_T − S_0 ≤ 0`; sweeps model the number of new infections `|S_T − S_0|`.
pub fn response(id: SimulatorId, raw: f64) -> f64 {
    match id {
        SimulatorId::SirEpidemic => raw.abs(),
        _ => raw,
    }
}

fn sim_tag(id: SimulatorId) -> u64 {
    SimulatorId::ALL.iter().position(|&s| s == id).expect("listed") as u64
}

/// Seed of one run of a sweep.
pub fn run_seed(master: u64, id: SimulatorId, n: usize, r: usize, repetition: usize) -> u64 {
    seed::derive_seed(master, &[sim_tag(id), n as u64, r as u64, repetition as u64])
}

pub fn test_set_seed(master: u64, id: SimulatorId) -> u64 {
    seed::derive_seed(master, &[sim_tag(id), purpose::TEST_POINTS])
}

/// `n` raw draws at `x`, one stream per call.
pub fn simulate_draws(id: SimulatorId, x: &[f64], n: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = seed::rng_from(seed, &[purpose::SIMULATION]);
    (0..n).map(|_| id.simulate(x, &mut rng)).collect()
}

/// Replicated LHS design and simulator outputs (as `response` values) for one run.
pub fn generate_data(id: SimulatorId, n: usize, r: usize, run_seed: u64) -> Result<(Design, Dataset)> {
    let spec = id.spec();
    let mut rng = seed::rng_from(run_seed, &[purpose::DESIGN]);
    let mut design = replicated_design(n, r, &spec.marginals, &mut rng)?;
    design.seed = Some(run_seed);
    let groups = design
        .points
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let mut g = seed::rng_from(run_seed, &[purpose::SIMULATION, i as u64]);
            (0..r).map(|_| Ok(response(id, id.simulate(x, &mut g)?))).collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let data = Dataset::replicated(design.points.clone(), groups)?;
    Ok((design, data))
}

/// Fits one run of the sweep; the fit seed is derived from `run_seed`.
pub fn fit_run(cfg: &ExperimentConfig, n: usize, r: usize, run_seed: u64) -> Result<(GlamModel, Design)> {
    let (design, data) = generate_data(cfg.simulator, n, r, run_seed)?;
    let mut fit_cfg = cfg.fit.clone();
    fit_cfg.seed = seed::derive_seed(run_seed, &[purpose::FIT]);
    let model = fit(&cfg.simulator.spec().marginals, &data, &fit_cfg)?;
    Ok((model, design))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRecord {
    pub simulator: SimulatorId,
    pub n: usize,
    pub replications: usize,
    pub repetition: usize,
    pub seed: u64,
    pub ws_error: f64,
    pub mean_nmse: Option<f64>,
    pub variance_nmse: Option<f64>,
    pub payoff_nmse: Option<f64>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunFailure {
    pub n: usize,
    pub replications: usize,
    pub repetition: usize,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quartiles {
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
}

impl Quartiles {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let at = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let i = pos.floor() as usize;
            let j = (i + 1).min(v.len() - 1);
            v[i] + (pos - i as f64) * (v[j] - v[i])
        };
        Some(Self {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            median: at(0.5),
            q1: at(0.25),
            q3: at(0.75),
            min: v[0],
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub n: usize,
    pub replications: usize,
    pub runs: usize,
    pub failures: usize,
    pub ws_error: Option<Quartiles>,
    pub mean_nmse: Option<Quartiles>,
    pub variance_nmse: Option<Quartiles>,
    pub payoff_nmse: Option<Quartiles>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub simulator: SimulatorId,
    pub master_seed: u64,
    pub reference_mode: ReferenceMode,
    pub test_size: usize,
    pub groups: Vec<GroupSummary>,
    pub failures: Vec<RunFailure>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub records: Vec<ResultRecord>,
    pub failures: Vec<RunFailure>,
    pub summary: Summary,
}

impl ConvergenceReport {
    pub fn records_csv(&self) -> Result<String> {
        records_to_csv(&self.records)
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.summary)?)
    }

    /// Writes `results.csv` and `summary.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("results.csv"), self.records_csv()?)?;
        std::fs::write(dir.join("summary.json"), self.summary_json()? + "\n")?;
        Ok(())
    }
}

pub const CSV_HEADER: [&str; 10] = [
    "simulator",
    "n",
    "replications",
    "repetition",
    "seed",
    "ws_error",
    "mean_nmse",
    "variance_nmse",
    "payoff_nmse",
    "wall_time_s",
];

pub fn records_to_csv(records: &[ResultRecord]) -> Result<String> {
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.simulator.to_string(),
            r.n.to_string(),
            r.replications.to_string(),
            r.repetition.to_string(),
            r.seed.to_string(),
            r.ws_error.to_string(),
            opt(r.mean_nmse),
            opt(r.variance_nmse),
            opt(r.payoff_nmse),
            format!("{:.3}", r.wall_time_s),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serialization(e.to_string()))
}

/// Normalized WS error, then NMSE of mean, variance and expected payoff
/// where available.
pub type Errors = (f64, Option<f64>, Option<f64>, Option<f64>);

/// Error metrics of a fitted model on the test set.
pub fn evaluate(model: &GlamModel, test: &TestSet, strike: f64) -> Result<Errors> {
    let ws = mean_ws_error(model, &test.references, &test.points)?;
    let moments = test.points.par_iter().map(|x| model.mean_variance(x)).collect::<Result<Vec<_>>>();
    // Moments need shapes above −0.5; a model without them still has a WS error.
    let (mean_nmse, variance_nmse) = match moments {
        Ok(m) => {
            let means: Vec<f64> = m.iter().map(|p| p.0).collect();
            let vars: Vec<f64> = m.iter().map(|p| p.1).collect();
            (normalized_mse(&means, &test.mean).ok(), normalized_mse(&vars, &test.variance).ok())
        }
        Err(_) => (None, None),
    };
    let payoff_nmse = match &test.payoff {
        Some(reference) => {
            let est = test.points.par_iter().map(|x| model.expected_payoff(x, strike)).collect::<Result<Vec<_>>>();
            est.ok().and_then(|e| normalized_mse(&e, reference).ok())
        }
        None => None,
    };
    Ok((ws, mean_nmse, variance_nmse, payoff_nmse))
}

/// Runs the full sweep over (N, R, repetition). Individual failures are
/// collected, not propagated. Replication references are cached under
/// `cache_dir` when given.
pub fn run_convergence(cfg: &ExperimentConfig, cache_dir: Option<&Path>) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let test = build_test_set(cfg, cache_dir)?;
    let mut keys = Vec::new();
    for &n in &cfg.sizes {
        for &r in &cfg.replications {
            for rep in 0..cfg.repetitions {
                keys.push((n, r, rep));
            }
        }
    }
    keys.sort_unstable();
    keys.dedup();
    info!("{}: {} runs, {} test points", cfg.simulator, keys.len(), test.points.len());

    let outcomes: Vec<std::result::Result<ResultRecord, RunFailure>> = keys
        .par_iter()
        .map(|&(n, r, rep)| {
            let seed = run_seed(cfg.seed, cfg.simulator, n, r, rep);
            let start = Instant::now();
            let out = fit_run(cfg, n, r, seed).and_then(|(model, _)| evaluate(&model, &test, cfg.strike));
            match out {
                Ok((ws_error, mean_nmse, variance_nmse, payoff_nmse)) => Ok(ResultRecord {
                    simulator: cfg.simulator,
                    n,
                    replications: r,
                    repetition: rep,
                    seed,
                    ws_error,
                    mean_nmse,
                    variance_nmse,
                    payoff_nmse,
                    wall_time_s: start.elapsed().as_secs_f64(),
                }),
                Err(e) => {
                    warn!("run N={n} R={r} rep={rep} failed: {e}");
                    Err(RunFailure { n, replications: r, repetition: rep, seed, message: e.to_string() })
                }
            }
        })
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => records.push(r),
            Err(f) => failures.push(f),
        }
    }
    let summary = summarize(cfg, &records, &failures);
    Ok(ConvergenceReport { records, failures, summary })
}

fn summarize(cfg: &ExperimentConfig, records: &[ResultRecord], failures: &[RunFailure]) -> Summary {
    let mut groups: Vec<(usize, usize)> = records.iter().map(|r| (r.n, r.replications)).chain(failures.iter().map(|f| (f.n, f.replications))).collect();
    groups.sort_unstable();
    groups.dedup();
    let groups = groups
        .into_iter()
        .map(|(n, r)| {
            let rs: Vec<&ResultRecord> = records.iter().filter(|x| x.n == n && x.replications == r).collect();
            let col = |f: &dyn Fn(&ResultRecord) -> Option<f64>| Quartiles::of(&rs.iter().filter_map(|x| f(x)).collect::<Vec<_>>());
            GroupSummary {
                n,
                replications: r,
                runs: rs.len(),
                failures: failures.iter().filter(|f| f.n == n && f.replications == r).count(),
                ws_error: col(&|x| Some(x.ws_error)),
                mean_nmse: col(&|x| x.mean_nmse),
                variance_nmse: col(&|x| x.variance_nmse),
                payoff_nmse: col(&|x| x.payoff_nmse),
            }
        })
        .collect();
    Summary {
        simulator: cfg.simulator,
        master_seed: cfg.seed,
        reference_mode: cfg.reference_mode(),
        test_size: cfg.test_size,
        groups,
        failures: failures.to_vec(),
    }
}
