use std::path::{Path, PathBuf};

use log::{debug, info};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::{response, test_set_seed, ExperimentConfig, ReferenceMode};
use crate::doe::lhs_seeded;
use crate::error::{Error, Result};
use crate::metrics::{empirical_quantile, EmpiricalView, LogNormalView, NormalView, QuantileView};
use crate::seed::{self, purpose};
use crate::simulators::{analytic_moments, asian_payoff, black_scholes_law, SimulatorId};

/// Reference distribution at a test point.
#[derive(Debug, Clone)]
pub enum Reference {
    LogNormal(LogNormalView),
    Normal(NormalView),
    Empirical(EmpiricalView),
}

impl QuantileView for Reference {
    fn quantile(&self, u: f64) -> f64 {
        match self {
            Reference::LogNormal(v) => v.quantile(u),
            Reference::Normal(v) => v.quantile(u),
            Reference::Empirical(v) => v.quantile(u),
        }
    }

    fn std_dev(&self) -> Result<f64> {
        match self {
            Reference::LogNormal(v) => v.std_dev(),
            Reference::Normal(v) => v.std_dev(),
            Reference::Empirical(v) => v.std_dev(),
        }
    }
}

/// Test points with reference distributions and reference values of the
/// auxiliary quantities (mean, variance, expected payoff).
#[derive(Debug, Clone)]
pub struct TestSet {
    pub points: Vec<Vec<f64>>,
    pub references: Vec<Reference>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub payoff: Option<Vec<f64>>,
}

/// Analytic law at `x`, where one is known.
pub fn analytic_reference(id: SimulatorId, x: &[f64]) -> Result<Reference> {
    match id {
        SimulatorId::BlackScholes => Ok(Reference::LogNormal(black_scholes_law(x)?)),
        SimulatorId::Heteroskedastic5d => {
            let (mean, var) = analytic_moments(id, x)?;
            Ok(Reference::Normal(NormalView { mean, std: var.sqrt() }))
        }
        _ => Err(Error::Unsupported(format!("{id} has no analytic output law"))),
    }
}

/// `count` response values at each point; stream per point.
pub fn replicate_at_points(id: SimulatorId, points: &[Vec<f64>], count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    points
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let mut g = seed::rng_from(seed, &[purpose::REFERENCE, i as u64]);
            (0..count).map(|_| Ok(response(id, id.simulate(x, &mut g)?))).collect()
        })
        .collect()
}

fn cache_path(dir: &Path, id: SimulatorId, points: &[Vec<f64>], count: usize, seed: u64) -> PathBuf {
    let mut h = Sha256::new();
    h.update(format!("glam-reference-v1\n{id}\n{count}\n{seed}\n").as_bytes());
    for v in points.iter().flatten() {
        h.update(v.to_le_bytes());
    }
    let hex: String = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
    dir.join(format!("{hex}.bin"))
}

fn read_cache(path: &Path, n_points: usize, count: usize) -> Option<Vec<Vec<f64>>> {
    let bytes = std::fs::read(path).ok()?;
    if bytes.len() != n_points * count * 8 {
        return None;
    }
    let flat: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Some(flat.chunks(count).map(|c| c.to_vec()).collect())
}

fn write_cache(path: &Path, samples: &[Vec<f64>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let bytes: Vec<u8> = samples.iter().flatten().flat_map(|v| v.to_le_bytes()).collect();
    // Write then rename so a concurrent reader never sees a partial file.
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(tmp, path)?;
    Ok(())
}

/// Replicated references, read from or written to `cache_dir` when given.
pub fn cached_replications(id: SimulatorId, points: &[Vec<f64>], count: usize, seed: u64, cache_dir: Option<&Path>) -> Result<Vec<Vec<f64>>> {
    let path = cache_dir.map(|d| cache_path(d, id, points, count, seed));
    if let Some(p) = &path {
        if let Some(s) = read_cache(p, points.len(), count) {
            debug!("reference cache hit {}", p.display());
            return Ok(s);
        }
    }
    info!("simulating {count} reference runs at {} test points", points.len());
    let samples = replicate_at_points(id, points, count, seed)?;
    if let Some(p) = &path {
        write_cache(p, &samples)?;
    }
    Ok(samples)
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Test set shared by every run of a sweep: LHS points from the test seed
/// and their references.
pub fn build_test_set(cfg: &ExperimentConfig, cache_dir: Option<&Path>) -> Result<TestSet> {
    let id = cfg.simulator;
    let tseed = test_set_seed(cfg.seed, id);
    let points = lhs_seeded(cfg.test_size, &id.spec().marginals, tseed)?.points;
    let samples = match cfg.reference_mode() {
        ReferenceMode::Analytic => None,
        ReferenceMode::Replications => Some(cached_replications(id, &points, cfg.reference.count, tseed, cache_dir)?),
    };
    let references = match &samples {
        None => points.iter().map(|x| analytic_reference(id, x)).collect::<Result<Vec<_>>>()?,
        Some(s) => s.iter().map(|v| Ok(Reference::Empirical(empirical_quantile(v)?))).collect::<Result<Vec<_>>>()?,
    };
    let (mean, variance) = if id.has_analytic_moments() {
        points.iter().map(|x| analytic_moments(id, x)).collect::<Result<Vec<_>>>()?.into_iter().unzip()
    } else {
        let s = samples.as_ref().expect("replication mode without analytic moments");
        s.iter().map(|v| mean_var(v)).unzip()
    };
    let payoff = match (id, &samples) {
        (SimulatorId::AsianAverage, Some(s)) => {
            Some(s.iter().map(|v| v.iter().map(|&a| asian_payoff(a, cfg.strike)).sum::<f64>() / v.len() as f64).collect())
        }
        _ => None,
    };
    Ok(TestSet { points, references, mean, variance, payoff })
}
