use std::path::Path;

use statrs::distribution::{Continuous, LogNormal, Normal};

use super::reference::replicate_at_points;
use super::ReferenceMode;
use crate::error::{Error, Result};
use crate::glam::GlamModel;
use crate::simulators::{analytic_moments, black_scholes_law, SimulatorId};

pub const PDF_GRID_POINTS: usize = 2001;
const HISTOGRAM_BINS: usize = 60;
const TAIL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    /// Fraction of the sample per bin; sums to 1.
    pub masses: Vec<f64>,
}

impl Histogram {
    pub fn from_sample(sample: &[f64], bins: usize) -> Result<Self> {
        if sample.is_empty() || bins == 0 {
            return Err(Error::Domain("histogram needs samples and bins".into()));
        }
        let lo = sample.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut hi = sample.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi <= lo {
            hi = lo + 1.0;
        }
        let w = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|k| lo + k as f64 * w).collect();
        let mut counts = vec![0usize; bins];
        for &v in sample {
            let k = (((v - lo) / w) as usize).min(bins - 1);
            counts[k] += 1;
        }
        let n = sample.len() as f64;
        Ok(Self { edges, masses: counts.iter().map(|&c| c as f64 / n).collect() })
    }

    pub fn densities(&self) -> Vec<f64> {
        self.masses.iter().zip(self.edges.windows(2)).map(|(m, e)| m / (e[1] - e[0])).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdfComparison {
    pub x: Vec<f64>,
    pub grid: Vec<f64>,
    pub surrogate_pdf: Vec<f64>,
    /// Exact density on the grid (analytic mode).
    pub reference_pdf: Option<Vec<f64>>,
    /// Histogram of repeated runs (replication mode).
    pub histogram: Option<Histogram>,
}

fn analytic_pdf(id: SimulatorId, x: &[f64]) -> Result<Box<dyn Fn(f64) -> f64>> {
    match id {
        SimulatorId::BlackScholes => {
            let law = black_scholes_law(x)?;
            let d = LogNormal::new(law.mu, law.sigma).map_err(|e| Error::Domain(e.to_string()))?;
            Ok(Box::new(move |y| d.pdf(y)))
        }
        SimulatorId::Heteroskedastic5d => {
            let (m, v) = analytic_moments(id, x)?;
            let d = Normal::new(m, v.sqrt()).map_err(|e| Error::Domain(e.to_string()))?;
            Ok(Box::new(move |y| d.pdf(y)))
        }
        _ => Err(Error::Unsupported(format!("{id} has no analytic density"))),
    }
}

/// Surrogate density and reference data at each point. The y grid spans the
/// central `1 − 2·10⁻⁶` mass of the surrogate and of the reference.
pub fn pdf_compare(model: &GlamModel, id: SimulatorId, points: &[Vec<f64>], mode: ReferenceMode, count: usize, seed: u64) -> Result<Vec<PdfComparison>> {
    let spec = id.spec();
    if model.marginals != spec.marginals {
        return Err(Error::Domain(format!("model inputs do not match the {id} input space")));
    }
    for x in points {
        if x.len() != spec.dim() || !spec.marginals.contains(x) {
            return Err(Error::Domain(format!("{x:?} is outside the input domain")));
        }
    }
    let samples = match mode {
        ReferenceMode::Analytic => None,
        ReferenceMode::Replications => Some(replicate_at_points(id, points, count, seed)?),
    };
    points
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let (mut lo, mut hi) = (model.quantile(TAIL, x)?, model.quantile(1.0 - TAIL, x)?);
            let mut reference_pdf = None;
            let mut histogram = None;
            match &samples {
                None => {
                    let f = analytic_pdf(id, x)?;
                    let law_q = |u: f64| -> Result<f64> {
                        Ok(match id {
                            SimulatorId::BlackScholes => {
                                let l = black_scholes_law(x)?;
                                crate::metrics::QuantileView::quantile(&l, u)
                            }
                            _ => {
                                let (m, v) = analytic_moments(id, x)?;
                                crate::metrics::QuantileView::quantile(&crate::metrics::NormalView { mean: m, std: v.sqrt() }, u)
                            }
                        })
                    };
                    lo = lo.min(law_q(TAIL)?);
                    hi = hi.max(law_q(1.0 - TAIL)?);
                    reference_pdf = Some(f);
                }
                Some(s) => {
                    let h = Histogram::from_sample(&s[i], HISTOGRAM_BINS)?;
                    lo = lo.min(h.edges[0]);
                    hi = hi.max(*h.edges.last().expect("non-empty"));
                    histogram = Some(h);
                }
            }
            let step = (hi - lo) / (PDF_GRID_POINTS - 1) as f64;
            let grid: Vec<f64> = (0..PDF_GRID_POINTS).map(|k| lo + k as f64 * step).collect();
            let surrogate_pdf = grid.iter().map(|&y| model.pdf(y, x)).collect::<Result<Vec<_>>>()?;
            Ok(PdfComparison {
                x: x.clone(),
                reference_pdf: reference_pdf.map(|f| grid.iter().map(|&y| f(y)).collect()),
                grid,
                surrogate_pdf,
                histogram,
            })
        })
        .collect()
}

/// Writes `points.csv`, `pdf_compare.csv` and, in replication mode,
/// `histogram.csv`.
pub fn write_pdf_compare(results: &[PdfComparison], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let dim = results.first().map_or(0, |r| r.x.len());
    let mut w = csv::Writer::from_path(dir.join("points.csv"))?;
    let mut header = vec!["point".to_string()];
    header.extend((1..=dim).map(|j| format!("x{j}")));
    w.write_record(&header)?;
    for (i, r) in results.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(r.x.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("pdf_compare.csv"))?;
    w.write_record(["point", "y", "surrogate_pdf", "reference_pdf"])?;
    for (i, r) in results.iter().enumerate() {
        for (k, y) in r.grid.iter().enumerate() {
            let reference = r.reference_pdf.as_ref().map(|p| p[k].to_string()).unwrap_or_default();
            w.write_record([i.to_string(), y.to_string(), r.surrogate_pdf[k].to_string(), reference])?;
        }
    }
    w.flush()?;

    if results.iter().any(|r| r.histogram.is_some()) {
        let mut w = csv::Writer::from_path(dir.join("histogram.csv"))?;
        w.write_record(["point", "bin_lower", "bin_upper", "mass", "density"])?;
        for (i, r) in results.iter().enumerate() {
            if let Some(h) = &r.histogram {
                for (k, (m, d)) in h.masses.iter().zip(h.densities()).enumerate() {
                    w.write_record([i.to_string(), h.edges[k].to_string(), h.edges[k + 1].to_string(), m.to_string(), d.to_string()])?;
                }
            }
        }
        w.flush()?;
    }
    Ok(())
}

/// Trapezoid rule on a grid.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(a, b)| 0.5 * (a[1] - a[0]) * (b[0] + b[1])).sum()
}
