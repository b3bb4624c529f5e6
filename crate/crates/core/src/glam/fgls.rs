//! Feasible generalized least squares for the mean and log-variance
//! functions, with fixed or adaptively selected truncations.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::pce::{design_matrix, MarginalSpec, PceFunction, TruncationSet};
use crate::regression::{wls_with_design, AdaptiveOls, LsqDesign, LsqFit};

/// Relative floor on absolute residuals before taking logs.
pub const RESIDUAL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct FglsResult {
    pub mean: PceFunction,
    /// Log-variance expansion; `None` when no iteration ran.
    pub log_variance: Option<PceFunction>,
}

#[derive(Debug, Clone)]
pub struct ModifiedFglsResult {
    pub mean: LsqFit,
    pub mean_pq: (usize, f64),
    pub log_variance: Option<LsqFit>,
    pub variance_pq: Option<(usize, f64)>,
    /// 1-based iteration whose variance fit had the smallest LOO error.
    pub best_iteration: usize,
}

fn output_scale(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if sd > 0.0 {
        sd
    } else {
        y.iter().fold(1.0f64, |a, v| a.max(v.abs()))
    }
}

/// `2·ln|y − μ̂|` with the residual floored at `RESIDUAL_FLOOR·scale`.
fn log_squared_residuals(y: &[f64], fitted: &DVector<f64>, scale: f64) -> Vec<f64> {
    let floor = RESIDUAL_FLOOR * scale;
    y.iter().zip(fitted.iter()).map(|(a, b)| 2.0 * (a - b).abs().max(floor).ln()).collect()
}

fn predict(psi: &DMatrix<f64>, c: &[f64]) -> DVector<f64> {
    psi * DVector::from_column_slice(c)
}

fn check_xy(x: &[Vec<f64>], y: &[f64]) -> Result<()> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::Domain(format!("{} input points for {} outputs", x.len(), y.len())));
    }
    Ok(())
}

/// Alternates an OLS fit of the log squared residuals with a WLS refit of the
/// mean, `n_iter` times.
pub fn fgls(
    marginals: &MarginalSpec,
    x: &[Vec<f64>],
    y: &[f64],
    trunc_mean: &TruncationSet,
    trunc_var: &TruncationSet,
    n_iter: usize,
) -> Result<FglsResult> {
    check_xy(x, y)?;
    let psi_mu = design_matrix(marginals, trunc_mean, x)?;
    let mut c_mu = LsqDesign::new(psi_mu.clone(), trunc_mean.clone())?.fit(y)?.coefficients;
    if n_iter == 0 {
        return Ok(FglsResult { mean: PceFunction::new(trunc_mean.clone(), c_mu)?, log_variance: None });
    }
    let psi_v = design_matrix(marginals, trunc_var, x)?;
    let var_design = LsqDesign::new(psi_v.clone(), trunc_var.clone())?;
    let scale = output_scale(y);
    let mut c_v = Vec::new();
    for _ in 0..n_iter {
        let r = log_squared_residuals(y, &predict(&psi_mu, &c_mu), scale);
        c_v = var_design.fit(&r)?.coefficients;
        let v: Vec<f64> = predict(&psi_v, &c_v).iter().map(|s| s.exp()).collect();
        c_mu = wls_with_design(psi_mu.clone(), trunc_mean, y, &v)?.coefficients;
    }
    Ok(FglsResult {
        mean: PceFunction::new(trunc_mean.clone(), c_mu)?,
        log_variance: Some(PceFunction::new(trunc_var.clone(), c_v)?),
    })
}

/// Grids and settings of the adaptive variant.
#[derive(Debug, Clone)]
pub struct ModifiedFglsOptions {
    pub mean_degrees: Vec<usize>,
    pub mean_q: Vec<f64>,
    pub variance_degrees: Vec<usize>,
    pub variance_q: Vec<f64>,
    pub n_iter: usize,
    /// Early stop of the degree loop in the adaptive OLS; `None` is exhaustive.
    pub patience: Option<usize>,
}

impl Default for ModifiedFglsOptions {
    fn default() -> Self {
        let q: Vec<f64> = vec![0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
        Self {
            mean_degrees: (0..=10).collect(),
            mean_q: q.clone(),
            variance_degrees: (0..=5).collect(),
            variance_q: q,
            n_iter: 10,
            patience: Some(2),
        }
    }
}

/// FGLS with the mean truncation chosen once by adaptive OLS and a variance
/// truncation reselected at each iteration; returns the iteration whose
/// variance fit has the smallest LOO error.
pub fn modified_fgls(marginals: &MarginalSpec, x: &[Vec<f64>], y: &[f64], opts: &ModifiedFglsOptions) -> Result<ModifiedFglsResult> {
    check_xy(x, y)?;
    let mean_aols = AdaptiveOls::new(marginals, x, &opts.mean_degrees, &opts.mean_q, opts.patience)?;
    let (mean0, mean_pq) = mean_aols.fit(y)?;
    drop(mean_aols);
    if opts.n_iter == 0 {
        return Ok(ModifiedFglsResult { mean: mean0, mean_pq, log_variance: None, variance_pq: None, best_iteration: 0 });
    }
    let trunc_mean = mean0.truncation.clone();
    let psi_mu = design_matrix(marginals, &trunc_mean, x)?;
    let var_aols = AdaptiveOls::new(marginals, x, &opts.variance_degrees, &opts.variance_q, opts.patience)?;
    let scale = output_scale(y);
    let mut c_mu = mean0.coefficients.clone();
    let mut best: Option<(LsqFit, (usize, f64), LsqFit, usize)> = None;
    for it in 1..=opts.n_iter {
        let r = log_squared_residuals(y, &predict(&psi_mu, &c_mu), scale);
        let (var_fit, var_pq) = var_aols.fit(&r)?;
        let psi_v = design_matrix(marginals, &var_fit.truncation, x)?;
        let v: Vec<f64> = predict(&psi_v, &var_fit.coefficients).iter().map(|s| s.exp()).collect();
        let mean_fit = wls_with_design(psi_mu.clone(), &trunc_mean, y, &v)?;
        c_mu = mean_fit.coefficients.clone();
        if best.as_ref().is_none_or(|b| var_fit.loo_error < b.2.loo_error) {
            best = Some((mean_fit, var_pq, var_fit, it));
        }
    }
    let (mean, var_pq, var_fit, it) = best.expect("at least one iteration ran");
    Ok(ModifiedFglsResult { mean, mean_pq, log_variance: Some(var_fit), variance_pq: Some(var_pq), best_iteration: it })
}
