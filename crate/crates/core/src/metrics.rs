//! Distances between distributions given as quantile functions, and
//! normalized error measures.

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::gld::{self, LambdaVector};
use crate::glam::GlamModel;

/// A distribution seen through its quantile function.
pub trait QuantileView: Sync {
    /// Quantile at `u ∈ (0, 1)`; non-decreasing.
    fn quantile(&self, u: f64) -> f64;

    /// Standard deviation of the distribution.
    fn std_dev(&self) -> Result<f64>;

    /// Fails when `∫ Q(u)² du` diverges.
    fn check_second_moment(&self) -> Result<()> {
        Ok(())
    }
}

/// Generalized lambda distribution.
#[derive(Debug, Clone, Copy)]
pub struct GldView(LambdaVector);

impl GldView {
    pub fn new(lam: LambdaVector) -> Result<Self> {
        lam.validate()?;
        Ok(Self(lam))
    }

    pub fn lambda(&self) -> &LambdaVector {
        &self.0
    }
}

impl QuantileView for GldView {
    fn quantile(&self, u: f64) -> f64 {
        gld::quantile(u, &self.0).expect("validated parameters and u in [0, 1]")
    }

    fn std_dev(&self) -> Result<f64> {
        Ok(gld::mean_variance(&self.0)?.1.sqrt())
    }

    fn check_second_moment(&self) -> Result<()> {
        if self.0.l3 <= -0.5 || self.0.l4 <= -0.5 {
            return Err(Error::NonexistentMoment(format!(
                "squared quantile of GLD with shapes ({}, {}) is not integrable",
                self.0.l3, self.0.l4
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NormalView {
    pub mean: f64,
    pub std: f64,
}

impl QuantileView for NormalView {
    fn quantile(&self, u: f64) -> f64 {
        self.mean + self.std * std_normal_quantile(u)
    }

    fn std_dev(&self) -> Result<f64> {
        Ok(self.std)
    }
}

/// `exp(N(mu, sigma²))`.
#[derive(Debug, Clone, Copy)]
pub struct LogNormalView {
    pub mu: f64,
    pub sigma: f64,
}

impl QuantileView for LogNormalView {
    fn quantile(&self, u: f64) -> f64 {
        (self.mu + self.sigma * std_normal_quantile(u)).exp()
    }

    fn std_dev(&self) -> Result<f64> {
        let s2 = self.sigma * self.sigma;
        Ok(((s2.exp_m1()) * (2.0 * self.mu + s2).exp()).sqrt())
    }
}

fn std_normal_quantile(u: f64) -> f64 {
    Normal::standard().inverse_cdf(u)
}

/// Empirical distribution of a sample.
#[derive(Debug, Clone)]
pub struct EmpiricalView {
    sorted: Vec<f64>,
    std: f64,
}

impl EmpiricalView {
    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.sorted.len() as f64
    }
}

impl QuantileView for EmpiricalView {
    /// Linear interpolation between plotting positions `(i − 0.5)/n`,
    /// constant beyond the first and last.
    fn quantile(&self, u: f64) -> f64 {
        let n = self.sorted.len();
        let pos = u * n as f64 - 0.5;
        if pos <= 0.0 {
            return self.sorted[0];
        }
        if pos >= (n - 1) as f64 {
            return self.sorted[n - 1];
        }
        let i = pos.floor() as usize;
        let w = pos - i as f64;
        self.sorted[i] + w * (self.sorted[i + 1] - self.sorted[i])
    }

    fn std_dev(&self) -> Result<f64> {
        Ok(self.std)
    }
}

/// Builds the empirical quantile view of a sample with at least two values.
pub fn empirical_quantile(samples: &[f64]) -> Result<EmpiricalView> {
    if samples.len() < 2 {
        return Err(Error::Domain(format!("empirical quantile needs at least 2 samples, got {}", samples.len())));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let std = (sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    Ok(EmpiricalView { sorted, std })
}

/// Probability grid for the Wasserstein integral.
///
/// Nodes are equally spaced in `t = ln(u/(1−u))` over `[1e-8, 1 − 1e-8]`, so
/// they are geometric towards both ends and nearly uniform in the bulk. The
/// trapezoid rule in `t` carries the weights `h·u(1−u)`.
#[derive(Debug, Clone)]
pub struct UGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Below this level (and above its mirror) quantiles are held constant.
    edge: f64,
}

impl UGrid {
    pub fn new(n_nodes: usize) -> Self {
        let edge: f64 = 1e-8;
        let n = n_nodes.max(3);
        let t_max = (1.0 / edge - 1.0).ln();
        let h = 2.0 * t_max / (n - 1) as f64;
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for k in 0..n {
            let t = -t_max + h * k as f64;
            let u = 1.0 / (1.0 + (-t).exp());
            let end = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
            nodes.push(u);
            weights.push(end * h * u * (1.0 - u));
        }
        Self { nodes, weights, edge }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// `∫₀¹ g(u) du`, with `g` held constant beyond the outermost nodes.
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        let vals: Vec<f64> = self.nodes.iter().map(|&u| g(u)).collect();
        let tails = self.edge * (vals[0] + vals[vals.len() - 1]);
        tails + vals.iter().zip(&self.weights).map(|(v, w)| v * w).sum::<f64>()
    }
}

impl Default for UGrid {
    fn default() -> Self {
        Self::new(4001)
    }
}

/// Order-two Wasserstein distance `(∫₀¹ (Q₁ − Q₂)² du)^{1/2}` on a grid.
pub fn wasserstein2_on(grid: &UGrid, q1: &dyn QuantileView, q2: &dyn QuantileView) -> Result<f64> {
    q1.check_second_moment()?;
    q2.check_second_moment()?;
    let v = grid.integrate(|u| (q1.quantile(u) - q2.quantile(u)).powi(2));
    if !v.is_finite() {
        return Err(Error::NonexistentMoment("Wasserstein integrand diverges".into()));
    }
    Ok(v.sqrt())
}

/// Order-two Wasserstein distance on the default grid.
pub fn wasserstein2(q1: &dyn QuantileView, q2: &dyn QuantileView) -> Result<f64> {
    wasserstein2_on(&UGrid::default(), q1, q2)
}

/// Wasserstein distance divided by the reference standard deviation.
pub fn normalized_ws(reference: &dyn QuantileView, candidate: &dyn QuantileView) -> Result<f64> {
    let sd = reference.std_dev()?;
    if !(sd > 0.0) {
        return Err(Error::Degenerate(format!("reference standard deviation is {sd}")));
    }
    Ok(wasserstein2(reference, candidate)? / sd)
}

/// Average normalized Wasserstein distance between the model's prediction and
/// the reference at every test point.
pub fn mean_ws_error<V: QuantileView>(model: &GlamModel, references: &[V], test_points: &[Vec<f64>]) -> Result<f64> {
    if references.len() != test_points.len() || test_points.is_empty() {
        return Err(Error::Domain(format!("{} references for {} test points", references.len(), test_points.len())));
    }
    let errors = test_points
        .par_iter()
        .zip(references.par_iter())
        .map(|(x, r)| normalized_ws(r, &GldView::new(model.lambda_at(x)?)?))
        .collect::<Result<Vec<f64>>>()?;
    Ok(errors.iter().sum::<f64>() / errors.len() as f64)
}

/// `Σ(b_S − b̂)² / Σ(b̂ − mean(b̂))²`.
pub fn normalized_mse(surrogate: &[f64], reference: &[f64]) -> Result<f64> {
    if surrogate.len() != reference.len() || reference.is_empty() {
        return Err(Error::Domain(format!("{} surrogate values for {} references", surrogate.len(), reference.len())));
    }
    let mean = reference.iter().sum::<f64>() / reference.len() as f64;
    let den: f64 = reference.iter().map(|b| (b - mean).powi(2)).sum();
    if !(den > 0.0) {
        return Err(Error::Degenerate("reference values have no spread".into()));
    }
    let num: f64 = surrogate.iter().zip(reference).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(num / den)
}
