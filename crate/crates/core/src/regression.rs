//! Least-squares fitting of PCE coefficients.
//!
//! Systems are solved through a thin QR decomposition of the design matrix.
//! The leave-one-out error is the relative one: the mean squared LOO residual
//! divided by the sample variance of the response.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pce::{design_matrix, enumerate_truncation, MarginalSpec, PceFunction, TruncationSet};

/// Designs with a larger 2-norm condition number are rejected.
pub const MAX_CONDITION: f64 = 1e10;

/// Minimum ratio `N / P` for a candidate basis in [`adaptive_ols`].
pub const OVERSAMPLING: f64 = 1.1;

/// LOO errors closer than this are treated as ties.
pub const LOO_TIE_TOL: f64 = 1e-12;

/// Result of a least-squares fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsqFit {
    pub coefficients: Vec<f64>,
    pub loo_error: f64,
    pub truncation: TruncationSet,
    pub condition: f64,
}

impl LsqFit {
    pub fn to_pce(&self) -> PceFunction {
        PceFunction { truncation: self.truncation.clone(), coefficients: self.coefficients.clone() }
    }
}

/// A factorized design matrix that can be fitted against many responses.
#[derive(Debug, Clone)]
pub struct LsqDesign {
    truncation: TruncationSet,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    hat: Vec<f64>,
    condition: f64,
}

impl LsqDesign {
    pub fn new(psi: DMatrix<f64>, truncation: TruncationSet) -> Result<Self> {
        let (n, p) = psi.shape();
        if p != truncation.len() {
            return Err(Error::Domain(format!("design has {p} columns, truncation {}", truncation.len())));
        }
        if n <= p {
            return Err(Error::Underdetermined(format!("{n} observations for {p} unknowns")));
        }
        if psi.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite entry in design matrix".into()));
        }
        let qr = psi.qr();
        let r = qr.r();
        let sv = r.singular_values();
        let smax = sv.max();
        let smin = sv.min();
        let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if !(condition <= MAX_CONDITION) {
            return Err(Error::Conditioning(format!("condition number {condition:.3e} exceeds {MAX_CONDITION:.0e}")));
        }
        let q = qr.q();
        let hat = q.row_iter().map(|row| row.norm_squared()).collect();
        Ok(Self { truncation, q, r, hat, condition })
    }

    pub fn n_points(&self) -> usize {
        self.q.nrows()
    }

    pub fn truncation(&self) -> &TruncationSet {
        &self.truncation
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Diagonal of the hat matrix `Ψ(ΨᵀΨ)⁻¹Ψᵀ`.
    pub fn hat_diagonal(&self) -> &[f64] {
        &self.hat
    }

    pub fn fit(&self, y: &[f64]) -> Result<LsqFit> {
        let n = self.n_points();
        if y.len() != n {
            return Err(Error::Domain(format!("{} responses for {n} design points", y.len())));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite response value".into()));
        }
        let yv = DVector::from_column_slice(y);
        let qty = self.q.tr_mul(&yv);
        let c = self
            .r
            .solve_upper_triangular(&qty)
            .ok_or_else(|| Error::Conditioning("singular triangular factor".into()))?;
        let fitted = &self.q * &qty;
        let mut loo = 0.0;
        for i in 0..n {
            let h = self.hat[i].min(1.0 - f64::EPSILON);
            let e = (y[i] - fitted[i]) / (1.0 - h);
            loo += e * e;
        }
        loo /= n as f64;
        let mean = y.iter().sum::<f64>() / n as f64;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        // a constant response has no variance to normalize by
        let loo_error = if var > 0.0 { loo / var } else { loo };
        Ok(LsqFit {
            coefficients: c.iter().copied().collect(),
            loo_error,
            truncation: self.truncation.clone(),
            condition: self.condition,
        })
    }
}

/// Ordinary least squares on the PCE basis of `truncation`.
pub fn ols(marginals: &MarginalSpec, truncation: &TruncationSet, x: &[Vec<f64>], y: &[f64]) -> Result<LsqFit> {
    check_lengths(x, y)?;
    let psi = design_matrix(marginals, truncation, x)?;
    LsqDesign::new(psi, truncation.clone())?.fit(y)
}

/// Weighted least squares with observation variances `v`.
///
/// Solved as OLS on the system rescaled by `1/√vᵢ`; the LOO error refers to
/// that rescaled system.
pub fn wls(marginals: &MarginalSpec, truncation: &TruncationSet, x: &[Vec<f64>], y: &[f64], v: &[f64]) -> Result<LsqFit> {
    check_lengths(x, y)?;
    let psi = design_matrix(marginals, truncation, x)?;
    wls_with_design(psi, truncation, y, v)
}

pub(crate) fn wls_with_design(mut psi: DMatrix<f64>, truncation: &TruncationSet, y: &[f64], v: &[f64]) -> Result<LsqFit> {
    if v.len() != y.len() {
        return Err(Error::Domain(format!("{} variances for {} responses", v.len(), y.len())));
    }
    if let Some(bad) = v.iter().find(|&&w| !(w > 0.0 && w.is_finite())) {
        return Err(Error::Domain(format!("variance weights must be positive and finite, got {bad}")));
    }
    let mut ys = Vec::with_capacity(y.len());
    for (i, (&yi, &vi)) in y.iter().zip(v).enumerate() {
        let s = 1.0 / vi.sqrt();
        psi.row_mut(i).scale_mut(s);
        ys.push(yi * s);
    }
    LsqDesign::new(psi, truncation.clone())?.fit(&ys)
}

fn check_lengths(x: &[Vec<f64>], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Domain(format!("{} input points for {} responses", x.len(), y.len())));
    }
    Ok(())
}

struct Candidate {
    p: usize,
    q: f64,
    design: Option<LsqDesign>,
}

/// Degree- and q-norm-adaptive OLS over a `(p, q)` grid.
///
/// Factorizations are cached, so repeated calls with new responses on the same
/// inputs only pay for the triangular solves.
pub struct AdaptiveOls {
    marginals: MarginalSpec,
    x: Vec<Vec<f64>>,
    /// Candidates grouped by q, each group in increasing p.
    groups: Vec<Vec<Candidate>>,
    patience: Option<usize>,
}

impl AdaptiveOls {
    /// `patience`: stop increasing p for a given q after this many consecutive
    /// degrees without LOO improvement. `None` evaluates the whole grid.
    pub fn new(marginals: &MarginalSpec, x: &[Vec<f64>], p_list: &[usize], q_list: &[f64], patience: Option<usize>) -> Result<Self> {
        if p_list.is_empty() || q_list.is_empty() {
            return Err(Error::Domain("degree and q-norm lists must be non-empty".into()));
        }
        let n = x.len();
        let mut ps = p_list.to_vec();
        ps.sort_unstable();
        ps.dedup();
        let mut qs = q_list.to_vec();
        qs.sort_by(f64::total_cmp);
        qs.dedup();
        let mut seen: Vec<TruncationSet> = Vec::new();
        let mut groups = Vec::new();
        for &q in &qs {
            let mut group = Vec::new();
            for &p in &ps {
                let t = enumerate_truncation(p, q, marginals.dim())?;
                if (n as f64) < OVERSAMPLING * t.len() as f64 || n <= t.len() {
                    break;
                }
                // identical sets (e.g. any q in one dimension) are fitted once,
                // under the smallest (p, q) that produced them
                if seen.iter().any(|s| s.indices() == t.indices()) {
                    continue;
                }
                seen.push(t.clone());
                let design = match design_matrix(marginals, &t, x).and_then(|psi| LsqDesign::new(psi, t)) {
                    Ok(d) => Some(d),
                    Err(Error::Conditioning(_)) | Err(Error::Underdetermined(_)) => None,
                    Err(e) => return Err(e),
                };
                group.push(Candidate { p, q, design });
            }
            groups.push(group);
        }
        Ok(Self { marginals: marginals.clone(), x: x.to_vec(), groups, patience })
    }

    pub fn marginals(&self) -> &MarginalSpec {
        &self.marginals
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.x
    }

    /// Fits `y` with every retained candidate and returns the best one.
    pub fn fit(&self, y: &[f64]) -> Result<(LsqFit, (usize, f64))> {
        if y.len() != self.x.len() {
            return Err(Error::Domain(format!("{} responses for {} design points", y.len(), self.x.len())));
        }
        let mut evaluated: Vec<(LsqFit, usize, f64)> = Vec::new();
        for group in &self.groups {
            let mut best = f64::INFINITY;
            let mut stale = 0usize;
            for cand in group {
                let Some(design) = &cand.design else { continue };
                let fit = design.fit(y)?;
                if fit.loo_error < best - LOO_TIE_TOL {
                    best = fit.loo_error;
                    stale = 0;
                } else {
                    stale += 1;
                }
                evaluated.push((fit, cand.p, cand.q));
                if self.patience.is_some_and(|k| stale >= k) {
                    break;
                }
            }
        }
        select_best(evaluated)
    }
}

fn select_best(evaluated: Vec<(LsqFit, usize, f64)>) -> Result<(LsqFit, (usize, f64))> {
    let min = evaluated
        .iter()
        .map(|(f, _, _)| f.loo_error)
        .fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(Error::Underdetermined("no feasible (p, q) candidate".into()));
    }
    evaluated
        .into_iter()
        .filter(|(f, _, _)| f.loo_error <= min + LOO_TIE_TOL)
        .min_by(|a, b| {
            a.0.truncation
                .len()
                .cmp(&b.0.truncation.len())
                .then(a.1.cmp(&b.1))
                .then(a.2.total_cmp(&b.2))
        })
        .map(|(f, p, q)| (f, (p, q)))
        .ok_or_else(|| Error::Underdetermined("no feasible (p, q) candidate".into()))
}

/// Fits every feasible `(p, q)` pair and keeps the lowest LOO error.
pub fn adaptive_ols(marginals: &MarginalSpec, x: &[Vec<f64>], y: &[f64], p_list: &[usize], q_list: &[f64]) -> Result<(LsqFit, (usize, f64))> {
    check_lengths(x, y)?;
    AdaptiveOls::new(marginals, x, p_list, q_list, None)?.fit(y)
}
