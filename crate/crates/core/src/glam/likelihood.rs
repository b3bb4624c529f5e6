//! Conditional negative log-likelihood of a GLaM and its gradient.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gld::{self, LambdaVector, Latent, LOGIT_LIMIT};
use crate::glam::model::{Dataset, GlamModel};
use crate::pce::{design_matrix, MarginalSpec, PceFunction, TruncationSet};

/// Below this many points the likelihood is evaluated sequentially.
const PARALLEL_THRESHOLD: usize = 256;

/// How replicated observations enter the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// Every observation counts once.
    #[default]
    Flattened,
    /// Observations at a point are averaged over its replications.
    Replicated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMode {
    #[default]
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikelihoodOptions {
    /// Slope of the out-of-support penalty, per unit of `λ2·distance`.
    pub kappa: f64,
    pub inversion_tol: f64,
    pub objective: Objective,
    pub gradient: GradientMode,
}

impl Default for LikelihoodOptions {
    fn default() -> Self {
        Self { kappa: 1e3, inversion_tol: gld::DEFAULT_INVERSION_TOL, objective: Objective::Flattened, gradient: GradientMode::Analytic }
    }
}

/// Log-density contribution of one observation, with its λ-gradient.
///
/// Outside the support the density at the saturated latent level is used,
/// minus `κ·λ2·d` where `d` is the distance to the violated bound.
fn contribution(y: f64, lam: &LambdaVector, opts: &LikelihoodOptions) -> Result<(f64, [f64; 4])> {
    let s = gld::support_unchecked(lam);
    let (l1, l2) = (lam.l1, lam.l2);
    if y < s.lower {
        let (v, g) = gld::ln_pdf_level_gradient(lam, &Latent::from_logit(-LOGIT_LIMIT));
        let d = l2 * (l1 - y) - 1.0 / lam.l3;
        let dd = [l2, l1 - y, 1.0 / (lam.l3 * lam.l3), 0.0];
        let k = opts.kappa;
        return Ok((v - k * d, [g[0] - k * dd[0], g[1] - k * dd[1], g[2] - k * dd[2], g[3] - k * dd[3]]));
    }
    if y > s.upper {
        let (v, g) = gld::ln_pdf_level_gradient(lam, &Latent::from_logit(LOGIT_LIMIT));
        let d = l2 * (y - l1) - 1.0 / lam.l4;
        let dd = [-l2, y - l1, 0.0, 1.0 / (lam.l4 * lam.l4)];
        let k = opts.kappa;
        return Ok((v - k * d, [g[0] - k * dd[0], g[1] - k * dd[1], g[2] - k * dd[2], g[3] - k * dd[3]]));
    }
    let p = gld::invert_latent(y, lam, opts.inversion_tol)?
        .ok_or_else(|| Error::Numeric(format!("value {y} unexpectedly outside support of {lam:?}")))?;
    Ok(gld::ln_pdf_gradient_at(y, lam, &p))
}

/// Constraint state of a coefficient vector on a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConstraintStatus {
    /// Observations outside their conditional support.
    pub violated: usize,
    /// Feasible observations within the activity tolerance of a bound.
    pub active: usize,
}

/// Negative log-likelihood over a fixed dataset and fixed truncation sets.
///
/// The coefficient vector concatenates the λ1, ln λ2, λ3 and λ4 blocks.
pub struct Likelihood {
    psi: [DMatrix<f64>; 4],
    sizes: [usize; 4],
    groups: Vec<Vec<f64>>,
    weights: Vec<f64>,
    opts: LikelihoodOptions,
}

impl Likelihood {
    pub fn new(marginals: &MarginalSpec, truncations: [&TruncationSet; 4], data: &Dataset, opts: LikelihoodOptions) -> Result<Self> {
        let x = data.inputs();
        let psi = [
            design_matrix(marginals, truncations[0], x)?,
            design_matrix(marginals, truncations[1], x)?,
            design_matrix(marginals, truncations[2], x)?,
            design_matrix(marginals, truncations[3], x)?,
        ];
        let sizes = [truncations[0].len(), truncations[1].len(), truncations[2].len(), truncations[3].len()];
        let weights = data
            .groups()
            .iter()
            .map(|g| match opts.objective {
                Objective::Flattened => 1.0,
                Objective::Replicated => 1.0 / g.len() as f64,
            })
            .collect();
        Ok(Self { psi, sizes, groups: data.groups().to_vec(), weights, opts })
    }

    /// Likelihood for the structure of `model` (its truncation sets).
    pub fn for_model(model: &GlamModel, data: &Dataset, opts: LikelihoodOptions) -> Result<Self> {
        let [a, b, c, d] = model.components();
        Self::new(&model.marginals, [&a.truncation, &b.truncation, &c.truncation, &d.truncation], data, opts)
    }

    pub fn dim(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn block_sizes(&self) -> [usize; 4] {
        self.sizes
    }

    pub fn n_observations(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    /// Two constraints (lower and upper support bound) per observation.
    pub fn n_constraints(&self) -> usize {
        2 * self.n_observations()
    }

    pub fn options(&self) -> &LikelihoodOptions {
        &self.opts
    }

    fn blocks<'a>(&self, c: &'a [f64]) -> Result<[&'a [f64]; 4]> {
        if c.len() != self.dim() {
            return Err(Error::Domain(format!("{} coefficients for a model with {}", c.len(), self.dim())));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite coefficient".into()));
        }
        let (a, rest) = c.split_at(self.sizes[0]);
        let (b, rest) = rest.split_at(self.sizes[1]);
        let (d3, d4) = rest.split_at(self.sizes[2]);
        Ok([a, b, d3, d4])
    }

    /// Unfloored λ at every design point.
    pub fn lambdas(&self, c: &[f64]) -> Result<Vec<LambdaVector>> {
        let blocks = self.blocks(c)?;
        let comp: Vec<DVector<f64>> = (0..4).map(|k| &self.psi[k] * DVector::from_column_slice(blocks[k])).collect();
        (0..self.groups.len())
            .map(|i| {
                let lam = LambdaVector { l1: comp[0][i], l2: comp[1][i].exp(), l3: comp[2][i], l4: comp[3][i] };
                lam.validate().map(|_| lam)
            })
            .collect()
    }

    fn point_terms(&self, lams: &[LambdaVector]) -> Result<Vec<(f64, [f64; 4])>> {
        let term = |i: usize| -> Result<(f64, [f64; 4])> {
            let lam = &lams[i];
            let mut v = 0.0;
            let mut g = [0.0; 4];
            for &y in &self.groups[i] {
                let (vi, gi) = contribution(y, lam, &self.opts)?;
                v += vi;
                for k in 0..4 {
                    g[k] += gi[k];
                }
            }
            Ok((v, g))
        };
        if lams.len() >= PARALLEL_THRESHOLD {
            (0..lams.len()).into_par_iter().map(term).collect()
        } else {
            (0..lams.len()).map(term).collect()
        }
    }

    /// `−Σᵢ wᵢ Σᵣ ln f(yᵢᵣ; λ(xᵢ))` with `wᵢ = 1` or `1/Rᵢ`.
    pub fn value(&self, c: &[f64]) -> Result<f64> {
        let lams = self.lambdas(c)?;
        let terms = self.point_terms(&lams)?;
        let total: f64 = terms.iter().zip(&self.weights).map(|((v, _), w)| w * v).sum();
        Ok(-total)
    }

    pub fn value_and_gradient(&self, c: &[f64]) -> Result<(f64, Vec<f64>)> {
        match self.opts.gradient {
            GradientMode::Analytic => self.analytic(c),
            GradientMode::FiniteDifference => {
                let f = self.value(c)?;
                Ok((f, self.finite_difference_gradient(c)?))
            }
        }
    }

    fn analytic(&self, c: &[f64]) -> Result<(f64, Vec<f64>)> {
        let lams = self.lambdas(c)?;
        let terms = self.point_terms(&lams)?;
        let n = lams.len();
        let mut total = 0.0;
        let mut cols: [DVector<f64>; 4] = std::array::from_fn(|_| DVector::zeros(n));
        for (i, ((v, g), w)) in terms.iter().zip(&self.weights).enumerate() {
            total += w * v;
            cols[0][i] = -w * g[0];
            // chain rule through λ2 = exp(ψᵀc2)
            cols[1][i] = -w * g[1] * lams[i].l2;
            cols[2][i] = -w * g[2];
            cols[3][i] = -w * g[3];
        }
        let mut grad = Vec::with_capacity(self.dim());
        for (psi, col) in self.psi.iter().zip(&cols) {
            grad.extend(psi.tr_mul(col).iter());
        }
        Ok((-total, grad))
    }

    /// Central differences with step `1e-6·max(1, |cⱼ|)`.
    pub fn finite_difference_gradient(&self, c: &[f64]) -> Result<Vec<f64>> {
        let mut x = c.to_vec();
        let mut g = Vec::with_capacity(c.len());
        for j in 0..c.len() {
            let h = 1e-6 * c[j].abs().max(1.0);
            x[j] = c[j] + h;
            let fp = self.value(&x)?;
            x[j] = c[j] - h;
            let fm = self.value(&x)?;
            x[j] = c[j];
            g.push((fp - fm) / (2.0 * h));
        }
        Ok(g)
    }

    /// Indices of violated support constraints: `2k` lower, `2k + 1` upper
    /// for observation `k` in flattened order.
    pub fn violations(&self, c: &[f64], out: &mut Vec<usize>) {
        out.clear();
        let Ok(lams) = self.lambdas(c) else {
            // invalid parameters violate everything
            out.extend(0..self.n_constraints());
            return;
        };
        let mut k = 0;
        for (lam, g) in lams.iter().zip(&self.groups) {
            let s = gld::support_unchecked(lam);
            for &y in g {
                if y <= s.lower {
                    out.push(2 * k);
                }
                if y >= s.upper {
                    out.push(2 * k + 1);
                }
                k += 1;
            }
        }
    }

    /// Counts observations outside or within `tol` (in units of `1/λ2`) of
    /// a support bound.
    pub fn constraint_status(&self, c: &[f64], tol: f64) -> Result<ConstraintStatus> {
        let lams = self.lambdas(c)?;
        let mut status = ConstraintStatus::default();
        for (lam, g) in lams.iter().zip(&self.groups) {
            let s = gld::support_unchecked(lam);
            for &y in g {
                if !(y > s.lower && y < s.upper) {
                    status.violated += 1;
                } else if lam.l2 * (y - s.lower) <= tol || lam.l2 * (s.upper - y) <= tol {
                    status.active += 1;
                }
            }
        }
        Ok(status)
    }

    /// Splits a coefficient vector into the four PCEs of a model.
    pub fn to_model(&self, marginals: &MarginalSpec, truncations: [&TruncationSet; 4], c: &[f64]) -> Result<GlamModel> {
        let b = self.blocks(c)?;
        GlamModel::new(
            marginals.clone(),
            PceFunction::new(truncations[0].clone(), b[0].to_vec())?,
            PceFunction::new(truncations[1].clone(), b[1].to_vec())?,
            PceFunction::new(truncations[2].clone(), b[2].to_vec())?,
            PceFunction::new(truncations[3].clone(), b[3].to_vec())?,
        )
    }
}

/// Concatenated coefficients of a model, in likelihood order.
pub fn model_coefficients(model: &GlamModel) -> Vec<f64> {
    model.components().iter().flat_map(|f| f.coefficients.iter().copied()).collect()
}

/// Eq.-17-style objective: every observation counts once.
pub fn neg_log_likelihood(model: &GlamModel, data: &Dataset) -> Result<f64> {
    let opts = LikelihoodOptions { objective: Objective::Flattened, ..Default::default() };
    Likelihood::for_model(model, data, opts)?.value(&model_coefficients(model))
}

/// Objective and gradient with respect to [`model_coefficients`].
pub fn neg_log_likelihood_with_gradient(model: &GlamModel, data: &Dataset) -> Result<(f64, Vec<f64>)> {
    let opts = LikelihoodOptions { objective: Objective::Flattened, ..Default::default() };
    Likelihood::for_model(model, data, opts)?.value_and_gradient(&model_coefficients(model))
}

/// Replication-weighted objective: each point's log-densities are averaged
/// over its replications.
pub fn neg_log_likelihood_replicated(model: &GlamModel, data: &Dataset) -> Result<f64> {
    let opts = LikelihoodOptions { objective: Objective::Replicated, ..Default::default() };
    Likelihood::for_model(model, data, opts)?.value(&model_coefficients(model))
}
