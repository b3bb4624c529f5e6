use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gld::{self, LambdaVector};
use crate::pce::{pce_eval, MarginalSpec, PceFunction};

/// Default prediction-time floor on the shape parameters.
pub const DEFAULT_SHAPE_FLOOR: f64 = -0.3;

/// Input points with one or more observed outputs each.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Vec<Vec<f64>>,
    groups: Vec<Vec<f64>>,
}

impl Dataset {
    /// One output per input point.
    pub fn new(x: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Domain(format!("{} input points for {} outputs", x.len(), y.len())));
        }
        Self::replicated(x, y.into_iter().map(|v| vec![v]).collect())
    }

    /// Grouped outputs: `groups[i]` holds the replications at `x[i]`.
    pub fn replicated(x: Vec<Vec<f64>>, groups: Vec<Vec<f64>>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::Domain("dataset must contain at least one point".into()));
        }
        if x.len() != groups.len() {
            return Err(Error::Domain(format!("{} input points for {} output groups", x.len(), groups.len())));
        }
        let m = x[0].len();
        if m == 0 || x.iter().any(|p| p.len() != m) {
            return Err(Error::Domain("input points must share a positive dimension".into()));
        }
        if groups.iter().any(|g| g.is_empty()) {
            return Err(Error::Domain("every point needs at least one replication".into()));
        }
        if x.iter().flatten().chain(groups.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite value in dataset".into()));
        }
        Ok(Self { x, groups })
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn groups(&self) -> &[Vec<f64>] {
        &self.groups
    }

    pub fn dim(&self) -> usize {
        self.x[0].len()
    }

    pub fn n_points(&self) -> usize {
        self.x.len()
    }

    pub fn n_observations(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    pub fn is_replicated(&self) -> bool {
        self.groups.iter().any(|g| g.len() > 1)
    }

    /// One row per observation, inputs repeated for each replication.
    pub fn flatten(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut xs = Vec::with_capacity(self.n_observations());
        let mut ys = Vec::with_capacity(self.n_observations());
        for (p, g) in self.x.iter().zip(&self.groups) {
            for &v in g {
                xs.push(p.clone());
                ys.push(v);
            }
        }
        (xs, ys)
    }

    pub fn check_domain(&self, marginals: &MarginalSpec) -> Result<()> {
        for p in &self.x {
            marginals.to_standard(p)?;
        }
        Ok(())
    }
}

/// Which optimizer produced a round's final iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    TrustRegion,
    Cmaes,
    /// Neither optimizer improved on the round's starting point.
    Start,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub optimizer: OptimizerKind,
    pub start_nll: f64,
    pub final_nll: f64,
    pub trust_region_iterations: usize,
    pub trust_region_converged: bool,
    pub cmaes_evaluations: usize,
    /// Some observation sat on (or outside) its support at the trust-region
    /// optimum.
    pub constraints_active: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FitMetadata {
    /// Final negative log-likelihood (flattened data, untruncated shapes).
    pub neg_log_likelihood: f64,
    pub start_nll: f64,
    pub rounds: Vec<RoundReport>,
    /// Degree and q-norm selected for the mean and log-variance expansions.
    pub mean_pq: Option<(usize, f64)>,
    pub variance_pq: Option<(usize, f64)>,
    pub fgls_iteration: usize,
    pub warnings: Vec<String>,
}

/// A generalized lambda model: four PCEs, λ2 on the log scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlamModel {
    pub marginals: MarginalSpec,
    pub lambda1: PceFunction,
    pub log_lambda2: PceFunction,
    pub lambda3: PceFunction,
    pub lambda4: PceFunction,
    /// Prediction-time floor on λ3 and λ4; `None` disables it.
    pub shape_floor: Option<f64>,
    #[serde(default)]
    pub metadata: FitMetadata,
}

impl GlamModel {
    pub fn new(
        marginals: MarginalSpec,
        lambda1: PceFunction,
        log_lambda2: PceFunction,
        lambda3: PceFunction,
        lambda4: PceFunction,
    ) -> Result<Self> {
        let m = marginals.dim();
        for f in [&lambda1, &log_lambda2, &lambda3, &lambda4] {
            if f.truncation.dim() != m {
                return Err(Error::Domain(format!("PCE dimension {} differs from input dimension {m}", f.truncation.dim())));
            }
        }
        Ok(Self { marginals, lambda1, log_lambda2, lambda3, lambda4, shape_floor: None, metadata: FitMetadata::default() })
    }

    /// Constant model with the given λ everywhere.
    pub fn constant(marginals: MarginalSpec, lam: LambdaVector) -> Result<Self> {
        lam.validate()?;
        let m = marginals.dim();
        Self::new(
            marginals,
            PceFunction::constant(m, lam.l1),
            PceFunction::constant(m, lam.l2.ln()),
            PceFunction::constant(m, lam.l3),
            PceFunction::constant(m, lam.l4),
        )
    }

    pub fn components(&self) -> [&PceFunction; 4] {
        [&self.lambda1, &self.log_lambda2, &self.lambda3, &self.lambda4]
    }

    /// λ(x) without the shape floor.
    pub fn raw_lambda_at(&self, x: &[f64]) -> Result<LambdaVector> {
        let l1 = pce_eval(&self.marginals, &self.lambda1, x)?;
        let l2 = pce_eval(&self.marginals, &self.log_lambda2, x)?.exp();
        let l3 = pce_eval(&self.marginals, &self.lambda3, x)?;
        let l4 = pce_eval(&self.marginals, &self.lambda4, x)?;
        LambdaVector::new(l1, l2, l3, l4)
    }

    /// λ(x) used for prediction, with the shape floor applied.
    pub fn lambda_at(&self, x: &[f64]) -> Result<LambdaVector> {
        let raw = self.raw_lambda_at(x)?;
        Ok(match self.shape_floor {
            Some(floor) => raw.with_shape_floor(floor),
            None => raw,
        })
    }

    pub fn pdf(&self, y: f64, x: &[f64]) -> Result<f64> {
        gld::pdf(y, &self.lambda_at(x)?)
    }

    pub fn quantile(&self, u: f64, x: &[f64]) -> Result<f64> {
        gld::quantile(u, &self.lambda_at(x)?)
    }

    pub fn mean_variance(&self, x: &[f64]) -> Result<(f64, f64)> {
        gld::mean_variance(&self.lambda_at(x)?)
    }

    pub fn expected_payoff(&self, x: &[f64], strike: f64) -> Result<f64> {
        gld::expected_payoff(&self.lambda_at(x)?, strike)
    }

    pub fn sample<R: Rng + ?Sized>(&self, x: &[f64], n: usize, rng: &mut R) -> Result<Vec<f64>> {
        gld::sample(&self.lambda_at(x)?, n, rng)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(s)?;
        Self::new(
            model.marginals.clone(),
            model.lambda1.clone(),
            model.log_lambda2.clone(),
            model.lambda3.clone(),
            model.lambda4.clone(),
        )?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Returns the model with the prediction-time shape floor set to `floor`.
pub fn post_threshold(model: GlamModel, floor: f64) -> GlamModel {
    GlamModel { shape_floor: Some(floor), ..model }
}
