//! End-to-end GLaM fit: modified FGLS start, then two rounds of maximum
//! conditional likelihood.

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glam::fgls::{modified_fgls, ModifiedFglsOptions};
use crate::glam::likelihood::{GradientMode, Likelihood, LikelihoodOptions, Objective};
use crate::glam::model::{Dataset, FitMetadata, GlamModel, OptimizerKind, RoundReport, DEFAULT_SHAPE_FLOOR};
use crate::optim::{cmaes_constrained_minimize, trust_region_minimize, CmaesOptions, TrustRegionOptions};
use crate::pce::{enumerate_truncation, MarginalSpec, PceFunction, TruncationSet};

/// Fitting settings. Every field has a default, so partial TOML tables work.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub mean_degrees: Vec<usize>,
    pub variance_degrees: Vec<usize>,
    pub q_norms: Vec<f64>,
    pub n_fgls: usize,
    /// Early stop of the adaptive OLS degree loop; `None` is exhaustive.
    pub aols_patience: Option<usize>,
    /// Constant starting value of λ3 and λ4.
    pub shape_start: f64,
    /// Total degree of the λ3 and λ4 expansions in round two.
    pub shape_degree: usize,
    /// Prediction-time floor on λ3 and λ4; `None` disables it.
    pub shape_floor: Option<f64>,
    pub trust_region_max_iter: usize,
    pub gtol: f64,
    pub cmaes_evaluations_per_dim: usize,
    /// CMA-ES stops after this many evaluations without improvement;
    /// defaults to `200 + 40·dim` when absent.
    pub cmaes_stall: Option<usize>,
    pub active_tol: f64,
    pub kappa: f64,
    pub gradient: GradientMode,
    pub objective: Objective,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            mean_degrees: (0..=10).collect(),
            variance_degrees: (0..=5).collect(),
            q_norms: vec![0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
            n_fgls: 10,
            aols_patience: Some(2),
            shape_start: 0.13,
            shape_degree: 1,
            shape_floor: Some(DEFAULT_SHAPE_FLOOR),
            trust_region_max_iter: 500,
            gtol: 1e-6,
            cmaes_evaluations_per_dim: 10_000,
            cmaes_stall: None,
            active_tol: 1e-8,
            kappa: 1e3,
            gradient: GradientMode::Analytic,
            objective: Objective::Flattened,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mean_degrees.is_empty() || self.variance_degrees.is_empty() || self.q_norms.is_empty() {
            return Err(Error::Config("degree and q-norm lists must be non-empty".into()));
        }
        if self.q_norms.iter().any(|q| !(*q > 0.0 && *q <= 1.0)) {
            return Err(Error::Config("q-norms must lie in (0, 1]".into()));
        }
        if !(self.gtol > 0.0 && self.active_tol >= 0.0 && self.kappa > 0.0) {
            return Err(Error::Config("gtol and kappa must be positive, active_tol non-negative".into()));
        }
        if self.trust_region_max_iter == 0 {
            return Err(Error::Config("trust_region_max_iter must be positive".into()));
        }
        Ok(())
    }

    fn likelihood_options(&self) -> LikelihoodOptions {
        LikelihoodOptions { kappa: self.kappa, objective: self.objective, gradient: self.gradient, ..Default::default() }
    }
}

struct Structure {
    trunc: [TruncationSet; 4],
    lik: Likelihood,
}

impl Structure {
    fn new(marginals: &MarginalSpec, trunc: [TruncationSet; 4], data: &Dataset, opts: LikelihoodOptions) -> Result<Self> {
        let lik = Likelihood::new(marginals, [&trunc[0], &trunc[1], &trunc[2], &trunc[3]], data, opts)?;
        Ok(Self { trunc, lik })
    }

    fn offsets(&self) -> [usize; 5] {
        let s = self.lik.block_sizes();
        [0, s[0], s[0] + s[1], s[0] + s[1] + s[2], s[0] + s[1] + s[2] + s[3]]
    }

    fn value(&self, c: &[f64]) -> f64 {
        self.lik.value(c).unwrap_or(f64::INFINITY)
    }

    fn is_feasible(&self, c: &[f64]) -> bool {
        let mut v = Vec::new();
        self.lik.violations(c, &mut v);
        v.is_empty()
    }

    /// Largest scaling of the shape coefficients in `[0, 1]` that makes every
    /// observation strictly feasible. At zero both shapes vanish and the
    /// support is the whole line.
    fn restore(&self, c: &[f64]) -> Vec<f64> {
        if self.is_feasible(c) {
            return c.to_vec();
        }
        let o = self.offsets();
        let scaled = |t: f64| -> Vec<f64> {
            let mut out = c.to_vec();
            for v in &mut out[o[2]..] {
                *v *= t;
            }
            out
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if self.is_feasible(&scaled(mid)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        scaled(lo)
    }

    /// Per-coordinate CMA-ES scales.
    fn scales(&self, y_scale: f64) -> Vec<f64> {
        let o = self.offsets();
        let mut s = vec![0.0; o[4]];
        s[o[0]..o[1]].fill(0.1 * y_scale);
        s[o[1]..o[2]].fill(0.1);
        s[o[2]..o[4]].fill(0.02);
        s
    }
}

struct RoundOutcome {
    c: Vec<f64>,
    report: RoundReport,
    warnings: Vec<String>,
}

fn run_round(st: &Structure, start: &[f64], cfg: &FitConfig, y_scale: f64, label: &str, seed: u64) -> Result<RoundOutcome> {
    let f_start = st.lik.value(start)?;
    let mut warnings = Vec::new();
    let tr_opts = TrustRegionOptions { max_iter: cfg.trust_region_max_iter, gtol: cfg.gtol, ..Default::default() };
    let tr = trust_region_minimize(|c| st.lik.value_and_gradient(c), start, &tr_opts)?;
    if !tr.converged {
        let msg = format!("{label}: trust region stopped after {} iterations with ‖g‖∞ = {:.3e}", tr.iterations, tr.grad_inf_norm);
        warn!("{msg}");
        warnings.push(msg);
    }
    let status = st.lik.constraint_status(&tr.x, cfg.active_tol)?;
    let constraints_active = status.violated > 0 || status.active > 0;
    let mut best = (tr.x.clone(), tr.f, OptimizerKind::TrustRegion);
    if f_start < best.1 {
        best = (start.to_vec(), f_start, OptimizerKind::Start);
    }
    let mut cmaes_evaluations = 0;
    if constraints_active {
        debug!("{label}: {} violated, {} active constraints; switching to CMA-ES", status.violated, status.active);
        let candidates = [st.restore(&tr.x), st.restore(start)];
        let cma_start = candidates
            .iter()
            .map(|c| (c, st.value(c)))
            .filter(|(_, f)| f.is_finite())
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(c, _)| c.clone())
            .ok_or_else(|| Error::Infeasible(format!("{label}: no feasible starting point for CMA-ES")))?;
        let n = start.len();
        let mut opts = CmaesOptions::for_dimension(n, seed);
        opts.max_evaluations = cfg.cmaes_evaluations_per_dim.saturating_mul(n).max(1);
        if let Some(s) = cfg.cmaes_stall {
            opts.stall_evaluations = Some(s);
        }
        let scales = st.scales(y_scale);
        let res = cmaes_constrained_minimize(
            |c| st.value(c),
            |c, out| st.lik.violations(c, out),
            st.lik.n_constraints(),
            &cma_start,
            &scales,
            &opts,
        )?;
        cmaes_evaluations = res.evaluations;
        if !res.converged {
            let msg = format!("{label}: CMA-ES exhausted its budget of {} evaluations", opts.max_evaluations);
            warn!("{msg}");
            warnings.push(msg);
        }
        if res.f < best.1 {
            best = (res.x, res.f, OptimizerKind::Cmaes);
        }
    }
    let report = RoundReport {
        optimizer: best.2,
        start_nll: f_start,
        final_nll: best.1,
        trust_region_iterations: tr.iterations,
        trust_region_converged: tr.converged,
        cmaes_evaluations,
        constraints_active,
    };
    Ok(RoundOutcome { c: best.0, report, warnings })
}

/// Fits a GLaM to `data` with inputs distributed as `marginals`.
pub fn fit(marginals: &MarginalSpec, data: &Dataset, cfg: &FitConfig) -> Result<GlamModel> {
    cfg.validate()?;
    if data.dim() != marginals.dim() {
        return Err(Error::Domain(format!("data dimension {} differs from marginals {}", data.dim(), marginals.dim())));
    }
    data.check_domain(marginals)?;
    let (xf, yf) = data.flatten();
    let n = yf.len() as f64;
    let y_mean = yf.iter().sum::<f64>() / n;
    let y_sd = (yf.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n).sqrt();
    if !(y_sd > 1e-12 * y_mean.abs().max(1e-300)) {
        return Err(Error::Degenerate("outputs have no spread".into()));
    }
    let m = marginals.dim();

    let fopts = ModifiedFglsOptions {
        mean_degrees: cfg.mean_degrees.clone(),
        mean_q: cfg.q_norms.clone(),
        variance_degrees: cfg.variance_degrees.clone(),
        variance_q: cfg.q_norms.clone(),
        n_iter: cfg.n_fgls,
        patience: cfg.aols_patience,
    };
    let mf = modified_fgls(marginals, &xf, &yf, &fopts)?;
    let trunc_mean = mf.mean.truncation.clone();
    let (trunc_var, c2): (TruncationSet, Vec<f64>) = match &mf.log_variance {
        Some(v) => (v.truncation.clone(), v.coefficients.iter().map(|c| -0.5 * c).collect()),
        None => (TruncationSet::constant(m), vec![-y_sd.ln()]),
    };
    let lopts = cfg.likelihood_options();

    // round one: constant shapes
    let constant = TruncationSet::constant(m);
    let st1 = Structure::new(marginals, [trunc_mean.clone(), trunc_var.clone(), constant.clone(), constant], data, lopts)?;
    let mut c_start = mf.mean.coefficients.clone();
    c_start.extend(&c2);
    c_start.push(cfg.shape_start);
    c_start.push(cfg.shape_start);
    let r1 = run_round(&st1, &c_start, cfg, y_sd, "round one", cfg.seed)?;

    // round two: shapes of total degree `shape_degree`, new terms start at zero
    let shape_trunc = enumerate_truncation(cfg.shape_degree, 1.0, m)?;
    let o = st1.offsets();
    let embed = |block: &[f64]| -> Result<Vec<f64>> {
        Ok(PceFunction::new(TruncationSet::constant(m), block.to_vec())?.embed(&shape_trunc)?.coefficients)
    };
    let mut c_round2 = r1.c[..o[2]].to_vec();
    c_round2.extend(embed(&r1.c[o[2]..o[3]])?);
    c_round2.extend(embed(&r1.c[o[3]..o[4]])?);
    let st2 = Structure::new(marginals, [trunc_mean, trunc_var, shape_trunc.clone(), shape_trunc], data, lopts)?;
    let r2 = run_round(&st2, &c_round2, cfg, y_sd, "round two", cfg.seed.wrapping_add(1))?;

    let t = &st2.trunc;
    let mut model = st2.lik.to_model(marginals, [&t[0], &t[1], &t[2], &t[3]], &r2.c)?;
    model.shape_floor = cfg.shape_floor;
    let mut warnings = r1.warnings;
    warnings.extend(r2.warnings);
    model.metadata = FitMetadata {
        neg_log_likelihood: r2.report.final_nll,
        start_nll: r1.report.start_nll,
        rounds: vec![r1.report, r2.report],
        mean_pq: Some(mf.mean_pq),
        variance_pq: mf.variance_pq,
        fgls_iteration: mf.best_iteration,
        warnings,
    };
    Ok(model)
}
