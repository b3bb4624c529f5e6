//! (1+1)-CMA-ES with active covariance update and constraint handling by
//! fading constraint vectors (Arnold & Hansen, 2012).

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct CmaesOptions {
    /// Maximum number of objective evaluations.
    pub max_evaluations: usize,
    /// Initial global step size.
    pub sigma0: f64,
    /// Stop after this many consecutive evaluations without an improvement
    /// larger than `ftol` (relative). `None` disables the test.
    pub stall_evaluations: Option<usize>,
    pub ftol: f64,
    pub seed: u64,
    /// Record the best-so-far objective after every evaluation.
    pub record_history: bool,
}

impl CmaesOptions {
    pub fn for_dimension(n: usize, seed: u64) -> Self {
        Self {
            max_evaluations: 10_000 * n.max(1),
            sigma0: 1.0,
            stall_evaluations: Some(200 + 40 * n),
            ftol: 1e-10,
            seed,
            record_history: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CmaesResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
    /// Offspring rejected for violating a constraint.
    pub infeasible_samples: usize,
    pub history: Vec<f64>,
    /// Whether the run ended on a stall or step-size criterion rather than
    /// the evaluation budget.
    pub converged: bool,
}

struct Params {
    d: f64,
    c: f64,
    cp: f64,
    p_target: f64,
    ccov_plus: f64,
    ccov_minus: f64,
    cc: f64,
    beta: f64,
}

impl Params {
    fn new(n: usize) -> Self {
        let nf = n as f64;
        Self {
            d: 1.0 + nf / 2.0,
            c: 2.0 / (nf + 2.0),
            cp: 1.0 / 12.0,
            p_target: 2.0 / 11.0,
            ccov_plus: 2.0 / (nf * nf + 6.0),
            ccov_minus: 0.4 / (nf.powf(1.6) + 1.0),
            cc: 1.0 / (nf + 2.0),
            beta: 0.1 / (nf + 2.0),
        }
    }
}

/// Applies `A ← A(αI + γwwᵀ)` and the matching update of `A⁻¹`.
fn right_rank_one(a: &mut DMatrix<f64>, a_inv: &mut DMatrix<f64>, alpha: f64, gamma: f64, w: &DVector<f64>) {
    let aw = &*a * w;
    *a *= alpha;
    a.ger(gamma, &aw, w, 1.0);
    let ww = w.dot(w);
    let wt_ainv = a_inv.tr_mul(w);
    *a_inv *= 1.0 / alpha;
    a_inv.ger(-gamma / (alpha * (alpha + gamma * ww)), w, &wt_ainv, 1.0);
}

/// Minimizes `f` subject to constraints reported by `violations`, which
/// fills the indices (in `0..n_constraints`) of the constraints violated at
/// a point. The start must be feasible.
pub fn cmaes_constrained_minimize<F, G>(
    mut f: F,
    mut violations: G,
    n_constraints: usize,
    start: &[f64],
    scales: &[f64],
    opts: &CmaesOptions,
) -> Result<CmaesResult>
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64], &mut Vec<usize>),
{
    let n = start.len();
    if scales.len() != n || scales.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::Domain("CMA-ES scales must be positive, one per coordinate".into()));
    }
    let mut viol = Vec::new();
    violations(start, &mut viol);
    if !viol.is_empty() {
        return Err(Error::Infeasible(format!("{} constraints violated at the CMA-ES start", viol.len())));
    }
    let fx0 = f(start);
    if !fx0.is_finite() {
        return Err(Error::Domain("objective is not finite at the CMA-ES start".into()));
    }
    let pr = Params::new(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x = DVector::from_column_slice(start);
    let mut fx = fx0;
    let mut sigma = opts.sigma0;
    let mut a = DMatrix::from_diagonal(&DVector::from_column_slice(scales));
    let mut a_inv = DMatrix::from_diagonal(&DVector::from_iterator(n, scales.iter().map(|s| 1.0 / s)));
    let mut p_succ = pr.p_target;
    let mut path = DVector::<f64>::zeros(n);
    let mut cvec: Vec<Option<DVector<f64>>> = vec![None; n_constraints];
    // objective values of the last five accepted parents, oldest first
    let mut ancestors: std::collections::VecDeque<f64> = std::collections::VecDeque::with_capacity(6);
    ancestors.push_back(fx);
    let mut history = Vec::new();
    let mut evaluations = 1usize;
    let mut infeasible_samples = 0usize;
    let mut stall = 0usize;
    let mut converged = false;
    let max_samples = opts.max_evaluations.saturating_mul(20).max(1000);
    let mut samples = 0usize;
    if opts.record_history {
        history.push(fx);
    }
    while evaluations < opts.max_evaluations && samples < max_samples {
        samples += 1;
        let z = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut rng)));
        let az = &a * &z;
        let y = &x + sigma * &az;
        violations(y.as_slice(), &mut viol);
        if !viol.is_empty() {
            infeasible_samples += 1;
            let mut ws = Vec::with_capacity(viol.len());
            for &j in &viol {
                let v = match cvec[j].take() {
                    Some(v) => (1.0 - pr.cc) * v + pr.cc * &az,
                    None => pr.cc * &az,
                };
                let w = &a_inv * &v;
                ws.push((v.clone(), w));
                cvec[j] = Some(v);
            }
            let k = ws.len() as f64;
            for (v, w) in &ws {
                let ww = w.dot(w);
                if ww > 0.0 {
                    a.ger(-pr.beta / (k * ww), v, w, 1.0);
                }
            }
            if ws.len() == 1 {
                // A' = A(I − β ŵŵᵀ): Sherman–Morrison on the unit vector ŵ
                let w = &ws[0].1;
                let ww = w.dot(w);
                if ww > 0.0 {
                    let wt_ainv = a_inv.tr_mul(w);
                    a_inv.ger(pr.beta / ((1.0 - pr.beta) * ww), w, &wt_ainv, 1.0);
                }
            } else {
                a_inv = a.clone().try_inverse().ok_or_else(|| Error::Numeric("CMA-ES factor became singular".into()))?;
            }
            continue;
        }
        let fy = f(y.as_slice());
        evaluations += 1;
        if fy.is_finite() && fy <= fx {
            let improved = fx - fy > opts.ftol * fx.abs().max(1e-300);
            x = y;
            p_succ = (1.0 - pr.cp) * p_succ + pr.cp;
            path = (1.0 - pr.c) * path + (pr.c * (2.0 - pr.c)).sqrt() * &az;
            let w = &a_inv * &path;
            let alpha = (1.0 - pr.ccov_plus).sqrt();
            let ww = w.dot(&w);
            if ww > 0.0 {
                let gamma = alpha / ww * ((1.0 + pr.ccov_plus * ww / (1.0 - pr.ccov_plus)).sqrt() - 1.0);
                right_rank_one(&mut a, &mut a_inv, alpha, gamma, &w);
            }
            fx = fy;
            ancestors.push_back(fx);
            if ancestors.len() > 5 {
                ancestors.pop_front();
            }
            stall = if improved { 0 } else { stall + 1 };
        } else {
            p_succ *= 1.0 - pr.cp;
            stall += 1;
            let fifth = ancestors.front().copied().unwrap_or(fx);
            if ancestors.len() == 5 && fy.is_finite() && fy > fifth {
                let zz = z.dot(&z);
                let mut cm = pr.ccov_minus;
                if 1.0 < cm * (2.0 * zz - 1.0) {
                    cm = 1.0 / (2.0 * zz - 1.0);
                }
                let alpha = (1.0 + cm).sqrt();
                let inner = 1.0 - cm * zz / (1.0 + cm);
                if zz > 0.0 && inner > 0.0 {
                    let gamma = alpha / zz * (inner.sqrt() - 1.0);
                    right_rank_one(&mut a, &mut a_inv, alpha, gamma, &z);
                }
            }
        }
        sigma *= ((p_succ - pr.p_target) / (pr.d * (1.0 - pr.p_target))).exp();
        if opts.record_history {
            history.push(fx);
        }
        if opts.stall_evaluations.is_some_and(|s| stall >= s) {
            converged = true;
            break;
        }
        if sigma * a.amax() < 1e-14 * (1.0 + x.amax()) {
            converged = true;
            break;
        }
    }
    Ok(CmaesResult { x: x.iter().copied().collect(), f: fx, evaluations, infeasible_samples, history, converged })
}
