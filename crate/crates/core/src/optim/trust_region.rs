//! Quasi-Newton trust-region minimization with a Steihaug–Toint CG subproblem.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct TrustRegionOptions {
    pub max_iter: usize,
    /// Stop when `‖g‖∞ ≤ gtol·max(1, |f|)`.
    pub gtol: f64,
    pub initial_radius: f64,
    pub max_radius: f64,
}

impl Default for TrustRegionOptions {
    fn default() -> Self {
        Self { max_iter: 500, gtol: 1e-6, initial_radius: 1.0, max_radius: 1e6 }
    }
}

#[derive(Debug, Clone)]
pub struct TrustRegionResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad_inf_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Approximate solution of `min gᵀp + ½pᵀBp` subject to `‖p‖ ≤ Δ`.
fn steihaug(b: &DMatrix<f64>, g: &DVector<f64>, radius: f64) -> DVector<f64> {
    let n = g.len();
    let mut p = DVector::zeros(n);
    let mut r = g.clone();
    let mut d = -g.clone();
    let tol = (1e-10f64).max(g.norm().sqrt().min(0.5) * g.norm());
    if r.norm() <= tol {
        return p;
    }
    for _ in 0..(2 * n).max(10) {
        let bd = b * &d;
        let curv = d.dot(&bd);
        if curv <= 0.0 {
            return &p + to_boundary(&p, &d, radius) * &d;
        }
        let rr = r.dot(&r);
        let alpha = rr / curv;
        let next = &p + alpha * &d;
        if next.norm() >= radius {
            return &p + to_boundary(&p, &d, radius) * &d;
        }
        p = next;
        r += alpha * bd;
        let rr_new = r.dot(&r);
        if rr_new.sqrt() <= tol {
            break;
        }
        d = -&r + (rr_new / rr) * d;
    }
    p
}

/// Positive τ with `‖p + τd‖ = Δ`.
fn to_boundary(p: &DVector<f64>, d: &DVector<f64>, radius: f64) -> f64 {
    let a = d.dot(d);
    let b = 2.0 * p.dot(d);
    let c = p.dot(p) - radius * radius;
    let disc = (b * b - 4.0 * a * c).max(0.0).sqrt();
    if b >= 0.0 {
        // stable root of the quadratic
        -2.0 * c / (b + disc)
    } else {
        (-b + disc) / (2.0 * a)
    }
}

/// Minimizes `fg`, which returns the objective and its gradient.
///
/// Trial points where `fg` errors or returns a non-finite value are rejected
/// and the radius shrinks.
pub fn trust_region_minimize<F>(mut fg: F, start: &[f64], opts: &TrustRegionOptions) -> Result<TrustRegionResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let n = start.len();
    let (mut f, g0) = fg(start)?;
    if !f.is_finite() || g0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("objective is not finite at the starting point".into()));
    }
    let mut evaluations = 1;
    let mut x = DVector::from_column_slice(start);
    let mut g = DVector::from_vec(g0);
    let mut b = DMatrix::<f64>::identity(n, n);
    let mut first_update = true;
    let mut radius = opts.initial_radius.min(opts.max_radius).max(1e-8 * (1.0 + x.norm()));
    let mut iterations = 0;
    let converged = |g: &DVector<f64>, f: f64| g.amax() <= opts.gtol * f.abs().max(1.0);
    while iterations < opts.max_iter {
        if converged(&g, f) {
            break;
        }
        iterations += 1;
        let step = steihaug(&b, &g, radius);
        let predicted = -(g.dot(&step) + 0.5 * step.dot(&(&b * &step)));
        let trial = &x + &step;
        evaluations += 1;
        let outcome = fg(trial.as_slice())
            .ok()
            .filter(|(ft, gt)| ft.is_finite() && gt.iter().all(|v| v.is_finite()));
        let Some((ft, gt)) = outcome else {
            radius = 0.25 * step.norm();
            if radius < 1e-14 * (1.0 + x.norm()) {
                break;
            }
            continue;
        };
        let gt = DVector::from_vec(gt);
        let actual = f - ft;
        let rho = if predicted > 0.0 { actual / predicted } else { -1.0 };
        // BFGS update from every evaluated step, accepted or not
        let s = &step;
        let y = &gt - &g;
        let sy = s.dot(&y);
        if sy > 1e-10 * s.norm() * y.norm() {
            if first_update {
                b = DMatrix::identity(n, n) * (y.dot(&y) / sy);
                first_update = false;
            }
            let bs = &b * s;
            let sbs = s.dot(&bs);
            if sbs > 0.0 {
                b -= (&bs * bs.transpose()) / sbs;
                b += (&y * y.transpose()) / sy;
            }
        }
        let step_norm = step.norm();
        if rho < 0.25 {
            radius = 0.25 * step_norm;
        } else if rho > 0.75 && step_norm >= 0.99 * radius {
            radius = (2.0 * radius).min(opts.max_radius);
        }
        if rho > 1e-4 && actual >= 0.0 {
            x = trial;
            f = ft;
            g = gt;
        }
        if radius < 1e-14 * (1.0 + x.norm()) {
            break;
        }
    }
    let grad_inf_norm = g.amax();
    Ok(TrustRegionResult {
        converged: converged(&g, f),
        x: x.iter().copied().collect(),
        f,
        grad_inf_norm,
        iterations,
        evaluations,
    })
}
