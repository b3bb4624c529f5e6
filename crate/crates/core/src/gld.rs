//! The FKML generalized lambda distribution.
//!
//! The distribution is defined through its quantile function
//!
//! ```text
//! Q(u; λ) = λ1 + ( (u^λ3 − 1)/λ3 − ((1−u)^λ4 − 1)/λ4 ) / λ2
//! ```
//!
//! Everything else (density, CDF, moments, payoff) is derived from `Q`.
//! Internally the latent probability is carried as a [`Latent`] holding both
//! `ln u` and `ln(1−u)`, so far tails on either side keep full precision.
//! Root solving for `Q(u) = y` runs on the logit `t = ln(u/(1−u))`, where the
//! quantile is close to linear for moderate shapes.

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;
use statrs::function::gamma::digamma;

use crate::error::{Error, Result};

/// Below this magnitude a shape parameter is treated through its λ → 0 expansion.
pub const SHAPE_EPS: f64 = 1e-6;

/// Default relative tolerance of the quantile inversion.
pub const DEFAULT_INVERSION_TOL: f64 = 1e-10;

/// Iteration cap of the quantile inversion.
pub const MAX_INVERSION_ITER: usize = 200;

/// Largest logit magnitude explored by the inversion. `e^-700` is still a
/// normal double, so both tails stay representable.
pub const LOGIT_LIMIT: f64 = 700.0;

/// Open-interval guard applied to uniforms in [`sample`].
pub const SAMPLE_EPS: f64 = 1e-15;

/// The four GLD parameters at one input point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaVector {
    /// Location.
    pub l1: f64,
    /// Scale, strictly positive.
    pub l2: f64,
    /// Left shape.
    pub l3: f64,
    /// Right shape.
    pub l4: f64,
}

impl LambdaVector {
    /// Builds a validated parameter vector.
    pub fn new(l1: f64, l2: f64, l3: f64, l4: f64) -> Result<Self> {
        let lam = Self { l1, l2, l3, l4 };
        lam.validate()?;
        Ok(lam)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l1.is_finite() && self.l2.is_finite() && self.l3.is_finite() && self.l4.is_finite()) {
            return Err(Error::Domain(format!("non-finite GLD parameters {self:?}")));
        }
        if self.l2 <= 0.0 {
            return Err(Error::Domain(format!("GLD scale λ2 must be positive, got {}", self.l2)));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.l1, self.l2, self.l3, self.l4]
    }

    /// Floors both shape parameters at `floor`.
    pub fn with_shape_floor(&self, floor: f64) -> Self {
        Self { l3: self.l3.max(floor), l4: self.l4.max(floor), ..*self }
    }
}

/// Support `[lower, upper]` of a GLD; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportInterval {
    pub lower: f64,
    pub upper: f64,
}

impl SupportInterval {
    pub fn contains(&self, y: f64) -> bool {
        y >= self.lower && y <= self.upper
    }
}

/// A latent probability level carried together with its logarithms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Latent {
    pub u: f64,
    pub ln_u: f64,
    pub ln_1mu: f64,
}

impl Latent {
    pub fn from_u(u: f64) -> Self {
        Self { u, ln_u: u.ln(), ln_1mu: (-u).ln_1p() }
    }

    /// Level with logit `t = ln(u/(1−u))`.
    pub fn from_logit(t: f64) -> Self {
        let ln_u = -softplus(-t);
        let ln_1mu = -softplus(t);
        Self { u: ln_u.exp(), ln_u, ln_1mu }
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `(e^{λ·L} − 1)/λ`, i.e. `(u^λ − 1)/λ` with `L = ln u`; equals `L` at λ = 0.
pub(crate) fn box_cox(log_u: f64, lam: f64) -> f64 {
    if log_u == f64::NEG_INFINITY {
        return if lam > 0.0 { -1.0 / lam } else { f64::NEG_INFINITY };
    }
    if lam.abs() < SHAPE_EPS {
        let z = lam * log_u;
        log_u * (1.0 + z / 2.0 + z * z / 6.0)
    } else {
        (lam * log_u).exp_m1() / lam
    }
}

/// Derivative of [`box_cox`] with respect to λ: `L²·S(λL)` where
/// `S(z) = (z·e^z − (e^z − 1))/z²`, expanded as a series near zero.
pub(crate) fn box_cox_dlam(log_u: f64, lam: f64) -> f64 {
    let z = lam * log_u;
    let s = if z.abs() < 0.5 {
        // Σ_{k≥2} (k−1)/k! · z^{k−2}
        let mut sum = 0.0;
        let mut fact = 2.0;
        let mut zp = 1.0;
        for k in 2..22 {
            sum += (k as f64 - 1.0) / fact * zp;
            fact *= (k + 1) as f64;
            zp *= z;
        }
        sum
    } else {
        (z * z.exp() - z.exp_m1()) / (z * z)
    };
    log_u * log_u * s
}

fn check_u_open(u: f64) -> Result<()> {
    if u > 0.0 && u < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("latent probability must lie in (0,1), got {u}")))
    }
}

/// Support bounds `[B_l, B_u]`.
pub fn support_bounds(lam: &LambdaVector) -> Result<SupportInterval> {
    lam.validate()?;
    Ok(support_unchecked(lam))
}

pub(crate) fn support_unchecked(lam: &LambdaVector) -> SupportInterval {
    let lower = if lam.l3 > 0.0 { lam.l1 - 1.0 / (lam.l2 * lam.l3) } else { f64::NEG_INFINITY };
    let upper = if lam.l4 > 0.0 { lam.l1 + 1.0 / (lam.l2 * lam.l4) } else { f64::INFINITY };
    SupportInterval { lower, upper }
}

/// Quantile at a latent level.
pub(crate) fn quantile_latent(lam: &LambdaVector, p: &Latent) -> f64 {
    lam.l1 + (box_cox(p.ln_u, lam.l3) - box_cox(p.ln_1mu, lam.l4)) / lam.l2
}

/// `ln D` with `D = u^{λ3−1} + (1−u)^{λ4−1}`, so that `Q'(u) = D/λ2`.
fn ln_shape_sum(lam: &LambdaVector, p: &Latent) -> (f64, f64, f64) {
    let a = if lam.l3 == 1.0 { 0.0 } else { (lam.l3 - 1.0) * p.ln_u };
    let b = if lam.l4 == 1.0 { 0.0 } else { (lam.l4 - 1.0) * p.ln_1mu };
    let m = a.max(b);
    if m == f64::INFINITY {
        return (f64::INFINITY, a, b);
    }
    (m + ((a - m).exp() + (b - m).exp()).ln(), a, b)
}

/// Quantile function `Q(u; λ)`. Endpoints map to the support bounds.
pub fn quantile(u: f64, lam: &LambdaVector) -> Result<f64> {
    lam.validate()?;
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::Domain(format!("probability must lie in [0,1], got {u}")));
    }
    let s = support_unchecked(lam);
    if u == 0.0 {
        return Ok(s.lower);
    }
    if u == 1.0 {
        return Ok(s.upper);
    }
    Ok(quantile_latent(lam, &Latent::from_u(u)))
}

/// Quantile density `Q'(u; λ)`.
pub fn quantile_density(u: f64, lam: &LambdaVector) -> Result<f64> {
    lam.validate()?;
    check_u_open(u)?;
    let (ln_d, _, _) = ln_shape_sum(lam, &Latent::from_u(u));
    Ok((ln_d - lam.l2.ln()).exp())
}

/// Solves `Q(u; λ) = y` for the latent level. Returns `None` when `y` lies
/// outside the support.
pub fn invert_latent(y: f64, lam: &LambdaVector, tol: f64) -> Result<Option<Latent>> {
    lam.validate()?;
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    if !y.is_finite() {
        return Err(Error::Domain(format!("cannot invert non-finite value {y}")));
    }
    let s = support_unchecked(lam);
    if !s.contains(y) {
        return Ok(None);
    }
    let q_of = |t: f64| quantile_latent(lam, &Latent::from_logit(t));
    let mut lo = -LOGIT_LIMIT;
    let mut hi = LOGIT_LIMIT;
    if y <= q_of(lo) {
        return Ok(Some(Latent::from_logit(lo)));
    }
    if y >= q_of(hi) {
        return Ok(Some(Latent::from_logit(hi)));
    }
    let scale = tol * y.abs().max(1.0);
    let mut t = (lam.l2 * (y - lam.l1)).clamp(lo * 0.5, hi * 0.5);
    for _ in 0..MAX_INVERSION_ITER {
        let p = Latent::from_logit(t);
        let r = quantile_latent(lam, &p) - y;
        if r < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        // dQ/dt = Q'(u)·u(1−u)
        let (ln_d, _, _) = ln_shape_sum(lam, &p);
        let slope = (ln_d + p.ln_u + p.ln_1mu - lam.l2.ln()).exp();
        let newton = t - r / slope;
        if r.abs() <= scale {
            // one polishing step keeps the result smooth in λ
            if newton.is_finite() && newton > lo && newton < hi {
                return Ok(Some(Latent::from_logit(newton)));
            }
            return Ok(Some(p));
        }
        if hi - lo <= 4.0 * f64::EPSILON * t.abs().max(1.0) {
            return Ok(Some(p));
        }
        t = if newton.is_finite() && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    Err(Error::Numeric(format!(
        "quantile inversion did not converge for y = {y}, λ = {lam:?}"
    )))
}

/// Solves `Q(u; λ) = y`, returning the latent probability, or `None` when `y`
/// lies outside the support.
pub fn invert_quantile(y: f64, lam: &LambdaVector, tol: f64) -> Result<Option<f64>> {
    Ok(invert_latent(y, lam, tol)?.map(|p| p.u))
}

/// Log-density at a latent level: `−ln Q'(u)`.
pub(crate) fn ln_pdf_latent(lam: &LambdaVector, p: &Latent) -> f64 {
    let (ln_d, _, _) = ln_shape_sum(lam, p);
    lam.l2.ln() - ln_d
}

/// Probability density, zero outside the support.
pub fn pdf(y: f64, lam: &LambdaVector) -> Result<f64> {
    Ok(match invert_latent(y, lam, DEFAULT_INVERSION_TOL)? {
        Some(p) => ln_pdf_latent(lam, &p).exp(),
        None => 0.0,
    })
}

/// Cumulative distribution function.
pub fn cdf(y: f64, lam: &LambdaVector) -> Result<f64> {
    let s = support_bounds(lam)?;
    if y <= s.lower {
        return Ok(0.0);
    }
    if y >= s.upper {
        return Ok(1.0);
    }
    Ok(invert_latent(y, lam, DEFAULT_INVERSION_TOL)?.map_or(0.0, |p| p.u))
}

/// Log-density and its gradient with respect to `(λ1, λ2, λ3, λ4)`.
///
/// The latent level depends on λ through `Q(u; λ) = y`; its derivative comes
/// from the implicit function theorem, `du/dλk = −(∂Q/∂λk)/(∂Q/∂u)`.
/// Returns `None` when `y` lies outside the support.
pub fn ln_pdf_with_gradient(y: f64, lam: &LambdaVector, tol: f64) -> Result<Option<(f64, [f64; 4])>> {
    let Some(p) = invert_latent(y, lam, tol)? else {
        return Ok(None);
    };
    Ok(Some(ln_pdf_gradient_at(y, lam, &p)))
}

pub(crate) fn ln_pdf_gradient_at(y: f64, lam: &LambdaVector, p: &Latent) -> (f64, [f64; 4]) {
    let (a, b) = (lam.l3, lam.l4);
    let (ln_d, ea, eb) = ln_shape_sum(lam, p);
    let ln_l2 = lam.l2.ln();
    let value = ln_l2 - ln_d;
    // weights of the two terms of D
    let wp = (ea - ln_d).exp();
    let wq = (eb - ln_d).exp();
    // (∂Q'/∂u)/Q'
    let left = if a == 1.0 { 0.0 } else { (a - 1.0) * (ea - p.ln_u - ln_d).exp() };
    let right = if b == 1.0 { 0.0 } else { (b - 1.0) * (eb - p.ln_1mu - ln_d).exp() };
    let r = left - right;
    // 1/Q'(u)
    let inv_j = (ln_l2 - ln_d).exp();
    let dq1 = 1.0;
    let dq2 = -(y - lam.l1) / lam.l2;
    let dq3 = box_cox_dlam(p.ln_u, a) / lam.l2;
    let dq4 = -box_cox_dlam(p.ln_1mu, b) / lam.l2;
    let g1 = r * dq1 * inv_j;
    let g2 = 1.0 / lam.l2 + r * dq2 * inv_j;
    let g3 = -wp * p.ln_u + r * dq3 * inv_j;
    let g4 = -wq * p.ln_1mu + r * dq4 * inv_j;
    (value, [g1, g2, g3, g4])
}

/// Log-density at a fixed latent level and its gradient in λ with the level
/// held constant.
pub(crate) fn ln_pdf_level_gradient(lam: &LambdaVector, p: &Latent) -> (f64, [f64; 4]) {
    let (ln_d, ea, eb) = ln_shape_sum(lam, p);
    let wp = (ea - ln_d).exp();
    let wq = (eb - ln_d).exp();
    (lam.l2.ln() - ln_d, [0.0, 1.0 / lam.l2, -wp * p.ln_u, -wq * p.ln_1mu])
}

/// Partial derivatives `(∂Q/∂u, ∂Q/∂λ1, ∂Q/∂λ2, ∂Q/∂λ3, ∂Q/∂λ4)`.
pub fn quantile_partials(u: f64, lam: &LambdaVector) -> Result<[f64; 5]> {
    lam.validate()?;
    check_u_open(u)?;
    let p = Latent::from_u(u);
    let (ln_d, _, _) = ln_shape_sum(lam, &p);
    let dqdu = (ln_d - lam.l2.ln()).exp();
    let core = box_cox(p.ln_u, lam.l3) - box_cox(p.ln_1mu, lam.l4);
    Ok([
        dqdu,
        1.0,
        -core / (lam.l2 * lam.l2),
        box_cox_dlam(p.ln_u, lam.l3) / lam.l2,
        -box_cox_dlam(p.ln_1mu, lam.l4) / lam.l2,
    ])
}

fn check_moments(lam: &LambdaVector) -> Result<()> {
    if lam.l3 <= -0.5 || lam.l4 <= -0.5 {
        return Err(Error::NonexistentMoment(format!(
            "variance requires λ3, λ4 > −0.5, got λ3 = {}, λ4 = {}",
            lam.l3, lam.l4
        )));
    }
    Ok(())
}

/// `Cov((U^a − 1)/a, ((1−U)^b − 1)/b)` for `a, b` away from zero.
fn shape_cov_regular(a: f64, b: f64) -> f64 {
    let beta = ln_beta(a + 1.0, b + 1.0).exp();
    (beta - 1.0 / ((a + 1.0) * (b + 1.0))) / (a * b)
}

/// The `a = 0` limit: `Cov(ln U, ((1−U)^b − 1)/b)`.
fn shape_cov_left_limit(b: f64) -> f64 {
    (digamma(1.0) - digamma(b + 2.0) + 1.0) / ((b + 1.0) * b)
}

/// `Cov(ln U, ln(1−U)) = 1 − π²/6`.
const SHAPE_COV_ORIGIN: f64 = 1.0 - std::f64::consts::PI * std::f64::consts::PI / 6.0;

/// Covariance of the two shape terms, with the removable singularities at
/// `a = 0` and `b = 0` bridged by linear interpolation between the exact limit
/// and the regular formula evaluated at `±SHAPE_EPS`.
fn shape_cov(a: f64, b: f64) -> f64 {
    let small_a = a.abs() < SHAPE_EPS;
    let small_b = b.abs() < SHAPE_EPS;
    let side = |x: f64| if x < 0.0 { -SHAPE_EPS } else { SHAPE_EPS };
    match (small_a, small_b) {
        (false, false) => shape_cov_regular(a, b),
        (true, false) => {
            let e = side(a);
            let l = shape_cov_left_limit(b);
            l + a * (shape_cov_regular(e, b) - l) / e
        }
        (false, true) => {
            // symmetric under (a, b, U) → (b, a, 1−U)
            let e = side(b);
            let l = shape_cov_left_limit(a);
            l + b * (shape_cov_regular(a, e) - l) / e
        }
        (true, true) => {
            let ea = side(a);
            let eb = side(b);
            let slope_a = (shape_cov_left_limit(ea) - SHAPE_COV_ORIGIN) / ea;
            let slope_b = (shape_cov_left_limit(eb) - SHAPE_COV_ORIGIN) / eb;
            SHAPE_COV_ORIGIN + a * slope_a + b * slope_b
        }
    }
}

/// Mean and variance. Requires `λ3, λ4 > −0.5`.
pub fn mean_variance(lam: &LambdaVector) -> Result<(f64, f64)> {
    lam.validate()?;
    check_moments(lam)?;
    let (a, b) = (lam.l3, lam.l4);
    let mean = lam.l1 - (1.0 / (a + 1.0) - 1.0 / (b + 1.0)) / lam.l2;
    let var_left = 1.0 / ((2.0 * a + 1.0) * (a + 1.0) * (a + 1.0));
    let var_right = 1.0 / ((2.0 * b + 1.0) * (b + 1.0) * (b + 1.0));
    let v = (var_left + var_right - 2.0 * shape_cov(a, b)) / (lam.l2 * lam.l2);
    Ok((mean, v))
}

/// Draws `n` values by inverse transform.
pub fn sample<R: Rng + ?Sized>(lam: &LambdaVector, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    lam.validate()?;
    Ok((0..n)
        .map(|_| {
            let u = SAMPLE_EPS + (1.0 - 2.0 * SAMPLE_EPS) * rng.random::<f64>();
            quantile_latent(lam, &Latent::from_u(u))
        })
        .collect())
}

/// `E[max(Y − K, 0)]`.
///
/// Written as `∫_{u_K}^1 (Q(u) − K) du` with `Q(u_K) = K`, integrated in
/// closed form term by term; each term stays regular as λ3, λ4 → 0.
pub fn expected_payoff(lam: &LambdaVector, strike: f64) -> Result<f64> {
    lam.validate()?;
    if !strike.is_finite() {
        return Err(Error::Domain(format!("strike must be finite, got {strike}")));
    }
    let s = support_unchecked(lam);
    if strike >= s.upper {
        return Ok(0.0);
    }
    if lam.l4 <= -1.0 {
        return Err(Error::NonexistentMoment(format!("upper tail has no mean for λ4 = {}", lam.l4)));
    }
    let p = if strike <= s.lower {
        if lam.l3 <= -1.0 {
            return Err(Error::NonexistentMoment(format!("lower tail has no mean for λ3 = {}", lam.l3)));
        }
        Latent { u: 0.0, ln_u: f64::NEG_INFINITY, ln_1mu: 0.0 }
    } else {
        invert_latent(strike, lam, 1e-14)?
            .ok_or_else(|| Error::Numeric(format!("strike {strike} not located inside the support")))?
    };
    let (a, b) = (lam.l3, lam.l4);
    let tail = p.ln_1mu.exp();
    // ∫_{u_K}^1 (u^a − 1)/a du
    let left_term = if p.u == 0.0 { 0.0 } else { p.u * box_cox(p.ln_u, a) };
    let int_left = (-left_term - tail) / (a + 1.0);
    // ∫_{u_K}^1 ((1−u)^b − 1)/b du
    let int_right = tail * (box_cox(p.ln_1mu, b) - 1.0) / (b + 1.0);
    let value = (lam.l1 - strike) * tail + (int_left - int_right) / lam.l2;
    Ok(value.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lam(a: f64, b: f64, c: f64, d: f64) -> LambdaVector {
        LambdaVector::new(a, b, c, d).unwrap()
    }

    #[test]
    fn quantile_reference_values() {
        assert_relative_eq!(quantile(0.5, &lam(0.0, 1.0, 0.2, 0.2)).unwrap(), 0.0, epsilon = 1e-15);
        assert_relative_eq!(quantile(0.75, &lam(0.0, 1.0, 1.0, 1.0)).unwrap(), 0.5, epsilon = 1e-15);
        // mpmath, 50 digits: 1 + ((0.3^0.5 − 1)/0.5 − (0.7^−0.1 − 1)/(−0.1))/2
        let v = quantile(0.3, &lam(1.0, 2.0, 0.5, -0.1)).unwrap();
        assert_relative_eq!(v, 0.7292786070567372, epsilon = 1e-14);
    }

    #[test]
    fn quantile_endpoints_are_support_bounds() {
        let l = lam(0.0, 1.0, 0.5, -0.2);
        assert_eq!(quantile(0.0, &l).unwrap(), -2.0);
        assert_eq!(quantile(1.0, &l).unwrap(), f64::INFINITY);
        assert!(quantile(1.5, &l).is_err());
    }

    #[test]
    fn zero_shape_is_logistic() {
        let l = lam(0.0, 1.0, 0.0, 0.0);
        let u: f64 = 0.2;
        assert_relative_eq!(quantile(u, &l).unwrap(), (u / (1.0 - u)).ln(), epsilon = 1e-14);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(LambdaVector::new(0.0, 0.0, 0.1, 0.1).is_err());
        assert!(LambdaVector::new(0.0, 1.0, f64::NAN, 0.1).is_err());
        let bad = LambdaVector { l1: 0.0, l2: -1.0, l3: 0.0, l4: 0.0 };
        assert!(quantile(0.5, &bad).is_err());
        assert!(pdf(0.0, &bad).is_err());
    }

    #[test]
    fn quantile_density_reference_values() {
        assert_relative_eq!(quantile_density(0.5, &lam(0.0, 1.0, 1.0, 1.0)).unwrap(), 2.0, epsilon = 1e-14);
        assert_relative_eq!(quantile_density(0.5, &lam(0.0, 2.0, 1.0, 1.0)).unwrap(), 1.0, epsilon = 1e-14);
        let l = lam(0.0, 1.0, 0.13, 0.13);
        let h = 1e-6;
        let fd = (quantile(0.1 + h, &l).unwrap() - quantile(0.1 - h, &l).unwrap()) / (2.0 * h);
        assert_relative_eq!(quantile_density(0.1, &l).unwrap(), fd, max_relative = 1e-8);
        assert!(quantile_density(0.0, &l).is_err());
        assert!(quantile_density(1.0, &l).is_err());
    }

    #[test]
    fn inversion_examples() {
        let u = invert_quantile(0.0, &lam(0.0, 1.0, 1.0, 1.0), 1e-10).unwrap().unwrap();
        assert_relative_eq!(u, 0.5, epsilon = 1e-12);
        assert_eq!(invert_quantile(5.0, &lam(0.0, 1.0, 0.5, 0.5), 1e-10).unwrap(), None);
        let l = lam(0.0, 1.0, 0.13, 0.13);
        let u = invert_quantile(0.3, &l, 1e-10).unwrap().unwrap();
        assert!((quantile(u, &l).unwrap() - 0.3).abs() <= 1e-10);
    }

    #[test]
    fn inversion_reaches_far_tails() {
        let l = lam(0.0, 1.0, -0.3, -0.3);
        for &y in &[-1e6, -1e3, 1e3, 1e6] {
            let p = invert_latent(y, &l, 1e-12).unwrap().unwrap();
            let back = quantile_latent(&l, &p);
            assert!((back - y).abs() <= 1e-12 * y.abs(), "{y} vs {back}");
        }
    }

    #[test]
    fn pdf_examples() {
        assert_relative_eq!(pdf(0.0, &lam(0.0, 1.0, 1.0, 1.0)).unwrap(), 0.5, epsilon = 1e-12);
        assert_eq!(pdf(10.0, &lam(0.0, 1.0, 0.5, 0.5)).unwrap(), 0.0);
        // At the median of a symmetric GLD, u = 1/2 and f = λ2 / (2·0.5^{λ3−1}).
        let l = lam(0.0, 1.0, 0.13, 0.13);
        let expected = 1.0 / (2.0 * 0.5f64.powf(0.13 - 1.0));
        assert_relative_eq!(pdf(0.0, &l).unwrap(), expected, max_relative = 1e-12);
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(cdf(-1.0, &lam(0.0, 1.0, 1.0, 1.0)).unwrap(), 0.0);
        assert_relative_eq!(cdf(0.0, &lam(0.0, 1.0, 0.2, 0.2)).unwrap(), 0.5, epsilon = 1e-12);
        let l = lam(0.5, 1.3, 0.1, -0.2);
        let u = cdf(0.7, &l).unwrap();
        assert!((quantile(u, &l).unwrap() - 0.7).abs() < 1e-10);
    }

    #[test]
    fn support_examples() {
        let s = support_bounds(&lam(0.0, 1.0, 0.5, 0.5)).unwrap();
        assert_eq!((s.lower, s.upper), (-2.0, 2.0));
        let s = support_bounds(&lam(0.0, 1.0, -0.1, 0.3)).unwrap();
        assert_eq!(s.lower, f64::NEG_INFINITY);
        assert_relative_eq!(s.upper, 10.0 / 3.0, epsilon = 1e-15);
        let s = support_bounds(&lam(2.0, 4.0, -0.2, -0.2)).unwrap();
        assert_eq!((s.lower, s.upper), (f64::NEG_INFINITY, f64::INFINITY));
    }

    #[test]
    fn moments_closed_forms() {
        let (m, v) = mean_variance(&lam(0.0, 1.0, 1.0, 1.0)).unwrap();
        assert_relative_eq!(m, 0.0, epsilon = 1e-15);
        assert_relative_eq!(v, 1.0 / 3.0, epsilon = 1e-14);
        let (m, v) = mean_variance(&lam(0.0, 1.0, 0.0, 0.0)).unwrap();
        assert_relative_eq!(m, 0.0, epsilon = 1e-15);
        assert_relative_eq!(v, std::f64::consts::PI.powi(2) / 3.0, epsilon = 1e-12);
        assert!(matches!(mean_variance(&lam(0.0, 1.0, -0.6, 0.2)), Err(Error::NonexistentMoment(_))));
    }

    #[test]
    fn moments_continuous_through_zero_shape() {
        let base = mean_variance(&lam(0.0, 1.0, 0.0, 0.3)).unwrap().1;
        for &e in &[1e-7, -1e-7, 2e-6, -2e-6] {
            let v = mean_variance(&lam(0.0, 1.0, e, 0.3)).unwrap().1;
            assert_relative_eq!(v, base, max_relative = 1e-5);
        }
        let origin = mean_variance(&lam(0.0, 1.0, 0.0, 0.0)).unwrap().1;
        let near = mean_variance(&lam(0.0, 1.0, 3e-7, -5e-7)).unwrap().1;
        let off = mean_variance(&lam(0.0, 1.0, 3e-6, -5e-6)).unwrap().1;
        assert_relative_eq!(near, origin, max_relative = 1e-5);
        assert_relative_eq!(off, origin, max_relative = 1e-4);
    }

    #[test]
    fn moments_match_monte_carlo() {
        // 10^7 inverse-transform draws of the logistic case
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let l = lam(0.0, 1.0, 0.0, 0.0);
        let xs = sample(&l, 2_000_000, &mut rng).unwrap();
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        // var of the sample variance ≈ (μ4 − σ⁴)/n with μ4/σ⁴ = 4.2 for the logistic
        let sigma2 = std::f64::consts::PI.powi(2) / 3.0;
        let se = (3.2f64).sqrt() * sigma2 / n.sqrt();
        assert!((v - sigma2).abs() < 4.0 * se, "{v} vs {sigma2}");
    }

    #[test]
    fn sampling_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs = sample(&lam(0.0, 1.0, 1.0, 1.0), 100_000, &mut rng).unwrap();
        assert!(xs.iter().all(|x| (-1.0..=1.0).contains(x)));
        let l = lam(3.0, 1.0, 0.2, 0.2);
        let xs = sample(&l, 100_000, &mut rng).unwrap();
        let n = xs.len() as f64;
        let (_, v) = mean_variance(&l).unwrap();
        let m = xs.iter().sum::<f64>() / n;
        assert!((m - 3.0).abs() < 3.0 * (v / n).sqrt());
        let a = sample(&l, 10, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = sample(&l, 10, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sample_passes_ks_against_cdf() {
        let l = lam(0.0, 1.0, 0.13, -0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut xs = sample(&l, 100_000, &mut rng).unwrap();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = xs.len() as f64;
        let mut d: f64 = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            let f = cdf(x, &l).unwrap();
            d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
        }
        // 1% critical value of the Kolmogorov distribution
        assert!(d < 1.628 / n.sqrt(), "KS statistic {d}");
    }

    #[test]
    fn payoff_regimes() {
        let l = lam(0.0, 1.0, 0.5, 0.5);
        assert_eq!(expected_payoff(&l, 2.0).unwrap(), 0.0);
        assert_relative_eq!(expected_payoff(&l, -2.0).unwrap(), 2.0, epsilon = 1e-12);
        assert_relative_eq!(expected_payoff(&l, -5.0).unwrap(), 5.0, epsilon = 1e-12);
        // uniform on [−1, 1]: E[max(Y − K, 0)] = (1 − K)²/4
        let u = lam(0.0, 1.0, 1.0, 1.0);
        assert_relative_eq!(expected_payoff(&u, 0.2).unwrap(), 0.16, epsilon = 1e-12);
    }

    #[test]
    fn payoff_matches_monte_carlo() {
        let l = lam(1.0, 2.0, 0.1, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs = sample(&l, 2_000_000, &mut rng).unwrap();
        let pay: Vec<f64> = xs.iter().map(|x| (x - 1.0).max(0.0)).collect();
        let n = pay.len() as f64;
        let m = pay.iter().sum::<f64>() / n;
        let sd = (pay.iter().map(|p| (p - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let exact = expected_payoff(&l, 1.0).unwrap();
        assert!((exact - m).abs() < 3.0 * sd / n.sqrt(), "{exact} vs {m}");
    }

    #[test]
    fn payoff_continuous_through_zero_shape() {
        let a = expected_payoff(&lam(0.0, 1.0, 0.0, 0.0), 0.5).unwrap();
        let b = expected_payoff(&lam(0.0, 1.0, 1e-5, -1e-5), 0.5).unwrap();
        // logistic: E[max(Y−K,0)] = ln(1 + e^{−K})
        assert_relative_eq!(a, (1.0 + (-0.5f64).exp()).ln(), max_relative = 1e-12);
        assert_relative_eq!(a, b, max_relative = 1e-4);
    }

    fn fd_partials(u: f64, l: &LambdaVector) -> [f64; 5] {
        let h = 1e-6;
        let q = |u: f64, l: &LambdaVector| quantile(u, l).unwrap();
        let mut out = [0.0; 5];
        out[0] = (q(u + h, l) - q(u - h, l)) / (2.0 * h);
        for k in 0..4 {
            let mut p = l.as_array();
            let mut m = l.as_array();
            p[k] += h;
            m[k] -= h;
            let lp = LambdaVector { l1: p[0], l2: p[1], l3: p[2], l4: p[3] };
            let lm = LambdaVector { l1: m[0], l2: m[1], l3: m[2], l4: m[3] };
            out[k + 1] = (q(u, &lp) - q(u, &lm)) / (2.0 * h);
        }
        out
    }

    #[test]
    fn partials_match_finite_differences() {
        let l = lam(0.0, 1.0, 0.2, -0.1);
        let exact = quantile_partials(0.3, &l).unwrap();
        let fd = fd_partials(0.3, &l);
        assert_eq!(exact[1], 1.0);
        for k in 0..5 {
            assert_relative_eq!(exact[k], fd[k], max_relative = 1e-5);
        }
        let u = quantile_partials(0.5, &lam(0.0, 1.0, 1.0, 1.0)).unwrap();
        assert_relative_eq!(u[0], 2.0, epsilon = 1e-14);
        assert!(quantile_partials(0.0, &l).is_err());
    }

    #[test]
    fn partials_at_zero_shape() {
        let l = lam(0.3, 1.7, 0.0, 0.0);
        let exact = quantile_partials(0.2, &l).unwrap();
        let fd = fd_partials(0.2, &l);
        for k in 0..5 {
            assert_relative_eq!(exact[k], fd[k], max_relative = 1e-3);
        }
        // limit value: ∂Q/∂λ3 = (ln u)²/(2λ2)
        assert_relative_eq!(exact[3], 0.2f64.ln().powi(2) / (2.0 * 1.7), max_relative = 1e-12);
    }

    #[test]
    fn log_density_gradient_matches_finite_differences() {
        let cases = [
            (0.4, lam(0.1, 1.3, 0.2, -0.1)),
            (-2.5, lam(0.0, 0.8, 0.13, 0.13)),
            (3.0, lam(0.5, 2.0, -0.2, 0.0)),
            (0.9, lam(0.0, 1.0, 1.5, 0.7)),
        ];
        for (y, l) in cases {
            let (_, g) = ln_pdf_with_gradient(y, &l, 1e-14).unwrap().unwrap();
            for k in 0..4 {
                let h = 1e-6;
                let mut p = l.as_array();
                let mut m = l.as_array();
                p[k] += h;
                m[k] -= h;
                let f = |a: [f64; 4]| {
                    let l = LambdaVector { l1: a[0], l2: a[1], l3: a[2], l4: a[3] };
                    ln_pdf_with_gradient(y, &l, 1e-14).unwrap().unwrap().0
                };
                let fd = (f(p) - f(m)) / (2.0 * h);
                assert!((g[k] - fd).abs() <= 1e-6 * fd.abs().max(1.0), "k={k} y={y} {l:?}: {} vs {fd}", g[k]);
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn lambdas() -> impl Strategy<Value = LambdaVector> {
            (-5.0..5.0f64, 0.1..10.0f64, -0.45..2.0f64, -0.45..2.0f64)
                .prop_map(|(a, b, c, d)| LambdaVector { l1: a, l2: b, l3: c, l4: d })
        }

        proptest! {
            #[test]
            fn quantile_is_increasing(l in lambdas(), u1 in 0.001..0.999f64, du in 1e-6..0.5f64) {
                let u2 = (u1 + du).min(0.9999);
                prop_assume!(u2 > u1);
                prop_assert!(quantile(u1, &l).unwrap() < quantile(u2, &l).unwrap());
            }

            #[test]
            fn inversion_round_trip(l in lambdas(), u in 0.0001..0.9999f64) {
                let y = quantile(u, &l).unwrap();
                let back = invert_quantile(y, &l, 1e-10).unwrap().unwrap();
                let y2 = quantile(back, &l).unwrap();
                prop_assert!((y2 - y).abs() <= 1e-10 * y.abs().max(1.0));
            }

            #[test]
            fn symmetric_shapes_give_symmetric_quantiles(
                l1 in -3.0..3.0f64, l2 in 0.2..5.0f64, s in -0.4..2.0f64, u in 0.01..0.99f64
            ) {
                let l = LambdaVector { l1, l2, l3: s, l4: s };
                let sum = quantile(u, &l).unwrap() + quantile(1.0 - u, &l).unwrap();
                prop_assert!((sum - 2.0 * l1).abs() < 1e-9 * (1.0 + l1.abs()) * (1.0 + 1.0 / l2));
            }

            #[test]
            fn partials_agree_with_differences(l in lambdas(), u in 0.05..0.95f64) {
                prop_assume!(l.l3.abs() > 0.01 && l.l4.abs() > 0.01);
                let exact = quantile_partials(u, &l).unwrap();
                let fd = fd_partials(u, &l);
                for k in 0..5 {
                    prop_assert!((exact[k] - fd[k]).abs() <= 1e-5 * fd[k].abs().max(1e-3));
                }
            }
        }
    }
}
