//! Orthonormal polynomial chaos bases.
//!
//! Uniform marginals use normalized Legendre polynomials on `[−1, 1]`,
//! Gaussian marginals normalized probabilists' Hermite polynomials. Inputs are
//! first mapped to the standard domain by an affine isoprobabilistic transform.

use std::cmp::Ordering;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed on uniform bounds, relative to the interval width.
const BOUND_SLACK: f64 = 1e-12;

/// Relative tolerance on the q-norm boundary of a hyperbolic truncation.
const QNORM_TOL: f64 = 1e-12;

/// Orthonormal polynomial family attached to a marginal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Legendre,
    Hermite,
}

/// Distribution of one input dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Marginal {
    Uniform { lower: f64, upper: f64 },
    Gaussian { mean: f64, std: f64 },
}

impl Marginal {
    pub fn uniform(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(Error::Domain(format!("uniform bounds must satisfy lower < upper, got [{lower}, {upper}]")));
        }
        Ok(Marginal::Uniform { lower, upper })
    }

    pub fn gaussian(mean: f64, std: f64) -> Result<Self> {
        if !(mean.is_finite() && std.is_finite() && std > 0.0) {
            return Err(Error::Domain(format!("Gaussian marginal needs std > 0, got {std}")));
        }
        Ok(Marginal::Gaussian { mean, std })
    }

    /// Builds a marginal from a family name and its two parameters.
    pub fn from_name(name: &str, a: f64, b: f64) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "uniform" => Self::uniform(a, b),
            "gaussian" | "normal" => Self::gaussian(a, b),
            other => Err(Error::Unsupported(format!(
                "marginal family '{other}' has no built-in orthonormal basis"
            ))),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            Marginal::Uniform { .. } => Family::Legendre,
            Marginal::Gaussian { .. } => Family::Hermite,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Marginal::Uniform { lower, upper } => Self::uniform(lower, upper).map(|_| ()),
            Marginal::Gaussian { mean, std } => Self::gaussian(mean, std).map(|_| ()),
        }
    }

    pub fn to_standard(&self, x: f64) -> Result<f64> {
        match *self {
            Marginal::Uniform { lower, upper } => {
                let slack = BOUND_SLACK * (upper - lower);
                if !(x >= lower - slack && x <= upper + slack) {
                    return Err(Error::Domain(format!("input {x} outside uniform bounds [{lower}, {upper}]")));
                }
                Ok((2.0 * (x - lower) / (upper - lower) - 1.0).clamp(-1.0, 1.0))
            }
            Marginal::Gaussian { mean, std } => {
                if !x.is_finite() {
                    return Err(Error::Domain(format!("non-finite input {x}")));
                }
                Ok((x - mean) / std)
            }
        }
    }

    pub fn from_standard(&self, z: f64) -> f64 {
        match *self {
            Marginal::Uniform { lower, upper } => lower + (z + 1.0) * 0.5 * (upper - lower),
            Marginal::Gaussian { mean, std } => mean + std * z,
        }
    }

    /// Maps a probability level to the physical input (inverse CDF).
    pub fn inverse_cdf(&self, p: f64) -> f64 {
        match *self {
            Marginal::Uniform { lower, upper } => lower + p * (upper - lower),
            Marginal::Gaussian { mean, std } => {
                use statrs::distribution::{ContinuousCDF, Normal};
                let n = Normal::new(mean, std).expect("validated Gaussian marginal");
                n.inverse_cdf(p)
            }
        }
    }
}

/// Independent marginals of all input dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MarginalSpec(Vec<Marginal>);

impl MarginalSpec {
    pub fn new(marginals: Vec<Marginal>) -> Result<Self> {
        if marginals.is_empty() {
            return Err(Error::Domain("at least one input dimension is required".into()));
        }
        for m in &marginals {
            m.validate()?;
        }
        Ok(Self(marginals))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.0
    }

    /// Isoprobabilistic map of a physical point to the standard domain.
    pub fn to_standard(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Domain(format!("expected {} inputs, got {}", self.dim(), x.len())));
        }
        self.0.iter().zip(x).map(|(m, &v)| m.to_standard(v)).collect()
    }

    pub fn from_standard(&self, z: &[f64]) -> Vec<f64> {
        self.0.iter().zip(z).map(|(m, &v)| m.from_standard(v)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.to_standard(x).is_ok()
    }
}

/// Value of the degree-`k` orthonormal polynomial at a standardized input.
pub fn univariate_eval(family: Family, degree: usize, x: f64) -> f64 {
    univariate_all(family, degree, x)[degree]
}

/// Values of all orthonormal polynomials of degree `0..=max_degree`.
pub fn univariate_all(family: Family, max_degree: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; max_degree + 1];
    out[0] = 1.0;
    if max_degree == 0 {
        return out;
    }
    match family {
        Family::Legendre => {
            // normalized recurrence: φ_{n+1} = (a_n x φ_n − a_n/a_{n−1} φ_{n−1}),
            // a_n = sqrt((2n+1)(2n+3))/(n+1)
            out[1] = 3f64.sqrt() * x;
            for n in 1..max_degree {
                let nf = n as f64;
                let a_n = ((2.0 * nf + 1.0) * (2.0 * nf + 3.0)).sqrt() / (nf + 1.0);
                let a_prev = ((2.0 * nf - 1.0) * (2.0 * nf + 1.0)).sqrt() / nf;
                out[n + 1] = a_n * (x * out[n] - out[n - 1] / a_prev);
            }
        }
        Family::Hermite => {
            out[1] = x;
            for n in 1..max_degree {
                let nf = n as f64;
                out[n + 1] = (x * out[n] - nf.sqrt() * out[n - 1]) / (nf + 1.0).sqrt();
            }
        }
    }
    out
}

/// Degrees of a multivariate tensor-product basis function.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(dim: usize) -> Self {
        Self(vec![0; dim])
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&d| d == 0)
    }

    pub fn q_norm(&self, q: f64) -> f64 {
        if q == 1.0 {
            return self.total_degree() as f64;
        }
        self.0.iter().map(|&d| (d as f64).powf(q)).sum::<f64>().powf(1.0 / q)
    }

    /// Graded ordering: total degree first, then reverse lexicographic so
    /// that `(1, 0)` precedes `(0, 1)`.
    pub fn graded_cmp(&self, other: &Self) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

/// An ordered set of distinct multi-indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationSet {
    dim: usize,
    indices: Vec<MultiIndex>,
    /// `(p, q)` when produced by [`enumerate_truncation`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    generator: Option<(usize, f64)>,
}

impl TruncationSet {
    /// Builds a set from explicit indices; sorts them and rejects duplicates.
    pub fn from_indices(dim: usize, mut indices: Vec<MultiIndex>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        if indices.iter().any(|a| a.0.len() != dim) {
            return Err(Error::Domain(format!("multi-index length differs from dimension {dim}")));
        }
        indices.sort_by(MultiIndex::graded_cmp);
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Domain("duplicate multi-index in truncation set".into()));
        }
        Ok(Self { dim, indices, generator: None })
    }

    /// The constant-only set.
    pub fn constant(dim: usize) -> Self {
        Self { dim, indices: vec![MultiIndex::zero(dim)], generator: Some((0, 1.0)) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn generator(&self) -> Option<(usize, f64)> {
        self.generator
    }

    pub fn max_degree(&self) -> u32 {
        self.indices.iter().flat_map(|a| a.0.iter().copied()).max().unwrap_or(0)
    }

    pub fn contains(&self, a: &MultiIndex) -> bool {
        self.indices.binary_search_by(|b| b.graded_cmp(a)).is_ok()
    }

    pub fn position(&self, a: &MultiIndex) -> Option<usize> {
        self.indices.binary_search_by(|b| b.graded_cmp(a)).ok()
    }

    pub fn is_subset_of(&self, other: &TruncationSet) -> bool {
        self.indices.iter().all(|a| other.contains(a))
    }
}

/// Hyperbolic truncation `{α : ‖α‖_q ≤ p}` in `dim` dimensions.
pub fn enumerate_truncation(p: usize, q: f64, dim: usize) -> Result<TruncationSet> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Domain(format!("q-norm parameter must lie in (0, 1], got {q}")));
    }
    if dim == 0 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    let mut out = Vec::new();
    let mut current = vec![0u32; dim];
    // ‖α‖_q ≥ ‖α‖_1 for q ≤ 1, so the total-degree simplex bounds the search
    fn walk(pos: usize, remaining: u32, current: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if pos == current.len() {
            out.push(MultiIndex(current.clone()));
            return;
        }
        for d in 0..=remaining {
            current[pos] = d;
            walk(pos + 1, remaining - d, current, out);
        }
        current[pos] = 0;
    }
    walk(0, p as u32, &mut current, &mut out);
    let bound = p as f64;
    out.retain(|a| {
        if q == 1.0 || a.0.iter().filter(|&&d| d > 0).count() <= 1 {
            // one active dimension: the q-norm is the degree itself
            a.total_degree() as f64 <= bound
        } else {
            a.q_norm(q) <= bound * (1.0 + QNORM_TOL)
        }
    });
    out.sort_by(MultiIndex::graded_cmp);
    Ok(TruncationSet { dim, indices: out, generator: Some((p, q)) })
}

/// Evaluates every basis function of `truncation` at a standardized point.
fn basis_row(marginals: &MarginalSpec, truncation: &TruncationSet, z: &[f64], row: &mut [f64]) {
    let max_deg = truncation.max_degree() as usize;
    let tables: Vec<Vec<f64>> = marginals
        .marginals()
        .iter()
        .zip(z)
        .map(|(m, &zi)| univariate_all(m.family(), max_deg, zi))
        .collect();
    for (slot, alpha) in row.iter_mut().zip(truncation.indices()) {
        *slot = alpha
            .0
            .iter()
            .zip(&tables)
            .map(|(&d, t)| t[d as usize])
            .product();
    }
}

fn check_dims(marginals: &MarginalSpec, truncation: &TruncationSet) -> Result<()> {
    if marginals.dim() != truncation.dim() {
        return Err(Error::Domain(format!(
            "marginals have dimension {} but truncation has {}",
            marginals.dim(),
            truncation.dim()
        )));
    }
    Ok(())
}

/// `N × P` matrix of basis values; column order follows the truncation.
pub fn design_matrix(marginals: &MarginalSpec, truncation: &TruncationSet, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    check_dims(marginals, truncation)?;
    let p = truncation.len();
    let mut psi = DMatrix::zeros(points.len(), p);
    let mut row = vec![0.0; p];
    for (i, x) in points.iter().enumerate() {
        let z = marginals.to_standard(x)?;
        basis_row(marginals, truncation, &z, &mut row);
        for (j, v) in row.iter().enumerate() {
            psi[(i, j)] = *v;
        }
    }
    Ok(psi)
}

/// A scalar function of the inputs represented by its PCE coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PceFunction {
    pub truncation: TruncationSet,
    pub coefficients: Vec<f64>,
}

impl PceFunction {
    pub fn new(truncation: TruncationSet, coefficients: Vec<f64>) -> Result<Self> {
        if truncation.len() != coefficients.len() {
            return Err(Error::Domain(format!(
                "{} coefficients for a basis of size {}",
                coefficients.len(),
                truncation.len()
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("non-finite PCE coefficient".into()));
        }
        Ok(Self { truncation, coefficients })
    }

    pub fn constant(dim: usize, value: f64) -> Self {
        Self { truncation: TruncationSet::constant(dim), coefficients: vec![value] }
    }

    /// Coefficient of the constant term (zero when absent).
    pub fn mean_coefficient(&self) -> f64 {
        self.truncation
            .position(&MultiIndex::zero(self.truncation.dim()))
            .map_or(0.0, |i| self.coefficients[i])
    }

    /// Re-expresses the function on a larger basis, padding with zeros.
    pub fn embed(&self, target: &TruncationSet) -> Result<Self> {
        let mut coefficients = vec![0.0; target.len()];
        for (a, &c) in self.truncation.indices().iter().zip(&self.coefficients) {
            let i = target
                .position(a)
                .ok_or_else(|| Error::Domain("target truncation does not contain the source basis".into()))?;
            coefficients[i] = c;
        }
        Ok(Self { truncation: target.clone(), coefficients })
    }
}

/// `Σ_α c_α ψ_α(x)`.
pub fn pce_eval(marginals: &MarginalSpec, f: &PceFunction, x: &[f64]) -> Result<f64> {
    check_dims(marginals, &f.truncation)?;
    let z = marginals.to_standard(x)?;
    let mut row = vec![0.0; f.truncation.len()];
    basis_row(marginals, &f.truncation, &z, &mut row);
    Ok(row.iter().zip(&f.coefficients).map(|(a, b)| a * b).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, SymmetricEigen};

    /// Gauss quadrature nodes/weights from the Jacobi matrix (Golub–Welsch).
    fn gauss_rule(family: Family, n: usize) -> (Vec<f64>, Vec<f64>) {
        let mut j = DMatrix::<f64>::zeros(n, n);
        for k in 1..n {
            let kf = k as f64;
            let b = match family {
                Family::Legendre => kf / (4.0 * kf * kf - 1.0).sqrt(),
                Family::Hermite => kf.sqrt(),
            };
            j[(k, k - 1)] = b;
            j[(k - 1, k)] = b;
        }
        let eig = SymmetricEigen::new(j);
        let nodes = eig.eigenvalues.iter().copied().collect();
        let weights = (0..n).map(|i| eig.eigenvectors[(0, i)].powi(2)).collect();
        (nodes, weights)
    }

    #[test]
    fn univariate_examples() {
        for fam in [Family::Legendre, Family::Hermite] {
            assert_eq!(univariate_eval(fam, 0, 0.37), 1.0);
        }
        assert_relative_eq!(univariate_eval(Family::Legendre, 1, 1.0), 3f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(univariate_eval(Family::Hermite, 2, 0.0), -1.0 / 2f64.sqrt(), epsilon = 1e-15);
        // normalized Legendre: φ_n(1) = sqrt(2n+1)
        for n in 0..30 {
            assert_relative_eq!(univariate_eval(Family::Legendre, n, 1.0), (2.0 * n as f64 + 1.0).sqrt(), max_relative = 1e-12);
        }
    }

    #[test]
    fn orthonormal_under_gauss_quadrature() {
        for fam in [Family::Legendre, Family::Hermite] {
            let (nodes, weights) = gauss_rule(fam, 30);
            for k in 0..=10 {
                for l in 0..=10 {
                    let ip: f64 = nodes
                        .iter()
                        .zip(&weights)
                        .map(|(&x, &w)| w * univariate_eval(fam, k, x) * univariate_eval(fam, l, x))
                        .sum();
                    let expect = if k == l { 1.0 } else { 0.0 };
                    assert!((ip - expect).abs() < 1e-10, "{fam:?} <{k},{l}> = {ip}");
                }
            }
        }
    }

    #[test]
    fn standardization_examples() {
        let u = Marginal::uniform(0.0, 0.1).unwrap();
        assert_relative_eq!(u.to_standard(0.05).unwrap(), 0.0, epsilon = 1e-15);
        assert_eq!(Marginal::uniform(0.1, 0.4).unwrap().to_standard(0.4).unwrap(), 1.0);
        assert_eq!(Marginal::gaussian(2.0, 3.0).unwrap().to_standard(5.0).unwrap(), 1.0);
        assert!(u.to_standard(0.2).is_err());
        assert!(Marginal::uniform(1.0, 1.0).is_err());
        assert!(Marginal::gaussian(0.0, 0.0).is_err());
        assert!(matches!(Marginal::from_name("weibull", 1.0, 2.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn truncation_examples() {
        let t = enumerate_truncation(2, 1.0, 2).unwrap();
        let got: Vec<Vec<u32>> = t.indices().iter().map(|a| a.0.clone()).collect();
        assert_eq!(got, vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]);
        for m in 1..4 {
            for q in [0.3, 0.7, 1.0] {
                let t = enumerate_truncation(0, q, m).unwrap();
                assert_eq!(t.len(), 1);
                assert!(t.indices()[0].is_zero());
            }
        }
        let t = enumerate_truncation(3, 0.5, 2).unwrap();
        let got: Vec<Vec<u32>> = t.indices().iter().map(|a| a.0.clone()).collect();
        assert_eq!(got, vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![0, 2], vec![3, 0], vec![0, 3]]);
        assert!(enumerate_truncation(2, 0.0, 2).is_err());
        assert!(enumerate_truncation(2, 1.5, 2).is_err());
    }

    /// Brute force over the degree box `[0, p]^M`.
    fn brute_force(p: usize, q: f64, m: usize) -> Vec<Vec<u32>> {
        let mut out = Vec::new();
        let total = (p + 1).pow(m as u32);
        for code in 0..total {
            let mut c = code;
            let mut a = vec![0u32; m];
            for slot in a.iter_mut() {
                *slot = (c % (p + 1)) as u32;
                c /= p + 1;
            }
            let norm: f64 = a.iter().map(|&d| (d as f64).powf(q)).sum::<f64>().powf(1.0 / q);
            if norm <= p as f64 + 1e-9 {
                out.push(a);
            }
        }
        out.sort();
        out
    }

    #[test]
    fn truncation_matches_brute_force_and_binomial() {
        for m in 1..=4 {
            for p in 0..=5 {
                for q in [0.4, 0.5, 0.75, 1.0] {
                    let t = enumerate_truncation(p, q, m).unwrap();
                    let mut got: Vec<Vec<u32>> = t.indices().iter().map(|a| a.0.clone()).collect();
                    got.sort();
                    assert_eq!(got, brute_force(p, q, m), "p={p} q={q} m={m}");
                }
                let full = enumerate_truncation(p, 1.0, m).unwrap();
                let binom = (1..=m).fold(1usize, |acc, k| acc * (p + k) / k);
                assert_eq!(full.len(), binom);
            }
        }
    }

    #[test]
    fn truncation_nesting() {
        for m in 1..=3 {
            for p in 0..=6 {
                let qs = [0.4, 0.6, 0.8, 1.0];
                for w in qs.windows(2) {
                    let a = enumerate_truncation(p, w[0], m).unwrap();
                    let b = enumerate_truncation(p, w[1], m).unwrap();
                    assert!(a.is_subset_of(&b));
                }
                for q in qs {
                    let a = enumerate_truncation(p, q, m).unwrap();
                    let b = enumerate_truncation(p + 1, q, m).unwrap();
                    assert!(a.is_subset_of(&b));
                }
            }
        }
    }

    #[test]
    fn design_matrix_examples() {
        let spec = MarginalSpec::new(vec![Marginal::uniform(0.0, 0.1).unwrap(), Marginal::uniform(0.1, 0.4).unwrap()]).unwrap();
        let t = enumerate_truncation(3, 1.0, 2).unwrap();
        let pts = vec![vec![0.05, 0.25], vec![0.01, 0.39], vec![0.09, 0.11]];
        let psi = design_matrix(&spec, &t, &pts).unwrap();
        assert_eq!(psi.shape(), (3, 10));
        assert!(psi.column(0).iter().all(|&v| v == 1.0));
        assert_relative_eq!(psi[(0, 1)], 0.0, epsilon = 1e-15);
        assert!(design_matrix(&spec, &t, &[vec![0.5, 0.2]]).is_err());
    }

    #[test]
    fn pce_eval_examples() {
        let spec = MarginalSpec::new(vec![Marginal::uniform(-1.0, 1.0).unwrap(); 2]).unwrap();
        let f = PceFunction::constant(2, 3.0);
        assert_eq!(pce_eval(&spec, &f, &[0.3, -0.9]).unwrap(), 3.0);
        let t = enumerate_truncation(2, 1.0, 2).unwrap();
        let c = vec![0.5, -1.0, 2.0, 0.25, 0.1, -0.3];
        let f = PceFunction::new(t.clone(), c.clone()).unwrap();
        let x = vec![0.2, -0.4];
        let row = design_matrix(&spec, &t, std::slice::from_ref(&x)).unwrap();
        let dot: f64 = row.row(0).iter().zip(&c).map(|(a, b)| a * b).sum();
        assert_relative_eq!(pce_eval(&spec, &f, &x).unwrap(), dot, epsilon = 1e-14);
        assert!(PceFunction::new(t, vec![1.0]).is_err());
    }

    #[test]
    fn embed_pads_with_zeros() {
        let small = PceFunction::new(enumerate_truncation(1, 1.0, 2).unwrap(), vec![1.0, 2.0, 3.0]).unwrap();
        let big = small.embed(&enumerate_truncation(2, 1.0, 2).unwrap()).unwrap();
        assert_eq!(big.coefficients, vec![1.0, 2.0, 3.0, 0.0, 0.0, 0.0]);
        assert_eq!(big.mean_coefficient(), 1.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn affine_round_trip(lo in -10.0..10.0f64, w in 0.01..20.0f64, t in 0.0..1.0f64, m in -5.0..5.0f64, s in 0.01..5.0f64, x in -50.0..50.0f64) {
                let u = Marginal::uniform(lo, lo + w).unwrap();
                let xu = lo + t * w;
                prop_assert!((u.from_standard(u.to_standard(xu).unwrap()) - xu).abs() <= 1e-14 * (1.0 + xu.abs() + w));
                let g = Marginal::gaussian(m, s).unwrap();
                prop_assert!((g.from_standard(g.to_standard(x).unwrap()) - x).abs() <= 1e-14 * (1.0 + x.abs()));
            }

            #[test]
            fn evaluation_is_linear(c1 in prop::collection::vec(-5.0..5.0f64, 6), c2 in prop::collection::vec(-5.0..5.0f64, 6), a in -3.0..3.0f64, x in -1.0..1.0f64, y in -1.0..1.0f64) {
                let spec = MarginalSpec::new(vec![Marginal::uniform(-1.0, 1.0).unwrap(); 2]).unwrap();
                let t = enumerate_truncation(2, 1.0, 2).unwrap();
                let comb: Vec<f64> = c1.iter().zip(&c2).map(|(u, v)| a * u + v).collect();
                let f1 = PceFunction::new(t.clone(), c1).unwrap();
                let f2 = PceFunction::new(t.clone(), c2).unwrap();
                let f3 = PceFunction::new(t, comb).unwrap();
                let p = [x, y];
                let lhs = pce_eval(&spec, &f3, &p).unwrap();
                let rhs = a * pce_eval(&spec, &f1, &p).unwrap() + pce_eval(&spec, &f2, &p).unwrap();
                prop_assert!((lhs - rhs).abs() < 1e-11);
            }
        }
    }
}
