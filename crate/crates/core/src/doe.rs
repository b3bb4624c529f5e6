//! Experimental designs: Latin hypercube sampling and replicated layouts.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Open01};

use crate::error::{Error, Result};
use crate::pce::MarginalSpec;
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub points: Vec<Vec<f64>>,
    /// Seed the design was generated from, if known.
    pub seed: Option<u64>,
    /// Simulator runs per point.
    pub replications: usize,
}

impl Design {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn n_runs(&self) -> usize {
        self.points.len() * self.replications
    }
}

/// Latin hypercube of `n` points mapped through the marginal inverse CDFs.
/// Each stratum holds one point placed uniformly at random within it.
pub fn lhs<R: Rng + ?Sized>(n: usize, marginals: &MarginalSpec, rng: &mut R) -> Result<Design> {
    if n == 0 {
        return Err(Error::Domain("LHS needs at least one point".into()));
    }
    let dim = marginals.dim();
    let mut points = vec![vec![0.0; dim]; n];
    let mut perm: Vec<usize> = (0..n).collect();
    for (j, m) in marginals.marginals().iter().enumerate() {
        perm.shuffle(rng);
        for (i, &stratum) in perm.iter().enumerate() {
            let u: f64 = Open01.sample(rng);
            points[i][j] = m.inverse_cdf((stratum as f64 + u) / n as f64);
        }
    }
    Ok(Design { points, seed: None, replications: 1 })
}

pub fn lhs_seeded(n: usize, marginals: &MarginalSpec, seed: u64) -> Result<Design> {
    let mut rng = seed::rng_from(seed, &[]);
    let mut d = lhs(n, marginals, &mut rng)?;
    d.seed = Some(seed);
    Ok(d)
}

/// LHS of `n_total / r` distinct points, each to be run `r` times.
pub fn replicated_design<R: Rng + ?Sized>(n_total: usize, r: usize, marginals: &MarginalSpec, rng: &mut R) -> Result<Design> {
    if r == 0 || !n_total.is_multiple_of(r) {
        return Err(Error::Domain(format!("replication count {r} does not divide {n_total}")));
    }
    let mut d = lhs(n_total / r, marginals, rng)?;
    d.replications = r;
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pce::Marginal;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit(dim: usize) -> MarginalSpec {
        MarginalSpec::new(vec![Marginal::uniform(0.0, 1.0).unwrap(); dim]).unwrap()
    }

    fn one_per_stratum(d: &Design, j: usize) -> bool {
        let n = d.len();
        let mut hit = vec![false; n];
        for p in &d.points {
            let k = ((p[j] * n as f64).floor() as usize).min(n - 1);
            if hit[k] {
                return false;
            }
            hit[k] = true;
        }
        true
    }

    #[test]
    fn quartiles() {
        let d = lhs(4, &unit(1), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(one_per_stratum(&d, 0));
    }

    #[test]
    fn stratified_mean() {
        let m = MarginalSpec::new(vec![Marginal::uniform(0.0, 0.1).unwrap()]).unwrap();
        let d = lhs(1000, &m, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let mean = d.points.iter().map(|p| p[0]).sum::<f64>() / 1000.0;
        // One uniform point per stratum of width w = 0.1/n: SE = w/√12/√n.
        let se = 0.1 / 1000.0 / 12f64.sqrt() / 1000f64.sqrt();
        assert!((mean - 0.05).abs() < 3.0 * se, "{mean}");
    }

    #[test]
    fn replication_layouts() {
        let m = unit(2);
        let d = replicated_design(1000, 10, &m, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!((d.len(), d.replications, d.n_runs()), (100, 10, 1000));
        assert_eq!(replicated_design(250, 50, &m, &mut ChaCha8Rng::seed_from_u64(3)).unwrap().len(), 5);
        assert!(matches!(replicated_design(250, 3, &m, &mut ChaCha8Rng::seed_from_u64(3)), Err(Error::Domain(_))));
        let a = replicated_design(300, 1, &m, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = lhs(300, &m, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn maps_through_marginals() {
        let m = MarginalSpec::new(vec![Marginal::uniform(1200.0, 1800.0).unwrap(), Marginal::gaussian(0.0, 2.0).unwrap()]).unwrap();
        let d = lhs_seeded(50, &m, 9).unwrap();
        assert_eq!(d.seed, Some(9));
        assert!(d.points.iter().all(|p| m.contains(p)));
        assert_eq!(d, lhs_seeded(50, &m, 9).unwrap());
    }

    proptest! {
        #[test]
        fn every_projection_stratified(n in 1usize..200, dim in 1usize..6, s in any::<u64>()) {
            let d = lhs(n, &unit(dim), &mut ChaCha8Rng::seed_from_u64(s)).unwrap();
            prop_assert_eq!(d.len(), n);
            for j in 0..dim {
                prop_assert!(one_per_stratum(&d, j));
            }
        }
    }
}
