//! Benchmark stochastic simulators and their known reference distributions.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{LogNormalView, NormalView};
use crate::pce::{Marginal, MarginalSpec};

pub const ASIAN_STEPS: usize = 1000;
pub const ASIAN_DT: f64 = 1.0 / ASIAN_STEPS as f64;
pub const DEFAULT_STRIKE: f64 = 1.0;
pub const SIR_POPULATION: i64 = 2000;
pub const SIR_BETA: f64 = 0.5;
pub const SIR_GAMMA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimulatorId {
    /// Terminal value of geometric Brownian motion at t = 1.
    BlackScholes,
    /// Gaussian response with nonlinear mean and log-linear standard deviation.
    Heteroskedastic5d,
    /// Arithmetic average of a discretized geometric Brownian path.
    AsianAverage,
    /// Final-size statistic of a stochastic SIR epidemic.
    SirEpidemic,
}

impl SimulatorId {
    pub const ALL: [SimulatorId; 4] = [
        SimulatorId::BlackScholes,
        SimulatorId::Heteroskedastic5d,
        SimulatorId::AsianAverage,
        SimulatorId::SirEpidemic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SimulatorId::BlackScholes => "black-scholes",
            SimulatorId::Heteroskedastic5d => "heteroskedastic-5d",
            SimulatorId::AsianAverage => "asian-average",
            SimulatorId::SirEpidemic => "sir-epidemic",
        }
    }

    pub fn spec(self) -> SimulatorSpec {
        let u = |a, b| Marginal::uniform(a, b).expect("valid bounds");
        let (marginals, qoi) = match self {
            SimulatorId::BlackScholes => (vec![u(0.0, 0.1), u(0.1, 0.4)], "S_1 of geometric Brownian motion, S_0 = 1"),
            SimulatorId::Heteroskedastic5d => (vec![u(0.0, 1.0); 5], "mu(x) + sigma(x) Z"),
            SimulatorId::AsianAverage => (vec![u(0.0, 0.1), u(0.1, 0.4)], "A_1, mean of 1000 path values"),
            SimulatorId::SirEpidemic => (vec![u(1200.0, 1800.0), u(20.0, 200.0)], "S_T - S_0 (non-positive)"),
        };
        SimulatorSpec {
            id: self,
            marginals: MarginalSpec::new(marginals).expect("non-empty"),
            qoi,
        }
    }

    /// One simulator run at `x`, after checking `x` against the input domain.
    pub fn simulate<R: Rng + ?Sized>(self, x: &[f64], rng: &mut R) -> Result<f64> {
        let spec = self.spec();
        if x.len() != spec.dim() || !spec.marginals.contains(x) {
            return Err(Error::Domain(format!("{x:?} is outside the input domain of {self}")));
        }
        Ok(match self {
            SimulatorId::BlackScholes => black_scholes_terminal([x[0], x[1]], rng),
            SimulatorId::Heteroskedastic5d => heteroskedastic_5d(x, rng)?,
            SimulatorId::AsianAverage => asian_average([x[0], x[1]], rng),
            SimulatorId::SirEpidemic => sir_gillespie([x[0], x[1]], rng) as f64,
        })
    }

    /// Whether a Gaussian with the exact conditional moments is available.
    pub fn has_analytic_moments(self) -> bool {
        !matches!(self, SimulatorId::SirEpidemic)
    }

    pub fn is_integer_valued(self) -> bool {
        matches!(self, SimulatorId::SirEpidemic)
    }
}

impl fmt::Display for SimulatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SimulatorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        let id = match key.as_str() {
            "black-scholes" | "bs" | "example1" => SimulatorId::BlackScholes,
            "heteroskedastic-5d" | "example2" => SimulatorId::Heteroskedastic5d,
            "asian-average" | "asian" => SimulatorId::AsianAverage,
            "sir-epidemic" | "sir" => SimulatorId::SirEpidemic,
            _ => {
                let known: Vec<_> = SimulatorId::ALL.iter().map(|s| s.name()).collect();
                return Err(Error::Config(format!("unknown simulator '{s}', expected one of {}", known.join(", "))));
            }
        };
        Ok(id)
    }
}

#[derive(Debug, Clone)]
pub struct SimulatorSpec {
    pub id: SimulatorId,
    pub marginals: MarginalSpec,
    pub qoi: &'static str,
}

impl SimulatorSpec {
    pub fn dim(&self) -> usize {
        self.marginals.dim()
    }
}

/// `LN(x₁ − x₂²/2, x₂)`, sampled directly.
pub fn black_scholes_terminal<R: Rng + ?Sized>(x: [f64; 2], rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    (x[0] - 0.5 * x[1] * x[1] + x[1] * z).exp()
}

pub fn heteroskedastic_mean(x: &[f64]) -> Result<f64> {
    check_hetero_input(x)?;
    let mut mu = 3.0;
    for (j, &xj) in x.iter().enumerate() {
        let w = (j + 1) as f64;
        mu += -w * xj + w * xj.powi(3) / 5.0 + w * (xj * xj + xj.powi(4)).ln() / 15.0;
    }
    mu += x[0] * x[1] * x[1] - x[4] * x[2] + x[1] * x[3];
    Ok(mu)
}

pub fn heteroskedastic_std(x: &[f64]) -> Result<f64> {
    check_len(x, 5)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("{x:?}: non-finite input")));
    }
    let s: f64 = x.iter().enumerate().map(|(j, xj)| (j + 1) as f64 * xj).sum();
    Ok((s / 10.0).exp())
}

fn check_hetero_input(x: &[f64]) -> Result<()> {
    if x.len() != 5 {
        return Err(Error::Domain(format!("expected 5 inputs, got {}", x.len())));
    }
    // ln(x² + x⁴) is −∞ at 0.
    if x.iter().any(|&v| v == 0.0 || !v.is_finite()) {
        return Err(Error::Domain(format!("{x:?}: components must be finite and non-zero")));
    }
    Ok(())
}

pub fn heteroskedastic_5d<R: Rng + ?Sized>(x: &[f64], rng: &mut R) -> Result<f64> {
    let mu = heteroskedastic_mean(x)?;
    let sigma = heteroskedastic_std(x)?;
    let z: f64 = StandardNormal.sample(rng);
    Ok(mu + sigma * z)
}

/// Simulated path `S_{kΔt}`, k = 1..=1000, from `S_0 = 1`.
pub fn asian_path<R: Rng + ?Sized>(x: [f64; 2], rng: &mut R) -> Vec<f64> {
    let drift = (x[0] - 0.5 * x[1] * x[1]) * ASIAN_DT;
    let vol = x[1] * ASIAN_DT.sqrt();
    let mut log_s = 0.0;
    (0..ASIAN_STEPS)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            log_s += drift + vol * z;
            log_s.exp()
        })
        .collect()
}

pub fn asian_average<R: Rng + ?Sized>(x: [f64; 2], rng: &mut R) -> f64 {
    let drift = (x[0] - 0.5 * x[1] * x[1]) * ASIAN_DT;
    let vol = x[1] * ASIAN_DT.sqrt();
    let mut log_s = 0.0;
    let mut sum = 0.0;
    for _ in 0..ASIAN_STEPS {
        let z: f64 = StandardNormal.sample(rng);
        log_s += drift + vol * z;
        sum += log_s.exp();
    }
    sum / ASIAN_STEPS as f64
}

pub fn asian_payoff(a1: f64, strike: f64) -> f64 {
    (a1 - strike).max(0.0)
}

/// Exact mean and variance of the discrete average `A_1`.
pub fn asian_moments(x: [f64; 2]) -> (f64, f64) {
    let (r, s2) = (x[0], x[1] * x[1]);
    let n = ASIAN_STEPS;
    // E[S_k] = e^{r k Δt}; E[S_j S_k] = e^{(2r + s²) j Δt} e^{r (k − j) Δt} for j ≤ k.
    let a = (r * ASIAN_DT).exp();
    let mean_terms: Vec<f64> = (1..=n).map(|k| (r * k as f64 * ASIAN_DT).exp()).collect();
    let mean = mean_terms.iter().sum::<f64>() / n as f64;
    let mut second = 0.0;
    for j in 1..=n {
        let m = (n - j) as f64; // number of k > j
        let tail = if (a - 1.0).abs() < 1e-300 { m } else { a * (a.powf(m) - 1.0) / (a - 1.0) };
        let ejj = ((2.0 * r + s2) * j as f64 * ASIAN_DT).exp();
        second += ejj * (1.0 + 2.0 * tail);
    }
    second /= (n * n) as f64;
    (mean, (second - mean * mean).max(0.0))
}

/// One event of an SIR trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SirEvent {
    pub time: f64,
    pub s: i64,
    pub i: i64,
    pub r: i64,
}

fn sir_initial(x: [f64; 2]) -> (i64, i64, i64) {
    let s = x[0].round() as i64;
    let i = x[1].round() as i64;
    let s = s.clamp(0, SIR_POPULATION);
    let i = i.clamp(0, SIR_POPULATION - s);
    (s, i, SIR_POPULATION - s - i)
}

/// Gillespie simulation until no infected remain, with every event recorded.
/// The first entry is the initial state.
pub fn sir_trajectory<R: Rng + ?Sized>(x: [f64; 2], rng: &mut R) -> Vec<SirEvent> {
    let (mut s, mut i, mut r) = sir_initial(x);
    let mut t = 0.0;
    let mut events = vec![SirEvent { time: t, s, i, r }];
    while i > 0 {
        let infect = SIR_BETA * (s * i) as f64 / SIR_POPULATION as f64;
        let recover = SIR_GAMMA * i as f64;
        let total = infect + recover;
        let e: f64 = Exp1.sample(rng);
        t += e / total;
        let u: f64 = Open01.sample(rng);
        if u * total < infect {
            s -= 1;
            i += 1;
        } else {
            i -= 1;
            r += 1;
        }
        events.push(SirEvent { time: t, s, i, r });
    }
    events
}

/// `S_T − S_0` of a Gillespie run; inputs are rounded to counts.
pub fn sir_gillespie<R: Rng + ?Sized>(x: [f64; 2], rng: &mut R) -> i64 {
    let (s0, i0, _) = sir_initial(x);
    let (mut s, mut i) = (s0, i0);
    while i > 0 {
        let infect = SIR_BETA * (s * i) as f64 / SIR_POPULATION as f64;
        let recover = SIR_GAMMA * i as f64;
        let total = infect + recover;
        // The waiting time does not affect the final size but keeps the
        // random stream identical to `sir_trajectory`.
        let _: f64 = Exp1.sample(rng);
        let u: f64 = Open01.sample(rng);
        if u * total < infect {
            s -= 1;
            i += 1;
        } else {
            i -= 1;
        }
    }
    s - s0
}

/// Normal distribution with the exact conditional mean and variance.
pub fn oracle_gaussian_reference(id: SimulatorId, x: &[f64]) -> Result<NormalView> {
    let (mean, var) = analytic_moments(id, x)?;
    Ok(NormalView { mean, std: var.sqrt() })
}

/// Exact conditional mean and variance where they are known.
pub fn analytic_moments(id: SimulatorId, x: &[f64]) -> Result<(f64, f64)> {
    match id {
        SimulatorId::BlackScholes => {
            check_len(x, 2)?;
            let m = x[0].exp();
            Ok((m, m * m * (x[1] * x[1]).exp_m1()))
        }
        SimulatorId::Heteroskedastic5d => Ok((heteroskedastic_mean(x)?, heteroskedastic_std(x)?.powi(2))),
        SimulatorId::AsianAverage => {
            check_len(x, 2)?;
            Ok(asian_moments([x[0], x[1]]))
        }
        SimulatorId::SirEpidemic => Err(Error::Unsupported("SIR moments have no closed form; use replications".into())),
    }
}

/// Exact law of the Black–Scholes terminal value.
pub fn black_scholes_law(x: &[f64]) -> Result<LogNormalView> {
    check_len(x, 2)?;
    Ok(LogNormalView { mu: x[0] - 0.5 * x[1] * x[1], sigma: x[1] })
}

fn check_len(x: &[f64], n: usize) -> Result<()> {
    if x.len() != n {
        return Err(Error::Domain(format!("expected {n} inputs, got {}", x.len())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{normalized_ws, QuantileView};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ContinuousCDF, LogNormal};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn mean_sd(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, var.sqrt())
    }

    #[test]
    fn black_scholes_moments() {
        let mut g = rng(1);
        let draws: Vec<f64> = (0..1_000_000).map(|_| black_scholes_terminal([0.0, 0.1], &mut g)).collect();
        let (m, sd) = mean_sd(&draws);
        assert!((m - 1.0).abs() < 4.0 * sd / 1000.0, "mean {m}");
        let logs: Vec<f64> = draws.iter().map(|d| d.ln()).collect();
        let (lm, lsd) = mean_sd(&logs);
        assert!((lm + 0.005).abs() < 4e-4 && (lsd - 0.1).abs() < 1e-3);

        let draws: Vec<f64> = (0..200_000).map(|_| black_scholes_terminal([0.05, 0.2], &mut g)).collect();
        let (_, sd) = mean_sd(&draws);
        let v = (0.1f64).exp() * (0.04f64.exp() - 1.0);
        assert!((sd * sd - v).abs() / v < 0.02, "var {} vs {v}", sd * sd);
    }

    #[test]
    fn black_scholes_ks_against_lognormal() {
        let x = [0.07, 0.3];
        let mut g = rng(2);
        let mut draws: Vec<f64> = (0..100_000).map(|_| black_scholes_terminal(x, &mut g)).collect();
        draws.sort_by(f64::total_cmp);
        let law = LogNormal::new(0.07 - 0.045, 0.3).unwrap();
        let n = draws.len() as f64;
        let d = draws
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let c = law.cdf(v);
                (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
            })
            .fold(0.0, f64::max);
        // 1% critical value of the one-sample KS statistic.
        assert!(d < 1.628 / n.sqrt(), "KS statistic {d}");
    }

    #[test]
    fn heteroskedastic_deterministic_parts() {
        let x = [0.5; 5];
        let mut mu = 3.0;
        for j in 1..=5 {
            let j = j as f64;
            mu += -j * 0.5 + j * 0.125 / 5.0 + j * (0.25f64 + 0.0625).ln() / 15.0;
        }
        mu += 0.125 - 0.25 + 0.25;
        assert!((heteroskedastic_mean(&x).unwrap() - mu).abs() < 1e-14);
        assert!((heteroskedastic_std(&x).unwrap() - 0.75f64.exp()).abs() < 1e-14);
        assert!((heteroskedastic_std(&[1.0; 5]).unwrap() - 1.5f64.exp()).abs() < 1e-14);
        assert_eq!(heteroskedastic_std(&[0.0; 5]).unwrap(), 1.0);
        assert!(heteroskedastic_mean(&[0.0, 0.5, 0.5, 0.5, 0.5]).is_err());
        let mut g = rng(0);
        assert!(SimulatorId::Heteroskedastic5d.simulate(&[0.5, 0.5, 0.0, 0.5, 0.5], &mut g).is_err());
    }

    #[test]
    fn heteroskedastic_monte_carlo() {
        let x = [0.2, 0.7, 0.4, 0.9, 0.3];
        let mut g = rng(3);
        let draws: Vec<f64> = (0..100_000).map(|_| heteroskedastic_5d(&x, &mut g).unwrap()).collect();
        let (m, sd) = mean_sd(&draws);
        let (mu, sigma) = (heteroskedastic_mean(&x).unwrap(), heteroskedastic_std(&x).unwrap());
        let n = draws.len() as f64;
        assert!((m - mu).abs() < 4.0 * sigma / n.sqrt());
        // SE of the sample sd is about σ/√(2n).
        assert!((sd - sigma).abs() < 4.0 * sigma / (2.0 * n).sqrt());
    }

    #[test]
    fn asian_zero_volatility_is_deterministic() {
        let x = [0.06, 1e-8];
        let expect: f64 = (1..=ASIAN_STEPS).map(|k| (0.06 * k as f64 * ASIAN_DT).exp()).sum::<f64>() / ASIAN_STEPS as f64;
        let mut g = rng(4);
        for _ in 0..3 {
            // Path noise is of order x₂ = 1e-8.
            assert!((asian_average(x, &mut g) - expect).abs() < 1e-7);
        }
    }

    #[test]
    fn asian_average_bounds_and_positivity() {
        let mut g1 = rng(5);
        let mut g2 = rng(5);
        for _ in 0..50 {
            let path = asian_path([0.1, 0.4], &mut g1);
            let a = asian_average([0.1, 0.4], &mut g2);
            let lo = path.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = path.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(a > 0.0 && lo <= a && a <= hi);
            assert!((a - path.iter().sum::<f64>() / ASIAN_STEPS as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn asian_mean_matches_integral() {
        let x = [0.05, 0.2];
        let mut g = rng(6);
        let draws: Vec<f64> = (0..10_000).map(|_| asian_average(x, &mut g)).collect();
        let (m, sd) = mean_sd(&draws);
        let exact = (0.05f64.exp() - 1.0) / 0.05;
        assert!((m - exact).abs() < 4.0 * sd / 100.0, "{m} vs {exact}");
        let (am, av) = asian_moments(x);
        assert!((am - exact).abs() < 1e-4);
        assert!((sd * sd - av).abs() / av < 0.05, "{} vs {av}", sd * sd);
    }

    #[test]
    fn asian_moments_match_brute_force() {
        let x = [0.03, 0.33];
        let (r, s2, n) = (0.03, 0.33 * 0.33, ASIAN_STEPS);
        let mut second = 0.0;
        for j in 1..=n {
            for k in 1..=n {
                let (lo, hi) = (j.min(k) as f64 * ASIAN_DT, j.max(k) as f64 * ASIAN_DT);
                second += ((2.0 * r + s2) * lo + r * (hi - lo)).exp();
            }
        }
        second /= (n * n) as f64;
        let (m, v) = asian_moments(x);
        assert!(((second - m * m) - v).abs() < 1e-12 * second);
    }

    #[test]
    fn payoff() {
        assert!((asian_payoff(1.2, 1.0) - 0.2).abs() < 1e-15);
        assert_eq!(asian_payoff(0.9, 1.0), 0.0);
    }

    #[test]
    fn sir_basic_properties() {
        let mut g = rng(7);
        assert_eq!(sir_gillespie([1500.0, 0.0], &mut g), 0);
        for _ in 0..200 {
            let y = sir_gillespie([1500.0, 100.0], &mut g);
            assert!((-1500..=0).contains(&y));
        }
    }

    #[test]
    fn sir_trajectory_conserves_population() {
        let mut g1 = rng(8);
        let mut g2 = rng(8);
        for _ in 0..20 {
            let traj = sir_trajectory([1623.4, 57.6], &mut g1);
            let y = sir_gillespie([1623.4, 57.6], &mut g2);
            assert_eq!(traj[0].s, 1623);
            assert_eq!(traj[0].i, 58);
            for w in traj.windows(2) {
                assert!(w[1].time > w[0].time && w[1].s <= w[0].s);
            }
            assert!(traj.iter().all(|e| e.s + e.i + e.r == SIR_POPULATION));
            let last = traj.last().unwrap();
            assert_eq!(last.i, 0);
            assert_eq!(last.s - traj[0].s, y);
        }
    }

    #[test]
    fn determinism_given_seed() {
        for id in SimulatorId::ALL {
            let spec = id.spec();
            let x: Vec<f64> = spec.marginals.marginals().iter().map(|m| m.inverse_cdf(0.37)).collect();
            let a: Vec<f64> = {
                let mut g = rng(9);
                (0..5).map(|_| id.simulate(&x, &mut g).unwrap()).collect()
            };
            let mut g = rng(9);
            let b: Vec<f64> = (0..5).map(|_| id.simulate(&x, &mut g).unwrap()).collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn ids_parse_and_display() {
        for id in SimulatorId::ALL {
            assert_eq!(id.name().parse::<SimulatorId>().unwrap(), id);
        }
        assert!("nope".parse::<SimulatorId>().is_err());
        assert_eq!(SimulatorId::Heteroskedastic5d.spec().dim(), 5);
    }

    #[test]
    fn oracle_references() {
        let x = [0.5, 0.1, 0.9, 0.3, 0.6];
        let o = oracle_gaussian_reference(SimulatorId::Heteroskedastic5d, &x).unwrap();
        assert_eq!(o.mean, heteroskedastic_mean(&x).unwrap());
        assert!((o.std - heteroskedastic_std(&x).unwrap()).abs() < 1e-15);

        let o = oracle_gaussian_reference(SimulatorId::BlackScholes, &[0.04, 0.25]).unwrap();
        let law = black_scholes_law(&[0.04, 0.25]).unwrap();
        assert!((o.mean - 0.04f64.exp()).abs() < 1e-15);
        assert!((o.std - law.std_dev().unwrap()).abs() < 1e-14);

        let law = black_scholes_law(&[0.05, 0.4]).unwrap();
        let o = oracle_gaussian_reference(SimulatorId::BlackScholes, &[0.05, 0.4]).unwrap();
        assert!(normalized_ws(&law, &o).unwrap() > 0.01);

        assert!(matches!(
            oracle_gaussian_reference(SimulatorId::SirEpidemic, &[1500.0, 100.0]),
            Err(Error::Unsupported(_))
        ));
    }
}
