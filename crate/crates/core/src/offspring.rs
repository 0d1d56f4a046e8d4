//! Offspring laws on `{0, ..., d}`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logspace::{ln_prob, log_sum_exp};

const SUM_TOLERANCE: f64 = 1e-12;

/// A validated supercritical offspring law with bounded support.
///
/// `d` is the length of `probs` minus one and always carries positive mass,
/// so it is the supremum of the support. Derived moments are cached.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringDistribution {
    probs: Vec<f64>,
    log_probs: Vec<f64>,
    cdf: Vec<f64>,
    /// `E[C(Z1, j)]` for `j = 1..=d`, the Taylor coefficients of `f(1+u) - 1`.
    factorial_moments: Vec<f64>,
    mean: f64,
    var: f64,
}

impl OffspringDistribution {
    /// Validates `probs` and derives the moments.
    ///
    /// Sums within 1e-12 of one are accepted and renormalized. A zero top
    /// atom is rejected rather than trimmed, since trimming would silently
    /// change `d`.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidProbs("empty probability vector".into()));
        }
        if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidProbs(format!("entry {bad} is not a finite nonnegative number")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::SumNotOne { sum });
        }
        let probs: Vec<f64> = probs.iter().map(|p| p / sum).collect();
        let d = probs.len() - 1;
        if probs[d] == 0.0 {
            return Err(Error::TopAtomZero { d });
        }
        let mean: f64 = probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        if mean <= 1.0 {
            return Err(Error::Subcritical { mean });
        }
        if d < 2 {
            return Err(Error::InvalidProbs("need at least three entries".into()));
        }
        let second: f64 = probs.iter().enumerate().map(|(k, p)| (k * k) as f64 * p).sum();
        let var = (second - mean * mean).max(0.0);

        let mut cdf = Vec::with_capacity(d + 1);
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            cdf.push(acc);
        }
        cdf[d] = 1.0;

        let factorial_moments = (1..=d)
            .map(|j| {
                probs
                    .iter()
                    .enumerate()
                    .skip(j)
                    .map(|(k, p)| binomial_coefficient(k, j) * p)
                    .sum()
            })
            .collect();

        Ok(Self {
            log_probs: probs.iter().map(|&p| ln_prob(p)).collect(),
            probs,
            cdf,
            factorial_moments,
            mean,
            var,
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    /// Support bound.
    pub fn d(&self) -> usize {
        self.probs.len() - 1
    }

    /// Mean offspring count.
    pub fn m(&self) -> f64 {
        self.mean
    }

    /// Offspring variance `Var Z1`.
    pub fn var(&self) -> f64 {
        self.var
    }

    /// Probability of the maximal offspring count `d`.
    pub fn eta(&self) -> f64 {
        self.probs[self.d()]
    }

    /// Variance of the martingale limit, `Var Z1 / (m (m - 1))`.
    pub fn limit_variance(&self) -> f64 {
        self.var / (self.mean * (self.mean - 1.0))
    }

    /// Probability generating function on `[0, 1]`.
    pub fn pgf(&self, s: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Domain(format!("pgf argument {s} outside [0, 1]")));
        }
        Ok(self.probs.iter().rev().fold(0.0, |acc, p| acc * s + p))
    }

    /// `ln f(e^y)` for any real `y`, evaluated by log-sum-exp.
    pub fn log_pgf_at_log(&self, y: f64) -> f64 {
        let terms: Vec<f64> = self
            .log_probs
            .iter()
            .enumerate()
            .map(|(k, lp)| lp + k as f64 * y)
            .collect();
        log_sum_exp(&terms)
    }

    /// `f(1 + u) - 1` for `u >= -1`, expanded around 1 so small `u` keeps
    /// full relative precision.
    pub fn pgf_excess(&self, u: f64) -> f64 {
        u * self
            .factorial_moments
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * u + c)
    }

    /// One inverse-CDF draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cdf.iter().position(|&c| u < c).unwrap_or(self.d())
    }
}

/// Validating constructor.
pub fn make_offspring(probs: &[f64]) -> Result<OffspringDistribution> {
    OffspringDistribution::new(probs.to_vec())
}

/// The two-atom law `p_d = m / d`, `p_0 = 1 - m / d`, which maximizes the
/// probability of the top atom among laws with mean `m` on `{0, ..., d}`.
pub fn extremal_distribution(m: f64, d: usize) -> Result<OffspringDistribution> {
    if d < 2 {
        return Err(Error::Range(format!("support bound d = {d} must be at least 2")));
    }
    if !(m > 1.0 && m <= d as f64) {
        return Err(Error::Range(format!("mean m = {m} must lie in (1, {d}]")));
    }
    let eta = m / d as f64;
    let mut probs = vec![0.0; d + 1];
    probs[0] = 1.0 - eta;
    probs[d] = eta;
    OffspringDistribution::new(probs)
}

fn binomial_coefficient(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// JSON description of a law: `{"probs": [...]}` or
/// `{"extremal": {"m": ..., "d": ...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistSpec {
    Probs(Vec<f64>),
    Extremal { m: f64, d: usize },
}

impl DistSpec {
    pub fn build(&self) -> Result<OffspringDistribution> {
        match self {
            DistSpec::Probs(p) => make_offspring(p),
            DistSpec::Extremal { m, d } => extremal_distribution(*m, *d),
        }
    }
}

impl From<&OffspringDistribution> for DistSpec {
    fn from(dist: &OffspringDistribution) -> Self {
        DistSpec::Probs(dist.probs.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::substream;
    use proptest::prelude::*;

    #[test]
    fn moments_of_two_atom_law() {
        let d = make_offspring(&[0.25, 0.0, 0.75]).unwrap();
        assert_eq!(d.d(), 2);
        assert_eq!(d.m(), 1.5);
        assert!((d.var() - 0.75).abs() < 1e-15);
        assert_eq!(d.eta(), 0.75);
    }

    #[test]
    fn two_atom_moments_match_empirical() {
        let d = make_offspring(&[0.25, 0.0, 0.75]).unwrap();
        let mut rng = substream(11, 0);
        let n = 1_000_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let k = d.sample(&mut rng) as f64;
            s1 += k;
            s2 += k * k;
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        // CLT band for the mean: 3 sigma / sqrt(n) with sigma^2 = 0.75
        assert!((mean - 1.5).abs() < 3.0 * 0.75f64.sqrt() / 1e3);
        assert!((var - 0.75).abs() < 0.01);
    }

    #[test]
    fn point_mass_binary_splitting() {
        let d = make_offspring(&[0.0, 0.0, 1.0]).unwrap();
        assert_eq!((d.m(), d.var(), d.eta()), (2.0, 0.0, 1.0));
        let mut rng = substream(1, 1);
        assert!((0..100).all(|_| d.sample(&mut rng) == 2));
    }

    #[test]
    fn rejects_invalid_laws() {
        assert!(matches!(make_offspring(&[0.5, 0.5]), Err(Error::Subcritical { .. })));
        assert!(matches!(make_offspring(&[1.0 / 3.0; 3]), Err(Error::Subcritical { .. })));
        assert!(matches!(make_offspring(&[0.2, 0.0, 0.7]), Err(Error::SumNotOne { .. })));
        assert!(matches!(make_offspring(&[0.0, 0.0, 1.0, 0.0]), Err(Error::TopAtomZero { d: 3 })));
        assert!(matches!(make_offspring(&[-0.1, 0.1, 1.0]), Err(Error::InvalidProbs(_))));
        assert!(matches!(make_offspring(&[]), Err(Error::InvalidProbs(_))));
    }

    #[test]
    fn renormalizes_within_tolerance() {
        let d = make_offspring(&[0.25 + 5e-13, 0.0, 0.75]).unwrap();
        assert_eq!(d.probs().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn pgf_values() {
        let d = make_offspring(&[0.25, 0.0, 0.75]).unwrap();
        assert_eq!(d.pgf(0.5).unwrap(), 0.4375);
        assert_eq!(d.pgf(1.0).unwrap(), 1.0);
        let b = make_offspring(&[0.0, 0.0, 1.0]).unwrap();
        assert!((b.pgf(0.3).unwrap() - 0.09).abs() < 1e-16);
        assert!(matches!(d.pgf(1.2), Err(Error::Domain(_))));
        assert!(matches!(d.pgf(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn pgf_representations_agree() {
        let d = make_offspring(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        for s in [0.2, 0.7, 1.0] {
            let direct = d.pgf(s).unwrap();
            assert!((d.log_pgf_at_log(f64::ln(s)).exp() - direct).abs() < 1e-14);
            assert!((1.0 + d.pgf_excess(s - 1.0) - direct).abs() < 1e-14);
        }
        assert_eq!(d.pgf_excess(0.0), 0.0);
    }

    #[test]
    fn extremal_law() {
        let e = extremal_distribution(1.5, 2).unwrap();
        assert_eq!(e.probs(), &[0.25, 0.0, 0.75]);
        assert_eq!(e.m(), 1.5);
        let e = extremal_distribution(2.0, 2).unwrap();
        assert_eq!(e.probs(), &[0.0, 0.0, 1.0]);
        assert!(matches!(extremal_distribution(3.0, 2), Err(Error::Range(_))));
        assert!(matches!(extremal_distribution(1.0, 2), Err(Error::Range(_))));
    }

    #[test]
    fn dist_spec_json() {
        let s: DistSpec = serde_json::from_str(r#"{"probs":[0.25,0,0.75]}"#).unwrap();
        assert_eq!(s.build().unwrap().m(), 1.5);
        let s: DistSpec = serde_json::from_str(r#"{"extremal":{"m":1.5,"d":2}}"#).unwrap();
        assert_eq!(s.build().unwrap().probs(), &[0.25, 0.0, 0.75]);
    }

    /// Random law on {0..=d} with mean exactly `m`: a mixture of a uniform
    /// simplex point with the two-atom laws that fix the mean.
    fn random_law_with_mean(weights: &[f64], m: f64) -> Option<Vec<f64>> {
        let d = weights.len() - 1;
        let total: f64 = weights.iter().sum();
        let p: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mu: f64 = p.iter().enumerate().map(|(k, q)| k as f64 * q).sum();
        // blend with a point mass at 0 or at d to hit the target mean
        let (target, t) = if mu > m {
            (0usize, (mu - m) / mu)
        } else {
            (d, (m - mu) / (d as f64 - mu))
        };
        let mut out: Vec<f64> = p.iter().map(|q| q * (1.0 - t)).collect();
        out[target] += t;
        (out[d] > 0.0).then_some(out)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn pgf_normalized_and_derivative_is_mean(
            w in proptest::collection::vec(0.01f64..1.0, 3..8),
            m_frac in 0.05f64..0.95,
        ) {
            let d = w.len() - 1;
            let m = 1.0 + m_frac * (d as f64 - 1.0);
            let p = random_law_with_mean(&w, m).unwrap();
            let dist = make_offspring(&p).unwrap();
            prop_assert!((dist.pgf(1.0).unwrap() - 1.0).abs() < 1e-15);
            let h = 1e-4;
            let slope = (dist.pgf_excess(h) - dist.pgf_excess(-h)) / (2.0 * h);
            prop_assert!((slope - dist.m()).abs() < 1e-6);
            prop_assert!(dist.var() <= dist.m() * d as f64 + 1e-12);
        }

        #[test]
        fn extremal_maximizes_eta(
            w in proptest::collection::vec(0.0f64..1.0, 3..7),
            m_frac in 0.01f64..0.99,
        ) {
            let d = w.len() - 1;
            let m = 1.0 + m_frac * (d as f64 - 1.0);
            prop_assume!(w.iter().sum::<f64>() > 0.0);
            if let Some(p) = random_law_with_mean(&w, m) {
                if let Ok(dist) = make_offspring(&p) {
                    prop_assert!(dist.eta() <= m / d as f64 + 1e-12);
                }
            }
        }
    }
}
