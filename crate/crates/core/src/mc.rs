//! Monte Carlo estimates of `P(W_n >= x)` and `P(max_{l <= h} W_l >= x)`,
//! plain and exponentially tilted.
//!
//! Path `i` draws from `substream(seed, i)` and per-path results are reduced
//! in index order, so estimates are bit-identical for any worker count.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::z_threshold;
use crate::logspace::{log_sub, log_sum_exp, LOG_ZERO};
use crate::mgf::log_psi_wn;
use crate::offspring::OffspringDistribution;
use crate::stats::clopper_pearson;
use crate::stream::{map_indexed, substream};

/// Confidence level of the Clopper-Pearson intervals.
pub const CP_ALPHA: f64 = 0.01;
/// Width, in estimated standard errors, of the tilted-estimator band.
pub const TILT_SIGMAS: f64 = 3.0;
/// Largest mass the tilted law may put on the top atom.
pub const MAX_TILTED_TOP_MASS: f64 = 1.0 - 1e-12;
const OVERFLOW_LIMIT: u64 = 1 << 62;
/// Generations smaller than this are simulated individual by individual.
const INDIVIDUAL_DRAW_LIMIT: u64 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Plain,
    Tilted,
    Exact,
}

impl EstimatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::Plain => "plain",
            EstimatorKind::Tilted => "tilted",
            EstimatorKind::Exact => "exact",
        }
    }
}

/// A tail probability estimate; all probabilities are natural logs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailEstimate {
    pub x: f64,
    pub log_p_hat: f64,
    pub n_samples: u64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub kind: EstimatorKind,
    pub seed: u64,
    /// Paths that landed in the event.
    pub hits: u64,
    /// Log of the estimated standard error of the point estimate.
    pub log_std_err: f64,
}

impl TailEstimate {
    pub const CSV_HEADER: &'static str = "x,log_p_hat,ci_low,ci_high,kind,n_samples,seed";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.x,
            self.log_p_hat,
            self.ci_low,
            self.ci_high,
            self.kind.as_str(),
            self.n_samples,
            self.seed
        )
    }

    /// `ln(p_hat + k sigma_hat)`.
    pub fn log_upper(&self, k: f64) -> f64 {
        crate::logspace::log_add(self.log_p_hat, k.ln() + self.log_std_err)
    }

    fn certain(x: f64, n_samples: u64, seed: u64) -> Self {
        Self {
            x,
            log_p_hat: 0.0,
            n_samples,
            ci_low: 0.0,
            ci_high: 0.0,
            kind: EstimatorKind::Plain,
            seed,
            hits: n_samples,
            log_std_err: LOG_ZERO,
        }
    }

    fn from_hits(x: f64, hits: u64, n_samples: u64, seed: u64) -> Self {
        let (lo, hi) = clopper_pearson(hits, n_samples, CP_ALPHA);
        let nf = n_samples as f64;
        let p = hits as f64 / nf;
        let log_p_hat = if hits == 0 { LOG_ZERO } else { (hits as f64).ln() - nf.ln() };
        let log_std_err = 0.5 * (p * (1.0 - p) / nf).ln();
        Self {
            x,
            log_p_hat,
            n_samples,
            ci_low: if lo > 0.0 { lo.ln() } else { LOG_ZERO },
            ci_high: hi.ln(),
            kind: EstimatorKind::Plain,
            seed,
            hits,
            log_std_err,
        }
    }
}

/// Inverse-CDF and multinomial sampling for one offspring law.
#[derive(Debug, Clone)]
struct GenerationSampler {
    probs: Vec<f64>,
    cdf: Vec<f64>,
    /// `upper[k] = sum_{j >= k} p_j`, summed from the top.
    upper: Vec<f64>,
}

impl GenerationSampler {
    fn new(probs: Vec<f64>) -> Self {
        let d = probs.len() - 1;
        let mut cdf = Vec::with_capacity(d + 1);
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            cdf.push(acc);
        }
        cdf[d] = 1.0;
        let mut upper = vec![0.0; d + 1];
        let mut tail = 0.0;
        for k in (0..=d).rev() {
            tail += probs[k];
            upper[k] = tail;
        }
        Self { probs, cdf, upper }
    }

    fn d(&self) -> usize {
        self.probs.len() - 1
    }

    /// Total offspring of `parents` independent individuals.
    fn offspring_sum<R: Rng + ?Sized>(&self, parents: u64, rng: &mut R) -> u64 {
        if parents <= INDIVIDUAL_DRAW_LIMIT {
            return (0..parents)
                .map(|_| {
                    let u: f64 = rng.random();
                    self.cdf.iter().position(|&c| u < c).unwrap_or(self.d()) as u64
                })
                .sum();
        }
        // multinomial counts through conditional binomials
        let d = self.d();
        let mut remaining = parents;
        let mut total = 0u64;
        for k in 0..d {
            if remaining == 0 {
                break;
            }
            if self.probs[k] == 0.0 {
                continue;
            }
            let q = (self.probs[k] / self.upper[k]).min(1.0);
            let count = Binomial::new(remaining, q)
                .expect("conditional probability lies in [0, 1]")
                .sample(rng);
            total += k as u64 * count;
            remaining -= count;
        }
        total + d as u64 * remaining
    }
}

/// `Z_0, ..., Z_n` for one path.
pub fn simulate_generation_sizes<R: Rng + ?Sized>(
    dist: &OffspringDistribution,
    n: u32,
    rng: &mut R,
) -> Result<Vec<u64>> {
    let sampler = GenerationSampler::new(dist.probs().to_vec());
    let mut sizes = Vec::with_capacity(n as usize + 1);
    let mut z = 1u64;
    sizes.push(z);
    for _ in 0..n {
        if z > OVERFLOW_LIMIT / sampler.d() as u64 {
            return Err(Error::Overflow);
        }
        z = sampler.offspring_sum(z, rng);
        sizes.push(z);
    }
    Ok(sizes)
}

/// Final generation sizes `Z_n` of `n_samples` independent paths.
pub fn sample_zn(dist: &OffspringDistribution, n: u32, n_samples: u64, seed: u64) -> Result<Vec<u64>> {
    map_indexed(n_samples as usize, |i| {
        let mut rng = substream(seed, i as u64);
        simulate_generation_sizes(dist, n, &mut rng).map(|z| z[n as usize])
    })
    .into_iter()
    .collect()
}

fn check_samples(n_samples: u64) -> Result<()> {
    if n_samples == 0 {
        return Err(Error::Range("n_samples must be at least 1".into()));
    }
    Ok(())
}

/// Hit frequency of `{W_n >= x}` with a 99% Clopper-Pearson interval.
pub fn estimate_tail(
    dist: &OffspringDistribution,
    n: u32,
    x: f64,
    n_samples: u64,
    seed: u64,
) -> Result<TailEstimate> {
    check_samples(n_samples)?;
    if x <= 0.0 {
        return Ok(TailEstimate::certain(x, n_samples, seed));
    }
    let t = z_threshold(dist.m(), n, x);
    let z = sample_zn(dist, n, n_samples, seed)?;
    let hits = z.iter().filter(|&&v| v >= t).count() as u64;
    Ok(TailEstimate::from_hits(x, hits, n_samples, seed))
}

/// Hit frequency of `{max_{l <= horizon} W_l >= x}`.
pub fn estimate_sup_tail(
    dist: &OffspringDistribution,
    horizon: u32,
    x: f64,
    n_samples: u64,
    seed: u64,
) -> Result<TailEstimate> {
    check_samples(n_samples)?;
    if x <= 1.0 {
        // W_0 = 1
        return Ok(TailEstimate::certain(x, n_samples, seed));
    }
    let thresholds: Vec<u64> = (0..=horizon).map(|l| z_threshold(dist.m(), l, x)).collect();
    let sampler = GenerationSampler::new(dist.probs().to_vec());
    let flags: Vec<Result<bool>> = map_indexed(n_samples as usize, |i| {
        let mut rng = substream(seed, i as u64);
        let mut z = 1u64;
        for t in &thresholds[1..] {
            if z == 0 {
                return Ok(false);
            }
            if z > OVERFLOW_LIMIT / sampler.d() as u64 {
                return Err(Error::Overflow);
            }
            z = sampler.offspring_sum(z, &mut rng);
            if z >= *t {
                return Ok(true);
            }
        }
        Ok(false)
    });
    let mut hits = 0u64;
    for f in flags {
        hits += f? as u64;
    }
    Ok(TailEstimate::from_hits(x, hits, n_samples, seed))
}

/// Per-generation tilt parameters: generation-`g` parents draw offspring
/// from `q(k) ∝ p_k e^{theta_g k}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum TiltSchedule {
    Constant(f64),
    PerGeneration(Vec<f64>),
}

impl TiltSchedule {
    /// The change of measure induced by `exp(t W_n)`:
    /// `theta_g = ln E exp((t/m^{g+1}) W_{n-g-1})`. Its last entry is
    /// `t/m^n`, and the path weight telescopes to `ln psi_n(t) - t W_n`.
    /// Entries are capped so no tilted law degenerates onto the top atom.
    pub fn exponential(dist: &OffspringDistribution, n: u32, t: f64) -> Result<Self> {
        let cap = max_nondegenerate_theta(dist)?;
        let m = dist.m();
        let thetas = (0..n)
            .map(|g| {
                log_psi_wn(dist, t / m.powi(g as i32 + 1), n - g - 1).map(|theta| theta.min(cap))
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(TiltSchedule::PerGeneration(thetas))
    }

    fn theta(&self, g: usize) -> f64 {
        match self {
            TiltSchedule::Constant(t) => *t,
            TiltSchedule::PerGeneration(v) => v[g],
        }
    }
}

/// Tilted law `q_theta` in linear scale, and `ln f(e^theta)`.
fn tilt(dist: &OffspringDistribution, theta: f64) -> (Vec<f64>, f64) {
    let terms: Vec<f64> = dist
        .log_probs()
        .iter()
        .enumerate()
        .map(|(k, lp)| lp + theta * k as f64)
        .collect();
    let log_norm = log_sum_exp(&terms);
    let probs = terms.iter().map(|t| (t - log_norm).exp()).collect();
    (probs, log_norm)
}

fn tilted_top_mass(dist: &OffspringDistribution, theta: f64) -> f64 {
    let (q, _) = tilt(dist, theta);
    q[dist.d()]
}

/// Largest `theta` whose tilted law keeps mass at most `1 - 1e-12` on `d`.
fn max_nondegenerate_theta(dist: &OffspringDistribution) -> Result<f64> {
    let top0 = tilted_top_mass(dist, 0.0);
    if top0 > MAX_TILTED_TOP_MASS {
        return Err(Error::DegenerateTilt { mass_on_top: top0 });
    }
    let mut hi = 1.0;
    while tilted_top_mass(dist, hi) <= MAX_TILTED_TOP_MASS {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if tilted_top_mass(dist, mid) <= MAX_TILTED_TOP_MASS {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Importance-sampling estimate of `P(W_n >= x)` under a constant tilt.
///
/// Paths are drawn from `q_theta(k) = p_k e^{theta k} / f(e^theta)`. A path's
/// log-weight is `(sum_{g<n} Z_g) ln f(e^theta) - theta sum_{g=1..n} Z_g`. With
/// `theta = 0` this is exactly [`estimate_tail`].
pub fn estimate_tail_tilted(
    dist: &OffspringDistribution,
    n: u32,
    x: f64,
    theta: f64,
    n_samples: u64,
    seed: u64,
) -> Result<TailEstimate> {
    if !(theta >= 0.0) {
        return Err(Error::Range(format!("theta = {theta} must be nonnegative")));
    }
    let top = tilted_top_mass(dist, theta);
    if top > MAX_TILTED_TOP_MASS {
        return Err(Error::DegenerateTilt { mass_on_top: top });
    }
    if theta == 0.0 {
        return estimate_tail(dist, n, x, n_samples, seed);
    }
    estimate_tail_scheduled(dist, n, x, &TiltSchedule::Constant(theta), n_samples, seed)
}

/// Importance-sampling estimate of `P(W_n >= x)` under a tilt schedule.
///
/// The point estimate is the mean of `w 1{hit}`; the band is
/// `p_hat ± 3 sigma_hat` with `sigma_hat` the sample standard error.
pub fn estimate_tail_scheduled(
    dist: &OffspringDistribution,
    n: u32,
    x: f64,
    schedule: &TiltSchedule,
    n_samples: u64,
    seed: u64,
) -> Result<TailEstimate> {
    check_samples(n_samples)?;
    if let TiltSchedule::PerGeneration(v) = schedule {
        if v.len() != n as usize {
            return Err(Error::Range(format!("schedule has {} entries, need {n}", v.len())));
        }
    }
    let laws: Vec<(GenerationSampler, f64, f64)> = (0..n as usize)
        .map(|g| {
            let theta = schedule.theta(g);
            let (q, log_norm) = tilt(dist, theta);
            if q[dist.d()] > MAX_TILTED_TOP_MASS {
                return Err(Error::DegenerateTilt { mass_on_top: q[dist.d()] });
            }
            Ok((GenerationSampler::new(q), theta, log_norm))
        })
        .collect::<Result<_>>()?;
    let t = z_threshold(dist.m(), n, x);
    let d = dist.d() as u64;

    let paths: Vec<Result<Option<f64>>> = map_indexed(n_samples as usize, |i| {
        let mut rng = substream(seed, i as u64);
        let mut z = 1u64;
        let mut log_w = 0.0;
        for (sampler, theta, log_norm) in &laws {
            if z == 0 {
                break;
            }
            if z > OVERFLOW_LIMIT / d {
                return Err(Error::Overflow);
            }
            let next = sampler.offspring_sum(z, &mut rng);
            log_w += z as f64 * log_norm - theta * next as f64;
            z = next;
        }
        Ok((z >= t).then_some(log_w))
    });
    let mut hit_weights = Vec::new();
    for p in paths {
        if let Some(w) = p? {
            hit_weights.push(w);
        }
    }
    Ok(weighted_estimate(x, &hit_weights, n_samples, seed))
}

/// Mean and standard error of `w 1{hit}` from the log-weights of hits.
fn weighted_estimate(x: f64, log_weights: &[f64], n_samples: u64, seed: u64) -> TailEstimate {
    let ln_n = (n_samples as f64).ln();
    let log_p_hat = log_sum_exp(log_weights) - ln_n;
    let squares: Vec<f64> = log_weights.iter().map(|w| 2.0 * w).collect();
    let log_second = log_sum_exp(&squares) - ln_n;
    // sample variance of the per-path terms, then standard error of the mean
    let log_var = if n_samples > 1 && log_weights.len() > 1 {
        log_sub(log_second, 2.0 * log_p_hat) + ln_n - ((n_samples - 1) as f64).ln()
    } else {
        LOG_ZERO
    };
    let log_std_err = 0.5 * (log_var - ln_n);
    let spread = TILT_SIGMAS.ln() + log_std_err;
    TailEstimate {
        x,
        log_p_hat,
        n_samples,
        ci_low: log_sub(log_p_hat, spread),
        ci_high: crate::logspace::log_add(log_p_hat, spread),
        kind: EstimatorKind::Tilted,
        seed,
        hits: log_weights.len() as u64,
        log_std_err,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bound::doob_sup_bound;
    use crate::exact::generation_pmf;
    use crate::offspring::make_offspring;

    fn two_atom() -> OffspringDistribution {
        make_offspring(&[0.25, 0.0, 0.75]).unwrap()
    }

    #[test]
    fn deterministic_doubling() {
        let dist = make_offspring(&[0.0, 0.0, 1.0]).unwrap();
        let mut rng = substream(1, 0);
        assert_eq!(simulate_generation_sizes(&dist, 5, &mut rng).unwrap(), vec![1, 2, 4, 8, 16, 32]);
        assert_eq!(simulate_generation_sizes(&dist, 0, &mut rng).unwrap(), vec![1]);
        // multinomial branch for large generations
        assert_eq!(simulate_generation_sizes(&dist, 40, &mut rng).unwrap()[40], 1 << 40);
    }

    #[test]
    fn overflow_guard() {
        let dist = make_offspring(&[0.0, 0.0, 1.0]).unwrap();
        let mut rng = substream(1, 0);
        assert_eq!(simulate_generation_sizes(&dist, 70, &mut rng), Err(Error::Overflow));
    }

    #[test]
    fn empirical_atom_frequency() {
        let z = sample_zn(&two_atom(), 2, 100_000, 5).unwrap();
        let hits = z.iter().filter(|&&v| v == 4).count() as f64;
        let p: f64 = 27.0 / 64.0;
        let sigma = (p * (1.0 - p) / 1e5).sqrt();
        assert!((hits / 1e5 - p).abs() < 3.0 * sigma);
    }

    #[test]
    fn plain_estimate_covers_exact_value() {
        let est = estimate_tail(&two_atom(), 2, 1.0, 100_000, 9).unwrap();
        let p = 27.0f64 / 64.0;
        assert!(est.ci_low <= p.ln() && p.ln() <= est.ci_high);
        assert!(est.ci_low <= est.log_p_hat && est.log_p_hat <= est.ci_high);
        // hit count is an integer
        let count = est.log_p_hat.exp() * est.n_samples as f64;
        assert!((count - count.round()).abs() < 1e-6);
    }

    #[test]
    fn plain_estimate_edges() {
        let est = estimate_tail(&two_atom(), 2, 0.0, 1000, 1).unwrap();
        assert_eq!((est.log_p_hat, est.ci_low, est.ci_high), (0.0, 0.0, 0.0));
        // (d/m)^2 = 16/9 is the maximum of W_2
        let est = estimate_tail(&two_atom(), 2, 1.8, 1000, 1).unwrap();
        assert_eq!(est.log_p_hat, LOG_ZERO);
        assert_eq!(est.hits, 0);
        let expected = 1.0 - 0.005f64.powf(1.0 / 1000.0);
        assert!((est.ci_high.exp() - expected).abs() < 1e-15);
    }

    #[test]
    fn seed_determinism() {
        let a = estimate_tail(&two_atom(), 6, 1.5, 20_000, 77).unwrap();
        let b = estimate_tail(&two_atom(), 6, 1.5, 20_000, 77).unwrap();
        assert_eq!(a, b);
        let c = estimate_tail(&two_atom(), 6, 1.5, 20_000, 78).unwrap();
        assert_ne!(a.hits, c.hits);
    }

    #[test]
    fn sup_tail_edges() {
        let det = make_offspring(&[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(estimate_sup_tail(&det, 8, 1.0, 100, 1).unwrap().log_p_hat, 0.0);
        assert_eq!(estimate_sup_tail(&det, 8, 1.01, 100, 1).unwrap().hits, 0);
    }

    #[test]
    fn sup_tail_respects_doob_and_monotone_horizon() {
        let dist = two_atom();
        let n = 100_000;
        let est = estimate_sup_tail(&dist, 12, 3.0, n, 3).unwrap();
        let bound = doob_sup_bound(1.5, 2, 3.0).unwrap();
        let sigma = (bound * (1.0 - bound) / n as f64).sqrt();
        assert!(est.log_p_hat.exp() <= bound + 3.0 * sigma);
        let mut prev = 0;
        for h in [2, 4, 8, 12] {
            let e = estimate_sup_tail(&dist, h, 1.5, 20_000, 3).unwrap();
            assert!(e.hits >= prev);
            prev = e.hits;
        }
    }

    #[test]
    fn zero_tilt_is_plain_estimate() {
        let a = estimate_tail_tilted(&two_atom(), 4, 2.0, 0.0, 10_000, 4).unwrap();
        let b = estimate_tail(&two_atom(), 4, 2.0, 10_000, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tiny_tilt_matches_plain_hits() {
        // the weighted path with theta -> 0 reproduces the hit frequency
        let a = estimate_tail_tilted(&two_atom(), 4, 2.0, 1e-300, 10_000, 4).unwrap();
        let b = estimate_tail(&two_atom(), 4, 2.0, 10_000, 4).unwrap();
        assert_eq!(a.hits, b.hits);
        assert!((a.log_p_hat - b.log_p_hat).abs() < 1e-12);
    }

    #[test]
    fn tilted_estimate_at_the_top_atom() {
        let x = 16.0 / 9.0;
        let est = estimate_tail_tilted(&two_atom(), 2, x, 1.0, 100_000, 21).unwrap();
        let exact = f64::ln(27.0 / 64.0);
        let p = est.log_p_hat.exp();
        let sigma = est.log_std_err.exp();
        assert!((p - exact.exp()).abs() <= 3.0 * sigma, "p = {p}, sigma = {sigma}");
    }

    #[test]
    fn constant_tilts_are_unbiased() {
        // far in the bulk a strong tilt makes the weights heavy tailed and the
        // sample sigma unreliable, so the cases sit in moderately deep tails
        let cases: [(&[f64], u32, f64); 8] = [
            (&[0.25, 0.0, 0.75], 2, 0.7),
            (&[0.25, 0.0, 0.75], 4, 0.7),
            (&[0.25, 0.0, 0.75], 6, 0.9),
            (&[0.2, 0.1, 0.7], 2, 0.7),
            (&[0.2, 0.1, 0.7], 4, 0.7),
            (&[0.2, 0.1, 0.7], 6, 0.9),
            (&[0.1, 0.5, 0.4], 2, 0.7),
            (&[0.1, 0.5, 0.4], 4, 0.7),
        ];
        for (probs, n, frac) in cases {
            let dist = make_offspring(probs).unwrap();
            let pmf = generation_pmf(&dist, n).unwrap();
            let x = frac * (2.0 / dist.m()).powi(n as i32);
            let exact = pmf.tail_w(x);
            for theta in [0.0, 0.5, 1.0, 2.0] {
                let est = estimate_tail_tilted(&dist, n, x, theta, 20_000, 31).unwrap();
                if theta == 0.0 {
                    assert!(est.ci_low <= exact && exact <= est.ci_high);
                    continue;
                }
                let (p, sigma) = (est.log_p_hat.exp(), est.log_std_err.exp());
                assert!(
                    (p - exact.exp()).abs() <= 3.0 * sigma,
                    "{probs:?} n={n} theta={theta}: p = {p}, exact = {}, sigma = {sigma}",
                    exact.exp()
                );
            }
        }
    }

    #[test]
    fn degenerate_tilt() {
        let det = make_offspring(&[0.0, 0.0, 1.0]).unwrap();
        for theta in [0.0, 0.5, 3.0] {
            assert!(matches!(
                estimate_tail_tilted(&det, 3, 1.0, theta, 10, 1),
                Err(Error::DegenerateTilt { .. })
            ));
        }
        assert!(matches!(
            estimate_tail_tilted(&two_atom(), 3, 1.0, 20.0, 10, 1),
            Err(Error::DegenerateTilt { .. })
        ));
    }

    #[test]
    fn exponential_schedule_ends_at_scaled_t() {
        let dist = make_offspring(&[0.4, 0.0, 0.6]).unwrap();
        let TiltSchedule::PerGeneration(v) = TiltSchedule::exponential(&dist, 10, 3.0).unwrap() else {
            panic!("expected a per-generation schedule");
        };
        assert_eq!(v.len(), 10);
        assert!((v[9] - 3.0 / 1.2f64.powi(10)).abs() < 1e-15);
        assert!(v.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn exponential_schedule_is_unbiased() {
        let dist = make_offspring(&[0.4, 0.0, 0.6]).unwrap();
        let pmf = generation_pmf(&dist, 8).unwrap();
        let x = 12.0;
        let exact = pmf.tail_w(x);
        let t = crate::mgf::chernoff_bound_wn(&dist, 8, x).unwrap().t_star;
        let sched = TiltSchedule::exponential(&dist, 8, t).unwrap();
        let est = estimate_tail_scheduled(&dist, 8, x, &sched, 50_000, 8).unwrap();
        let (p, sigma) = (est.log_p_hat.exp(), est.log_std_err.exp());
        assert!((p - exact.exp()).abs() <= 3.0 * sigma, "p = {p}, sigma = {sigma}");
        assert!(sigma < 0.1 * p);
    }

    #[test]
    fn csv_row_layout() {
        let est = estimate_tail(&two_atom(), 2, 1.0, 100, 3).unwrap();
        assert_eq!(est.csv_row().split(',').count(), TailEstimate::CSV_HEADER.split(',').count());
        assert!(est.csv_row().contains(",plain,100,3"));
    }
}
