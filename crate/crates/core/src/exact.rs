//! Exact law of the generation sizes `Z_n`, in log space.
//!
//! The pmf of `Z_{k+1}` is the coefficient sequence of `f(g)` where `g` is the
//! pmf polynomial of `Z_k`. Each level is evaluated by Horner's scheme,
//! `f(g) = p_0 + g (p_1 + g (p_2 + ...))`, with every polynomial product done
//! as a log-sum-exp convolution. Deep tails far below the smallest positive
//! double are retained.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::logspace::{log_add, log_sum_exp, log_sum_exp_with, LOG_ZERO};
use crate::offspring::OffspringDistribution;

/// Largest admissible support size `d^n`.
pub const SUPPORT_BUDGET: u64 = 1 << 20;

/// Convolutions longer than this fan out across the worker pool.
const PARALLEL_CUTOFF: usize = 2048;

/// Exact log-pmf of `Z_n` on `{0, ..., d^n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationPmf {
    pub n: u32,
    pub log_probs: Vec<f64>,
    /// `m^n` rounded to double; `W_n = Z_n / scale`.
    pub scale: f64,
    m: f64,
    d: usize,
    scale_dd: DoubleDouble,
}

impl GenerationPmf {
    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `ln P(Z_n = k)`.
    pub fn log_prob(&self, k: usize) -> f64 {
        self.log_probs.get(k).copied().unwrap_or(LOG_ZERO)
    }

    /// `ln P(Z_n >= t)`.
    pub fn tail_z(&self, t: u64) -> f64 {
        if t == 0 {
            return 0.0;
        }
        match usize::try_from(t) {
            Ok(t) if t < self.log_probs.len() => log_sum_exp(&self.log_probs[t..]).min(0.0),
            _ => LOG_ZERO,
        }
    }

    /// Smallest integer `k` with `k >= x m^n`. Exact ties count as inside
    /// the closed event `{W_n >= x}`.
    pub fn threshold(&self, x: f64) -> u64 {
        threshold_for(x, self.scale_dd)
    }

    /// `ln P(W_n >= x)`.
    pub fn tail_w(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        self.tail_z(self.threshold(x))
    }

    /// `ln E[exp(x W_n)]`.
    pub fn log_mgf_w(&self, x: f64) -> f64 {
        let terms: Vec<f64> = self
            .log_probs
            .iter()
            .enumerate()
            .map(|(k, lp)| lp + x * k as f64 / self.scale)
            .collect();
        log_sum_exp(&terms)
    }

    /// Mean and variance of `Z_n`. Both sums are formed in log space.
    pub fn moments(&self) -> (f64, f64) {
        let mean_terms: Vec<f64> = self
            .log_probs
            .iter()
            .enumerate()
            .map(|(k, lp)| if k == 0 { LOG_ZERO } else { lp + (k as f64).ln() })
            .collect();
        let mean = log_sum_exp(&mean_terms).exp();
        let var_terms: Vec<f64> = self
            .log_probs
            .iter()
            .enumerate()
            .map(|(k, lp)| {
                let dev = (k as f64 - mean).abs();
                if dev == 0.0 {
                    LOG_ZERO
                } else {
                    lp + 2.0 * dev.ln()
                }
            })
            .collect();
        (mean, log_sum_exp(&var_terms).exp())
    }

    /// Mean and variance of `W_n = Z_n / m^n`.
    pub fn w_moments(&self) -> (f64, f64) {
        let (mean, var) = self.moments();
        (mean / self.scale, var / (self.scale * self.scale))
    }

    /// CSV with columns `k, log_prob, w`, preceded by a comment line with
    /// `n`, `m` and `d`. Zero-mass rows are skipped.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# n={},m={},d={}\nk,log_prob,w\n", self.n, self.m, self.d);
        for (k, lp) in self.log_probs.iter().enumerate() {
            if *lp > LOG_ZERO {
                let _ = writeln!(out, "{k},{lp},{}", k as f64 / self.scale);
            }
        }
        out
    }
}

/// Exact pmf of `Z_n`.
pub fn generation_pmf(dist: &OffspringDistribution, n: u32) -> Result<GenerationPmf> {
    let d = dist.d();
    let support = (d as u64)
        .checked_pow(n)
        .filter(|s| *s <= SUPPORT_BUDGET)
        .ok_or_else(|| {
            Error::BudgetExceeded(format!("support d^n = {d}^{n} exceeds {SUPPORT_BUDGET}"))
        })?;
    debug_assert!(support >= 1);

    let lp = dist.log_probs();
    let mut current = vec![LOG_ZERO, 0.0];
    for _ in 0..n {
        let mut acc = vec![lp[d]];
        for j in (0..d).rev() {
            acc = log_convolve(&acc, &current);
            acc[0] = log_add(acc[0], lp[j]);
        }
        current = acc;
    }
    let scale_dd = DoubleDouble::powi(dist.m(), n);
    Ok(GenerationPmf {
        n,
        log_probs: current,
        scale: scale_dd.hi + scale_dd.lo,
        m: dist.m(),
        d,
        scale_dd,
    })
}

/// `ln P(Z_n >= t)`.
pub fn tail_zn(pmf: &GenerationPmf, t: u64) -> f64 {
    pmf.tail_z(t)
}

/// `ln P(W_n >= x)`.
pub fn tail_wn(dist: &OffspringDistribution, n: u32, x: f64) -> Result<f64> {
    if x < 0.0 || x.is_nan() {
        return Err(Error::Domain(format!("tail threshold x = {x} must be nonnegative")));
    }
    Ok(generation_pmf(dist, n)?.tail_w(x))
}

/// Mean and variance of `Z_n`.
pub fn pmf_moments(pmf: &GenerationPmf) -> (f64, f64) {
    pmf.moments()
}

/// Log-domain convolution: `out[i] = ln sum_{a+b=i} e^{x[a] + y[b]}`.
///
/// Output cells are independent, so the result is bit-identical whether it
/// is computed sequentially or on the worker pool.
pub fn log_convolve(x: &[f64], y: &[f64]) -> Vec<f64> {
    let len = x.len() + y.len() - 1;
    let xs: Vec<(usize, f64)> = x
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > LOG_ZERO)
        .map(|(i, v)| (i, *v))
        .collect();
    let cell = |i: usize, scratch: &mut Vec<f64>, terms: &mut Vec<f64>| -> f64 {
        terms.clear();
        let lo = i.saturating_sub(y.len() - 1);
        let start = xs.partition_point(|(a, _)| *a < lo);
        for &(a, va) in xs[start..].iter().take_while(|(a, _)| *a <= i) {
            let vb = y[i - a];
            if vb > LOG_ZERO {
                terms.push(va + vb);
            }
        }
        log_sum_exp_with(terms, scratch)
    };
    if len < PARALLEL_CUTOFF {
        let (mut scratch, mut terms) = (Vec::new(), Vec::new());
        return (0..len).map(|i| cell(i, &mut scratch, &mut terms)).collect();
    }
    crate::stream::map_indexed(len, |i| {
        let (mut scratch, mut terms) = (Vec::new(), Vec::new());
        cell(i, &mut scratch, &mut terms)
    })
}

/// Unevaluated sum `hi + lo` carrying about 106 bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

impl DoubleDouble {
    fn two_prod(a: f64, b: f64) -> Self {
        let hi = a * b;
        Self { hi, lo: a.mul_add(b, -hi) }
    }

    fn two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        let bb = s - a;
        Self { hi: s, lo: (a - (s - bb)) + (b - bb) }
    }

    fn mul_f64(self, b: f64) -> Self {
        let p = Self::two_prod(self.hi, b);
        Self::two_sum(p.hi, p.lo + self.lo * b)
    }

    pub fn powi(m: f64, n: u32) -> Self {
        (0..n).fold(Self { hi: 1.0, lo: 0.0 }, |acc, _| acc.mul_f64(m))
    }
}

/// Smallest integer `k >= x * scale` with the product carried in double-double.
/// Products within 4 ulps of an integer are treated as that integer.
pub(crate) fn threshold_for(x: f64, scale: DoubleDouble) -> u64 {
    if x <= 0.0 {
        return 0;
    }
    let p = DoubleDouble::two_prod(x, scale.hi);
    let prod = DoubleDouble::two_sum(p.hi, p.lo + x * scale.lo);
    let nearest = prod.hi.round();
    let gap = (prod.hi - nearest) + prod.lo;
    let ulp = f64::EPSILON * nearest.abs();
    if gap.abs() <= 4.0 * ulp {
        return nearest as u64;
    }
    let c = prod.hi.ceil();
    if c == prod.hi && prod.lo > 0.0 {
        c as u64 + 1
    } else {
        c as u64
    }
}

/// Threshold rule shared with the Monte Carlo estimators.
pub fn z_threshold(m: f64, n: u32, x: f64) -> u64 {
    threshold_for(x, DoubleDouble::powi(m, n))
}
