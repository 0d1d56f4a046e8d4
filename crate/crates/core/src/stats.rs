//! Interval estimates and discrete-distribution helpers used by the
//! Monte Carlo and domination checks.

use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;

use crate::logspace::{log_sum_exp, LOG_ZERO};

/// Two-sided Clopper-Pearson interval for `hits` successes in `n` trials at
/// confidence `1 - alpha`. Returned in linear scale.
pub fn clopper_pearson(hits: u64, n: u64, alpha: f64) -> (f64, f64) {
    assert!(n > 0 && hits <= n, "clopper_pearson: need 0 <= hits <= n, n > 0");
    let half = alpha / 2.0;
    let nf = n as f64;
    let lower = if hits == 0 {
        0.0
    } else if hits == n {
        (half.ln() / nf).exp()
    } else {
        beta_quantile(half, hits as f64, (n - hits + 1) as f64)
    };
    let upper = if hits == n {
        1.0
    } else if hits == 0 {
        -(half.ln() / nf).exp_m1()
    } else {
        beta_quantile(1.0 - half, (hits + 1) as f64, (n - hits) as f64)
    };
    (lower, upper)
}

/// Inverse of the regularized incomplete beta function by bisection.
fn beta_quantile(q: f64, a: f64, b: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_reg(a, b, mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Dvoretzky-Kiefer-Wolfowitz half-width: with probability at least
/// `1 - delta` the empirical CDF of `n` samples is uniformly within this
/// distance of the true CDF.
pub fn dkw_epsilon(n: u64, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

pub fn poisson_ln_pmf(lambda: f64, k: u64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 0.0 } else { LOG_ZERO };
    }
    let kf = k as f64;
    -lambda + kf * lambda.ln() - ln_gamma(kf + 1.0)
}

/// `ln P(Pois(lambda) >= k)`, summed upward from `k` (no cancellation).
pub fn poisson_ln_sf(lambda: f64, k: u64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    if lambda == 0.0 {
        return LOG_ZERO;
    }
    // terms decay at least geometrically once j > lambda
    let mut terms = Vec::new();
    let mut j = k;
    loop {
        let t = poisson_ln_pmf(lambda, j);
        terms.push(t);
        if j as f64 > 2.0 * lambda && t - terms[0] < -60.0 {
            break;
        }
        j += 1;
    }
    log_sum_exp(&terms)
}

pub fn binomial_ln_pmf(n: u64, p: f64, k: u64) -> f64 {
    if k > n {
        return LOG_ZERO;
    }
    if p == 0.0 {
        return if k == 0 { 0.0 } else { LOG_ZERO };
    }
    if p == 1.0 {
        return if k == n { 0.0 } else { LOG_ZERO };
    }
    let (nf, kf) = (n as f64, k as f64);
    ln_gamma(nf + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(nf - kf + 1.0)
        + kf * p.ln()
        + (nf - kf) * (-p).ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cp_zero_hits_closed_form() {
        let (lo, hi) = clopper_pearson(0, 1000, 0.01);
        assert_eq!(lo, 0.0);
        assert!((hi - (1.0 - 0.005f64.powf(1.0 / 1000.0))).abs() < 1e-15);
    }

    #[test]
    fn cp_interior_matches_reference() {
        // scipy.stats.beta.ppf(0.005, 10, 91), beta.ppf(0.995, 11, 90)
        let (lo, hi) = clopper_pearson(10, 100, 0.01);
        assert!((lo - 0.0381956532).abs() < 1e-8, "{lo}");
        assert!((hi - 0.2019535208).abs() < 1e-8, "{hi}");
    }

    #[test]
    fn cp_all_hits() {
        let (lo, hi) = clopper_pearson(50, 50, 0.01);
        assert_eq!(hi, 1.0);
        assert!((lo - 0.005f64.powf(1.0 / 50.0)).abs() < 1e-15);
    }

    #[test]
    fn poisson_tail_at_one() {
        let sf = poisson_ln_sf(1.0 / 3.0, 1).exp();
        assert!((sf - (1.0 - (-1.0f64 / 3.0).exp())).abs() < 1e-14);
        assert_eq!(poisson_ln_sf(0.5, 0), 0.0);
    }

    #[test]
    fn binomial_pmf_sums_to_one() {
        let total: f64 = (0..=30).map(|k| binomial_ln_pmf(30, 0.2, k).exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
