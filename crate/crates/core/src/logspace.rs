//! Underflow-safe arithmetic on natural-log probabilities.
//!
//! Zero mass is represented by `f64::NEG_INFINITY`. Sums are formed by
//! shifting every term by the running maximum and accumulating the shifted
//! exponentials with pairwise summation, so round-off grows like the log of
//! the number of terms.

pub const LOG_ZERO: f64 = f64::NEG_INFINITY;

/// `ln(e^a + e^b)`.
#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == LOG_ZERO {
        return LOG_ZERO;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(1 - e^x)` for `x <= 0`, accurate on both ends of the range.
#[inline]
pub fn ln_one_minus_exp(x: f64) -> f64 {
    debug_assert!(x <= 0.0);
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// `ln(e^a - e^b)` for `a >= b`; returns `LOG_ZERO` when the difference is zero.
#[inline]
pub fn log_sub(a: f64, b: f64) -> f64 {
    if b == LOG_ZERO {
        return a;
    }
    if b >= a {
        return LOG_ZERO;
    }
    a + ln_one_minus_exp(b - a)
}

/// Pairwise (tree) summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 16;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Log-sum-exp over a slice, with pairwise accumulation of the shifted terms.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(LOG_ZERO, f64::max);
    if max == LOG_ZERO {
        return LOG_ZERO;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let shifted: Vec<f64> = xs.iter().map(|&x| (x - max).exp()).collect();
    max + pairwise_sum(&shifted).ln()
}

/// Log-sum-exp with a reusable scratch buffer, for hot loops.
pub(crate) fn log_sum_exp_with(xs: &[f64], scratch: &mut Vec<f64>) -> f64 {
    let max = xs.iter().copied().fold(LOG_ZERO, f64::max);
    if max == LOG_ZERO {
        return LOG_ZERO;
    }
    scratch.clear();
    scratch.extend(xs.iter().map(|&x| (x - max).exp()));
    max + pairwise_sum(scratch).ln()
}

/// Natural log of a probability, mapping 0 to `LOG_ZERO`.
#[inline]
pub fn ln_prob(p: f64) -> f64 {
    if p > 0.0 {
        p.ln()
    } else {
        LOG_ZERO
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_add_matches_linear() {
        let a = 0.3f64.ln();
        let b = 0.2f64.ln();
        assert!((log_add(a, b) - 0.5f64.ln()).abs() < 1e-15);
        assert_eq!(log_add(LOG_ZERO, LOG_ZERO), LOG_ZERO);
        assert_eq!(log_add(a, LOG_ZERO), a);
    }

    #[test]
    fn log_sum_exp_survives_deep_underflow() {
        let xs = [-5000.0, -5000.0 + 2f64.ln(), LOG_ZERO];
        assert!((log_sum_exp(&xs) - (-5000.0 + 3f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), LOG_ZERO);
    }

    #[test]
    fn log_sub_and_complement() {
        assert!((log_sub(0.0, 0.25f64.ln()) - 0.75f64.ln()).abs() < 1e-15);
        assert_eq!(log_sub(-1.0, -1.0), LOG_ZERO);
        assert!((ln_one_minus_exp(-1e-20) - (1e-20f64).ln()).abs() < 1e-12);
        assert!((ln_one_minus_exp(-50.0) + (-50.0f64).exp()).abs() < 1e-30);
    }

    #[test]
    fn pairwise_sum_is_accurate() {
        let xs = vec![0.1; 10_000];
        assert!((pairwise_sum(&xs) - 1000.0).abs() < 1e-10);
    }
}
