//! The universal tail bound, its intermediate lemma bounds, and a numeric
//! replay of the arithmetic that links them.
//!
//! With `alpha = ln 3 - 1`, the headline bound is
//! `P(W_n >= x) <= c1 exp(-c2 (m - 1)/m x/d)` with `c1 = 2`, `c2 = alpha/40`,
//! valid for every `n` including the limit.

use std::fmt;

use num_rational::Ratio;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::poisson_ln_sf;

/// `ln 3 - 1`, the rate in the internal-node tail bound.
pub fn alpha() -> f64 {
    3f64.ln() - 1.0
}

/// The theorem's constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConstants {
    pub c1: f64,
    pub c2: f64,
}

impl BoundConstants {
    pub fn new() -> Self {
        Self { c1: 2.0, c2: alpha() / 40.0 }
    }

    /// The exploration threshold `a(m) = 8m / (m - 1)`.
    pub fn a_of_m(m: f64) -> f64 {
        8.0 * m / (m - 1.0)
    }
}

impl Default for BoundConstants {
    fn default() -> Self {
        Self::new()
    }
}

fn check_md(m: f64, d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::Range(format!("d = {d} must be at least 2")));
    }
    if !(m > 1.0) || !m.is_finite() {
        return Err(Error::Range(format!("m = {m} must exceed 1")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoremBound {
    pub raw: f64,
    pub clamped: f64,
    pub log_raw: f64,
    pub log_clamped: f64,
}

/// `c1 exp(-c2 ((m-1)/m) (x/d))`, raw and clamped to 1, with logs.
pub fn theorem_bound(m: f64, d: usize, x: f64) -> Result<TheoremBound> {
    check_md(m, d)?;
    if !(x >= 0.0) {
        return Err(Error::Range(format!("x = {x} must be nonnegative")));
    }
    let k = BoundConstants::new();
    let log_raw = k.c1.ln() - k.c2 * ((m - 1.0) / m) * (x / d as f64);
    Ok(TheoremBound {
        raw: log_raw.exp(),
        clamped: log_raw.exp().min(1.0),
        log_raw,
        log_clamped: log_raw.min(0.0),
    })
}

/// Maximal-inequality bound `P(sup_l W_l >= x) <= (1 + d/(m-1)) / x^2`.
pub fn doob_sup_bound(m: f64, d: usize, x: f64) -> Result<f64> {
    check_md(m, d)?;
    if !(x > 0.0) {
        return Err(Error::Range(format!("x = {x} must be positive")));
    }
    Ok((1.0 + d as f64 / (m - 1.0)) / (x * x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InternalNodeBound {
    /// Upper bound on `p_n = P(sup_l W_l >= a d m^n)`.
    pub p: f64,
    /// `a d m^n p`.
    pub scaled: f64,
    /// `a d m^n p <= 1/8`.
    pub scaled_ok: bool,
    /// `p <= 1/16`.
    pub small_ok: bool,
}

/// Bound on the probability that a type-`n` vertex of the exploration tree
/// is internal, with `a = 8m/(m-1)`:
/// `1/(a^2 m^{2n} d^2) + 1/(a^2 m^{2n} d (m-1))`.
pub fn internal_node_prob_bound(m: f64, d: usize, n: u32) -> Result<InternalNodeBound> {
    check_md(m, d)?;
    let a = BoundConstants::a_of_m(m);
    let df = d as f64;
    let mn = m.powi(n as i32);
    let base = a * a * mn * mn;
    let p = 1.0 / (base * df * df) + 1.0 / (base * df * (m - 1.0));
    let scaled = a * df * mn * p;
    Ok(InternalNodeBound {
        p,
        scaled,
        scaled_ok: scaled <= 0.125,
        small_ok: p <= 0.0625,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaBounds {
    /// `P(|i_T| >= r) <= e^{-(ln 3 - 1) r}`.
    pub lemma1: f64,
    /// `P(W_n > 5adr | |i_T| <= r) <= e^{-2r/3}`.
    pub lemma2: f64,
    pub combined: f64,
}

pub fn lemma_tail_bounds(r: u64) -> Result<LemmaBounds> {
    if r == 0 {
        return Err(Error::Range("r must be at least 1".into()));
    }
    let rf = r as f64;
    let lemma1 = (-alpha() * rf).exp();
    let lemma2 = (-2.0 * rf / 3.0).exp();
    Ok(LemmaBounds { lemma1, lemma2, combined: lemma1 + lemma2 })
}

/// One verified link of the derivation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainStep {
    pub name: &'static str,
    pub passed: bool,
    pub value: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainReport {
    pub m: f64,
    pub d: usize,
    pub a: f64,
    /// Coefficient of `((m-1)/m)(x/d)` obtained from `r = x/(5ad)`.
    pub c2_coefficient: f64,
    pub steps: Vec<ChainStep>,
}

impl ChainReport {
    pub fn passed(&self) -> bool {
        self.steps.iter().all(|s| s.passed)
    }
}

impl fmt::Display for ChainReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "chain m={} d={} a={:.6}", self.m, self.d, self.a)?;
        for s in &self.steps {
            writeln!(
                f,
                "  [{}] {:<28} value={:<14.8e} {}",
                if s.passed { "pass" } else { "FAIL" },
                s.name,
                s.value,
                s.detail
            )?;
        }
        write!(f, "  c2 coefficient = {:.15}", self.c2_coefficient)
    }
}

type Q = Ratio<i64>;

fn q(n: i64, d: i64) -> Q {
    Q::new(n, d)
}

/// Replays the derivation for one `(m, d)`:
///
/// 1. `a d m^n p_n <= 1/8` and `p_n <= 1/16` for `n = 0..=50`;
/// 2. the Poisson rate dominating the internal children of an internal node
///    stays at most `1/3`;
/// 3. the Chernoff step `P(Pois(r/3) >= r) <= e^{-(ln 3 - 1) r}`;
/// 4. the Bernstein constants `3/8 + 1/3 = 17/24`, `(1/2)/(17/24) = 12/17 >= 2/3`;
/// 5. `r = x/(5ad)` turns `e^{-(ln 3 - 1) r}` into `c2 = (ln 3 - 1)/40`, and
///    `c1 = 2` covers non-aligned `x`.
pub fn consistency_check(m: f64, d: usize) -> Result<ChainReport> {
    check_md(m, d)?;
    if m > d as f64 {
        return Err(Error::Range(format!("m = {m} exceeds d = {d}")));
    }
    let a = BoundConstants::a_of_m(m);
    let df = d as f64;
    let mut steps = Vec::with_capacity(5);

    // (1) internal-node probabilities
    let bounds: Vec<InternalNodeBound> =
        (0..=51).map(|n| internal_node_prob_bound(m, d, n)).collect::<Result<_>>()?;
    let worst_scaled = bounds[..=50].iter().map(|b| b.scaled).fold(0.0, f64::max);
    let ok1 = bounds[..=50].iter().all(|b| b.scaled_ok && b.small_ok)
        && bounds.windows(2).all(|w| w[1].p <= w[0].p);
    steps.push(ChainStep {
        name: "internal-node probability",
        passed: ok1,
        value: worst_scaled,
        detail: format!("max a d m^n p_n = {worst_scaled:.6e} (<= 1/8), p_0 = {:.6e} (<= 1/16)", bounds[0].p),
    });

    // (2) Poisson rate. The proof's relaxation adm^{n+1}+d <= 2adm^{n+1}
    // multiplies out to (3/8)(16/15) = 2/5; bounding the two child groups
    // separately gives 1/8 + 1/64 + 1/8 = 17/64, times 16/15 = 17/60.
    let literal = q(3, 8) * q(16, 15);
    let tightened = (q(1, 8) + q(1, 64) + q(1, 8)) * q(16, 15);
    let rate = |n: usize| {
        let next = &bounds[n + 1];
        let here = &bounds[n];
        let mn = m.powi(n as i32);
        (a * df * mn * m + df) * next.p / (1.0 - next.p) + a * df * mn * here.p / (1.0 - here.p)
    };
    let worst_rate = (0..=50).map(rate).fold(0.0, f64::max);
    let ok2 = tightened <= q(1, 3) && worst_rate <= 1.0 / 3.0;
    steps.push(ChainStep {
        name: "Poisson rate <= 1/3",
        passed: ok2,
        value: worst_rate,
        detail: format!(
            "sup_n rate = {worst_rate:.6e}; universal bound {tightened} <= 1/3; relaxed constant {literal}"
        ),
    });

    // (3) Chernoff step, checked against exact Poisson tails
    let al = alpha();
    let identity = ((std::f64::consts::E / 3.0).ln() + al).abs() < 1e-15;
    let mut worst_ratio = f64::NEG_INFINITY;
    let mut ok3 = identity;
    for r in 1..=200u64 {
        let exact = poisson_ln_sf(r as f64 / 3.0, r);
        let bound = -al * r as f64;
        worst_ratio = worst_ratio.max(exact - bound);
        ok3 &= exact <= bound;
    }
    steps.push(ChainStep {
        name: "Chernoff Pois(r/3) >= r",
        passed: ok3,
        value: worst_ratio,
        detail: format!("max_r ln P(Pois(r/3) >= r) + (ln 3 - 1) r = {worst_ratio:.4} (<= 0)"),
    });

    // (4) Bernstein. Variance sum <= (1 + d/(m-1)) 3ad|i_T| <= (3/8) a^2 d^2 |i_T|.
    let var_ok = (1.0 + df / (m - 1.0)) * 3.0 * a * df <= 0.375 * a * a * df * df * (1.0 + 1e-12);
    let denominator = q(3, 8) + q(1, 3);
    let exponent = q(1, 2) / denominator;
    let per_node = q(3, 4) + q(2, 3);
    let ok4 = denominator == q(17, 24)
        && exponent == q(12, 17)
        && per_node.recip() == q(12, 17)
        && exponent >= q(2, 3)
        && var_ok;
    steps.push(ChainStep {
        name: "Bernstein 12/17 >= 2/3",
        passed: ok4,
        value: 12.0 / 17.0,
        detail: format!("3/8 + 1/3 = {denominator}, (1/2)/({denominator}) = {exponent}, variance constant ok = {var_ok}"),
    });

    // (5) substitution r = x/(5ad)
    let c2_coefficient = al * m / (5.0 * a * (m - 1.0));
    let target = BoundConstants::new().c2;
    let mut ok5 = (c2_coefficient - target).abs() <= 1e-12;
    for r in 1..=2000u64 {
        let lb = lemma_tail_bounds(r)?;
        let rf = r as f64;
        // aligned x = 5adr, and the worst point of [5adr, 5ad(r+1))
        ok5 &= lb.combined <= 2.0 * (-al * rf).exp();
        ok5 &= lb.combined <= 2.0 * (-al * (rf + 1.0)).exp();
    }
    ok5 &= 2.0 * (-al).exp() >= 1.0;
    steps.push(ChainStep {
        name: "substitution r = x/(5ad)",
        passed: ok5,
        value: c2_coefficient,
        detail: format!("coefficient {c2_coefficient:.15} vs (ln 3 - 1)/40 = {target:.15}; c1 = 2 covers x off the 5ad grid"),
    });

    Ok(ChainReport { m, d, a, c2_coefficient, steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constants() {
        let k = BoundConstants::new();
        assert_eq!(k.c1, 2.0);
        assert!((k.c2 - 0.002_465_307_216_7).abs() < 1e-10);
        assert!((k.c2 - (1.098_612_288_668_11 - 1.0) / 40.0).abs() < 1e-12);
        assert_eq!(BoundConstants::a_of_m(2.0), 16.0);
        assert_eq!(BoundConstants::a_of_m(1.5), 24.0);
    }

    #[test]
    fn theorem_bound_values() {
        let b = theorem_bound(2.0, 2, 0.0).unwrap();
        assert_eq!((b.raw, b.clamped), (2.0, 1.0));
        let b = theorem_bound(1.5, 2, 1000.0).unwrap();
        let expected = 2.0 * (-BoundConstants::new().c2 * 500.0 / 3.0).exp();
        assert!((b.raw - expected).abs() < 1e-14);
        assert!((b.raw - 1.326_1).abs() < 1e-4);
        let b = theorem_bound(2.0, 2, 1e6).unwrap();
        assert!((b.log_raw - (2f64.ln() - BoundConstants::new().c2 * 0.5 * 5e5)).abs() < 1e-9);
        assert!((b.log_raw + 615.63).abs() < 0.01);
        assert_eq!(b.raw, (b.log_raw).exp());
        assert!(theorem_bound(1.0, 2, 1.0).is_err());
        assert!(theorem_bound(2.0, 1, 1.0).is_err());
        assert!(theorem_bound(2.0, 2, -1.0).is_err());
    }

    #[test]
    fn doob_values() {
        assert!((doob_sup_bound(2.0, 2, 10.0).unwrap() - 0.03).abs() < 1e-16);
        assert_eq!(doob_sup_bound(2.0, 2, 1.0).unwrap(), 3.0);
        assert!((doob_sup_bound(1.5, 2, 3.0).unwrap() - 5.0 / 9.0).abs() < 1e-15);
        assert!(doob_sup_bound(2.0, 2, 0.0).is_err());
    }

    #[test]
    fn internal_node_values() {
        let b = internal_node_prob_bound(2.0, 2, 0).unwrap();
        assert!((b.p - (1.0 / 1024.0 + 1.0 / 512.0)).abs() < 1e-16);
        assert!((b.scaled - 0.09375).abs() < 1e-15);
        assert!(b.scaled_ok && b.small_ok);
        let mut prev = b.p;
        for n in 1..40 {
            let p = internal_node_prob_bound(2.0, 2, n).unwrap().p;
            assert!(p < prev);
            prev = p;
        }
        assert!(prev < 1e-20);
    }

    #[test]
    fn lemma_values() {
        let b = lemma_tail_bounds(10).unwrap();
        assert!((b.lemma1 - 0.373_020_132_344).abs() < 1e-10);
        assert!((b.lemma2 - 0.001_272_633_801).abs() < 1e-10);
        assert!((b.combined - 0.374_292_766_146).abs() < 1e-10);
        let b = lemma_tail_bounds(1).unwrap();
        assert!((b.lemma1 - 0.906_093_942_820).abs() < 1e-10);
        assert!((b.lemma2 - 0.513_417_119_033).abs() < 1e-10);
        assert!((b.combined - 1.419_511_061_852).abs() < 1e-10);
        assert!(lemma_tail_bounds(0).is_err());
    }

    #[test]
    fn chain_passes_at_reference_points() {
        let r = consistency_check(2.0, 2).unwrap();
        assert!(r.passed(), "{r}");
        assert!((r.c2_coefficient - 0.002_465_307_216_7).abs() < 1e-10);
        let r = consistency_check(1.01, 2).unwrap();
        assert!(r.passed(), "{r}");
        assert!((r.a - 808.0).abs() < 1e-9);
        assert!(consistency_check(3.0, 2).is_err());
    }

    #[test]
    fn bernstein_rationals() {
        assert_eq!(q(1, 2) / (q(3, 8) + q(1, 3)), q(12, 17));
        assert!(q(12, 17) >= q(2, 3));
    }

    proptest! {
        #[test]
        fn combined_dominated_at_aligned_points(r in 1u64..500, m in 1.01f64..10.0, d in 2usize..9) {
            let a = BoundConstants::a_of_m(m);
            let x = 5.0 * a * d as f64 * r as f64;
            let t = theorem_bound(m, d, x).unwrap();
            let lb = lemma_tail_bounds(r).unwrap();
            prop_assert!(lb.combined <= t.raw * alpha().exp());
            prop_assert!(lb.combined <= t.raw * (1.0 + 1e-12));
        }

        #[test]
        fn bounds_nonincreasing(m in 1.01f64..10.0, d in 2usize..9, x in 0.01f64..1e4, dx in 0.0f64..100.0) {
            let t0 = theorem_bound(m, d, x).unwrap();
            let t1 = theorem_bound(m, d, x + dx).unwrap();
            prop_assert!(t1.raw <= t0.raw && t1.clamped <= t0.clamped);
            prop_assert!(doob_sup_bound(m, d, x + dx).unwrap() <= doob_sup_bound(m, d, x).unwrap());
        }

        #[test]
        fn lemma_bounds_nonincreasing_and_dominated(r in 1u64..1000) {
            let a = lemma_tail_bounds(r).unwrap();
            let b = lemma_tail_bounds(r + 1).unwrap();
            prop_assert!(b.lemma1 <= a.lemma1 && b.lemma2 <= a.lemma2 && b.combined <= a.combined);
            prop_assert!(a.combined <= 2.0 * a.lemma1);
        }
    }
}
