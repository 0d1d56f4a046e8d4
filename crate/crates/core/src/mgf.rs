//! Moment generating functions of `W_n` and `W_inf`, Chernoff bounds built
//! on them, the tail exponent `gamma/(gamma - 1)` and its empirical fit, and
//! the all-maximal-offspring atom.
//!
//! `psi_n(x) = E exp(x W_n)` satisfies `psi_{n+1}(x) = f(psi_n(x/m))`, so it is
//! the `n`-fold composition of the offspring pgf applied to `exp(x/m^n)`.
//! Near `s = 1` the composition amplifies absolute rounding error by `m^n`,
//! so the iteration carries `u = s - 1` through `f(1+u) - 1` (full relative
//! precision) and only switches to `ln s` once `s` exceeds 2.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::offspring::OffspringDistribution;

/// Default nesting depth for `psi_winf`.
pub const DEFAULT_ITERS: u32 = 40;
/// Successive-iterate gap below which an MGF curve counts as converged.
pub const CONVERGENCE_GAP: f64 = 1e-10;
const LOG_LIMIT: f64 = 1e6;

/// Applies the pgf `iters` times to `1 + u0` and returns the log of the result.
fn compose_log(dist: &OffspringDistribution, u0: f64, iters: u32) -> Result<f64> {
    let mut u = u0;
    let mut log_s: Option<f64> = None;
    for _ in 0..iters {
        match log_s {
            None => {
                u = dist.pgf_excess(u);
                if u > 1.0 {
                    log_s = Some(u.ln_1p());
                }
            }
            Some(y) => {
                let next = dist.log_pgf_at_log(y);
                if !(next.abs() <= LOG_LIMIT) {
                    return Err(Error::IterationOverflow { value: next });
                }
                log_s = Some(next);
            }
        }
    }
    Ok(log_s.unwrap_or_else(|| u.ln_1p()))
}

fn check_x(x: f64) -> Result<()> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("MGF argument x = {x} must be finite and nonnegative")));
    }
    Ok(())
}

/// `ln E exp(x W_n)`, exact for finite `n`.
pub fn log_psi_wn(dist: &OffspringDistribution, x: f64, n: u32) -> Result<f64> {
    check_x(x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    let s = x / dist.m().powi(n as i32);
    compose_log(dist, s.exp_m1(), n)
}

/// `ln E exp(x W_inf)` by `iters` nested pgf applications.
///
/// The innermost argument is `E exp(s W_inf)` at `s = x/m^iters`, seeded with
/// its second-order expansion `exp(s + Var(W_inf) s^2 / 2)`. The truncation
/// error is then `O(x^3 / m^{2 iters})` instead of the `O(x^2 / m^iters)` of
/// the plain seed `exp(s)`.
pub fn psi_winf(dist: &OffspringDistribution, x: f64, iters: u32) -> Result<f64> {
    check_x(x)?;
    if iters == 0 {
        return Err(Error::Range("iters must be at least 1".into()));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let s = x / dist.m().powi(iters as i32);
    let seed = s + 0.5 * dist.limit_variance() * s * s;
    compose_log(dist, seed.exp_m1(), iters)
}

/// `|ln psi(m x) - ln f(psi(x))|` at `iters` iterations; zero for the exact
/// limit MGF.
pub fn poincare_residual(dist: &OffspringDistribution, x: f64, iters: u32) -> Result<f64> {
    let lhs = psi_winf(dist, dist.m() * x, iters)?;
    let rhs = dist.log_pgf_at_log(psi_winf(dist, x, iters)?);
    Ok((lhs - rhs).abs())
}

/// `ln E exp(x W_inf)` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MgfCurve {
    pub xs: Vec<f64>,
    pub log_psi: Vec<f64>,
    pub iterations: u32,
    pub converged: bool,
}

pub fn mgf_curve(dist: &OffspringDistribution, xs: &[f64], iters: u32) -> Result<MgfCurve> {
    let mut log_psi = Vec::with_capacity(xs.len());
    let mut converged = true;
    for &x in xs {
        let v = psi_winf(dist, x, iters)?;
        let next = psi_winf(dist, x, iters + 1)?;
        converged &= (next - v).abs() <= CONVERGENCE_GAP * v.abs().max(1.0);
        log_psi.push(v);
    }
    Ok(MgfCurve { xs: xs.to_vec(), log_psi, iterations: iters, converged })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChernoffBound {
    pub log_bound: f64,
    pub t_star: f64,
}

/// Minimizes `log_mgf(t) - t x` over `t >= 0` by golden-section search.
///
/// The bracket `[0, T]` starts at `T = 1` and doubles until the slope at `T`
/// is positive, which certifies an interior minimum.
pub fn minimize_chernoff<F>(log_mgf: F, x: f64) -> Result<ChernoffBound>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(x > 0.0) {
        return Err(Error::Domain(format!("Chernoff threshold x = {x} must be positive")));
    }
    let h = |t: f64| -> Result<f64> { Ok(log_mgf(t)? - t * x) };
    let slope = |t: f64| -> Result<f64> {
        let dt = 1e-6 * t.max(1e-3);
        Ok((h(t + dt)? - h((t - dt).max(0.0))?) / (t + dt - (t - dt).max(0.0)))
    };
    if slope(0.0)? >= 0.0 {
        return Ok(ChernoffBound { log_bound: 0.0, t_star: 0.0 });
    }
    let mut hi = 1.0;
    loop {
        match slope(hi) {
            Ok(s) if s > 0.0 => break,
            Ok(_) if hi < 1e12 => hi *= 2.0,
            Ok(_) => {
                return Err(Error::NoInteriorMinimum(format!(
                    "exponent still decreasing at t = {hi:e}; x = {x} is at or beyond the essential supremum"
                )))
            }
            Err(Error::IterationOverflow { .. }) => {
                return Err(Error::NoInteriorMinimum(format!(
                    "MGF overflowed before the slope turned positive (t <= {hi:e}, x = {x})"
                )))
            }
            Err(e) => return Err(e),
        }
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0f64, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut hc, mut hd) = (h(c)?, h(d)?);
    for _ in 0..200 {
        if (b - a) <= 1e-12 * b.max(1.0) {
            break;
        }
        if hc <= hd {
            b = d;
            d = c;
            hd = hc;
            c = b - inv_phi * (b - a);
            hc = h(c)?;
        } else {
            a = c;
            c = d;
            hc = hd;
            d = a + inv_phi * (b - a);
            hd = h(d)?;
        }
    }
    let t_star = 0.5 * (a + b);
    let log_bound = h(t_star)?.min(0.0);
    Ok(ChernoffBound { log_bound, t_star })
}

/// Chernoff bound on `ln P(W_inf >= x)` from the limit MGF.
pub fn chernoff_bound(dist: &OffspringDistribution, x: f64, iters: u32) -> Result<ChernoffBound> {
    minimize_chernoff(|t| psi_winf(dist, t, iters), x)
}

/// Chernoff bound on `ln P(W_n >= x)` from the exact MGF of `W_n`.
pub fn chernoff_bound_wn(dist: &OffspringDistribution, n: u32, x: f64) -> Result<ChernoffBound> {
    minimize_chernoff(|t| log_psi_wn(dist, t, n), x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaExponent {
    /// `ln d / ln m`.
    pub gamma: f64,
    /// `gamma / (gamma - 1)`; infinite when `m = d` (bounded `W`).
    pub tail_exp: f64,
}

pub fn gamma_exponent(m: f64, d: usize) -> Result<GammaExponent> {
    if !(m > 1.0) {
        return Err(Error::Range(format!("m = {m} must exceed 1")));
    }
    if d < 2 || m > d as f64 {
        return Err(Error::Range(format!("need d >= 2 and m <= d, got m = {m}, d = {d}")));
    }
    let gamma = (d as f64).ln() / m.ln();
    let tail_exp = if m == d as f64 { f64::INFINITY } else { gamma / (gamma - 1.0) };
    Ok(GammaExponent { gamma, tail_exp })
}

/// The atom reached when the first `k` generations all have `d` children.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrategyAtom {
    /// `(d/m)^k`.
    pub w_value: f64,
    /// `(1 + d + ... + d^{k-1}) ln eta`.
    pub log_prob: f64,
}

pub fn strategy_lower_bound(dist: &OffspringDistribution, k: u32) -> Result<StrategyAtom> {
    if k == 0 {
        return Err(Error::Range("k must be at least 1".into()));
    }
    if dist.eta() == 0.0 {
        return Err(Error::EtaZero);
    }
    let d = dist.d() as f64;
    let individuals: f64 = (0..k).map(|j| d.powi(j as i32)).sum();
    Ok(StrategyAtom {
        w_value: (d / dist.m()).powi(k as i32),
        log_prob: individuals * dist.eta().ln(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub n_points: usize,
    /// Exponent the fit is compared against, when known.
    pub target: Option<f64>,
}

/// Least-squares slope of `ln(-log_p)` against `ln x`.
///
/// Requires at least five points with increasing `x`, nonincreasing
/// `log_p` and `log_p <= -1` throughout.
pub fn fit_tail_exponent(curve: &[(f64, f64)]) -> Result<TailFit> {
    if curve.len() < 5 {
        return Err(Error::InsufficientData(format!("{} points, need at least 5", curve.len())));
    }
    if curve.windows(2).any(|w| !(w[1].0 > w[0].0) || w[1].1 > w[0].1) {
        return Err(Error::InsufficientData("x must increase and log_p must not increase".into()));
    }
    if curve.iter().any(|&(x, lp)| !(x > 0.0) || !(lp <= -1.0) || !lp.is_finite()) {
        return Err(Error::InsufficientData("points must have x > 0 and finite log_p <= -1".into()));
    }
    let pts: Vec<(f64, f64)> = curve.iter().map(|&(x, lp)| (x.ln(), (-lp).ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let stderr = (rss / (n - 2.0) / sxx).sqrt();
    Ok(TailFit { slope, intercept, stderr, n_points: pts.len(), target: None })
}
