//! Browser bindings for three interactive views: the exact tail of W_n
//! against the universal bound, the limit MGF with its Chernoff bound, and
//! the adversarial search at fixed (m, d).
//!
//! Each view is a plain Rust function returning a serializable struct; the
//! `#[wasm_bindgen]` wrappers hand those to JavaScript as JSON text.

use gwtail::adversary::search_max_tail;
use gwtail::bound::theorem_bound;
use gwtail::error::Error;
use gwtail::exact::generation_pmf;
use gwtail::mgf::{chernoff_bound, psi_winf, DEFAULT_ITERS};
use gwtail::OffspringDistribution;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Upper limit on curve points, to keep the page responsive.
pub const MAX_POINTS: usize = 2000;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct TailCurve {
    pub m: f64,
    pub d: usize,
    pub x: Vec<f64>,
    pub log_exact: Vec<f64>,
    pub log_bound: Vec<f64>,
    /// Largest value W_n can take.
    pub w_max: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct MgfCurve {
    pub x: Vec<f64>,
    pub log_psi: Vec<f64>,
    pub log_chernoff: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SearchView {
    pub best_probs: Vec<f64>,
    pub log_tail: f64,
    pub log_bound: f64,
    pub margin: f64,
    pub evaluations: u64,
    pub extremal_log_tail: f64,
}

/// Parses "p0, p1, ..." into an offspring law.
pub fn parse_law(text: &str) -> Result<OffspringDistribution, String> {
    let probs = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| format!("not a number: {s:?}")))
        .collect::<Result<Vec<_>, _>>()?;
    OffspringDistribution::new(probs).map_err(|e| e.to_string())
}

fn grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>, String> {
    if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
        return Err(format!("need 0 <= x_lo < x_hi, got [{lo}, {hi}]"));
    }
    if !(2..=MAX_POINTS).contains(&points) {
        return Err(format!("points must be in 2..={MAX_POINTS}"));
    }
    Ok((0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect())
}

pub fn tail_curve(law: &str, n: u32, x_lo: f64, x_hi: f64, points: usize) -> Result<TailCurve, String> {
    let dist = parse_law(law)?;
    let xs = grid(x_lo, x_hi, points)?;
    let pmf = generation_pmf(&dist, n).map_err(|e| e.to_string())?;
    let (m, d) = (dist.m(), dist.d());
    let mut log_exact = Vec::with_capacity(xs.len());
    let mut log_bound = Vec::with_capacity(xs.len());
    for &x in &xs {
        log_exact.push(pmf.tail_w(x));
        log_bound.push(theorem_bound(m, d, x).map_err(|e| e.to_string())?.log_clamped);
    }
    let w_max = (d as f64 / m).powi(n as i32);
    Ok(TailCurve { m, d, x: xs, log_exact, log_bound, w_max })
}

pub fn mgf_curve(law: &str, x_lo: f64, x_hi: f64, points: usize) -> Result<MgfCurve, String> {
    let dist = parse_law(law)?;
    let xs = grid(x_lo, x_hi, points)?;
    let mut log_psi = Vec::with_capacity(xs.len());
    let mut log_chernoff = Vec::with_capacity(xs.len());
    for &x in &xs {
        log_psi.push(psi_winf(&dist, x, DEFAULT_ITERS).map_err(|e| e.to_string())?);
        let lc = if x == 0.0 {
            0.0
        } else {
            match chernoff_bound(&dist, x, DEFAULT_ITERS) {
                Ok(cb) => cb.log_bound,
                Err(Error::NoInteriorMinimum(_)) => f64::NEG_INFINITY,
                Err(e) => return Err(e.to_string()),
            }
        };
        log_chernoff.push(lc);
    }
    Ok(MgfCurve { x: xs, log_psi, log_chernoff })
}

pub fn search(m: f64, d: usize, n: u32, x: f64, budget: u64, seed: u64) -> Result<SearchView, String> {
    let res = search_max_tail(m, d, n, x, budget, 8, seed).map_err(|e| e.to_string())?;
    let extremal_log_tail = res.method_trace.first().map_or(res.log_tail, |t| t.start_log_tail);
    Ok(SearchView {
        best_probs: res.best_probs,
        log_tail: res.log_tail,
        log_bound: res.log_bound,
        margin: res.margin,
        evaluations: res.evaluations,
        extremal_log_tail,
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    // JSON has no infinities; the page reads null as "probability zero"
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = tailCurve)]
pub fn tail_curve_js(law: &str, n: u32, x_lo: f64, x_hi: f64, points: usize) -> Result<String, JsError> {
    to_js(tail_curve(law, n, x_lo, x_hi, points))
}

#[wasm_bindgen(js_name = mgfCurve)]
pub fn mgf_curve_js(law: &str, x_lo: f64, x_hi: f64, points: usize) -> Result<String, JsError> {
    to_js(mgf_curve(law, x_lo, x_hi, points))
}

#[wasm_bindgen(js_name = searchMaxTail)]
pub fn search_js(m: f64, d: usize, n: u32, x: f64, budget: u32, seed: u32) -> Result<String, JsError> {
    to_js(search(m, d, n, x, budget as u64, seed as u64))
}
