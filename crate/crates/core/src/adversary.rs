//! Search over offspring laws with fixed mean `m` and support bound `d` for
//! the one maximizing the exact tail `P(W_n >= x)`.
//!
//! The feasible set is the polytope `{p >= 0, sum p = 1, sum k p_k = m,
//! p_d > 0}`. Starts come from hit-and-run inside it (plus the two-atom
//! extremal law), then local moves shift mass among three atoms in the ratio
//! `(k - j, -(k - i), j - i)`, which keeps both constraints exact.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::bound::theorem_bound;
use crate::error::{Error, Result};
use crate::exact::tail_wn;
use crate::logspace::LOG_ZERO;
use crate::offspring::{extremal_distribution, OffspringDistribution};
use crate::stream::{child_seed, map_indexed, substream};

/// Initial local-move step.
pub const INITIAL_STEP: f64 = 0.1;
/// The local search stops once the step falls below this.
pub const MIN_STEP: f64 = 1e-9;
/// Largest tolerated violation of the mean constraint.
pub const MEAN_TOLERANCE: f64 = 1e-10;
const MIXING_STEPS_PER_DIM: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestartTrace {
    /// `"extremal"` or `"hit-and-run"`.
    pub start: &'static str,
    pub start_log_tail: f64,
    pub log_tail: f64,
    pub evaluations: u64,
    pub accepted_moves: u64,
    pub final_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub best_probs: Vec<f64>,
    pub log_tail: f64,
    /// Log of the clamped theorem bound.
    pub log_bound: f64,
    pub margin: f64,
    pub evaluations: u64,
    pub best_restart: usize,
    pub method_trace: Vec<RestartTrace>,
}

impl SearchResult {
    pub fn best_dist(&self) -> Result<OffspringDistribution> {
        OffspringDistribution::new(self.best_probs.clone())
    }
}

struct Objective {
    n: u32,
    x: f64,
    m: f64,
    evaluations: u64,
    budget: u64,
}

impl Objective {
    fn new(m: f64, n: u32, x: f64, budget: u64) -> Self {
        Self { n, x, m, evaluations: 0, budget }
    }

    fn exhausted(&self) -> bool {
        self.evaluations >= self.budget
    }

    /// `None` for points off the feasible set.
    fn eval(&mut self, probs: &[f64]) -> Result<Option<f64>> {
        if !feasible(probs, self.m) {
            return Ok(None);
        }
        let dist = OffspringDistribution::new(probs.to_vec())?;
        self.evaluations += 1;
        tail_wn(&dist, self.n, self.x).map(Some)
    }
}

fn mean_of(probs: &[f64]) -> f64 {
    probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
}

fn feasible(probs: &[f64], m: f64) -> bool {
    probs.iter().all(|&p| p >= 0.0)
        && *probs.last().unwrap() > 0.0
        && (probs.iter().sum::<f64>() - 1.0).abs() <= 1e-12
        && (mean_of(probs) - m).abs() <= MEAN_TOLERANCE
}

fn check_args(m: f64, d: usize, budget: u64) -> Result<()> {
    if d < 2 {
        return Err(Error::Range(format!("d = {d} must be at least 2")));
    }
    if !(m > 1.0 && m <= d as f64) {
        return Err(Error::Range(format!("m = {m} must lie in (1, {d}]")));
    }
    if budget < 1 {
        return Err(Error::Range("budget must be positive".into()));
    }
    Ok(())
}

/// The full-support law `q_k ∝ e^{beta k}` with mean `m < d`.
fn interior_point(m: f64, d: usize) -> Vec<f64> {
    let law = |beta: f64| {
        let w: Vec<f64> = (0..=d).map(|k| (beta * k as f64).exp()).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect::<Vec<f64>>()
    };
    let (mut lo, mut hi) = (-50.0, 50.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_of(&law(mid)) < m {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    law(0.5 * (lo + hi))
}

/// Orthonormal basis of `{v : sum v = 0, sum k v_k = 0}`, from
/// `e_j - j e_1 + (j - 1) e_0` for `j = 2..=d`.
fn null_space_basis(d: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d - 1);
    for j in 2..=d {
        let mut v = vec![0.0; d + 1];
        v[j] = 1.0;
        v[1] = -(j as f64);
        v[0] = j as f64 - 1.0;
        for u in &basis {
            let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= dot * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= norm);
        basis.push(v);
    }
    basis
}

/// Segment of `t` with `p + t v >= 0`.
fn segment(p: &[f64], v: &[f64]) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for (pi, vi) in p.iter().zip(v) {
        if *vi > 0.0 {
            lo = lo.max(-pi / vi);
        } else if *vi < 0.0 {
            hi = hi.min(-pi / vi);
        }
    }
    (lo, hi)
}

/// A hit-and-run sample started from the interior point.
fn hit_and_run<R: Rng + ?Sized>(m: f64, d: usize, rng: &mut R) -> Vec<f64> {
    let basis = null_space_basis(d);
    let mut p = interior_point(m, d);
    for _ in 0..MIXING_STEPS_PER_DIM * d {
        let mut dir = vec![0.0; d + 1];
        for u in &basis {
            let g: f64 = rng.sample(StandardNormal);
            dir.iter_mut().zip(u).for_each(|(a, b)| *a += g * b);
        }
        let (lo, hi) = segment(&p, &dir);
        let t = lo + (hi - lo) * rng.random::<f64>();
        p.iter_mut().zip(&dir).for_each(|(a, b)| *a = (*a + t * b).max(0.0));
    }
    p
}

fn triples(d: usize) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for i in 0..=d {
        for j in i + 1..=d {
            for k in j + 1..=d {
                out.push((i, j, k));
            }
        }
    }
    out
}

/// Moves `step` along `sign (k - j, -(k - i), j - i)` on atoms `(i, j, k)`,
/// shortened to stay nonnegative. Atoms driven to the boundary land on zero.
fn triple_move(p: &[f64], (i, j, k): (usize, usize, usize), sign: f64, step: f64) -> Option<Vec<f64>> {
    let coef = [
        (i, sign * (k - j) as f64),
        (j, -sign * (k - i) as f64),
        (k, sign * (j - i) as f64),
    ];
    let mut t = step;
    for &(idx, c) in &coef {
        if c < 0.0 {
            t = t.min(p[idx] / -c);
        }
    }
    if t <= 0.0 {
        return None;
    }
    let mut q = p.to_vec();
    for &(idx, c) in &coef {
        q[idx] += t * c;
        if c < 0.0 && q[idx] < 1e-15 {
            q[idx] = 0.0;
        }
    }
    Some(q)
}

/// Greedy triple-move ascent; the step halves after a sweep with no gain.
fn local_search<R: Rng + ?Sized>(
    start: Vec<f64>,
    objective: &mut Objective,
    rng: &mut R,
    start_label: &'static str,
) -> Result<(Vec<f64>, RestartTrace)> {
    let d = start.len() - 1;
    let mut best = start;
    let mut value = objective.eval(&best)?.unwrap_or(LOG_ZERO);
    let start_log_tail = value;
    let mut step = INITIAL_STEP;
    let mut accepted = 0u64;
    let mut moves: Vec<((usize, usize, usize), f64)> =
        triples(d).into_iter().flat_map(|t| [(t, 1.0), (t, -1.0)]).collect();
    'outer: while step >= MIN_STEP {
        moves.shuffle(rng);
        let mut improved = false;
        for &(triple, sign) in &moves {
            if objective.exhausted() {
                break 'outer;
            }
            let Some(q) = triple_move(&best, triple, sign, step) else {
                continue;
            };
            if let Some(v) = objective.eval(&q)? {
                if v > value {
                    best = q;
                    value = v;
                    accepted += 1;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    let trace = RestartTrace {
        start: start_label,
        start_log_tail,
        log_tail: value,
        evaluations: objective.evaluations,
        accepted_moves: accepted,
        final_step: step,
    };
    Ok((best, trace))
}

fn lexicographic(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
}

/// Best-found maximizer of `P(W_n >= x)` over laws with mean `m` on
/// `{0, ..., d}`. Restart 0 starts at the extremal law; the others at
/// hit-and-run samples. `budget` caps the total number of exact tail
/// evaluations and is split evenly across restarts.
pub fn search_max_tail(
    m: f64,
    d: usize,
    n: u32,
    x: f64,
    budget: u64,
    restarts: usize,
    seed: u64,
) -> Result<SearchResult> {
    check_args(m, d, budget)?;
    let restarts = restarts.max(1);
    let log_bound = theorem_bound(m, d, x)?.log_clamped;
    let extremal = extremal_distribution(m, d)?;
    if m == d as f64 {
        // the polytope is the single point delta_d
        let log_tail = tail_wn(&extremal, n, x)?;
        let trace = RestartTrace {
            start: "extremal",
            start_log_tail: log_tail,
            log_tail,
            evaluations: 1,
            accepted_moves: 0,
            final_step: 0.0,
        };
        return Ok(SearchResult {
            best_probs: extremal.probs().to_vec(),
            log_tail,
            log_bound,
            margin: log_bound - log_tail,
            evaluations: 1,
            best_restart: 0,
            method_trace: vec![trace],
        });
    }
    let per_restart = (budget / restarts as u64).max(1);
    let outcomes: Vec<Result<(Vec<f64>, RestartTrace)>> = map_indexed(restarts, |r| {
        let mut rng = substream(seed, r as u64);
        let mut objective = Objective::new(m, n, x, per_restart);
        let (start, label) = if r == 0 {
            (extremal.probs().to_vec(), "extremal")
        } else {
            (hit_and_run(m, d, &mut rng), "hit-and-run")
        };
        local_search(start, &mut objective, &mut rng, label)
    });
    let mut traces = Vec::with_capacity(restarts);
    let mut best: Option<(usize, Vec<f64>, f64)> = None;
    for (r, outcome) in outcomes.into_iter().enumerate() {
        let (probs, trace) = outcome?;
        let better = match &best {
            None => true,
            Some((_, bp, bv)) => {
                trace.log_tail > *bv || (trace.log_tail == *bv && lexicographic(&probs, bp).is_lt())
            }
        };
        if better {
            best = Some((r, probs, trace.log_tail));
        }
        traces.push(trace);
    }
    let (best_restart, best_probs, log_tail) = best.expect("at least one restart");
    Ok(SearchResult {
        best_probs,
        log_tail,
        log_bound,
        margin: log_bound - log_tail,
        evaluations: traces.iter().map(|t| t.evaluations).sum(),
        best_restart,
        method_trace: traces,
    })
}

/// `P(W_n >= x)` along the one-parameter family of laws with `d = 2`:
/// `p = (1 - m + p2, m - 2 p2, p2)`, `p2` in `[m - 1, m / 2]`.
pub fn two_atom_family_tail(m: f64, n: u32, x: f64, p2: f64) -> Result<f64> {
    let probs = vec![(1.0 - m + p2).max(0.0), (m - 2.0 * p2).max(0.0), p2];
    tail_wn(&OffspringDistribution::new(probs)?, n, x)
}

/// Exhaustive maximization over the `d = 2` family: a grid of `steps + 1`
/// points on `[m - 1, m / 2]`, refined by golden section around the best
/// grid point. Returns `(p2, log_tail)`.
pub fn enumerate_d2(m: f64, n: u32, x: f64, steps: usize) -> Result<(f64, f64)> {
    check_args(m, 2, 1)?;
    let (lo, hi) = ((m - 1.0).max(0.0), m / 2.0);
    if hi <= lo {
        return Ok((hi, two_atom_family_tail(m, n, x, hi)?));
    }
    let grid: Vec<f64> = (0..=steps)
        .map(|i| lo + (hi - lo) * i as f64 / steps as f64)
        .filter(|&p2| p2 > 0.0)
        .collect();
    let mut best = (grid[0], LOG_ZERO);
    let mut best_i = 0;
    for (i, &p2) in grid.iter().enumerate() {
        let v = two_atom_family_tail(m, n, x, p2)?;
        if v > best.1 {
            best = (p2, v);
            best_i = i;
        }
    }
    // refine inside the neighbouring grid cells
    let (mut a, mut b) = (grid[best_i.saturating_sub(1)], grid[(best_i + 1).min(grid.len() - 1)]);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - phi * (b - a);
        let e = a + phi * (b - a);
        let (fc, fe) = (two_atom_family_tail(m, n, x, c)?, two_atom_family_tail(m, n, x, e)?);
        if fc.max(fe) > best.1 {
            best = if fc >= fe { (c, fc) } else { (e, fe) };
        }
        if fc >= fe {
            b = e;
        } else {
            a = c;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub m: f64,
    pub d: usize,
    pub n: u32,
    pub x: f64,
    pub result: SearchResult,
    /// Exhaustive optimum of the one-parameter family when `d = 2`.
    pub enumerated_log_tail: Option<f64>,
}

impl SweepRow {
    pub const CSV_HEADER: &'static str = "m,d,n,x,log_tail,log_bound,margin,evaluations,best_probs";

    /// Best of the search and the enumeration.
    pub fn log_tail(&self) -> f64 {
        self.enumerated_log_tail.map_or(self.result.log_tail, |e| e.max(self.result.log_tail))
    }

    pub fn margin(&self) -> f64 {
        self.result.log_bound - self.log_tail()
    }

    pub fn negative_margin(&self) -> bool {
        self.margin() < 0.0
    }

    pub fn csv_row(&self) -> String {
        let probs: Vec<String> = self.result.best_probs.iter().map(|p| p.to_string()).collect();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.m,
            self.d,
            self.n,
            self.x,
            self.log_tail(),
            self.result.log_bound,
            self.margin(),
            self.result.evaluations,
            probs.join(";")
        )
    }
}

/// One search per `(m, d, x)` cell, each with its own child seed. Cells
/// with `m > d` are skipped. Cells with `d = 2` are also enumerated at
/// resolution 1/200.
pub fn sweep_report(
    m_grid: &[f64],
    d_grid: &[usize],
    n: u32,
    x_grid: &[f64],
    budget: u64,
    restarts: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if m_grid.is_empty() || d_grid.is_empty() || x_grid.is_empty() {
        return Err(Error::Range("sweep grids must be nonempty".into()));
    }
    let mut rows = Vec::new();
    let mut cell = 0u64;
    for &d in d_grid {
        for &m in m_grid {
            if m > d as f64 {
                continue;
            }
            for &x in x_grid {
                let result = search_max_tail(m, d, n, x, budget, restarts, child_seed(seed, cell))?;
                let enumerated_log_tail =
                    if d == 2 { Some(enumerate_d2(m, n, x, 200)?.1) } else { None };
                rows.push(SweepRow { m, d, n, x, result, enumerated_log_tail });
                cell += 1;
            }
        }
    }
    Ok(rows)
}
