//! The breadth-first exploration that turns threshold crossings of the
//! population into a multitype tree.
//!
//! A node is one individual at generation `k` (its type). It is internal when
//! its own descendants reach `a d m^l` at some generation `l <= horizon`. At
//! the first such `l` its tree children are the revealed generation-`l`
//! individuals (type `l`) and the generation-`(l-1)` individuals whose
//! offspring were not yet revealed (type `l-1`).

use rand::Rng;
use serde::Serialize;

use crate::bound::{internal_node_prob_bound, lemma_tail_bounds, BoundConstants};
use crate::error::{Error, Result};
use crate::exact::log_convolve;
use crate::logspace::{log_add, LOG_ZERO};
use crate::offspring::OffspringDistribution;
use crate::stats::{binomial_ln_pmf, clopper_pearson, poisson_ln_sf};
use crate::stream::{map_indexed, substream};

/// Cap on the number of individuals kept in one realization.
pub const POPULATION_BUDGET: u64 = 1 << 26;

/// One population realization up to the horizon, in breadth-first order.
///
/// Individual `i` of generation `g` has children
/// `child_start[g][i]..child_start[g][i + 1]` in generation `g + 1`, so the
/// descendants of a contiguous block stay contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    child_start: Vec<Vec<u64>>,
}

impl Realization {
    /// Draws generations `0..=horizon` one individual at a time, parents in
    /// ascending order. A shorter horizon sees a prefix of the same draws.
    pub fn sample<R: Rng + ?Sized>(
        dist: &OffspringDistribution,
        horizon: u32,
        rng: &mut R,
    ) -> Result<Self> {
        let mut child_start = Vec::with_capacity(horizon as usize);
        let mut size = 1u64;
        let mut total = 1u64;
        for _ in 0..horizon {
            let mut starts = Vec::with_capacity(size as usize + 1);
            let mut acc = 0u64;
            starts.push(0);
            for _ in 0..size {
                acc += dist.sample(rng) as u64;
                starts.push(acc);
            }
            total += acc;
            if total > POPULATION_BUDGET {
                return Err(Error::BudgetExceeded(format!(
                    "realization exceeds {POPULATION_BUDGET} individuals"
                )));
            }
            child_start.push(starts);
            size = acc;
        }
        Ok(Self { child_start })
    }

    pub fn horizon(&self) -> u32 {
        self.child_start.len() as u32
    }

    /// `Z_g`.
    pub fn size(&self, g: u32) -> u64 {
        if g == 0 {
            1
        } else {
            *self.child_start[g as usize - 1].last().unwrap()
        }
    }

    /// The generation-`g + 1` block descending from `block` in generation `g`.
    fn children(&self, g: u32, block: (u64, u64)) -> (u64, u64) {
        let s = &self.child_start[g as usize];
        (s[block.0 as usize], s[block.1 as usize])
    }

    /// Descendant count of individual `index` of generation `k` at generation `n >= k`.
    pub fn descendants(&self, k: u32, index: u64, n: u32) -> u64 {
        let mut block = (index, index + 1);
        for g in k..n {
            block = self.children(g, block);
        }
        block.1 - block.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Leaf {
    pub id: u64,
    /// Generation of the individual, `k_j`.
    pub kind: u32,
    /// Position of the individual within its generation.
    pub index: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InternalNode {
    pub id: u64,
    pub kind: u32,
    pub index: u64,
    /// First generation where the descendants reached `a d m^l`.
    pub witness: u32,
    /// Revealed generation-`witness` children.
    pub upper_children: u64,
    /// Unrevealed generation-`(witness - 1)` children.
    pub lower_children: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplorationTree {
    pub internal_count: u64,
    pub leaves: Vec<Leaf>,
    pub internal: Vec<InternalNode>,
    pub horizon: u32,
    /// Some leaf survives to the horizon with a threshold it could not have
    /// reached inside the horizon, so its verdict is unknown.
    pub truncated: bool,
    pub a: f64,
    /// Deepest generation with a living individual.
    pub max_generation_reached: u32,
}

impl ExplorationTree {
    /// Checks every internal node's child counts against the brackets
    /// `a d m^l <= upper < a d m^l + d` and `lower <= a d m^{l-1}`.
    pub fn brackets_hold(&self, m: f64, d: usize) -> bool {
        let ad = self.a * d as f64;
        self.internal.iter().all(|node| {
            let hi = ad * m.powi(node.witness as i32);
            let lo = ad * m.powi(node.witness as i32 - 1);
            let up = node.upper_children as f64;
            up >= hi && up < hi + d as f64 && node.lower_children as f64 <= lo
        })
    }
}

fn check_explore_args(a: f64, horizon: u32) -> Result<()> {
    if !(a >= 1.0) {
        return Err(Error::Range(format!("a = {a} must be at least 1")));
    }
    if horizon < 1 {
        return Err(Error::Range("horizon must be at least 1".into()));
    }
    Ok(())
}

/// Builds the exploration tree of one fresh realization.
pub fn explore<R: Rng + ?Sized>(
    dist: &OffspringDistribution,
    a: f64,
    horizon: u32,
    rng: &mut R,
) -> Result<(ExplorationTree, Realization)> {
    check_explore_args(a, horizon)?;
    let real = Realization::sample(dist, horizon, rng)?;
    let tree = explore_realization(dist, a, &real);
    Ok((tree, real))
}

/// Builds the exploration tree of a given realization; the horizon is the
/// realization's.
pub fn explore_realization(dist: &OffspringDistribution, a: f64, real: &Realization) -> ExplorationTree {
    let horizon = real.horizon();
    let (m, d) = (dist.m(), dist.d());
    let ad = a * d as f64;
    let levels: Vec<f64> = (0..=horizon).map(|l| ad * m.powi(l as i32)).collect();
    let can_grow = d as f64 > m;

    let mut queue = std::collections::VecDeque::from([(0u32, 0u64)]);
    let mut next_id = 0u64;
    let mut leaves = Vec::new();
    let mut internal = Vec::new();
    let mut truncated = false;

    while let Some((k, index)) = queue.pop_front() {
        let id = next_id;
        next_id += 1;
        let mut block = (index, index + 1);
        let mut witness = None;
        for l in k + 1..=horizon {
            let parents = block;
            block = real.children(l - 1, block);
            if (block.1 - block.0) as f64 >= levels[l as usize] {
                witness = Some((l, parents));
                break;
            }
            if block.0 == block.1 {
                break;
            }
        }
        let Some((l, parents)) = witness else {
            // a surviving leaf is undecided when no generation inside the
            // horizon could have carried it over its threshold
            let alive = block.1 > block.0;
            let reachable = (d as f64).powi((horizon - k) as i32) >= levels[horizon as usize];
            truncated |= alive && can_grow && !reachable;
            leaves.push(Leaf { id, kind: k, index });
            continue;
        };
        // reveal parents in order until the revealed children reach the level
        let starts = &real.child_start[l as usize - 1];
        let base = starts[parents.0 as usize];
        let mut last = parents.0;
        while ((starts[last as usize + 1] - base) as f64) < levels[l as usize] {
            last += 1;
        }
        let upper = (base, starts[last as usize + 1]);
        let lower = (last + 1, parents.1);
        internal.push(InternalNode {
            id,
            kind: k,
            index,
            witness: l,
            upper_children: upper.1 - upper.0,
            lower_children: lower.1 - lower.0,
        });
        queue.extend((upper.0..upper.1).map(|i| (l, i)));
        queue.extend((lower.0..lower.1).map(|i| (l - 1, i)));
    }

    let max_generation_reached = (0..=horizon).rev().find(|&g| real.size(g) > 0).unwrap_or(0);
    ExplorationTree {
        internal_count: internal.len() as u64,
        leaves,
        internal,
        horizon,
        truncated,
        a,
        max_generation_reached,
    }
}

/// Both sides of `Z_n <= |i_T| a d m^n + sum_{k_j <= n} Z~_n^{(j)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RecursiveCheck {
    pub z_n: u64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn recursive_bound_sides(
    dist: &OffspringDistribution,
    tree: &ExplorationTree,
    real: &Realization,
    n: u32,
) -> RecursiveCheck {
    let z_n = real.size(n);
    let leaf_mass: u64 = tree
        .leaves
        .iter()
        .filter(|leaf| leaf.kind <= n)
        .map(|leaf| real.descendants(leaf.kind, leaf.index, n))
        .sum();
    let rhs = tree.internal_count as f64 * tree.a * dist.d() as f64 * dist.m().powi(n as i32)
        + leaf_mass as f64;
    RecursiveCheck { z_n, rhs, holds: z_n as f64 <= rhs }
}

/// Explores one realization and evaluates the recursive decomposition at
/// generation `n` on it.
pub fn verify_recursive_bound<R: Rng + ?Sized>(
    dist: &OffspringDistribution,
    a: f64,
    horizon: u32,
    n: u32,
    rng: &mut R,
) -> Result<bool> {
    if n > horizon {
        return Err(Error::Range(format!("n = {n} exceeds horizon {horizon}")));
    }
    let (tree, real) = explore(dist, a, horizon, rng)?;
    Ok(recursive_bound_sides(dist, &tree, &real, n).holds)
}

/// Per-run summary; run `i` uses `substream(seed, i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunSummary {
    pub run_id: u64,
    pub internal_count: u64,
    pub truncated: bool,
    pub max_generation_reached: u32,
}

impl RunSummary {
    pub const CSV_HEADER: &'static str = "run_id,internal_count,truncated,max_generation_reached";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{}",
            self.run_id, self.internal_count, self.truncated, self.max_generation_reached
        )
    }
}

pub fn explore_runs(
    dist: &OffspringDistribution,
    a: f64,
    horizon: u32,
    n_runs: u64,
    seed: u64,
) -> Result<Vec<RunSummary>> {
    check_explore_args(a, horizon)?;
    map_indexed(n_runs as usize, |i| {
        let mut rng = substream(seed, i as u64);
        explore(dist, a, horizon, &mut rng).map(|(tree, _)| RunSummary {
            run_id: i as u64,
            internal_count: tree.internal_count,
            truncated: tree.truncated,
            max_generation_reached: tree.max_generation_reached,
        })
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurvivalRow {
    pub r: u64,
    pub p_hat: f64,
    pub cp_low: f64,
    pub cp_high: f64,
    pub lemma1_bound: f64,
}

impl SurvivalRow {
    pub const CSV_HEADER: &'static str = "r,p_hat,cp_low,cp_high,lemma1_bound";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{}", self.r, self.p_hat, self.cp_low, self.cp_high, self.lemma1_bound)
    }

    /// `p_hat <= bound + (cp_high - cp_low) / 2`.
    pub fn within_lemma1(&self) -> bool {
        self.p_hat <= self.lemma1_bound + 0.5 * (self.cp_high - self.cp_low)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InternalTail {
    pub rows: Vec<SurvivalRow>,
    pub n_samples: u64,
    /// Runs counted as `|i_T| = infinity`.
    pub truncated_runs: u64,
    pub runs: Vec<RunSummary>,
}

/// Empirical survival of `|i_T|` with 99% Clopper-Pearson bands, next to
/// `exp(-(ln 3 - 1) r)`. Rows run from `r = 1` to one past the largest
/// finite count observed.
pub fn internal_tail_mc(
    dist: &OffspringDistribution,
    a: f64,
    horizon: u32,
    n_samples: u64,
    seed: u64,
) -> Result<InternalTail> {
    if n_samples == 0 {
        return Err(Error::Range("n_samples must be at least 1".into()));
    }
    let runs = explore_runs(dist, a, horizon, n_samples, seed)?;
    let truncated_runs = runs.iter().filter(|r| r.truncated).count() as u64;
    let max_r = runs.iter().filter(|r| !r.truncated).map(|r| r.internal_count).max().unwrap_or(0);
    let rows = (1..=max_r + 1)
        .map(|r| {
            let hits = runs.iter().filter(|run| run.truncated || run.internal_count >= r).count() as u64;
            let (cp_low, cp_high) = clopper_pearson(hits, n_samples, crate::mc::CP_ALPHA);
            Ok(SurvivalRow {
                r,
                p_hat: hits as f64 / n_samples as f64,
                cp_low,
                cp_high,
                lemma1_bound: lemma_tail_bounds(r)?.lemma1,
            })
        })
        .collect::<Result<_>>()?;
    Ok(InternalTail { rows, n_samples, truncated_runs, runs })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominationReport {
    pub m: f64,
    pub d: usize,
    pub n: u32,
    pub a: f64,
    /// `ceil(a d m^{n+1}) + d` trials at `p_{n+1}`.
    pub upper_trials: u64,
    pub upper_p: f64,
    /// `ceil(a d m^n)` trials at `p_n`.
    pub lower_trials: u64,
    pub lower_p: f64,
    /// `min_t (CDF_sum(t) - CDF_pois(t))` over the support of the sum, up
    /// to where the binomial terms fall under e^-10000.
    pub min_cdf_gap: f64,
    /// `min_t (ln P(Pois >= t) - ln P(sum >= t))` over `t >= 1`.
    pub min_log_margin: f64,
    pub holds: bool,
}

/// Exact check that `Bin(ceil(adm^{n+1}) + d, p_{n+1}) + Bin(ceil(adm^n), p_n)`
/// is stochastically below `Pois(1/3)`, with `a = 8m/(m-1)`.
pub fn domination_check(m: f64, d: usize, n: u32) -> Result<DominationReport> {
    let a = BoundConstants::a_of_m(m);
    let ad = a * d as f64;
    let upper_trials = (ad * m.powi(n as i32 + 1)).ceil() as u64 + d as u64;
    let lower_trials = (ad * m.powi(n as i32)).ceil() as u64;
    let upper_p = internal_node_prob_bound(m, d, n + 1)?.p;
    let lower_p = internal_node_prob_bound(m, d, n)?.p;
    Ok(domination_report(m, d, n, a, (upper_trials, upper_p), (lower_trials, lower_p)))
}

/// Binomial log-pmf terms below this, past the mode, are dropped. The
/// remaining tail is under `trials * e^-10000`, far below any f64.
const PMF_FLOOR: f64 = -1.0e4;

fn binomial_log_pmf(trials: u64, p: f64) -> Vec<f64> {
    let mode = ((trials + 1) as f64 * p).floor() as u64;
    let mut out = Vec::new();
    for k in 0..=trials {
        let lp = binomial_ln_pmf(trials, p, k);
        if k > mode && lp < PMF_FLOOR {
            break;
        }
        out.push(lp);
    }
    out
}

fn domination_report(
    m: f64,
    d: usize,
    n: u32,
    a: f64,
    upper: (u64, f64),
    lower: (u64, f64),
) -> DominationReport {
    let lambda = 1.0 / 3.0;
    let pmf = log_convolve(&binomial_log_pmf(upper.0, upper.1), &binomial_log_pmf(lower.0, lower.1));
    // ln P(sum >= t), accumulated from the top
    let mut log_sf = vec![LOG_ZERO; pmf.len() + 1];
    for t in (0..pmf.len()).rev() {
        log_sf[t] = log_add(log_sf[t + 1], pmf[t]);
    }
    let mut min_cdf_gap = f64::INFINITY;
    let mut min_log_margin = f64::INFINITY;
    for t in 1..=pmf.len() as u64 {
        let sum_sf = log_sf[t as usize];
        let pois_sf = poisson_ln_sf(lambda, t);
        min_cdf_gap = min_cdf_gap.min(pois_sf.exp() - sum_sf.exp());
        if sum_sf > LOG_ZERO {
            min_log_margin = min_log_margin.min(pois_sf - sum_sf);
        }
    }
    DominationReport {
        m,
        d,
        n,
        a,
        upper_trials: upper.0,
        upper_p: upper.1,
        lower_trials: lower.0,
        lower_p: lower.1,
        min_cdf_gap,
        min_log_margin,
        holds: min_log_margin >= 0.0 && min_cdf_gap >= 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bound::doob_sup_bound;
    use crate::offspring::make_offspring;

    fn two_atom() -> OffspringDistribution {
        make_offspring(&[0.25, 0.0, 0.75]).unwrap()
    }

    #[test]
    fn deterministic_doubling_has_no_internal_nodes() {
        let dist = make_offspring(&[0.0, 0.0, 1.0]).unwrap();
        let mut rng = substream(0, 0);
        let (tree, real) = explore(&dist, 16.0, 10, &mut rng).unwrap();
        assert_eq!(tree.internal_count, 0);
        assert_eq!(tree.leaves, vec![Leaf { id: 0, kind: 0, index: 0 }]);
        assert!(!tree.truncated);
        for n in 0..=10 {
            let check = recursive_bound_sides(&dist, &tree, &real, n);
            assert_eq!(check.z_n, 1 << n);
            assert_eq!(check.rhs, (1u64 << n) as f64);
        }
    }

    #[test]
    fn unreachable_threshold() {
        // a d = 600 > (4/3)^14
        let runs = explore_runs(&two_atom(), 300.0, 14, 2000, 3).unwrap();
        assert!(runs.iter().all(|r| r.internal_count == 0));
    }

    #[test]
    fn small_threshold_builds_deep_trees() {
        let dist = two_atom();
        for i in 0..200 {
            let mut rng = substream(11, i);
            let (tree, real) = explore(&dist, 1.0, 12, &mut rng).unwrap();
            assert!(tree.brackets_hold(1.5, 2));
            assert!(tree.leaves.iter().all(|l| l.kind <= tree.horizon + 1));
            for n in 0..=12 {
                assert!(recursive_bound_sides(&dist, &tree, &real, n).holds);
            }
            if tree.internal_count == 0 {
                assert_eq!(tree.leaves.len(), 1);
                assert_eq!(tree.leaves[0].kind, 0);
            }
        }
        let deep = explore_runs(&dist, 1.0, 12, 200, 11).unwrap();
        let most = deep.iter().map(|r| r.internal_count).max().unwrap();
        assert!(most >= 1);
    }

    #[test]
    fn truncation_is_monotone_in_horizon() {
        let dist = make_offspring(&[0.1, 0.3, 0.6]).unwrap();
        for i in 0..100 {
            let mut prev = 0;
            for h in [4, 6, 8, 10] {
                let mut rng = substream(5, i);
                let (tree, _) = explore(&dist, 1.5, h, &mut rng).unwrap();
                assert!(tree.internal_count >= prev);
                prev = tree.internal_count;
            }
        }
    }

    #[test]
    fn shorter_horizon_sees_a_prefix() {
        let dist = two_atom();
        let short = Realization::sample(&dist, 5, &mut substream(9, 2)).unwrap();
        let long = Realization::sample(&dist, 9, &mut substream(9, 2)).unwrap();
        assert_eq!(short.child_start[..], long.child_start[..5]);
    }

    #[test]
    fn root_crossing_is_rare_at_the_lemma_threshold() {
        let dist = two_atom();
        let tail = internal_tail_mc(&dist, 24.0, 14, 2000, 1).unwrap();
        let doob = doob_sup_bound(1.5, 2, 48.0).unwrap();
        assert!(tail.rows[0].p_hat <= doob + 3.0 * (doob / 2000.0).sqrt());
        assert!(tail.rows.iter().all(SurvivalRow::within_lemma1));
    }

    #[test]
    fn internal_tail_of_deterministic_law() {
        let dist = make_offspring(&[0.0, 0.0, 1.0]).unwrap();
        let tail = internal_tail_mc(&dist, 16.0, 8, 1000, 1).unwrap();
        assert_eq!(tail.rows[0].p_hat, 0.0);
        assert!(tail.rows[0].p_hat <= tail.rows[0].lemma1_bound);
    }

    #[test]
    fn poisson_third_tail() {
        let expected = 1.0 - (-1.0f64 / 3.0).exp();
        assert!((poisson_ln_sf(1.0 / 3.0, 1).exp() - 0.28347).abs() < 1e-5);
        assert!((poisson_ln_sf(1.0 / 3.0, 1).exp() - expected).abs() < 1e-15);
    }

    #[test]
    fn domination_at_m2_d2() {
        let report = domination_check(2.0, 2, 0).unwrap();
        assert_eq!(report.upper_trials, 66);
        assert_eq!(report.lower_trials, 32);
        assert!(report.holds);
        assert!(report.min_cdf_gap > 0.0);
    }

    #[test]
    fn domination_of_zero_variable() {
        let report = domination_report(2.0, 2, 0, 16.0, (10, 0.0), (5, 0.0));
        assert!(report.holds);
        assert!(report.min_cdf_gap > 0.0);
    }

    #[test]
    fn domination_fails_for_a_heavy_sum() {
        // mean 1 is far above 1/3
        let report = domination_report(2.0, 2, 0, 16.0, (10, 0.1), (0, 0.0));
        assert!(!report.holds);
    }
}
