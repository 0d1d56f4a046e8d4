//! One function per subcommand.

use anyhow::{bail, Context, Result};
use gwtail::adversary::{search_max_tail, sweep_report, SweepRow};
use gwtail::bound::{consistency_check, theorem_bound, BoundConstants};
use gwtail::error::Error;
use gwtail::exact::{generation_pmf, SUPPORT_BUDGET};
use gwtail::explorer::{
    domination_check, explore, explore_runs, internal_tail_mc, recursive_bound_sides, RunSummary, SurvivalRow,
};
use gwtail::mc::{estimate_sup_tail, estimate_tail, estimate_tail_scheduled, estimate_tail_tilted, TailEstimate, TiltSchedule};
use gwtail::mgf::{chernoff_bound, chernoff_bound_wn, fit_tail_exponent, gamma_exponent, psi_winf, TailFit, DEFAULT_ITERS};
use gwtail::stream::substream;
use gwtail::OffspringDistribution;
use serde::Serialize;
use serde_json::json;

use crate::config::{parse_grid, Params, PlotKind, TailSource};
use crate::output::{num, Outcome, Table};
use crate::Cmd;

pub const DEFAULT_SAMPLES: u64 = 10_000;
pub const DEFAULT_HORIZON: u32 = 14;
pub const DEFAULT_BUDGET: u64 = 2_000;
pub const DEFAULT_RESTARTS: usize = 20;
pub const DEFAULT_FIT_N: u32 = 12;
pub const DEFAULT_FIT_GRID: &str = "2:10:25:log";

/// Fills the defaults a subcommand will use, so the echoed config is complete.
pub fn with_defaults(cmd: Cmd, mut p: Params) -> Params {
    match cmd {
        Cmd::Mc | Cmd::Tilt => {
            p.samples.get_or_insert(DEFAULT_SAMPLES);
        }
        Cmd::Explore => {
            p.samples.get_or_insert(DEFAULT_SAMPLES);
            p.horizon.get_or_insert(DEFAULT_HORIZON);
        }
        Cmd::Mgf => {
            p.iters.get_or_insert(DEFAULT_ITERS);
        }
        Cmd::Fit => {
            p.n.get_or_insert(DEFAULT_FIT_N);
            p.samples.get_or_insert(DEFAULT_SAMPLES);
            if p.x.is_none() && p.x_grid.is_none() {
                p.x_grid = Some(DEFAULT_FIT_GRID.into());
            }
        }
        Cmd::Search | Cmd::Sweep => {
            p.budget.get_or_insert(DEFAULT_BUDGET);
            p.restarts.get_or_insert(DEFAULT_RESTARTS);
        }
        Cmd::Exact | Cmd::Bound | Cmd::Chain => {}
    }
    p
}

pub fn run(cmd: Cmd, p: &Params, seed: u64, plot: Option<PlotKind>) -> Result<Outcome> {
    if let Some(kind) = plot {
        return crate::plot::run(cmd, kind, p, seed).map(Outcome::from);
    }
    match cmd {
        Cmd::Exact => exact(p).map(Outcome::from),
        Cmd::Mc => mc(p, seed).map(Outcome::from),
        Cmd::Tilt => tilt(p, seed).map(Outcome::from),
        Cmd::Bound if p.chain => chain(p),
        Cmd::Bound => bound(p).map(Outcome::from),
        Cmd::Explore => explore_cmd(p, seed),
        Cmd::Mgf => mgf(p).map(Outcome::from),
        Cmd::Fit => fit(p, seed).map(|(table, _)| table.into()),
        Cmd::Search => search(p, seed),
        Cmd::Sweep => sweep(p, seed),
        Cmd::Chain => chain(p),
    }
}

#[derive(Serialize)]
struct TailRow {
    x: f64,
    threshold: u64,
    log_p: f64,
}

fn exact(p: &Params) -> Result<Table> {
    let dist = p.dist()?;
    let n = p.need_n()?;
    let pmf = generation_pmf(&dist, n)?;
    if p.pmf {
        let mut table = Table::new(&["k", "log_prob", "w"]);
        for (k, &lp) in pmf.log_probs.iter().enumerate() {
            if lp > f64::NEG_INFINITY {
                let w = k as f64 / pmf.scale;
                table.push(vec![k.to_string(), num(lp), num(w)], &json!({"k": k, "log_prob": lp, "w": w}))?;
            }
        }
        return Ok(table);
    }
    let mut table = Table::new(&["x", "threshold", "log_p"]);
    for x in p.xs()? {
        if x < 0.0 {
            bail!("x = {x} must be nonnegative");
        }
        let row = TailRow { x, threshold: pmf.threshold(x), log_p: pmf.tail_w(x) };
        table.push(vec![num(x), row.threshold.to_string(), num(row.log_p)], &row)?;
    }
    Ok(table)
}

fn estimates_table(estimates: Vec<TailEstimate>) -> Result<Table> {
    let mut table = Table::new(&TailEstimate::CSV_HEADER.split(',').collect::<Vec<_>>());
    for e in estimates {
        let row = e.csv_row().split(',').map(String::from).collect();
        table.push(row, &e)?;
    }
    Ok(table)
}

fn mc(p: &Params, seed: u64) -> Result<Table> {
    let dist = p.dist()?;
    let samples = p.samples.unwrap_or(DEFAULT_SAMPLES);
    let mut out = Vec::new();
    for x in p.xs()? {
        if x < 0.0 {
            bail!("x = {x} must be nonnegative");
        }
        out.push(match p.horizon {
            Some(h) => estimate_sup_tail(&dist, h, x, samples, seed)?,
            None => estimate_tail(&dist, p.need_n()?, x, samples, seed)?,
        });
    }
    estimates_table(out)
}

/// The exponential change of measure for `{W_n >= x}` at the Chernoff optimum.
pub fn chernoff_schedule(dist: &OffspringDistribution, n: u32, x: f64) -> Result<TiltSchedule> {
    let t = match chernoff_bound_wn(dist, n, x) {
        Ok(cb) => cb.t_star,
        Err(Error::NoInteriorMinimum(_)) => bail!("x = {x} is beyond the support of W_{n}"),
        Err(e) => return Err(e.into()),
    };
    Ok(TiltSchedule::exponential(dist, n, t)?)
}

fn tilt(p: &Params, seed: u64) -> Result<Table> {
    let dist = p.dist()?;
    let n = p.need_n()?;
    let samples = p.samples.unwrap_or(DEFAULT_SAMPLES);
    let mut out = Vec::new();
    for x in p.xs()? {
        out.push(match p.theta {
            Some(theta) => estimate_tail_tilted(&dist, n, x, theta, samples, seed)?,
            None => estimate_tail_scheduled(&dist, n, x, &chernoff_schedule(&dist, n, x)?, samples, seed)?,
        });
    }
    estimates_table(out)
}

#[derive(Serialize)]
struct BoundRow {
    x: f64,
    raw: f64,
    clamped: f64,
    log_raw: f64,
    log_clamped: f64,
}

fn bound(p: &Params) -> Result<Table> {
    let (m, d) = p.m_d()?;
    let mut table = Table::new(&["x", "raw", "clamped", "log_raw", "log_clamped"]);
    for x in p.xs()? {
        let b = theorem_bound(m, d, x)?;
        let row = BoundRow { x, raw: b.raw, clamped: b.clamped, log_raw: b.log_raw, log_clamped: b.log_clamped };
        table.push(vec![num(x), num(b.raw), num(b.clamped), num(b.log_raw), num(b.log_clamped)], &row)?;
    }
    Ok(table)
}

fn chain(p: &Params) -> Result<Outcome> {
    let (m, d) = p.m_d()?;
    let report = consistency_check(m, d)?;
    let mut table = Table::new(&["step", "passed", "value", "detail"]);
    for s in &report.steps {
        table.rows.push(vec![s.name.to_string(), s.passed.to_string(), num(s.value), csv_text(&s.detail)]);
    }
    table.rows.push(vec![
        "c2 coefficient".into(),
        "true".into(),
        num(report.c2_coefficient),
        csv_text(&format!("target {}", BoundConstants::new().c2)),
    ]);
    table.json = serde_json::to_value(&report)?;
    let violation = (!report.passed()).then(|| format!("derivation check failed for m = {m}, d = {d}"));
    Ok(Outcome { table, violation })
}

fn csv_text(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn explore_cmd(p: &Params, seed: u64) -> Result<Outcome> {
    if p.domination {
        let (m, d) = p.m_d()?;
        let rep = domination_check(m, d, p.need_n()?)?;
        let mut table = Table::new(&[
            "m", "d", "n", "upper_trials", "upper_p", "lower_trials", "lower_p", "min_cdf_gap", "min_log_margin", "holds",
        ]);
        table.push(
            vec![
                num(rep.m),
                rep.d.to_string(),
                rep.n.to_string(),
                rep.upper_trials.to_string(),
                num(rep.upper_p),
                rep.lower_trials.to_string(),
                num(rep.lower_p),
                num(rep.min_cdf_gap),
                num(rep.min_log_margin),
                rep.holds.to_string(),
            ],
            &rep,
        )?;
        let violation = (!rep.holds).then(|| "binomial sum is not dominated by Poisson(1/3)".to_string());
        return Ok(Outcome { table, violation });
    }
    let dist = p.dist()?;
    let a = p.a.unwrap_or_else(|| BoundConstants::a_of_m(dist.m()));
    let horizon = p.horizon.unwrap_or(DEFAULT_HORIZON);
    let runs = p.samples.unwrap_or(DEFAULT_SAMPLES);
    if p.verify {
        let n = p.need_n()?;
        if n > horizon {
            bail!("n = {n} exceeds horizon {horizon}");
        }
        let mut table = Table::new(&["run_id", "z_n", "rhs", "holds"]);
        let mut failures = 0;
        for i in 0..runs {
            let mut rng = substream(seed, i);
            let (tree, real) = explore(&dist, a, horizon, &mut rng)?;
            let check = recursive_bound_sides(&dist, &tree, &real, n);
            failures += !check.holds as u64;
            table.push(
                vec![i.to_string(), check.z_n.to_string(), num(check.rhs), check.holds.to_string()],
                &json!({"run_id": i, "z_n": check.z_n, "rhs": check.rhs, "holds": check.holds}),
            )?;
        }
        let violation = (failures > 0).then(|| format!("recursive decomposition failed on {failures} runs"));
        return Ok(Outcome { table, violation });
    }
    if p.survival {
        let tail = internal_tail_mc(&dist, a, horizon, runs, seed)?;
        return Ok(Table::from_lines(
            SurvivalRow::CSV_HEADER,
            tail.rows.iter().map(SurvivalRow::csv_row).collect(),
            serde_json::to_value(&tail.rows)?,
        )
        .into());
    }
    let summaries = explore_runs(&dist, a, horizon, runs, seed)?;
    Ok(Table::from_lines(
        RunSummary::CSV_HEADER,
        summaries.iter().map(RunSummary::csv_row).collect(),
        serde_json::to_value(&summaries)?,
    )
    .into())
}

#[derive(Serialize)]
pub struct MgfRow {
    pub x: f64,
    pub log_psi: f64,
    pub t_star: f64,
    pub log_chernoff: f64,
}

pub fn mgf_rows(p: &Params) -> Result<Vec<MgfRow>> {
    let dist = p.dist()?;
    let iters = p.iters.unwrap_or(DEFAULT_ITERS);
    p.xs()?
        .into_iter()
        .map(|x| {
            if x < 0.0 {
                bail!("x = {x} must be nonnegative");
            }
            let log_psi = psi_winf(&dist, x, iters)?;
            let (t_star, log_chernoff) = if x == 0.0 {
                (0.0, 0.0)
            } else {
                match chernoff_bound(&dist, x, iters) {
                    Ok(cb) => (cb.t_star, cb.log_bound),
                    // the bound keeps falling in t: x is past the support
                    Err(Error::NoInteriorMinimum(_)) => (f64::INFINITY, f64::NEG_INFINITY),
                    Err(e) => return Err(e.into()),
                }
            };
            Ok(MgfRow { x, log_psi, t_star, log_chernoff })
        })
        .collect()
}

fn mgf(p: &Params) -> Result<Table> {
    let mut table = Table::new(&["x", "log_psi", "t_star", "log_chernoff"]);
    for r in mgf_rows(p)? {
        table.push(vec![num(r.x), num(r.log_psi), num(r.t_star), num(r.log_chernoff)], &r)?;
    }
    Ok(table)
}

/// The tail curve used by `fit`, restricted to `log_p <= -1`.
pub fn fit_curve(p: &Params, seed: u64) -> Result<Vec<(f64, f64)>> {
    let dist = p.dist()?;
    let n = p.n.unwrap_or(DEFAULT_FIT_N);
    let xs = match (&p.x_grid, p.x) {
        (Some(g), _) => parse_grid(g)?,
        (None, Some(_)) => bail!("fit needs a grid of thresholds, not a single --x"),
        (None, None) => parse_grid(DEFAULT_FIT_GRID)?,
    };
    let exact_fits = (dist.d() as f64).powi(n as i32) <= SUPPORT_BUDGET as f64;
    let source = p.source.unwrap_or(if exact_fits { TailSource::Exact } else { TailSource::Tilted });
    let samples = p.samples.unwrap_or(DEFAULT_SAMPLES);
    let mut curve = Vec::new();
    match source {
        TailSource::Exact => {
            let pmf = generation_pmf(&dist, n)?;
            curve.extend(xs.iter().map(|&x| (x, pmf.tail_w(x))));
        }
        TailSource::Tilted => {
            for (i, &x) in xs.iter().enumerate() {
                let schedule = chernoff_schedule(&dist, n, x)?;
                let est = estimate_tail_scheduled(&dist, n, x, &schedule, samples, seed.wrapping_add(i as u64))?;
                if est.hits > 0 {
                    curve.push((x, est.log_p_hat));
                }
            }
            for i in 1..curve.len() {
                curve[i].1 = curve[i].1.min(curve[i - 1].1);
            }
        }
    }
    curve.retain(|&(_, lp)| lp <= -1.0 && lp.is_finite());
    Ok(curve)
}

pub fn fit(p: &Params, seed: u64) -> Result<(Table, TailFit)> {
    let dist = p.dist()?;
    let curve = fit_curve(p, seed)?;
    let mut fit = fit_tail_exponent(&curve).context("fitting the tail exponent")?;
    let g = gamma_exponent(dist.m(), dist.d())?;
    fit.target = g.tail_exp.is_finite().then_some(g.tail_exp);
    let mut table = Table::new(&["slope", "stderr", "n_points", "target"]);
    table.rows.push(vec![
        num(fit.slope),
        num(fit.stderr),
        fit.n_points.to_string(),
        fit.target.map_or("inf".into(), num),
    ]);
    table.json = json!({
        "slope": fit.slope,
        "stderr": fit.stderr,
        "n_points": fit.n_points,
        "target": fit.target,
    });
    Ok((table, fit))
}

fn sweep_table(rows: &[SweepRow]) -> Result<Outcome> {
    let mut table = Table::from_lines(
        SweepRow::CSV_HEADER,
        rows.iter().map(SweepRow::csv_row).collect(),
        serde_json::Value::Null,
    );
    table.json = serde_json::Value::Array(
        rows.iter()
            .map(|r| {
                json!({
                    "m": r.m, "d": r.d, "n": r.n, "x": r.x,
                    "log_tail": r.log_tail(), "log_bound": r.result.log_bound, "margin": r.margin(),
                    "evaluations": r.result.evaluations, "best_probs": r.result.best_probs,
                    "enumerated_log_tail": r.enumerated_log_tail,
                    "method_trace": r.result.method_trace,
                })
            })
            .collect(),
    );
    let negative: Vec<String> = rows
        .iter()
        .filter(|r| r.negative_margin())
        .map(|r| format!("(m={}, d={}, n={}, x={}) margin {}", r.m, r.d, r.n, r.x, r.margin()))
        .collect();
    let violation = (!negative.is_empty()).then(|| format!("negative margin: {}", negative.join("; ")));
    Ok(Outcome { table, violation })
}

fn search(p: &Params, seed: u64) -> Result<Outcome> {
    let (m, d) = p.m_d()?;
    let n = p.need_n()?;
    let x = p.x.context("--x is required")?;
    let result = search_max_tail(m, d, n, x, p.budget.unwrap_or(DEFAULT_BUDGET), p.restarts.unwrap_or(DEFAULT_RESTARTS), seed)?;
    sweep_table(&[SweepRow { m, d, n, x, result, enumerated_log_tail: None }])
}

fn sweep(p: &Params, seed: u64) -> Result<Outcome> {
    let m_grid = parse_grid(p.m_grid.as_deref().context("--m-grid is required")?)?;
    let d_grid = p.d_grid.clone().context("--d-grid is required")?;
    let rows = sweep_report(
        &m_grid,
        &d_grid,
        p.need_n()?,
        &p.xs()?,
        p.budget.unwrap_or(DEFAULT_BUDGET),
        p.restarts.unwrap_or(DEFAULT_RESTARTS),
        seed,
    )?;
    sweep_table(&rows)
}
