//! Long-format plot data: one `(series, x, y)` row per point.

use anyhow::{bail, Result};
use gwtail::bound::{theorem_bound, BoundConstants};
use gwtail::exact::{generation_pmf, SUPPORT_BUDGET};
use gwtail::explorer::internal_tail_mc;
use gwtail::mc::estimate_tail;
use serde_json::json;

use crate::commands::{fit, fit_curve, mgf_rows, DEFAULT_HORIZON, DEFAULT_SAMPLES};
use crate::config::{Params, PlotKind};
use crate::output::{num, Table};
use crate::Cmd;

fn push(table: &mut Table, series: &str, x: f64, y: f64) -> Result<()> {
    table.push(vec![series.to_string(), num(x), num(y)], &json!({"series": series, "x": x, "y": y}))
}

pub fn run(cmd: Cmd, kind: PlotKind, p: &Params, seed: u64) -> Result<Table> {
    let allowed = match kind {
        PlotKind::TailVsBound => matches!(cmd, Cmd::Exact | Cmd::Mc),
        PlotKind::SurvivalVsLemma1 => cmd == Cmd::Explore,
        PlotKind::MgfCurve => cmd == Cmd::Mgf,
        PlotKind::FitScatter => cmd == Cmd::Fit,
    };
    if !allowed {
        bail!("plot kind {} is not available for {}", kind.name(), cmd.name());
    }
    let mut table = Table::new(&["series", "x", "y"]);
    match kind {
        // y: natural log of the tail probability
        PlotKind::TailVsBound => {
            let dist = p.dist()?;
            let n = p.need_n()?;
            let xs = p.xs()?;
            let exact = if (dist.d() as f64).powi(n as i32) <= SUPPORT_BUDGET as f64 {
                Some(generation_pmf(&dist, n)?)
            } else {
                None
            };
            for &x in &xs {
                if let Some(pmf) = &exact {
                    push(&mut table, "exact", x, pmf.tail_w(x))?;
                }
            }
            let samples = p.samples.unwrap_or(DEFAULT_SAMPLES);
            for &x in &xs {
                push(&mut table, "mc", x, estimate_tail(&dist, n, x, samples, seed)?.log_p_hat)?;
            }
            for &x in &xs {
                push(&mut table, "bound_clamped", x, theorem_bound(dist.m(), dist.d(), x)?.log_clamped)?;
            }
        }
        // y: probability, linear scale
        PlotKind::SurvivalVsLemma1 => {
            let dist = p.dist()?;
            let a = p.a.unwrap_or_else(|| BoundConstants::a_of_m(dist.m()));
            let tail = internal_tail_mc(
                &dist,
                a,
                p.horizon.unwrap_or(DEFAULT_HORIZON),
                p.samples.unwrap_or(DEFAULT_SAMPLES),
                seed,
            )?;
            for r in &tail.rows {
                push(&mut table, "empirical", r.r as f64, r.p_hat)?;
            }
            for r in &tail.rows {
                push(&mut table, "cp_upper", r.r as f64, r.cp_high)?;
            }
            for r in &tail.rows {
                push(&mut table, "lemma1", r.r as f64, r.lemma1_bound)?;
            }
        }
        // y: log psi and the log Chernoff bound
        PlotKind::MgfCurve => {
            let rows = mgf_rows(p)?;
            for r in &rows {
                push(&mut table, "log_psi", r.x, r.log_psi)?;
            }
            for r in &rows {
                push(&mut table, "log_chernoff", r.x, r.log_chernoff)?;
            }
        }
        // x: ln x, y: ln(-ln p)
        PlotKind::FitScatter => {
            let curve = fit_curve(p, seed)?;
            let (_, tail_fit) = fit(p, seed)?;
            for &(x, lp) in &curve {
                push(&mut table, "data", x.ln(), (-lp).ln())?;
            }
            for &(x, _) in &curve {
                push(&mut table, "fitted", x.ln(), tail_fit.intercept + tail_fit.slope * x.ln())?;
            }
        }
    }
    if table.rows.is_empty() {
        bail!("no plot data produced");
    }
    Ok(table)
}
