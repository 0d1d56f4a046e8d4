//! Quick checks of each module's closed-form cases.

use gwtail::adversary::{search_max_tail, sweep_report};
use gwtail::bound::{consistency_check, theorem_bound, BoundConstants};
use gwtail::error::Error;
use gwtail::exact::generation_pmf;
use gwtail::explorer::{explore, internal_tail_mc};
use gwtail::mc::{estimate_sup_tail, estimate_tail, estimate_tail_tilted, simulate_generation_sizes};
use gwtail::mgf::{chernoff_bound, fit_tail_exponent, gamma_exponent, psi_winf, strategy_lower_bound};
use gwtail::stats::poisson_ln_sf;
use gwtail::stream::{child_seed, substream};
use gwtail::{extremal_distribution, make_offspring};

use crate::Cmd;

type Check = (&'static str, Box<dyn Fn() -> gwtail::Result<bool>>);

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn doubling() -> gwtail::OffspringDistribution {
    make_offspring(&[0.0, 0.0, 1.0]).expect("valid law")
}

fn checks(cmd: Cmd) -> Vec<Check> {
    match cmd {
        Cmd::Exact => vec![
            ("[0,0,1] n=3 puts all mass on 8", Box::new(|| Ok(generation_pmf(&doubling(), 3)?.log_prob(8) == 0.0))),
            ("P(W_2 >= 1) = 27/64", Box::new(|| {
                let pmf = generation_pmf(&extremal_distribution(1.5, 2)?, 2)?;
                Ok(close(pmf.tail_w(1.0), (27.0f64 / 64.0).ln(), 1e-12))
            })),
            ("x = 0 gives probability 1", Box::new(|| Ok(generation_pmf(&doubling(), 4)?.tail_w(0.0) == 0.0))),
        ],
        Cmd::Mc => vec![
            ("[0,0,1] doubles", Box::new(|| {
                Ok(simulate_generation_sizes(&doubling(), 5, &mut substream(1, 0))? == vec![1, 2, 4, 8, 16, 32])
            })),
            ("x = 0 gives p = 1", Box::new(|| {
                let e = estimate_tail(&doubling(), 3, 0.0, 100, 1)?;
                Ok(e.log_p_hat == 0.0 && e.ci_low == 0.0 && e.ci_high == 0.0)
            })),
            ("impossible event has the zero-hit upper bound", Box::new(|| {
                let e = estimate_tail(&extremal_distribution(1.5, 2)?, 2, 2.0, 1000, 1)?;
                Ok(e.hits == 0 && close(e.ci_high.exp(), 1.0 - 0.005f64.powf(1e-3), 1e-15))
            })),
            ("sup of W = 1 at x = 1 and 1.01", Box::new(|| {
                Ok(estimate_sup_tail(&doubling(), 6, 1.0, 50, 1)?.log_p_hat == 0.0
                    && estimate_sup_tail(&doubling(), 6, 1.01, 50, 1)?.hits == 0)
            })),
        ],
        Cmd::Tilt => vec![
            ("theta = 0 is the plain estimate", Box::new(|| {
                let dist = extremal_distribution(1.5, 2)?;
                Ok(estimate_tail_tilted(&dist, 4, 2.0, 0.0, 500, 3)? == estimate_tail(&dist, 4, 2.0, 500, 3)?)
            })),
            ("[0,0,1] cannot be tilted", Box::new(|| {
                Ok(matches!(estimate_tail_tilted(&doubling(), 3, 1.0, 0.5, 10, 1), Err(Error::DegenerateTilt { .. })))
            })),
        ],
        Cmd::Bound | Cmd::Chain => vec![
            ("bound at x = 0 is 2, clamped 1", Box::new(|| {
                let b = theorem_bound(2.0, 2, 0.0)?;
                Ok(b.raw == 2.0 && b.clamped == 1.0)
            })),
            ("c2 = (ln 3 - 1)/40", Box::new(|| Ok(close(BoundConstants::new().c2, (3f64.ln() - 1.0) / 40.0, 1e-15)))),
            ("derivation check at m = d = 2", Box::new(|| Ok(consistency_check(2.0, 2)?.passed()))),
        ],
        Cmd::Explore => vec![
            ("[0,0,1] has no internal nodes", Box::new(|| {
                let (tree, _) = explore(&doubling(), 16.0, 8, &mut substream(1, 0))?;
                Ok(tree.internal_count == 0 && tree.leaves.len() == 1)
            })),
            ("[0,0,1] survival is zero", Box::new(|| {
                Ok(internal_tail_mc(&doubling(), 16.0, 6, 100, 1)?.rows[0].p_hat == 0.0)
            })),
            ("P(Pois(1/3) >= 1) = 1 - e^{-1/3}", Box::new(|| {
                Ok(close(poisson_ln_sf(1.0 / 3.0, 1).exp(), 1.0 - (-1.0f64 / 3.0).exp(), 1e-15))
            })),
        ],
        Cmd::Mgf => vec![
            ("[0,0,1]: log psi(x) = x", Box::new(|| Ok(close(psi_winf(&doubling(), 1.7, 40)?, 1.7, 1e-12)))),
            ("log psi(0) = 0", Box::new(|| Ok(psi_winf(&extremal_distribution(1.5, 2)?, 0.0, 40)? == 0.0))),
            ("no interior minimum past W = 1", Box::new(|| {
                Ok(matches!(chernoff_bound(&doubling(), 1.5, 40), Err(Error::NoInteriorMinimum(_))))
            })),
            ("gamma(2, 4) = 2", Box::new(|| {
                let g = gamma_exponent(2.0, 4)?;
                Ok(close(g.gamma, 2.0, 1e-15) && close(g.tail_exp, 2.0, 1e-12))
            })),
            ("[0,0,1] strategy atom", Box::new(|| {
                let s = strategy_lower_bound(&doubling(), 5)?;
                Ok(s.w_value == 1.0 && s.log_prob == 0.0)
            })),
        ],
        Cmd::Fit => vec![
            ("log p = -x^2 fits slope 2", Box::new(|| {
                let curve: Vec<(f64, f64)> = (1..=8).map(|i| (1.0 + i as f64, -(1.0 + i as f64).powi(2))).collect();
                Ok(close(fit_tail_exponent(&curve)?.slope, 2.0, 1e-9))
            })),
            ("log p = -5 x^1.5 fits slope 1.5", Box::new(|| {
                let curve: Vec<(f64, f64)> = (1..=8).map(|i| (i as f64, -5.0 * (i as f64).powf(1.5))).collect();
                Ok(close(fit_tail_exponent(&curve)?.slope, 1.5, 1e-9))
            })),
        ],
        Cmd::Search | Cmd::Sweep => vec![
            ("m = d leaves one law", Box::new(|| {
                let r = search_max_tail(2.0, 2, 3, 0.5, 100, 2, 1)?;
                Ok(r.log_tail == 0.0 && r.best_probs == vec![0.0, 0.0, 1.0])
            })),
            ("single-cell sweep equals search", Box::new(|| {
                let rows = sweep_report(&[1.5], &[2], 2, &[1.2], 200, 2, 5)?;
                let direct = search_max_tail(1.5, 2, 2, 1.2, 200, 2, child_seed(5, 0))?;
                Ok(rows.len() == 1 && rows[0].result == direct)
            })),
        ],
    }
}

/// Runs the checks for `cmd`, printing one line each. Returns whether all passed.
pub fn run(cmd: Cmd) -> bool {
    let mut all = true;
    for (name, check) in checks(cmd) {
        let ok = matches!(check(), Ok(true));
        all &= ok;
        println!("selftest {}: {name} ... {}", cmd.name(), if ok { "ok" } else { "FAIL" });
    }
    all
}
