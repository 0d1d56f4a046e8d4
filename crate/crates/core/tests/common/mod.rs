//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use std::collections::HashMap;
use std::io::Write;
use std::time::Instant;

/// Every law `k / 10` on `{0, ..., d}` with a positive top atom and mean above 1.
pub fn simplex_grid(d: usize) -> Vec<Vec<f64>> {
    fn rec(d: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == d {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=left {
            prefix.push(k);
            rec(d, left - k, prefix, out);
            prefix.pop();
        }
    }
    let mut all = Vec::new();
    rec(d, 10, &mut Vec::new(), &mut all);
    all.into_iter()
        .filter(|c| c[d] > 0 && c.iter().enumerate().map(|(k, v)| k * v).sum::<usize>() > 10)
        .map(|c| c.into_iter().map(|v| v as f64 / 10.0).collect())
        .collect()
}

/// Law of `Z_n` by listing every offspring tuple of every generation.
/// Returns linear-scale probabilities indexed by population size.
pub fn enumerate_zn(probs: &[f64], n: u32) -> Vec<f64> {
    let d = probs.len() - 1;
    // law of the total offspring of z parents, one tuple at a time
    let mut sums: HashMap<usize, Vec<f64>> = HashMap::new();
    let mut current = vec![0.0, 1.0];
    for _ in 0..n {
        let max_next = (current.len() - 1) * d;
        let mut next = vec![0.0; max_next + 1];
        for (z, &pz) in current.iter().enumerate() {
            if pz == 0.0 {
                continue;
            }
            let law = sums.entry(z).or_insert_with(|| tuple_sum_law(probs, z));
            for (s, &ps) in law.iter().enumerate() {
                next[s] += pz * ps;
            }
        }
        current = next;
    }
    current
}

fn tuple_sum_law(probs: &[f64], z: usize) -> Vec<f64> {
    let d = probs.len() - 1;
    let mut law = vec![0.0; z * d + 1];
    let mut tuple = vec![0usize; z];
    loop {
        let p: f64 = tuple.iter().map(|&k| probs[k]).product();
        law[tuple.iter().sum::<usize>()] += p;
        // odometer
        let mut i = 0;
        loop {
            if i == z {
                return law;
            }
            tuple[i] += 1;
            if tuple[i] <= d {
                break;
            }
            tuple[i] = 0;
            i += 1;
        }
    }
}

pub fn mean(probs: &[f64]) -> f64 {
    probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
}

pub fn variance(probs: &[f64]) -> f64 {
    let m = mean(probs);
    probs.iter().enumerate().map(|(k, p)| (k as f64 - m).powi(2) * p).sum()
}

/// One line per criterion, written past the test harness's output capture.
pub fn report(label: &str, passed: bool, started: Instant, detail: &str) {
    let verdict = if passed { "PASS" } else { "FAIL" };
    report_verdict(label, verdict, started, detail);
}

pub fn report_verdict(label: &str, verdict: &str, started: Instant, detail: &str) {
    let line = format!(
        "[acceptance] {label:<44} {verdict}  ({:.2} s)  {detail}\n",
        started.elapsed().as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
}
