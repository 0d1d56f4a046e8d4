//! Run configuration: command-line flags layered over an optional JSON file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use gwtail::{extremal_distribution, DistSpec, OffspringDistribution};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const DEFAULT_SEED: u64 = 0x475731;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum PlotKind {
    TailVsBound,
    SurvivalVsLemma1,
    MgfCurve,
    FitScatter,
}

impl PlotKind {
    pub fn name(self) -> &'static str {
        match self {
            PlotKind::TailVsBound => "tail_vs_bound",
            PlotKind::SurvivalVsLemma1 => "survival_vs_lemma1",
            PlotKind::MgfCurve => "mgf_curve",
            PlotKind::FitScatter => "fit_scatter",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TailSource {
    Exact,
    Tilted,
}

/// Parameters shared by all subcommands; each subcommand reads the subset it
/// needs. Every field can also come from the `--config` file.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Offspring probabilities p_0,...,p_d
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["extremal", "dist_file"])]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
    /// Two-atom law with mean M on {0, D}
    #[arg(long, num_args = 2, value_names = ["M", "D"], conflicts_with = "dist_file")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extremal: Option<Vec<f64>>,
    /// JSON file holding {"probs": [...]} or {"extremal": {"m": .., "d": ..}}
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dist_file: Option<PathBuf>,
    /// Generation
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    /// Threshold for W
    #[arg(long, allow_hyphen_values = true, conflicts_with = "x_grid")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    /// Thresholds as "x1,x2,..." or "lo:hi:count" (linear) or "lo:hi:count:log"
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_grid: Option<String>,
    /// Last generation examined
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u32>,
    /// Monte Carlo paths or exploration runs
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    /// Constant tilt; omit for the tilt induced by the Chernoff optimizer
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// Iterations of the moment generating function recursion
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iters: Option<u32>,
    /// Exact tail evaluations allowed per search
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    /// Search restarts
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    /// Exploration threshold parameter (default 8m/(m-1))
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    /// Mean offspring
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    /// Support bound
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    /// Means for `sweep`, same syntax as --x-grid
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_grid: Option<String>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_grid: Option<Vec<usize>>,
    /// Tail source for `fit`
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<TailSource>,
    /// `exact`: emit the whole pmf of Z_n
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub pmf: bool,
    /// `bound`: emit the derivation check instead of bound values
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub chain: bool,
    /// `explore`: survival curve of the internal-node count
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub survival: bool,
    /// `explore`: check the recursive decomposition at generation n
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub verify: bool,
    /// `explore`: Poisson(1/3) domination check at generation n
    #[arg(long)]
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub domination: bool,
}

impl Params {
    /// `self` over the values in `base`; flags set here win.
    pub fn over(&self, base: &Params) -> Result<Params> {
        let mut merged = serde_json::to_value(base)?;
        let top = serde_json::to_value(self)?;
        if let (Value::Object(m), Value::Object(t)) = (&mut merged, top) {
            m.extend(t);
        }
        Ok(serde_json::from_value(merged)?)
    }

    pub fn dist(&self) -> Result<OffspringDistribution> {
        if let Some(p) = &self.probs {
            return Ok(gwtail::make_offspring(p)?);
        }
        if let Some(e) = &self.extremal {
            let d = e[1];
            if d.fract() != 0.0 || d < 0.0 {
                bail!("--extremal D must be a nonnegative integer, got {d}");
            }
            return Ok(extremal_distribution(e[0], d as usize)?);
        }
        if let Some(path) = &self.dist_file {
            return Ok(read_dist_file(path)?.build()?);
        }
        bail!("an offspring law is required: --probs, --extremal M D or --dist-file")
    }

    /// `(m, d)` from --m/--d, or else from the offspring law.
    pub fn m_d(&self) -> Result<(f64, usize)> {
        match (self.m, self.d) {
            (Some(m), Some(d)) => Ok((m, d)),
            (None, None) => {
                let dist = self.dist().context("--m and --d, or an offspring law, are required")?;
                Ok((dist.m(), dist.d()))
            }
            _ => bail!("--m and --d must be given together"),
        }
    }

    pub fn need_n(&self) -> Result<u32> {
        self.n.context("--n is required")
    }

    /// Thresholds from --x or --x-grid.
    pub fn xs(&self) -> Result<Vec<f64>> {
        if let Some(x) = self.x {
            return Ok(vec![x]);
        }
        match &self.x_grid {
            Some(spec) => parse_grid(spec),
            None => bail!("--x or --x-grid is required"),
        }
    }
}

fn read_dist_file(path: &Path) -> Result<DistSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Run-wide settings a config file may carry next to the parameters.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileSettings {
    pub subcommand: Option<String>,
    #[serde(default, deserialize_with = "seed_from_json")]
    pub seed: Option<u64>,
    pub format: Option<Format>,
    pub plot: Option<PlotKind>,
}

fn seed_from_json<'de, D: serde::Deserializer<'de>>(de: D) -> Result<Option<u64>, D::Error> {
    match Option::<Value>::deserialize(de)? {
        None => Ok(None),
        Some(Value::Number(n)) => n.as_u64().map(Some).ok_or_else(|| serde::de::Error::custom("bad seed")),
        Some(Value::String(s)) => parse_seed(&s).map(Some).map_err(serde::de::Error::custom),
        Some(_) => Err(serde::de::Error::custom("seed must be a number or string")),
    }
}

const SETTING_KEYS: [&str; 4] = ["subcommand", "seed", "format", "plot"];

/// Splits a JSON config file into run-wide settings and parameters. Unknown
/// keys are rejected.
pub fn read_config(path: &Path) -> Result<(FileSettings, Params)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let Value::Object(mut all) = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
    else {
        bail!("{} must hold a JSON object", path.display());
    };
    let mut settings = serde_json::Map::new();
    for key in SETTING_KEYS {
        if let Some(v) = all.remove(key) {
            settings.insert(key.to_string(), v);
        }
    }
    let settings = serde_json::from_value(Value::Object(settings)).with_context(|| format!("in {}", path.display()))?;
    let params = serde_json::from_value(Value::Object(all)).with_context(|| format!("in {}", path.display()))?;
    Ok((settings, params))
}

/// `"1,2,3"`, `"lo:hi:count"` or `"lo:hi:count:log"`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [single] => single
            .split(',')
            .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad grid value {s:?}")))
            .collect(),
        [lo, hi, count] | [lo, hi, count, _] => {
            let (lo, hi): (f64, f64) = (lo.parse()?, hi.parse()?);
            let count: usize = count.parse()?;
            if count < 2 {
                bail!("a grid needs at least 2 points");
            }
            let log = parts.len() == 4;
            if log && parts[3] != "log" {
                bail!("unknown grid spacing {:?}", parts[3]);
            }
            if log && !(lo > 0.0 && hi > 0.0) {
                bail!("a log grid needs positive endpoints");
            }
            Ok((0..count)
                .map(|i| {
                    let t = i as f64 / (count - 1) as f64;
                    if log {
                        lo * (hi / lo).powf(t)
                    } else {
                        lo + (hi - lo) * t
                    }
                })
                .collect())
        }
        _ => bail!("cannot parse grid {spec:?}"),
    }
}

/// The fully resolved configuration echoed into every output.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub subcommand: &'static str,
    pub seed: u64,
    pub format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plot: Option<PlotKind>,
    #[serde(flatten)]
    pub params: Params,
}

pub fn parse_seed(s: &str) -> Result<u64, String> {
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|e| format!("bad seed {s:?}: {e}"))
}
