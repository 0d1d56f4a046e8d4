//! Right tails of supercritical Galton-Watson martingales with bounded
//! offspring.
//!
//! For a process `Z_n` with offspring law on `{0, ..., d}` and mean `m > 1`,
//! `W_n = Z_n / m^n` is a martingale converging to `W_inf`. This crate
//! computes the law of `Z_n` exactly, estimates tails by plain and tilted
//! Monte Carlo, evaluates the universal bound
//! `P(W_n >= x) <= 2 exp(-((ln 3 - 1)/40) ((m-1)/m) (x/d))` together with
//! every intermediate bound in its derivation, rebuilds the exploration tree
//! used to derive it, iterates the moment generating function of `W_inf`,
//! and searches offspring laws for the largest tail at fixed `(m, d)`.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod adversary;
pub mod bound;
pub mod error;
pub mod exact;
pub mod explorer;
pub mod logspace;
pub mod mc;
pub mod mgf;
pub mod offspring;
pub mod stats;
pub mod stream;

pub use error::{Error, Result};
pub use offspring::{extremal_distribution, make_offspring, DistSpec, OffspringDistribution};
