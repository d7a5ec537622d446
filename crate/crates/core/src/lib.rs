//! Independent long-range percolation on `Z^d`.
//!
//! Vertices `x, y` are joined independently with probability
//! `1 - exp(-beta * J(x, y))`, where `J(x, y) = C1 * |x - y|^(-d - alpha)`.
//! This crate holds the pure algorithmic parts of the laboratory:
//!
//! * [`kernel`]: the kernel, connection probabilities and exact exterior sums,
//! * [`sampler`]: naive and displacement-grouped samplers on boxes `{-n..n}^d`,
//! * [`clusters`]: disjoint-set clustering, restricted clusters, `M_beta` quantiles,
//! * [`observables`]: Monte Carlo estimators (tails, two-point tables, `X_k`, `phi`),
//! * [`critical`]: bisection for `beta_c` on the `phi` criterion,
//! * [`analysis`]: exponent fits and inequality checks,
//! * [`oracle`]: exact enumeration of tiny boxes.
//!
//! The crate is `no_std` and needs only `alloc`. Parallelism is injected
//! through the [`exec::Executor`] trait; [`exec::Sequential`] is provided here.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod clusters;
pub mod critical;
mod error;
pub mod exec;
pub mod kernel;
pub mod math;
pub mod observables;
pub mod oracle;
pub mod rng;
pub mod sampler;
pub mod stats;

pub use error::{Error, Result};

/// Crate version, echoed into run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
