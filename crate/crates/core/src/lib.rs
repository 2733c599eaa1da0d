//! Log-space numerics for heavy-tailed laws.
//!
//! The crate is `no_std` (it needs `alloc`). It covers four areas:
//!
//! - [`dist`]: parametric and composite laws on the real line, evaluated
//!   through their log-survival function, with exact atom bookkeeping.
//! - [`convolve`]: tails of products `XY` and of k-fold sums, computed by
//!   adaptive Gauss-Kronrod panels accumulated with log-sum-exp, plus
//!   Monte Carlo oracles.
//! - [`diagnostics`]: finite-grid evidence for the classes `L(γ)`, `S`,
//!   `D`, `R`, `A`, for the named closure conditions on product
//!   convolutions and for the closure verdict `H ∈ S`.
//! - [`risk`]: the discrete-time insurance model with stochastic discount
//!   factors, finite-time ruin probabilities and the infinite-horizon
//!   lower bound.
//!
//! IO, file formats, parallel drivers and the command line live in the
//! companion `htail` crate.
#![no_std]
#![warn(missing_debug_implementations)]
// `!(a > b)` is the NaN-rejecting form throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod convolve;
pub mod diagnostics;
pub mod dist;
mod exec;
mod error;
pub mod grid;
mod latsum;
pub mod logtail;
pub mod math;
pub mod quad;
pub mod risk;
pub mod rng;

pub use error::{Error, Result};
pub use exec::{Executor, Serial};
pub use logtail::LogTailValue;
