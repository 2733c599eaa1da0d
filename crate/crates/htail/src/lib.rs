//! Std front end for `htail-core`: a thread-pool executor, versioned JSON
//! reports, CSV curves and the `htail` command line.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod exec;
pub mod input;
pub mod report;

pub use exec::RayonExecutor;
