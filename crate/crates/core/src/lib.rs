//! Network-psychometric dimension reduction.
//!
//! Exploratory Graph Analysis ([`ega`]) and Unique Variable Analysis
//! ([`uva`]) built on an EBIC-selected graphical lasso ([`glasso`]) and
//! modularity-based community detection ([`graph`]), alongside PCA/FastICA
//! baselines ([`baselines`]), LASSO/logistic learners ([`learners`]) and a
//! cross-validated benchmark harness ([`bench`]).

// `!(x > 0.0)` is used on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod bench;
pub mod cli;
pub mod ega;
pub mod error;
pub mod glasso;
pub mod graph;
pub mod learners;
pub mod matrix;
pub mod seed;
pub mod sim;
pub mod uva;

pub use error::{Error, Result};
