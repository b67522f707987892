//! Double-Bayesian decision identities and the SGD hyperparameters they imply.
//!
//! The crate is organised bottom-up:
//!
//! * [`bayes`]: the four probabilities of Bayes' theorem under complement
//!   constraints, outer/inner equation residuals, and the dual-decision
//!   exchange between a sender and a receiver.
//! * [`goldfix`]: fixed-point logarithm bases, the four golden-ratio roots and
//!   the closed-form momentum weight `α = √2·p₁` and learning rate `η = (1−α)²`.
//! * [`solution`]: the two transformation chains, their unit-circle form and
//!   the inner-equation solution `φ = π/4`.
//! * [`nn`]: a from-scratch CNN with manual backpropagation and SGD with
//!   momentum.
//! * [`data`]: MNIST IDX parsing, normalisation, stratified subsets and folds.
//! * [`harness`]: cross-validated grid search and its reports.
//! * [`cli`]: the `dbayes` command-line front end.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayes;
pub mod cli;
pub mod data;
pub mod error;
pub mod goldfix;
pub mod harness;
pub mod nn;
pub mod numfmt;
pub mod rng;
pub mod solution;

pub use error::{Error, Result};
