//! Communication scheduling for remote state estimation over a noiseless
//! channel and a power-constrained additive-noise channel.
//!
//! * [`source`]: symmetric unimodal source densities and interval moments.
//! * [`codec`]: the piecewise-affine encoder/decoder for the noisy channel.
//! * [`stage`]: the one-stage soft-constraint problem and its
//!   threshold-in-threshold solution.
//! * [`dp`]: the finite-horizon hard-constraint dynamic program.
//! * [`sim`]: closed-loop Monte Carlo rollouts of a dp policy.
//! * [`counterexample`]: region-shifting comparisons between policies.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod codec;
pub mod counterexample;
pub mod dp;
pub mod error;
pub mod numfmt;
pub mod quadrature;
pub mod sim;
pub mod source;
pub mod stage;

pub use error::{Error, Result};
