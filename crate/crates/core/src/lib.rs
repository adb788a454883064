//! Constrained binary quadratic optimization by Lagrange-multiplier
//! linearization.
//!
//! Squared penalty terms `1/2 lambda (F_k(q) - C_k)^2` are replaced by linear
//! terms `-nu_k F_k(q)`; the multipliers are driven towards
//! `<F_k> = C_k` by dual ascent using expectations estimated from a sampler.

pub mod dual_ascent;
mod fsio;
pub mod harness;
pub mod model;
pub mod problems;
pub mod samplers;
