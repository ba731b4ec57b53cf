//! Reflected BSDEs on a binomial lattice: penalization, exact clamped oracles,
//! regression Monte Carlo and convergence diagnostics.

// NaN must fail the `!(a > b)` style guards.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod engine;
pub mod expr;
pub mod io;
pub mod lipschitz;
pub mod mc;
pub mod model;
pub mod runner;
