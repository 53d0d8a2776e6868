//! Exact solver and analysis toolkit for `x' = -x + f(x(t - tau)) + p(t)` with a
//! two-level delayed negative feedback `f` and a rectangular pulse train `p`.

pub mod bifurcation;
pub mod engine;
pub mod error;
pub mod model;
pub mod par;
pub mod periodic;
pub mod single_pulse;
pub mod treatment;

pub use error::{Error, Result};
