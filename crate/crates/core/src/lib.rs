//! Wind-farm layout optimization as MAP inference.
//!
//! A discretized farm, a wind rose and a Jensen wake model produce an
//! interaction matrix `W`; choosing `K` cells that minimize `X^T W X` is
//! turned into a penalized binary MRF and solved with TRW-S, optional triplet
//! tightening, rounding and swap repair. Exact enumeration, greedy
//! construction and local search serve as references, and layouts are scored
//! with the full nonlinear wake combination.

pub mod baselines;
pub mod decode;
pub mod error;
pub mod evaluation;
pub mod exec;
pub mod farm;
mod io;
pub mod mrf;
pub mod pipeline;
pub mod tightening;
pub mod trws;
pub mod wake;
pub mod wind;

pub use error::{Error, Result};
