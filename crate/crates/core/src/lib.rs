//! Normal-domination bounds for supermartingales with bounded-difference
//! increments.
//!
//! The crate computes the tail bound
//! `P(S_n ≥ x) ≤ min(c₅,₀ Ψ(x/s), exp(−x²/2s²))`, its optimal refinement over
//! the generators `(x − t)₊⁵`, maximal and moment variants, concentration
//! bounds for separately Lipschitz functions, and certifies all of them on
//! concrete martingale models by exact enumeration and Monte Carlo.

pub mod constants;
pub mod error;
pub mod lipschitz;
pub mod martingale_lab;
pub mod normal_kernel;
pub mod schema;
pub mod sum;
pub mod tail_bounds;

mod optimize;
mod quadrature;

pub use error::{Error, Result};
