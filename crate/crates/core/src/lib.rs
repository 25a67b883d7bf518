//! Radial solvers for `u_t = Δu + u^p` near the singular steady state
//! `v_∞ = L|x|^{-2/(p-1)}`, and experiments that measure decay rates towards it.

// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod exponents;
pub mod grid;
pub mod harness;
pub mod nonlinear;
pub mod radial_pde;
pub mod semigroup;
pub mod steady_states;

pub use error::{Error, Result};
pub use exponents::{compute_exponents, hardy_admissible, ExponentSet, HardyBranch, ProblemParams};
pub use grid::{LogGrid, RadialField};
