//! Rigorous orbit-growth sums for the binary doubling map `f(x) = 2x mod 1`.
//!
//! For `x` in `[0, 1)` with no terminating binary expansion the crate computes
//! enclosures of `S_p(n) = sum_{k=1}^n 1/f^{k-1}(x)^p`, the block-length
//! estimators `Phi`, `Psi`, `Upsilon` and `Lambda` that sandwich `S_p(n)/n`,
//! and finite-prefix digit statistics.
//!
//! The crate is `no_std` with `alloc`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod blocks;
pub mod checks;
pub mod digits;
pub mod dyadic;
pub mod estimators;
pub mod normality;
pub mod orbit;
pub mod streamspec;
