//! Optimal Nash and correlated equilibria for normal form games, and
//! equilibrium model checking and strategy synthesis for multi-player
//! concurrent stochastic games.
//!
//! The crate is `no_std` (with `alloc`) when built without the default
//! `std` feature. The `parallel` feature (on by default) lets the model
//! checker and the simulator spread work over a rayon thread pool; results
//! do not depend on the number of threads.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod checker;
pub mod coalition;
pub mod correlated;
pub mod csg;
mod error;
pub mod lp;
pub mod nash;
pub mod nfg;
pub mod property;
pub mod simulate;
pub mod synth;

pub use error::{Error, Result};

/// Tolerance for probability vectors summing to one.
pub const PROB_TOL: f64 = 1e-9;

/// Which class of equilibria to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EquilibriumKind {
    Nash,
    Correlated,
}

/// Equilibrium selection criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Criterion {
    /// Maximise the sum of the players' values.
    SocialWelfare,
    /// Minimise the gap between the largest and smallest value.
    SocialFairness,
}

/// Maps `f` over `items`, in parallel when the `parallel` feature is on.
/// Output order always follows input order.
#[cfg(feature = "parallel")]
pub(crate) fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> alloc::vec::Vec<R> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map<T, R>(items: &[T], f: impl Fn(&T) -> R) -> alloc::vec::Vec<R> {
    items.iter().map(f).collect()
}

/// Small helpers for float math that must also work without `std`.
pub(crate) mod num {
    #[inline]
    pub fn abs(x: f64) -> f64 {
        libm::fabs(x)
    }

    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }

    #[inline]
    pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .fold(0.0, |acc, (x, y)| f64::max(acc, abs(x - y)))
    }
}
