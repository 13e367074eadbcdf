//! File formats and command-line front end for [`eqsynth_core`].

pub mod cli;
pub mod formats;
