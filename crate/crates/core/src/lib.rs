//! Regularized total variation of sampled signals.
//!
//! `Phi_{[a,b],lambda}(f)` is the supremum over partitions of the summed
//! absolute increments minus `lambda` per interior point. The crate computes it
//! two ways, an exact grid dynamic program ([`oracle`]) and a linear-time
//! stopping-time sweep ([`stoppart`]), and ships a seeded Brownian Monte Carlo
//! harness ([`montecarlo`]) with a command-line front end ([`cli`]).

pub mod cli;
pub mod error;
pub mod montecarlo;
pub mod oracle;
pub mod path;
pub mod stoppart;

pub use error::{Error, Result};
pub use path::{objective, Partition, PathTransform, PhiResult, SampledPath};
