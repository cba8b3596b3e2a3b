//! Feature-based aggregation solvers for finite-state dynamic programming.
//!
//! The crate models discounted and terminating problems ([`mdp::Mdp`]),
//! compresses them through disaggregation/aggregation matrix pairs
//! ([`aggregation::AggregationScheme`]), and solves the compressed problem
//! exactly or by simulation. On top of that sit scoring-function partitions
//! ([`scoring`]), multistep and weighted-multistep operators ([`multistep`]),
//! sampled solvers ([`sim`]), chain benchmarks ([`ssp`]), a trainable
//! feature network ([`net`]), a policy-improvement pipeline that mines
//! features from the network ([`pipeline`]), and an aggregate reformulation
//! of finite-stage discrete minimization ([`discrete`]).
//!
//! All randomized code draws from the counter-based generator in [`rng`], so
//! every entry point is reproducible from a single seed.

pub mod aggregation;
pub mod discrete;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod linalg;
pub mod mdp;
pub mod multistep;
pub mod net;
pub mod pipeline;
pub mod rng;
pub mod scoring;
pub mod sim;
pub mod ssp;

pub use aggregation::{AggregateSolution, AggregationScheme, BoundReport};
pub use error::{Error, Result};
pub use mdp::{Mdp, Policy, ViSolution};
pub use rng::SplitMix64;
