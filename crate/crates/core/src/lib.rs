//! Rank aggregation from partial, noisy pairwise comparisons.
//!
//! Pairwise win fractions are turned into a matrix of win-odds ratios, which
//! is rank-1 (`M = w (1/w)^T`) when the comparisons follow the
//! Bradley-Terry-Luce model. Scores are recovered by completing that matrix
//! with an alternating factorization, either by least squares
//! ([`lrmc::rank_lrmc`]) or by per-item maximum likelihood
//! ([`mcmle::rank_mcmle`]).

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod baselines;
pub mod error;
pub mod harness;
pub mod ingest;
pub mod lrmc;
pub mod mcmle;
pub mod metrics;
pub mod model;
pub mod par;
pub mod ratio;
pub mod report;
pub mod rng;
pub mod root;
pub mod spectral;

pub use error::{RankError, Result};
pub use metrics::{Diagnostics, RankingResult};
pub use model::{ComparisonCounts, EdgeSet, ObservationMatrix, PreferenceVector};
