//! Bayesian local multisource-exchangeability (local-MEM) designs for
//! phase II basket trials.
//!
//! Baskets are grouped by every possible set partition; each partition's
//! posterior probability comes from closed-form Beta-Binomial evidence. A
//! basket borrows only from baskets that share its block in the most probable
//! partition, in proportion to that partition's posterior mass. On top of
//! that engine the crate provides two-stage go/no-go monitoring, Monte-Carlo
//! operating characteristics, boundary calibration and an exact Simon
//! two-stage baseline.

#![allow(clippy::needless_range_loop)]

pub mod calibration;
pub mod design;
mod error;
pub mod numerics;
pub mod partitions;
pub mod posterior;
pub mod simon;
pub mod simulation;

pub use calibration::{calibrate, calibrate_fixed, CalibrationProblem, CalibrationResult, FrontierPoint};
pub use design::{stopping_boundary, Boundary, BoundarySpec, Decision, Design, DesignSpec, Interim, Stage, TrialState};
pub use error::{Error, Result};
pub use partitions::{enumerate_partitions, partition_prior, Partition, PartitionPrior, PartitionSet};
pub use posterior::{
    analyze, effective_sample_size, global_posterior, local_posterior, log_block_marginal, partition_posterior,
    prob_exceeds, similarity_matrix, Analysis, BasketData, BetaParams, Evidence, PartitionPosterior, SimilarityMatrix,
};
pub use simon::{simon_decide, simon_oc, simon_search, SimonDecision, SimonDesign, SimonDesigns};
pub use simulation::{scenario_suite, simulate, simulate_with_workers, OperatingCharacteristics, Scenario};
