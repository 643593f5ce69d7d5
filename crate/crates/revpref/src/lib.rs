//! Revealed price preference analysis.
//!
//! This crate tests consumption data against the expenditure-augmented
//! utility model. Deterministic single-consumer panels are checked for
//! GARP/GAPP consistency and, when consistent, a rationalizing utility is
//! constructed. Repeated cross-sections are tested for stochastic
//! rationality by projecting normalized-and-discretized choice
//! probabilities onto the cone spanned by rational types, with bootstrap
//! inference and partially identified welfare bounds.
//!
//! The pipeline for cross-sectional data is:
//!
//! 1. [`data::load_stochastic`] — ingest choices and per-period prices.
//! 2. [`patches::enumerate_patches`] — cut each unit-expenditure budget
//!    plane into patches by the arrangement of the other budgets.
//! 3. [`types::enumerate_types`] — enumerate GARP-consistent patch
//!    assignments (the columns of the type matrix `A`).
//! 4. [`stochastic::estimate_pi`] / [`stochastic::compute_jn`] /
//!    [`stochastic::bootstrap_pvalue`] — the rationality test.
//! 5. [`counterfactual::welfare_bounds`] / [`counterfactual::confidence_interval`]
//!    — welfare analysis for a pair of price situations.

pub mod afriat;
pub mod counterfactual;
pub mod data;
pub mod error;
pub mod patches;
pub mod relations;
pub mod rng;
pub mod simulate;
pub mod solver;
pub mod stochastic;
pub mod types;

pub use data::{CostMatrix, DeterministicDataset, StochasticDataset};
pub use error::{Error, Result};
pub use patches::{Patch, PatchLayout};
pub use relations::{CycleWitness, RelationPair};
pub use stochastic::{ChoiceProbabilities, OmegaSpec, TestResult};
pub use types::{IndicatorVector, TypeMatrix};

/// Absolute tolerance for expenditure comparisons in revealed-preference
/// relations. Differences within `±REL_TOL` are treated as ties (weak,
/// never strict).
pub const REL_TOL: f64 = 1e-9;
