//! Stochastic rationality testing.
//!
//! The hypothesis is that the normalized-and-discretized choice
//! probabilities lie in the cone spanned by the rational types:
//! `pi = A·nu` for some `nu >= 0`. The statistic is
//!
//! ```text
//! J_N = N · min_{nu >= 0} (pi_hat - A nu)' Omega (pi_hat - A nu),
//! ```
//!
//! zero exactly when the sample frequencies are rationalizable. Critical
//! values come from a recentered nonparametric bootstrap around the
//! tau-tightened restricted estimator: small floors `nu_j >= tau/H`
//! treat near-binding nonnegativity constraints as binding in the
//! bootstrap population, which protects the test's size near the cone's
//! boundary.

use crate::data::StochasticDataset;
use crate::error::{Error, Result};
use crate::patches::{assign_patch, PatchLayout};
use crate::rng::{bootstrap_stream, stream_rng};
use crate::solver::{cls_solve, ClsSolution, ConstrainedLeastSquares};
use crate::types::TypeMatrix;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// J_N at or below this value counts as exactly rationalizable.
pub const RATIONALIZABLE_TOL: f64 = 1e-9;

/// What to do with choices that normalize onto another budget plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryPolicy {
    /// Drop the choice and count it.
    Drop,
    /// Abort with an error.
    Abort,
}

/// Diagonal weight matrix specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaSpec {
    Identity,
    Diagonal(Vec<f64>),
}

impl OmegaSpec {
    pub(crate) fn weights(&self, rows: usize) -> Result<Vec<f64>> {
        match self {
            OmegaSpec::Identity => Ok(vec![1.0; rows]),
            OmegaSpec::Diagonal(d) => {
                if d.len() != rows {
                    return Err(Error::InvalidConfig(format!(
                        "omega has {} entries, expected {rows}",
                        d.len()
                    )));
                }
                if d.iter().any(|&v| !(v > 0.0)) {
                    return Err(Error::InvalidConfig(
                        "omega diagonal must be strictly positive".into(),
                    ));
                }
                Ok(d.clone())
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            OmegaSpec::Identity => "identity".into(),
            OmegaSpec::Diagonal(_) => "diagonal".into(),
        }
    }
}

/// Stacked patch probabilities estimated from sample frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceProbabilities {
    pub stacked: Vec<f64>,
    pub block_offsets: Vec<usize>,
    /// Retained sample size per period (after boundary drops).
    pub sample_sizes: Vec<usize>,
    pub total_n: usize,
    pub dropped_on_boundary: Vec<usize>,
    pub layout_id: String,
}

impl ChoiceProbabilities {
    /// The block of budget `t`.
    pub fn block(&self, t: usize) -> &[f64] {
        let start = self.block_offsets[t];
        let end = self
            .block_offsets
            .get(t + 1)
            .copied()
            .unwrap_or(self.stacked.len());
        &self.stacked[start..end]
    }

    pub fn periods(&self) -> usize {
        self.block_offsets.len()
    }
}

/// Outcome of the rationality test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestResult {
    pub j_n: f64,
    /// A minimizer of the projection (not necessarily unique).
    pub nu_hat: Vec<f64>,
    /// The fitted probabilities `A·nu_hat` (unique).
    pub eta_hat: Vec<f64>,
    pub p_value: Option<f64>,
    pub replications: Option<usize>,
    pub tau: Option<f64>,
    pub omega: String,
    pub seed: Option<u64>,
    pub total_n: usize,
    pub dropped_on_boundary: Vec<usize>,
}

impl TestResult {
    pub fn rationalizable(&self) -> bool {
        self.j_n <= RATIONALIZABLE_TOL
    }
}

/// Normalizes each choice onto its budget plane, assigns it to a patch,
/// and estimates the patch probabilities by sample frequencies.
pub fn estimate_pi(
    data: &StochasticDataset,
    layout: &PatchLayout,
    policy: BoundaryPolicy,
) -> Result<ChoiceProbabilities> {
    if data.len() != layout.budgets() {
        return Err(Error::InvalidConfig(format!(
            "layout covers {} budgets but the data has {} periods",
            layout.budgets(),
            data.len()
        )));
    }
    let mut stacked = vec![0.0; layout.total_rows()];
    let mut sample_sizes = Vec::with_capacity(data.len());
    let mut dropped = Vec::with_capacity(data.len());
    for t in 0..data.len() {
        let offset = layout.row_offset(t);
        let mut counts = vec![0usize; layout.patch_count(t)];
        let mut dropped_t = 0usize;
        for x in &data.period(t).choices {
            match assign_patch(x, t, layout) {
                Ok(i) => counts[i] += 1,
                Err(Error::OnBoundary { budget, other }) => match policy {
                    BoundaryPolicy::Drop => dropped_t += 1,
                    BoundaryPolicy::Abort => {
                        return Err(Error::OnBoundary { budget, other });
                    }
                },
                Err(e) => return Err(e),
            }
        }
        let retained: usize = counts.iter().sum();
        if retained == 0 {
            return Err(Error::EmptyPeriod {
                period: data.period(t).key.clone(),
            });
        }
        for (i, &c) in counts.iter().enumerate() {
            stacked[offset + i] = c as f64 / retained as f64;
        }
        sample_sizes.push(retained);
        dropped.push(dropped_t);
    }
    Ok(ChoiceProbabilities {
        stacked,
        block_offsets: (0..data.len()).map(|t| layout.row_offset(t)).collect(),
        total_n: sample_sizes.iter().sum(),
        sample_sizes,
        dropped_on_boundary: dropped,
        layout_id: layout.id(),
    })
}

fn projection_problem(
    pi: &[f64],
    types: &TypeMatrix,
    weights: &[f64],
    floors: f64,
) -> ConstrainedLeastSquares {
    ConstrainedLeastSquares {
        design: types.dense(),
        target: pi.to_vec(),
        weights: weights.to_vec(),
        lower_bounds: vec![floors; types.h()],
        equalities: vec![],
    }
}

fn check_binding(pi: &ChoiceProbabilities, types: &TypeMatrix) -> Result<()> {
    if pi.layout_id != types.layout_id() {
        return Err(Error::InvalidConfig(
            "choice probabilities and type matrix come from different layouts".into(),
        ));
    }
    if pi.stacked.len() != types.rows() {
        return Err(Error::InvalidConfig(format!(
            "probability vector has {} rows, type matrix has {}",
            pi.stacked.len(),
            types.rows()
        )));
    }
    Ok(())
}

/// Projects the estimated probabilities onto the cone of rational-type
/// mixtures and forms `J_N`.
pub fn compute_jn(
    pi: &ChoiceProbabilities,
    types: &TypeMatrix,
    omega: &OmegaSpec,
) -> Result<TestResult> {
    check_binding(pi, types)?;
    let weights = omega.weights(types.rows())?;
    let sol = cls_solve(&projection_problem(&pi.stacked, types, &weights, 0.0))?;
    let ClsSolution {
        x: nu_hat,
        residual_norm_sq,
        ..
    } = sol;
    let eta_hat = types.matvec(&nu_hat);
    Ok(TestResult {
        j_n: pi.total_n as f64 * residual_norm_sq,
        nu_hat,
        eta_hat,
        p_value: None,
        replications: None,
        tau: None,
        omega: omega.describe(),
        seed: None,
        total_n: pi.total_n,
        dropped_on_boundary: pi.dropped_on_boundary.clone(),
    })
}

/// Bootstrap configuration for [`bootstrap_pvalue`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replications: usize,
    /// Tightening parameter; defaults to `sqrt(log N / N)`.
    pub tau: Option<f64>,
    pub omega: OmegaSpec,
    pub seed: u64,
    pub boundary: BoundaryPolicy,
}

pub(crate) fn default_tau(total_n: usize) -> f64 {
    ((total_n as f64).ln() / total_n as f64).sqrt()
}

/// Draws a bootstrap frequency vector: an independent multinomial
/// resample of each period's retained choices over its patches.
pub(crate) fn resample_pi(
    pi: &ChoiceProbabilities,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let mut out = vec![0.0; pi.stacked.len()];
    for t in 0..pi.periods() {
        let block = pi.block(t);
        let start = pi.block_offsets[t];
        let n_t = pi.sample_sizes[t];
        // sequential binomial splitting of a multinomial draw
        let mut remaining = n_t as u64;
        let mut prob_left = 1.0f64;
        for (i, &p) in block.iter().enumerate() {
            if remaining == 0 {
                break;
            }
            let share = if prob_left > 1e-15 { (p / prob_left).clamp(0.0, 1.0) } else { 1.0 };
            let draw = if i + 1 == block.len() {
                remaining
            } else {
                Binomial::new(remaining, share)
                    .expect("valid binomial parameters")
                    .sample(rng)
            };
            out[start + i] = draw as f64 / n_t as f64;
            remaining -= draw;
            prob_left -= p;
        }
    }
    out
}

/// Runs the tau-tightened recentered bootstrap and returns the test
/// with its p-value.
///
/// Steps: (i) project onto the tightened cone `{A nu : nu_j >= tau/H}`
/// to get the restricted estimator; (ii) draw within-period resamples
/// and recenter them around it; (iii) recompute the tightened statistic
/// on every resample; (iv) `p = (1 + #{J* >= J_N}) / (R + 1)`. A
/// rationalizable sample (`J_N = 0`) accepts trivially with `p = 1` and
/// no resampling. Replications run in parallel with per-replication
/// random streams, so the p-value is identical for any thread count.
pub fn bootstrap_pvalue(
    data: &StochasticDataset,
    layout: &PatchLayout,
    types: &TypeMatrix,
    config: &BootstrapConfig,
) -> Result<TestResult> {
    if config.replications == 0 {
        return Err(Error::InvalidConfig("replications must be >= 1".into()));
    }
    let pi = estimate_pi(data, layout, config.boundary)?;
    let tau = config.tau.unwrap_or_else(|| default_tau(pi.total_n));
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "tau must lie in (0, 1), got {tau}"
        )));
    }
    let mut result = compute_jn(&pi, types, &config.omega)?;
    result.tau = Some(tau);
    result.replications = Some(config.replications);
    result.seed = Some(config.seed);
    if result.rationalizable() {
        result.p_value = Some(1.0);
        return Ok(result);
    }

    let weights = config.omega.weights(types.rows())?;
    let floor = tau / types.h() as f64;
    let restricted = cls_solve(&projection_problem(&pi.stacked, types, &weights, floor))?;
    let eta_tau = types.matvec(&restricted.x);

    let n = pi.total_n as f64;
    let j_star: Vec<f64> = (1..=config.replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(config.seed, bootstrap_stream(0, r));
            let pi_star = resample_pi(&pi, &mut rng);
            let recentered: Vec<f64> = pi_star
                .iter()
                .zip(&pi.stacked)
                .zip(&eta_tau)
                .map(|((s, p), e)| s - p + e)
                .collect();
            let sol = cls_solve(&projection_problem(&recentered, types, &weights, floor))
                .expect("tightened projection is always feasible");
            n * sol.residual_norm_sq
        })
        .collect();

    let exceed = j_star.iter().filter(|&&j| j >= result.j_n).count();
    result.p_value = Some((1.0 + exceed as f64) / (config.replications as f64 + 1.0));
    Ok(result)
}
