//! Welfare bounds and confidence intervals for the proportion of the
//! population revealed better off under one price situation than
//! another.
//!
//! Against a rationalizable probability vector the proportion
//! `theta = rho·nu` is partially identified: the linear programs
//! `min/max rho·nu` over `{A nu = pi, nu >= 0}` give its bounds.
//! Inference inverts the restricted statistic
//!
//! ```text
//! J_N(theta) = N · min { (pi_hat - A nu)' Omega (pi_hat - A nu)
//!                        : nu in simplex, rho·nu = theta }
//! ```
//!
//! with a restriction-dependent tightening: at each hypothesized theta
//! the simplex is shrunk by per-index floors proportional to tau, sized
//! by whether the index attains the maximal, minimal, or an interior
//! value of rho. The binary-rho case reduces to floors
//! `(1-theta)·tau/|H_low|` and `theta·tau/|H_high|`.

use crate::error::{Error, Result};
use crate::patches::PatchLayout;
use crate::rng::{bootstrap_stream, stream_rng};
use crate::solver::{
    cls_solve, lp_solve, ConstrainedLeastSquares, Direction, LinearProgram, LpStatus, Sense,
};
use crate::stochastic::{
    default_tau, estimate_pi, resample_pi, BoundaryPolicy, ChoiceProbabilities, OmegaSpec,
    RATIONALIZABLE_TOL,
};
use crate::types::{IndicatorVector, TypeMatrix};
use crate::StochasticDataset;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Partition of the type indices by their indicator value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaPartition {
    pub theta_max: f64,
    pub theta_min: f64,
    /// Indices attaining the maximum of rho.
    pub upper_set: Vec<usize>,
    /// Indices attaining the minimum of rho.
    pub lower_set: Vec<usize>,
    /// Everything else.
    pub middle_set: Vec<usize>,
    /// True when the floors are computed on the rescaled parameter with
    /// a unit-length range (always, unless rho was already unit-range).
    pub normalized: bool,
}

impl ThetaPartition {
    /// Rescales theta to the unit-range parameterization.
    fn normalize(&self, theta: f64) -> f64 {
        (theta - self.theta_min) / (self.theta_max - self.theta_min)
    }
}

/// Splits the indicator values into maximal, minimal, and interior
/// index sets. Errors if the indicator is constant, in which case the
/// parameter `rho·nu` is degenerate.
pub fn theta_partition(rho: &[f64]) -> Result<ThetaPartition> {
    if rho.is_empty() {
        return Err(Error::ConstantRho);
    }
    let theta_max = rho.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let theta_min = rho.iter().cloned().fold(f64::INFINITY, f64::min);
    if theta_max - theta_min <= 1e-12 {
        return Err(Error::ConstantRho);
    }
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    let mut middle = Vec::new();
    for (j, &v) in rho.iter().enumerate() {
        if (v - theta_max).abs() <= 1e-12 {
            upper.push(j);
        } else if (v - theta_min).abs() <= 1e-12 {
            lower.push(j);
        } else {
            middle.push(j);
        }
    }
    Ok(ThetaPartition {
        theta_max,
        theta_min,
        upper_set: upper,
        lower_set: lower,
        middle_set: middle,
        normalized: (theta_max - theta_min - 1.0).abs() > 1e-12,
    })
}

/// Per-index lower floors of the tightened simplex at `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct TightenedFloors {
    pub floors: Vec<f64>,
    /// True when the interior-set coefficient went negative and was
    /// clamped at zero.
    pub clamped: bool,
}

/// Evaluates the restriction-dependent floors at a hypothesized theta.
///
/// The parameter is internally rescaled so its range has unit length;
/// with a binary indicator this is the identity and the floors reduce
/// to the two-set form.
pub fn tightened_lower_bounds(
    part: &ThetaPartition,
    theta: f64,
    tau: f64,
) -> Result<TightenedFloors> {
    if theta < part.theta_min - 1e-12 || theta > part.theta_max + 1e-12 {
        return Err(Error::ThetaOutOfRange {
            theta,
            lo: part.theta_min,
            hi: part.theta_max,
        });
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidConfig(format!("tau must lie in (0,1), got {tau}")));
    }
    let h = part.upper_set.len() + part.lower_set.len() + part.middle_set.len();
    let t = part.normalize(theta).clamp(0.0, 1.0);
    let low_mid = (part.lower_set.len() + part.middle_set.len()) as f64;
    let high_mid = (part.upper_set.len() + part.middle_set.len()) as f64;
    let mut floors = vec![0.0; h];
    for &j in &part.lower_set {
        floors[j] = (1.0 - t) * tau / low_mid;
    }
    for &j in &part.upper_set {
        floors[j] = t * tau / high_mid;
    }
    let mut clamped = false;
    if !part.middle_set.is_empty() {
        let coefficient = 1.0
            - (1.0 - t) * part.lower_set.len() as f64 / low_mid
            - t * part.upper_set.len() as f64 / high_mid;
        let value = if coefficient < 0.0 {
            clamped = true;
            0.0
        } else {
            coefficient * tau / part.middle_set.len() as f64
        };
        for &j in &part.middle_set {
            floors[j] = value;
        }
    }
    Ok(TightenedFloors { floors, clamped })
}

/// Partially identified bounds on the revealed-better-off proportion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WelfareBounds {
    pub lower: f64,
    pub upper: f64,
    /// Across all rationalizations (not only revealed rankings), the
    /// proportion preferring the first price can reach
    /// `1 - lower(reversed pair)`.
    pub any_rationalization_upper: f64,
    pub pair: (usize, usize),
    pub nu_at_lower: Vec<f64>,
    pub nu_at_upper: Vec<f64>,
}

fn welfare_lp(
    target: &[f64],
    types: &TypeMatrix,
    rho: &[f64],
    direction: Direction,
) -> Result<(f64, Vec<f64>)> {
    let a = types.dense();
    let lp = LinearProgram {
        direction,
        objective: rho.to_vec(),
        rows: a,
        senses: vec![Sense::Eq; types.rows()],
        rhs: target.to_vec(),
        bounds: vec![(0.0, f64::INFINITY); types.h()],
    };
    let sol = lp_solve(&lp)?;
    match sol.status {
        LpStatus::Optimal => Ok((sol.objective, sol.x)),
        LpStatus::Infeasible => Err(Error::Infeasible(
            "A·nu = pi has no nonnegative solution; project first".into(),
        )),
        LpStatus::Unbounded => Err(Error::Internal("welfare program unbounded".into())),
    }
}

/// Solves the two welfare linear programs against a rationalizable
/// target vector (the estimated frequencies when `J_N = 0`, otherwise
/// the projected fit `eta_hat`).
pub fn welfare_bounds(
    target: &[f64],
    types: &TypeMatrix,
    rho: &IndicatorVector,
    rho_reversed: &IndicatorVector,
) -> Result<WelfareBounds> {
    let (lower, nu_at_lower) = welfare_lp(target, types, &rho.rho, Direction::Minimize)?;
    let (upper, nu_at_upper) = welfare_lp(target, types, &rho.rho, Direction::Maximize)?;
    let (reversed_lower, _) = welfare_lp(target, types, &rho_reversed.rho, Direction::Minimize)?;
    Ok(WelfareBounds {
        lower,
        upper,
        any_rationalization_upper: 1.0 - reversed_lower,
        pair: rho.pair,
        nu_at_lower,
        nu_at_upper,
    })
}

/// The theta-restricted statistic `J_N(theta)`.
///
/// Minimizes the weighted distance over the simplex intersected with
/// `rho·nu = theta`, with optional tightening floors. Infeasibility of
/// the constraint set is reported as an error, distinct from a large
/// objective.
pub fn jn_theta(
    pi: &ChoiceProbabilities,
    types: &TypeMatrix,
    rho: &[f64],
    theta: f64,
    omega: &OmegaSpec,
    floors: Option<&[f64]>,
) -> Result<f64> {
    let weights = omega.weights(types.rows())?;
    let sol = restricted_projection(&pi.stacked, types, rho, theta, &weights, floors)?;
    Ok(pi.total_n as f64 * sol.residual_norm_sq)
}

fn restricted_projection(
    target: &[f64],
    types: &TypeMatrix,
    rho: &[f64],
    theta: f64,
    weights: &[f64],
    floors: Option<&[f64]>,
) -> Result<crate::solver::ClsSolution> {
    let h = types.h();
    let lower_bounds = match floors {
        Some(f) => f.to_vec(),
        None => vec![0.0; h],
    };
    cls_solve(&ConstrainedLeastSquares {
        design: types.dense(),
        target: target.to_vec(),
        weights: weights.to_vec(),
        lower_bounds,
        equalities: vec![(vec![1.0; h], 1.0), (rho.to_vec(), theta)],
    })
}

/// Confidence interval configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CiConfig {
    pub alpha: f64,
    pub grid_step: f64,
    pub replications: usize,
    pub tau: Option<f64>,
    pub omega: OmegaSpec,
    pub seed: u64,
    pub boundary: BoundaryPolicy,
}

/// Diagnostics for a single grid point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThetaDiagnostic {
    pub theta: f64,
    /// `J_N(theta)`; absent when the restriction itself is infeasible.
    pub j_n_theta: Option<f64>,
    /// Bootstrap (1-alpha) quantile of the tightened statistic.
    pub critical_value: Option<f64>,
    pub p_value: Option<f64>,
    pub accepted: bool,
    pub infeasible: bool,
}

/// Confidence set for theta by test inversion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub grid: Vec<f64>,
    pub accepted: Vec<f64>,
    /// Hull of the accepted set; `None` when everything was rejected.
    pub interval: Option<(f64, f64)>,
    pub alpha: f64,
    pub tau: f64,
    pub replications: usize,
    pub seed: u64,
    pub per_theta: Vec<ThetaDiagnostic>,
    /// Estimated LP bounds when the sample statistic was zero (these
    /// grid points are inserted so the hull always covers them).
    pub estimated_bounds: Option<(f64, f64)>,
}

/// Inverts the tightened bootstrap test of `rho·nu = theta` over a grid
/// of theta values.
///
/// For each grid point: compute `J_N(theta)`; project onto the
/// tightened restricted set to get the recentering target; bootstrap
/// within-period resamples; accept theta when the bootstrap p-value
/// `(1 + #{J* >= J_N(theta)}) / (R+1)` exceeds alpha. Grid points whose
/// restriction is infeasible (possible at extreme theta when interior
/// floors bind) are rejected and flagged. A constant indicator makes
/// the parameter degenerate: the interval collapses to the single
/// attainable value, accepted iff the unrestricted statistic is zero.
pub fn confidence_interval(
    data: &StochasticDataset,
    layout: &PatchLayout,
    types: &TypeMatrix,
    rho: &IndicatorVector,
    config: &CiConfig,
) -> Result<ConfidenceInterval> {
    if !(config.alpha > 0.0 && config.alpha <= 0.5) {
        return Err(Error::InvalidConfig(format!(
            "alpha must lie in (0, 0.5], got {}",
            config.alpha
        )));
    }
    if !(config.grid_step > 0.0 && config.grid_step <= 0.25) {
        return Err(Error::InvalidConfig(format!(
            "grid step must lie in (0, 0.25], got {}",
            config.grid_step
        )));
    }
    if config.replications == 0 {
        return Err(Error::InvalidConfig("replications must be >= 1".into()));
    }
    let pi = estimate_pi(data, layout, config.boundary)?;
    let tau = config.tau.unwrap_or_else(|| default_tau(pi.total_n));
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidConfig(format!("tau must lie in (0,1), got {tau}")));
    }
    let weights = config.omega.weights(types.rows())?;
    let plain = crate::stochastic::compute_jn(&pi, types, &config.omega)?;

    // degenerate indicator: theta is pinned at its only attainable value
    let partition = match theta_partition(&rho.rho) {
        Ok(p) => p,
        Err(Error::ConstantRho) => {
            let theta0 = rho.rho.first().copied().unwrap_or(0.0);
            let accepted = plain.j_n <= RATIONALIZABLE_TOL;
            let diag = ThetaDiagnostic {
                theta: theta0,
                j_n_theta: Some(plain.j_n),
                critical_value: None,
                p_value: Some(if accepted { 1.0 } else { 0.0 }),
                accepted,
                infeasible: false,
            };
            return Ok(ConfidenceInterval {
                grid: vec![theta0],
                accepted: if accepted { vec![theta0] } else { vec![] },
                interval: accepted.then_some((theta0, theta0)),
                alpha: config.alpha,
                tau,
                replications: config.replications,
                seed: config.seed,
                per_theta: vec![diag],
                estimated_bounds: None,
            });
        }
        Err(e) => return Err(e),
    };

    // grid over the attainable range, endpoints always included; grid
    // points are formed by multiplication so that round values like 0.5
    // are hit exactly rather than drifting by accumulated rounding
    let mut grid: Vec<f64> = Vec::new();
    let mut k = 0usize;
    loop {
        let theta = partition.theta_min + k as f64 * config.grid_step;
        if theta >= partition.theta_max - 1e-12 {
            break;
        }
        grid.push(theta);
        k += 1;
    }
    grid.push(partition.theta_max);

    // insert the estimated LP bounds (solved against the projected fit,
    // which equals pi_hat when J_N = 0) so the hull covers them
    let (lower, _) = welfare_lp(&plain.eta_hat, types, &rho.rho, Direction::Minimize)?;
    let (upper, _) = welfare_lp(&plain.eta_hat, types, &rho.rho, Direction::Maximize)?;
    let estimated_bounds = Some((lower, upper));
    for b in [lower, upper] {
        if !grid.iter().any(|&g| (g - b).abs() <= 1e-12) {
            grid.push(b);
        }
    }
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let n = pi.total_n as f64;
    let per_theta: Vec<ThetaDiagnostic> = grid
        .iter()
        .enumerate()
        .map(|(g, &theta)| {
            diagnose_theta(
                &pi, types, rho, &partition, theta, g, tau, n, &weights, config,
            )
        })
        .collect::<Result<_>>()?;

    let accepted: Vec<f64> = per_theta
        .iter()
        .filter(|d| d.accepted)
        .map(|d| d.theta)
        .collect();
    let interval = if accepted.is_empty() {
        None
    } else {
        Some((accepted[0], *accepted.last().unwrap()))
    };
    Ok(ConfidenceInterval {
        grid,
        accepted,
        interval,
        alpha: config.alpha,
        tau,
        replications: config.replications,
        seed: config.seed,
        per_theta,
        estimated_bounds,
    })
}

#[allow(clippy::too_many_arguments)]
fn diagnose_theta(
    pi: &ChoiceProbabilities,
    types: &TypeMatrix,
    rho: &IndicatorVector,
    partition: &ThetaPartition,
    theta: f64,
    grid_index: usize,
    tau: f64,
    n: f64,
    weights: &[f64],
    config: &CiConfig,
) -> Result<ThetaDiagnostic> {
    let rejected = |j_n_theta, infeasible| ThetaDiagnostic {
        theta,
        j_n_theta,
        critical_value: None,
        p_value: None,
        accepted: false,
        infeasible,
    };

    // unrestricted-floors statistic at this theta
    let j_theta = match restricted_projection(&pi.stacked, types, &rho.rho, theta, weights, None) {
        Ok(sol) => n * sol.residual_norm_sq,
        Err(Error::Infeasible(_)) => return Ok(rejected(None, true)),
        Err(e) => return Err(e),
    };
    let floors = tightened_lower_bounds(partition, theta, tau)?;
    let restricted = match restricted_projection(
        &pi.stacked,
        types,
        &rho.rho,
        theta,
        weights,
        Some(&floors.floors),
    ) {
        Ok(sol) => sol,
        Err(Error::Infeasible(_)) => return Ok(rejected(Some(j_theta), true)),
        Err(e) => return Err(e),
    };
    let eta_tau = types.matvec(&restricted.x);

    let j_star: Vec<f64> = (1..=config.replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(config.seed, bootstrap_stream(grid_index + 1, r));
            let pi_star = resample_pi(pi, &mut rng);
            let recentered: Vec<f64> = pi_star
                .iter()
                .zip(&pi.stacked)
                .zip(&eta_tau)
                .map(|((s, p), e)| s - p + e)
                .collect();
            let sol = restricted_projection(
                &recentered,
                types,
                &rho.rho,
                theta,
                weights,
                Some(&floors.floors),
            )
            .expect("tightened set verified feasible above");
            n * sol.residual_norm_sq
        })
        .collect();

    let exceed = j_star.iter().filter(|&&j| j >= j_theta).count();
    let p_value = (1.0 + exceed as f64) / (config.replications as f64 + 1.0);
    let mut sorted = j_star;
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let idx = ((1.0 - config.alpha) * sorted.len() as f64).ceil() as usize;
    let critical_value = sorted[idx.clamp(1, sorted.len()) - 1];
    Ok(ThetaDiagnostic {
        theta,
        j_n_theta: Some(j_theta),
        critical_value: Some(critical_value),
        p_value: Some(p_value),
        accepted: p_value > config.alpha,
        infeasible: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patches::enumerate_patches;
    use crate::stochastic::compute_jn;
    use crate::types::{enumerate_types, type_indicator};
    use approx::assert_abs_diff_eq;

    fn example_3() -> (
        StochasticDataset,
        PatchLayout,
        TypeMatrix,
        ChoiceProbabilities,
        IndicatorVector,
        IndicatorVector,
    ) {
        let data = crate::stochastic::tests::example_3_data();
        let layout = enumerate_patches(&data.price_vectors()).unwrap();
        let types = enumerate_types(&layout).unwrap();
        let pi = estimate_pi(&data, &layout, BoundaryPolicy::Drop).unwrap();
        let rho = type_indicator(&types, &layout, 0, 1).unwrap();
        let rev = type_indicator(&types, &layout, 1, 0).unwrap();
        (data, layout, types, pi, rho, rev)
    }

    #[test]
    fn example_3_bounds_are_point_identified() {
        let (_, _, types, pi, rho, rev) = example_3();
        let bounds = welfare_bounds(&pi.stacked, &types, &rho, &rev).unwrap();
        assert_abs_diff_eq!(bounds.lower, 0.5, epsilon = 1e-8);
        assert_abs_diff_eq!(bounds.upper, 0.5, epsilon = 1e-8);
        assert_abs_diff_eq!(bounds.any_rationalization_upper, 0.6, epsilon = 1e-8);
        assert!(bounds.lower <= bounds.upper);
        assert!(bounds.upper <= bounds.any_rationalization_upper + 1e-12);
    }

    #[test]
    fn all_ones_indicator_pins_the_proportion_at_one() {
        let (_, _, types, pi, rho, rev) = example_3();
        let ones = IndicatorVector {
            rho: vec![1.0; types.h()],
            pair: rho.pair,
        };
        let zeros = IndicatorVector {
            rho: vec![0.0; types.h()],
            pair: rev.pair,
        };
        let bounds = welfare_bounds(&pi.stacked, &types, &ones, &zeros).unwrap();
        assert_abs_diff_eq!(bounds.lower, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(bounds.upper, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn infeasible_target_is_an_error() {
        let (_, _, types, pi, rho, rev) = example_3();
        let mut bad = pi.stacked.clone();
        bad[0] = 0.6;
        bad[1] = 0.4;
        assert!(matches!(
            welfare_bounds(&bad, &types, &rho, &rev),
            Err(Error::Infeasible(_))
        ));
    }

    /// LP bounds equal a vertex-style scan: grid over the solution set
    /// via dense sampling of feasible nu (small instances only).
    #[test]
    fn bounds_match_feasible_grid_scan() {
        let (_, _, types, pi, rho, rev) = example_3();
        let bounds = welfare_bounds(&pi.stacked, &types, &rho, &rev).unwrap();
        let a = types.dense();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let steps = 200usize;
        for i in 0..=steps {
            for j in 0..=(steps - i) {
                let k = steps - i - j;
                let nu = [
                    i as f64 / steps as f64,
                    j as f64 / steps as f64,
                    k as f64 / steps as f64,
                ];
                let fits = (0..4).all(|r| {
                    let fit: f64 = a[r].iter().zip(&nu).map(|(x, y)| x * y).sum();
                    (fit - pi.stacked[r]).abs() <= 1e-9
                });
                if fits {
                    let value: f64 = rho.rho.iter().zip(&nu).map(|(x, y)| x * y).sum();
                    lo = lo.min(value);
                    hi = hi.max(value);
                }
            }
        }
        assert!(lo.is_finite(), "grid scan found no feasible point");
        assert_abs_diff_eq!(bounds.lower, lo, epsilon = 1e-6);
        assert_abs_diff_eq!(bounds.upper, hi, epsilon = 1e-6);
    }

    #[test]
    fn partition_of_example_3_indicator() {
        let (_, _, _, _, rho, _) = example_3();
        let part = theta_partition(&rho.rho).unwrap();
        assert_eq!(part.theta_max, 1.0);
        assert_eq!(part.theta_min, 0.0);
        assert_eq!(part.upper_set, vec![1]);
        assert_eq!(part.lower_set, vec![0, 2]);
        assert!(part.middle_set.is_empty());
    }

    #[test]
    fn partition_handles_interior_values_and_rejects_constants() {
        let part = theta_partition(&[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(part.middle_set, vec![1]);
        assert!(matches!(theta_partition(&[0.3, 0.3]), Err(Error::ConstantRho)));
        let two = theta_partition(&[0.0, 1.0]).unwrap();
        assert_eq!(two.upper_set, vec![1]);
        assert_eq!(two.lower_set, vec![0]);
    }

    #[test]
    fn binary_floors_match_the_closed_form() {
        let part = theta_partition(&[0.0, 1.0, 0.0, 1.0]).unwrap();
        let f = tightened_lower_bounds(&part, 0.5, 0.1).unwrap();
        assert!(!f.clamped);
        for &j in &part.lower_set {
            assert_abs_diff_eq!(f.floors[j], 0.025, epsilon = 1e-15);
        }
        for &j in &part.upper_set {
            assert_abs_diff_eq!(f.floors[j], 0.025, epsilon = 1e-15);
        }
        // endpoint: floors on the lower set vanish
        let at_top = tightened_lower_bounds(&part, 1.0, 0.1).unwrap();
        for &j in &part.lower_set {
            assert_abs_diff_eq!(at_top.floors[j], 0.0, epsilon = 1e-15);
        }
        for &j in &part.upper_set {
            assert_abs_diff_eq!(at_top.floors[j], 0.05, epsilon = 1e-15);
        }
    }

    #[test]
    fn floors_sum_below_tau_and_nest_in_tau() {
        let part = theta_partition(&[0.0, 0.25, 1.0, 1.0, 0.5]).unwrap();
        for step in 0..=10 {
            let theta = step as f64 / 10.0;
            let f = tightened_lower_bounds(&part, theta, 0.2).unwrap();
            let total: f64 = f.floors.iter().sum();
            assert!(total <= 0.2 + 1e-12, "total {total} at theta {theta}");
            let tighter = tightened_lower_bounds(&part, theta, 0.1).unwrap();
            for (a, b) in tighter.floors.iter().zip(&f.floors) {
                assert!(a <= b);
            }
        }
    }

    #[test]
    fn general_formula_reduces_to_binary_simplification() {
        let part = theta_partition(&[0.0, 1.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(part.middle_set.is_empty());
        for step in 0..=4 {
            let theta = step as f64 / 4.0;
            let f = tightened_lower_bounds(&part, theta, 0.15).unwrap();
            for &j in &part.lower_set {
                assert_abs_diff_eq!(
                    f.floors[j],
                    (1.0 - theta) * 0.15 / 3.0,
                    epsilon = 1e-14
                );
            }
            for &j in &part.upper_set {
                assert_abs_diff_eq!(f.floors[j], theta * 0.15 / 2.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn jn_theta_is_zero_inside_the_identified_set_and_positive_outside() {
        let (_, _, types, pi, rho, _) = example_3();
        let j_half = jn_theta(&pi, &types, &rho.rho, 0.5, &OmegaSpec::Identity, None).unwrap();
        assert!(j_half < 1e-10);
        let j_zero = jn_theta(&pi, &types, &rho.rho, 0.0, &OmegaSpec::Identity, None).unwrap();
        assert!(j_zero > 1e-4);
        // 1-dimensional grid oracle at theta = 0: nu_2 pinned to zero
        let a = types.dense();
        let mut best = f64::INFINITY;
        for i in 0..=1000 {
            let nu = [i as f64 / 1000.0, 0.0, 1.0 - i as f64 / 1000.0];
            let mut obj = 0.0;
            for (row, target) in a.iter().zip(&pi.stacked) {
                let fit: f64 = row.iter().zip(&nu).map(|(x, y)| x * y).sum();
                obj += (target - fit) * (target - fit);
            }
            best = best.min(obj);
        }
        assert!((j_zero - pi.total_n as f64 * best).abs() < pi.total_n as f64 * 1e-5);
    }

    #[test]
    fn jn_theta_out_of_range_or_infeasible_is_distinguished() {
        let (_, _, types, pi, rho, _) = example_3();
        // floors that exclude theta = 1 entirely
        let floors = vec![0.2, 0.0, 0.2];
        assert!(matches!(
            jn_theta(&pi, &types, &rho.rho, 1.0, &OmegaSpec::Identity, Some(&floors)),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn ci_covers_the_point_identified_value() {
        let (data, layout, types, _, rho, _) = example_3();
        let config = CiConfig {
            alpha: 0.05,
            grid_step: 0.05,
            replications: 60,
            tau: None,
            omega: OmegaSpec::Identity,
            seed: 11,
            boundary: BoundaryPolicy::Drop,
        };
        let ci = confidence_interval(&data, &layout, &types, &rho, &config).unwrap();
        let (lo, hi) = ci.interval.expect("nonempty acceptance region");
        assert!(lo <= 0.5 && 0.5 <= hi);
        let (blo, bhi) = ci.estimated_bounds.unwrap();
        assert!(lo <= blo + 1e-12 && bhi <= hi + 1e-12, "hull covers LP bounds");
        // interval endpoints are grid members
        assert!(ci.grid.iter().any(|&g| g == lo));
        assert!(ci.grid.iter().any(|&g| g == hi));
    }

    #[test]
    fn ci_is_deterministic_for_a_seed() {
        let (data, layout, types, _, rho, _) = example_3();
        let config = CiConfig {
            alpha: 0.1,
            grid_step: 0.1,
            replications: 40,
            tau: Some(0.08),
            omega: OmegaSpec::Identity,
            seed: 4,
            boundary: BoundaryPolicy::Drop,
        };
        let a = confidence_interval(&data, &layout, &types, &rho, &config).unwrap();
        let b = confidence_interval(&data, &layout, &types, &rho, &config).unwrap();
        assert_eq!(a.accepted, b.accepted);
        for (x, y) in a.per_theta.iter().zip(&b.per_theta) {
            assert_eq!(
                x.p_value.map(f64::to_bits),
                y.p_value.map(f64::to_bits)
            );
        }
    }

    #[test]
    fn smaller_alpha_widens_the_acceptance_region() {
        let (data, layout, types, _, rho, _) = example_3();
        let base = CiConfig {
            alpha: 0.5,
            grid_step: 0.05,
            replications: 40,
            tau: Some(0.1),
            omega: OmegaSpec::Identity,
            seed: 21,
            boundary: BoundaryPolicy::Drop,
        };
        let tight = confidence_interval(&data, &layout, &types, &rho, &base).unwrap();
        let loose = confidence_interval(
            &data,
            &layout,
            &types,
            &rho,
            &CiConfig {
                alpha: 0.01,
                ..base
            },
        )
        .unwrap();
        for theta in &tight.accepted {
            assert!(
                loose.accepted.iter().any(|t| (t - theta).abs() < 1e-12),
                "theta {theta} accepted at alpha=0.5 but not at alpha=0.01"
            );
        }
    }

    #[test]
    fn constant_indicator_degenerates_to_a_point() {
        // two identical budgets: the indicator is identically zero
        let data = {
            let base = crate::stochastic::tests::example_3_data();
            let mut periods = base.periods().to_vec();
            periods[1].prices = periods[0].prices.clone();
            StochasticDataset::new(periods).unwrap()
        };
        let layout = enumerate_patches(&data.price_vectors()).unwrap();
        let types = enumerate_types(&layout).unwrap();
        let rho = type_indicator(&types, &layout, 0, 1).unwrap();
        let config = CiConfig {
            alpha: 0.05,
            grid_step: 0.05,
            replications: 20,
            tau: None,
            omega: OmegaSpec::Identity,
            seed: 3,
            boundary: BoundaryPolicy::Drop,
        };
        let ci = confidence_interval(&data, &layout, &types, &rho, &config).unwrap();
        assert_eq!(ci.grid, vec![0.0]);
        assert_eq!(ci.interval, Some((0.0, 0.0)));
        assert_eq!(ci.accepted, vec![0.0]);
    }

    #[test]
    fn welfare_uses_projection_when_sample_is_off_cone() {
        let (_, _, types, pi, rho, rev) = example_3();
        let off = ChoiceProbabilities {
            stacked: vec![0.58, 0.42, 0.52, 0.48],
            ..pi.clone()
        };
        let result = compute_jn(&off, &types, &OmegaSpec::Identity).unwrap();
        if result.j_n > RATIONALIZABLE_TOL {
            let bounds = welfare_bounds(&result.eta_hat, &types, &rho, &rev).unwrap();
            assert!(bounds.lower <= bounds.upper);
        } else {
            let bounds = welfare_bounds(&off.stacked, &types, &rho, &rev).unwrap();
            assert!(bounds.lower <= bounds.upper);
        }
    }
}
