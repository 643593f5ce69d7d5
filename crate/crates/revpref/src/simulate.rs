//! Synthetic data generators used for validation.
//!
//! `gen_mixture` draws households from a known distribution over
//! rational types, so the population version of the rationality
//! hypothesis holds exactly and the patch frequencies converge to
//! `A·nu*`. `gen_quasilinear` simulates log Cobb–Douglas maximizers of
//! `sum_i a_i log x_i - p·x` (demand `x_i = a_i / p_i`), whose panels
//! satisfy both GARP and GAPP by construction.

use crate::data::{Period, StochasticDataset};
use crate::error::{Error, Result};
use crate::patches::{HalfSide, PatchLayout, BOUNDARY_TOL};
use crate::rng::{household_stream, stream_rng};
use crate::solver::{lp_solve, Direction, LinearProgram, LpStatus, Sense};
use crate::types::TypeMatrix;
use crate::DeterministicDataset;
use rand::Rng;
use rand_distr::{Dirichlet, Distribution, LogNormal};
use serde::{Deserialize, Serialize};

/// A population mixing the columns of a type matrix.
#[derive(Debug, Clone)]
pub struct MixtureSpec<'a> {
    pub types: &'a TypeMatrix,
    pub layout: &'a PatchLayout,
    /// Population weights over types; must lie on the simplex.
    pub nu_star: Vec<f64>,
    /// Households sampled per period.
    pub sample_sizes: Vec<usize>,
    /// Log-normal parameters for the unnormalized expenditure scale.
    pub expenditure_log_mean: f64,
    pub expenditure_log_sd: f64,
    pub seed: u64,
}

/// A population of quasilinear Cobb–Douglas consumers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuasilinearSpec {
    pub goods: usize,
    pub periods: usize,
    /// Households per period; every household is observed in every
    /// period, so the pooled cross-section has this many choices per
    /// period and the panel output has one data set per household.
    pub households: usize,
    /// Per-good prices are drawn log-uniformly from this range.
    pub price_range: (f64, f64),
    /// Dirichlet concentration for the Cobb–Douglas weights.
    pub dirichlet_alpha: f64,
    pub seed: u64,
}

/// Pooled cross-section plus the underlying per-household panels.
#[derive(Debug, Clone)]
pub struct QuasilinearSample {
    pub data: StochasticDataset,
    pub panels: Vec<DeterministicDataset>,
}

/// Certified-interior anchor points of one patch, used to spread
/// simulated choices across the patch instead of piling on the witness.
fn patch_anchors(layout: &PatchLayout, budget: usize, patch_index: usize) -> Result<Vec<Vec<f64>>> {
    let patch = &layout.patches(budget)[patch_index];
    let dim = layout.dim();
    let margin = patch.margin / 2.0;
    let mut anchors = Vec::with_capacity(3);
    for objective_axis in 0..dim.min(3) {
        // vertex of the margin-shrunk patch maximizing one coordinate
        let mut rows = vec![layout.prices(budget).to_vec()];
        let mut senses = vec![Sense::Eq];
        let mut rhs = vec![1.0];
        for &(class, side) in &patch.signs {
            let q = layout.prices(layout.class_rep(class)).to_vec();
            match side {
                HalfSide::Below => {
                    rows.push(q);
                    senses.push(Sense::Le);
                    rhs.push(1.0 - margin);
                }
                HalfSide::Above => {
                    rows.push(q);
                    senses.push(Sense::Ge);
                    rhs.push(1.0 + margin);
                }
            }
        }
        let mut objective = vec![0.0; dim];
        objective[objective_axis] = 1.0;
        let lp = LinearProgram {
            direction: Direction::Maximize,
            objective,
            rows,
            senses,
            rhs,
            bounds: vec![(0.0, f64::INFINITY); dim],
        };
        let sol = lp_solve(&lp)?;
        if sol.status == LpStatus::Optimal {
            anchors.push(sol.x);
        }
    }
    Ok(anchors)
}

fn strictly_interior(layout: &PatchLayout, budget: usize, patch_index: usize, x: &[f64]) -> bool {
    let patch = &layout.patches(budget)[patch_index];
    for &(class, side) in &patch.signs {
        let v = crate::data::dot(layout.prices(layout.class_rep(class)), x) - 1.0;
        let ok = match side {
            HalfSide::Below => v < -10.0 * BOUNDARY_TOL,
            HalfSide::Above => v > 10.0 * BOUNDARY_TOL,
        };
        if !ok {
            return false;
        }
    }
    x.iter().all(|&v| v >= 0.0)
}

/// Draws a cross-section from a mixture of rational types.
///
/// Each household draws a type from `nu_star`, lands in that type's
/// patch for the period (jittered as a convex combination of the patch
/// witness and a few interior anchor vertices, re-verified strictly
/// interior), and is scaled by a log-normal expenditure so the data
/// exercises the normalization path.
pub fn gen_mixture(spec: &MixtureSpec) -> Result<StochasticDataset> {
    let types = spec.types;
    let layout = spec.layout;
    if types.layout_id() != layout.id() {
        return Err(Error::InvalidConfig(
            "type matrix was built from a different layout".into(),
        ));
    }
    if spec.nu_star.len() != types.h() {
        return Err(Error::InvalidConfig(format!(
            "nu_star has {} entries for {} types",
            spec.nu_star.len(),
            types.h()
        )));
    }
    let total: f64 = spec.nu_star.iter().sum();
    if spec.nu_star.iter().any(|&v| v < 0.0) || (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidConfig(
            "nu_star must be nonnegative and sum to 1".into(),
        ));
    }
    if spec.sample_sizes.len() != layout.budgets() || spec.sample_sizes.iter().any(|&n| n == 0) {
        return Err(Error::InvalidConfig(
            "one positive sample size per period is required".into(),
        ));
    }
    if !(spec.expenditure_log_sd >= 0.0) {
        return Err(Error::InvalidConfig("expenditure sd must be >= 0".into()));
    }

    let mut cumulative = Vec::with_capacity(types.h());
    let mut acc = 0.0;
    for &w in &spec.nu_star {
        acc += w;
        cumulative.push(acc);
    }
    let expenditure = LogNormal::new(spec.expenditure_log_mean, spec.expenditure_log_sd)
        .map_err(|e| Error::InvalidConfig(format!("bad expenditure parameters: {e}")))?;

    // anchors per (budget, patch)
    let mut anchors: Vec<Vec<Vec<Vec<f64>>>> = Vec::with_capacity(layout.budgets());
    for t in 0..layout.budgets() {
        let mut per_patch = Vec::with_capacity(layout.patch_count(t));
        for i in 0..layout.patch_count(t) {
            per_patch.push(patch_anchors(layout, t, i)?);
        }
        anchors.push(per_patch);
    }

    let mut periods = Vec::with_capacity(layout.budgets());
    for t in 0..layout.budgets() {
        let n_t = spec.sample_sizes[t];
        let mut choices = Vec::with_capacity(n_t);
        let mut households = Vec::with_capacity(n_t);
        for n in 0..n_t {
            let mut rng = stream_rng(spec.seed, household_stream(t, n));
            let u: f64 = rng.gen();
            let type_index = cumulative
                .iter()
                .position(|&c| u < c)
                .unwrap_or(types.h() - 1);
            let patch_index = types.assignment(type_index)[t] as usize;
            let patch = &layout.patches(t)[patch_index];
            let candidates = &anchors[t][patch_index];
            // convex combination of witness and up to 3 anchors
            let mut point = vec![0.0; layout.dim()];
            let mut weights = vec![rng.gen_range(0.2..1.0)];
            for _ in candidates {
                weights.push(rng.gen_range(0.0..1.0));
            }
            let total_weight: f64 = weights.iter().sum();
            for (i, v) in point.iter_mut().enumerate() {
                *v = weights[0] / total_weight * patch.witness[i];
                for (a, anchor) in candidates.iter().enumerate() {
                    *v += weights[a + 1] / total_weight * anchor[i];
                }
            }
            let mut attempts = 0;
            while !strictly_interior(layout, t, patch_index, &point) && attempts < 3 {
                // shrink halfway toward the witness
                for (v, w) in point.iter_mut().zip(&patch.witness) {
                    *v = 0.5 * (*v + w);
                }
                attempts += 1;
            }
            if !strictly_interior(layout, t, patch_index, &point) {
                point = patch.witness.clone();
            }
            let scale = expenditure.sample(&mut rng);
            let bundle: Vec<f64> = point.iter().map(|v| v * scale).collect();
            choices.push(bundle);
            households.push((n + 1).to_string());
        }
        periods.push(Period {
            key: (t + 1).to_string(),
            prices: layout.prices(t).to_vec(),
            choices,
            households,
        });
    }
    StochasticDataset::new(periods)
}

/// Simulates quasilinear Cobb–Douglas maximizers.
///
/// Each household draws weights `a ~ Dirichlet(alpha)` once and demands
/// `x_i = a_i / p_i` at every period's prices.
pub fn gen_quasilinear(spec: &QuasilinearSpec) -> Result<QuasilinearSample> {
    if spec.goods < 1 || spec.periods < 1 || spec.households < 1 {
        return Err(Error::InvalidConfig(
            "goods, periods, and households must all be positive".into(),
        ));
    }
    let (lo, hi) = spec.price_range;
    if !(lo > 0.0 && hi >= lo) {
        return Err(Error::InvalidConfig(
            "price range must satisfy 0 < lo <= hi".into(),
        ));
    }
    if !(spec.dirichlet_alpha > 0.0) {
        return Err(Error::InvalidConfig("dirichlet alpha must be positive".into()));
    }

    // period prices from a dedicated stream
    let mut price_rng = stream_rng(spec.seed, u64::MAX);
    let prices: Vec<Vec<f64>> = (0..spec.periods)
        .map(|_| {
            (0..spec.goods)
                .map(|_| {
                    let u: f64 = price_rng.gen();
                    (lo.ln() + u * (hi.ln() - lo.ln())).exp()
                })
                .collect()
        })
        .collect();

    let mut panels = Vec::with_capacity(spec.households);
    let mut per_period: Vec<Vec<Vec<f64>>> = vec![Vec::new(); spec.periods];
    for n in 0..spec.households {
        let mut rng = stream_rng(spec.seed, household_stream(0, n));
        let weights: Vec<f64> = if spec.goods == 1 {
            vec![1.0]
        } else {
            Dirichlet::new_with_size(spec.dirichlet_alpha, spec.goods)
                .map_err(|e| Error::InvalidConfig(format!("bad dirichlet parameters: {e}")))?
                .sample(&mut rng)
        };
        let bundles: Vec<Vec<f64>> = prices
            .iter()
            .map(|p| weights.iter().zip(p).map(|(a, pi)| a / pi).collect())
            .collect();
        for (t, bundle) in bundles.iter().enumerate() {
            per_period[t].push(bundle.clone());
        }
        panels.push(DeterministicDataset::new(prices.clone(), bundles)?);
    }
    let periods: Vec<Period> = (0..spec.periods)
        .map(|t| Period {
            key: (t + 1).to_string(),
            prices: prices[t].clone(),
            choices: per_period[t].clone(),
            households: (1..=spec.households).map(|n| n.to_string()).collect(),
        })
        .collect();
    Ok(QuasilinearSample {
        data: StochasticDataset::new(periods)?,
        panels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patches::enumerate_patches;
    use crate::relations::{check_gapp, check_garp};
    use crate::stochastic::{compute_jn, estimate_pi, BoundaryPolicy, OmegaSpec};
    use crate::types::enumerate_types;

    fn example_3_setup() -> (PatchLayout, TypeMatrix) {
        let layout = enumerate_patches(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let types = enumerate_types(&layout).unwrap();
        (layout, types)
    }

    #[test]
    fn mixture_frequencies_converge_to_a_nu_star() {
        let (layout, types) = example_3_setup();
        let nu_star = vec![0.4, 0.5, 0.1];
        let spec = MixtureSpec {
            types: &types,
            layout: &layout,
            nu_star: nu_star.clone(),
            sample_sizes: vec![100_000, 100_000],
            expenditure_log_mean: 0.0,
            expenditure_log_sd: 0.25,
            seed: 77,
        };
        let data = gen_mixture(&spec).unwrap();
        let pi = estimate_pi(&data, &layout, BoundaryPolicy::Drop).unwrap();
        let expected = types.matvec(&nu_star);
        for (i, (&got, &want)) in pi.stacked.iter().zip(&expected).enumerate() {
            // binomial 3-sigma band at n = 1e5
            let sigma = (want * (1.0 - want) / 1e5).sqrt();
            assert!(
                (got - want).abs() <= 3.0 * sigma + 1e-9,
                "row {i}: {got} vs {want}"
            );
        }
        assert_eq!(pi.dropped_on_boundary, vec![0, 0]);
    }

    #[test]
    fn pure_type_mixture_is_rationalizable() {
        let (layout, types) = example_3_setup();
        let spec = MixtureSpec {
            types: &types,
            layout: &layout,
            nu_star: vec![0.0, 1.0, 0.0],
            sample_sizes: vec![200, 200],
            expenditure_log_mean: 0.5,
            expenditure_log_sd: 0.3,
            seed: 5,
        };
        let data = gen_mixture(&spec).unwrap();
        let pi = estimate_pi(&data, &layout, BoundaryPolicy::Drop).unwrap();
        // every choice lands in the pure type's patches
        assert_eq!(pi.block(0)[1], 1.0);
        assert_eq!(pi.block(1)[0], 1.0);
        let result = compute_jn(&pi, &types, &OmegaSpec::Identity).unwrap();
        assert!(result.rationalizable());
    }

    #[test]
    fn fixed_seed_reproduces_the_dataset() {
        let (layout, types) = example_3_setup();
        let spec = MixtureSpec {
            types: &types,
            layout: &layout,
            nu_star: vec![0.4, 0.5, 0.1],
            sample_sizes: vec![50, 50],
            expenditure_log_mean: 0.0,
            expenditure_log_sd: 0.25,
            seed: 123,
        };
        let a = gen_mixture(&spec).unwrap();
        let b = gen_mixture(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn quasilinear_panels_pass_both_axioms() {
        let spec = QuasilinearSpec {
            goods: 3,
            periods: 4,
            households: 30,
            price_range: (0.5, 2.0),
            dirichlet_alpha: 1.0,
            seed: 9,
        };
        let sample = gen_quasilinear(&spec).unwrap();
        assert_eq!(sample.panels.len(), 30);
        for panel in &sample.panels {
            assert!(check_gapp(panel).passes);
            assert!(check_garp(panel).passes);
        }
    }

    #[test]
    fn quasilinear_pool_is_rationalizable_through_the_full_pipeline() {
        let spec = QuasilinearSpec {
            goods: 2,
            periods: 3,
            households: 50,
            price_range: (0.5, 2.0),
            dirichlet_alpha: 1.0,
            seed: 31,
        };
        let sample = gen_quasilinear(&spec).unwrap();
        let layout = enumerate_patches(&sample.data.price_vectors()).unwrap();
        let types = enumerate_types(&layout).unwrap();
        let pi = estimate_pi(&sample.data, &layout, BoundaryPolicy::Drop).unwrap();
        let result = compute_jn(&pi, &types, &OmegaSpec::Identity).unwrap();
        assert!(
            result.rationalizable(),
            "quasilinear pool not rationalizable: J_N = {}",
            result.j_n
        );
    }

    #[test]
    fn doubling_prices_halves_quasilinear_demand() {
        // same seed draws the same Cobb-Douglas weights, so a degenerate
        // price range at 1 versus 2 isolates the demand homogeneity
        let base = QuasilinearSpec {
            goods: 2,
            periods: 2,
            households: 5,
            price_range: (1.0, 1.0),
            dirichlet_alpha: 2.0,
            seed: 55,
        };
        let doubled = QuasilinearSpec {
            price_range: (2.0, 2.0),
            ..base.clone()
        };
        let a = gen_quasilinear(&base).unwrap();
        let b = gen_quasilinear(&doubled).unwrap();
        for (pa, pb) in a.panels.iter().zip(&b.panels) {
            for t in 0..pa.len() {
                for (xa, xb) in pa.bundle(t).iter().zip(pb.bundle(t)) {
                    assert!((xb - xa / 2.0).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn mixture_validates_nu_star() {
        let (layout, types) = example_3_setup();
        let spec = MixtureSpec {
            types: &types,
            layout: &layout,
            nu_star: vec![0.5, 0.5, 0.5],
            sample_sizes: vec![10, 10],
            expenditure_log_mean: 0.0,
            expenditure_log_sd: 0.25,
            seed: 1,
        };
        assert!(gen_mixture(&spec).is_err());
    }
}
