//! Constructive rationalization.
//!
//! For a GARP-consistent data set there are numbers `phi^t` and
//! `lambda^t > 0` solving the inequalities
//!
//! ```text
//! phi^{t'} <= phi^t + lambda^t * p^t·(x^{t'} - x^t)    for all t' != t,
//! ```
//!
//! and the lower envelope `min_t { phi^t + lambda^t p^t·(x - x^t) }`
//! rationalizes the data. For a GAPP-consistent data set the same
//! construction applied to an augmented data set — an extra good priced
//! at 1 whose demand is `M - p^t·x^t` for a constant `M` above every
//! observed expenditure — produces an expenditure-augmented utility
//! `U(x, -e)` that is strictly increasing in `x`, strictly decreasing in
//! `e`, and maximized at every observed bundle without any budget
//! constraint.

use crate::data::{dot, DeterministicDataset};
use crate::error::{Error, Result};
use crate::relations::{check_gapp, check_garp, direct_price_relations, transitive_closure};
use crate::solver::{lp_solve, Direction, LinearProgram, LpStatus, Sense};

/// Tolerance allowed on the Afriat inequalities of a returned solution.
pub const AFRIAT_TOL: f64 = 1e-9;

/// Utility levels and multipliers solving the Afriat inequalities.
#[derive(Debug, Clone, PartialEq)]
pub struct AfriatSolution {
    pub phi: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl AfriatSolution {
    /// Largest violation of the Afriat inequalities on `data`
    /// (nonpositive values mean every inequality holds strictly).
    pub fn max_residual(&self, data: &DeterministicDataset) -> f64 {
        let t_count = data.len();
        let mut worst = f64::NEG_INFINITY;
        for t in 0..t_count {
            for s in 0..t_count {
                if s == t {
                    continue;
                }
                let cross = dot(data.prices(t), data.bundle(s)) - data.expenditure(t);
                let residual = self.phi[s] - self.phi[t] - self.lambda[t] * cross;
                worst = worst.max(residual);
            }
        }
        worst
    }
}

/// Builds the Afriat feasibility program: variables `(phi, lambda)`,
/// one inequality per ordered pair, `lambda >= 1`, objective
/// `min sum(lambda)`. `order` optionally adds `phi[a] >= phi[b] + 1`,
/// used to audit whether a rationalization can rank observation `a`
/// strictly above `b`.
fn afriat_program(data: &DeterministicDataset, order: Option<(usize, usize)>) -> LinearProgram {
    let t_count = data.len();
    let n = 2 * t_count; // phi then lambda
    let mut rows = Vec::new();
    let mut senses = Vec::new();
    let mut rhs = Vec::new();
    for t in 0..t_count {
        for s in 0..t_count {
            if s == t {
                continue;
            }
            // phi_s - phi_t - lambda_t * (p^t·x^s - p^t·x^t) <= 0
            let mut row = vec![0.0; n];
            row[s] += 1.0;
            row[t] -= 1.0;
            row[t_count + t] = -(dot(data.prices(t), data.bundle(s)) - data.expenditure(t));
            rows.push(row);
            senses.push(Sense::Le);
            rhs.push(0.0);
        }
    }
    if let Some((above, below)) = order {
        let mut row = vec![0.0; n];
        row[above] = 1.0;
        row[below] = -1.0;
        rows.push(row);
        senses.push(Sense::Ge);
        rhs.push(1.0);
    }
    let mut bounds = vec![(f64::NEG_INFINITY, f64::INFINITY); t_count];
    bounds.extend(std::iter::repeat((1.0, f64::INFINITY)).take(t_count));
    let mut objective = vec![0.0; n];
    for c in objective.iter_mut().skip(t_count) {
        *c = 1.0;
    }
    LinearProgram {
        direction: Direction::Minimize,
        objective,
        rows,
        senses,
        rhs,
        bounds,
    }
}

/// Solves the Afriat inequalities for a GARP-consistent data set.
///
/// Fails with the violating cycle if GARP does not hold. An infeasible
/// program on a GARP-passing data set indicates a solver defect and is
/// reported as an internal error.
pub fn solve_afriat(data: &DeterministicDataset) -> Result<AfriatSolution> {
    let garp = check_garp(data);
    if !garp.passes {
        return Err(Error::GarpViolation {
            witness: garp.witness.expect("failed GARP check carries a witness"),
        });
    }
    let t_count = data.len();
    if t_count == 1 {
        return Ok(AfriatSolution {
            phi: vec![0.0],
            lambda: vec![1.0],
        });
    }
    let sol = lp_solve(&afriat_program(data, None))?;
    match sol.status {
        LpStatus::Optimal => {
            let phi = sol.x[..t_count].to_vec();
            let lambda = sol.x[t_count..].to_vec();
            let out = AfriatSolution { phi, lambda };
            if out.max_residual(data) > AFRIAT_TOL {
                return Err(Error::Internal(
                    "Afriat solution violates its own inequalities".into(),
                ));
            }
            Ok(out)
        }
        _ => Err(Error::Internal(
            "Afriat program infeasible on a GARP-consistent data set".into(),
        )),
    }
}

/// Audit helper: is there a solution of the Afriat inequalities with
/// `phi[above]` strictly greater than `phi[below]`?
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn afriat_order_feasible(
    data: &DeterministicDataset,
    above: usize,
    below: usize,
) -> Result<bool> {
    let sol = lp_solve(&afriat_program(data, Some((above, below))))?;
    Ok(sol.status == LpStatus::Optimal)
}

/// Lower-envelope utility `min_t { phi^t + lambda^t p^t·(x - x^t) }`.
///
/// Defined on all of R^L; the minimum of strictly increasing affine
/// pieces, hence strictly increasing, continuous, and concave.
pub fn evaluate_utility(
    sol: &AfriatSolution,
    data: &DeterministicDataset,
    x: &[f64],
) -> Result<f64> {
    if x.len() != data.dim() {
        return Err(Error::BundleDimension {
            expected: data.dim(),
            found: x.len(),
        });
    }
    let mut value = f64::INFINITY;
    for t in 0..data.len() {
        let gap: f64 = data
            .prices(t)
            .iter()
            .zip(x.iter().zip(data.bundle(t)))
            .map(|(p, (xi, oi))| p * (xi - oi))
            .sum();
        value = value.min(sol.phi[t] + sol.lambda[t] * gap);
    }
    Ok(value)
}

/// An expenditure-augmented utility rationalizing a GAPP-consistent
/// data set, built from the Afriat envelope of the augmented data.
#[derive(Debug, Clone)]
pub struct AugmentedUtility {
    base: AfriatSolution,
    augmented: DeterministicDataset,
    budget_constant: f64,
    penalty_exponent: f64,
}

impl AugmentedUtility {
    /// The constant `M`, strictly above every observed expenditure.
    pub fn budget_constant(&self) -> f64 {
        self.budget_constant
    }

    /// The Afriat numbers of the augmented data set.
    pub fn base(&self) -> &AfriatSolution {
        &self.base
    }

    /// The augmented (L+1)-good data set used for the construction.
    pub fn augmented_data(&self) -> &DeterministicDataset {
        &self.augmented
    }

    /// Evaluates `U(x, -e)`: the augmented envelope at `(x, M - e)`
    /// minus the expenditure penalty `max(0, e - M)^3`.
    pub fn evaluate(&self, x: &[f64], expenditure: f64) -> Result<f64> {
        let dim = self.augmented.dim() - 1;
        if x.len() != dim {
            return Err(Error::BundleDimension {
                expected: dim,
                found: x.len(),
            });
        }
        let mut point = x.to_vec();
        point.push(self.budget_constant - expenditure);
        let envelope = evaluate_utility(&self.base, &self.augmented, &point)?;
        let overshoot = (expenditure - self.budget_constant).max(0.0);
        Ok(envelope - overshoot.powf(self.penalty_exponent))
    }

    /// Evaluates `U(x, -p·x)` at the given prices.
    pub fn evaluate_at_prices(&self, x: &[f64], prices: &[f64]) -> Result<f64> {
        self.evaluate(x, dot(prices, x))
    }
}

/// Builds a rationalizing augmented utility for a GAPP-consistent data
/// set.
///
/// Internally: pick `M = 2·max_t p^t·x^t`, form the augmented data set
/// `{((p^t, 1), (x^t, M - p^t·x^t))}`, confirm it satisfies GARP (it
/// must, as the augmented bundle relations mirror the price relations),
/// and solve the Afriat inequalities on it.
pub fn build_augmented_utility(data: &DeterministicDataset) -> Result<AugmentedUtility> {
    let gapp = check_gapp(data);
    if !gapp.passes {
        return Err(Error::GappViolation {
            witness: gapp.witness.expect("failed GAPP check carries a witness"),
        });
    }
    let max_spend = (0..data.len())
        .map(|t| data.expenditure(t))
        .fold(0.0_f64, f64::max);
    let budget_constant = 2.0 * max_spend;
    let prices: Vec<Vec<f64>> = (0..data.len())
        .map(|t| {
            let mut p = data.prices(t).to_vec();
            p.push(1.0);
            p
        })
        .collect();
    let bundles: Vec<Vec<f64>> = (0..data.len())
        .map(|t| {
            let mut x = data.bundle(t).to_vec();
            x.push(budget_constant - data.expenditure(t));
            x
        })
        .collect();
    let augmented = DeterministicDataset::new(prices, bundles)?;
    if !check_garp(&augmented).passes {
        return Err(Error::Internal(
            "augmented data set fails GARP although the original passes GAPP".into(),
        ));
    }
    let base = solve_afriat(&augmented)?;
    Ok(AugmentedUtility {
        base,
        augmented,
        budget_constant,
        penalty_exponent: 3.0,
    })
}

/// Result of auditing a constructed utility against its data.
#[derive(Debug, Clone)]
pub struct RationalizationAudit {
    /// Every observed bundle beats every other observed bundle at its
    /// own prices.
    pub at_observed_bundles: bool,
    /// No sampled lattice point beats an observed bundle at its prices.
    pub on_grid: bool,
    /// A falsifying `(observation, bundle)` pair, if any was found.
    pub counterexample: Option<(usize, Vec<f64>)>,
}

/// Checks that `u` actually rationalizes `data`: first the finite
/// necessary condition over observed bundles, then a lattice of
/// `grid_points^L` bundles in `[0, grid_radius]^L` as a sampled
/// sufficiency audit.
pub fn verify_rationalization(
    u: &AugmentedUtility,
    data: &DeterministicDataset,
    grid_radius: f64,
    grid_points: usize,
) -> Result<RationalizationAudit> {
    let tol = 1e-8;
    let t_count = data.len();
    let dim = data.dim();
    let mut audit = RationalizationAudit {
        at_observed_bundles: true,
        on_grid: true,
        counterexample: None,
    };
    let own: Vec<f64> = (0..t_count)
        .map(|t| u.evaluate(data.bundle(t), data.expenditure(t)))
        .collect::<Result<_>>()?;
    'observed: for t in 0..t_count {
        for s in 0..t_count {
            let challenger = u.evaluate_at_prices(data.bundle(s), data.prices(t))?;
            if challenger > own[t] + tol * (1.0 + own[t].abs()) {
                audit.at_observed_bundles = false;
                audit.counterexample = Some((t, data.bundle(s).to_vec()));
                break 'observed;
            }
        }
    }

    if grid_points == 0 {
        audit.on_grid = true;
        return Ok(audit);
    }
    let mut point = vec![0.0; dim];
    let mut index = vec![0usize; dim];
    'grid: loop {
        for (i, &k) in index.iter().enumerate() {
            point[i] = if grid_points == 1 {
                0.0
            } else {
                grid_radius * k as f64 / (grid_points - 1) as f64
            };
        }
        for t in 0..t_count {
            let challenger = u.evaluate_at_prices(&point, data.prices(t))?;
            if challenger > own[t] + tol * (1.0 + own[t].abs()) {
                audit.on_grid = false;
                if audit.counterexample.is_none() {
                    audit.counterexample = Some((t, point.clone()));
                }
                break 'grid;
            }
        }
        // advance the lattice counter
        let mut d = 0;
        loop {
            if d == dim {
                break 'grid;
            }
            index[d] += 1;
            if index[d] < grid_points {
                break;
            }
            index[d] = 0;
            d += 1;
        }
    }
    Ok(audit)
}

/// How a rationalizable data set ranks two observed price situations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceQuery {
    StrictlyPreferred,
    WeaklyPreferred,
    Unranked,
}

/// Ranks `p^t` against `p^{t'}` by the closed revealed price relation.
///
/// For a GAPP-consistent data set these are exactly the rankings shared
/// by every rationalizing indirect utility: strict revealed preference
/// means every rationalization strictly prefers `p^t`, while an
/// unranked pair admits rationalizations ordering the two prices either
/// way.
pub fn price_preference_query(
    data: &DeterministicDataset,
    t: usize,
    t_prime: usize,
) -> Result<PriceQuery> {
    let gapp = check_gapp(data);
    if !gapp.passes {
        return Err(Error::GappViolation {
            witness: gapp.witness.expect("failed GAPP check carries a witness"),
        });
    }
    let closed = transitive_closure(&direct_price_relations(data));
    Ok(if closed.strict[t][t_prime] {
        PriceQuery::StrictlyPreferred
    } else if closed.weak[t][t_prime] {
        PriceQuery::WeaklyPreferred
    } else {
        PriceQuery::Unranked
    })
}
