//! Patches: the cells cut out of each unit-expenditure budget plane by
//! the arrangement of all other budget planes.
//!
//! Budget `t` is the plane `B^t = {x >= 0 : p^t·x = 1}`. Every other
//! budget either coincides with it (duplicate prices), crosses it, or
//! lies entirely on one side of it. A patch of `B^t` is a maximal region
//! on which the Below/Above position relative to every crossing budget
//! is constant; patches are certified nonempty by a max-slack linear
//! program whose maximizer doubles as an interior witness point.

use crate::data::dot;
use crate::error::{Error, Result};
use crate::solver::{lp_solve, Direction, LinearProgram, LpStatus, Sense};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Minimum optimal slack for a sign pattern to count as a patch.
pub const SLACK_THRESHOLD: f64 = 1e-7;
/// Normalized choices within this distance of another budget plane are
/// boundary cases (Assumption-1 violations for that point).
pub const BOUNDARY_TOL: f64 = 1e-9;

/// Position of a region relative to a budget plane: `Below` means
/// `p·x < 1` on the region's interior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HalfSide {
    Below,
    Above,
}

/// Geometric relation between the planes of two distinct budget classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairGeometry {
    /// Same plane (identical price vectors).
    SameClass,
    /// The other plane crosses this one; the side varies by patch.
    Crossing,
    /// The whole plane lies on one side of the other.
    Constant(HalfSide),
}

/// One cell of a budget plane: its sign vector over the crossing budget
/// classes plus a certified interior witness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Patch {
    /// Budget index this patch belongs to.
    pub budget: usize,
    /// `(class id, side)` for every class crossing this budget, in
    /// ascending class order.
    pub signs: Vec<(usize, HalfSide)>,
    /// Interior point satisfying every sign constraint with margin
    /// at least `margin`.
    pub witness: Vec<f64>,
    /// Optimal slack of the certifying program.
    pub margin: f64,
}

/// The full arrangement: per-budget patch lists plus the duplicate
/// structure and cross-class geometry needed to reconstruct revealed
/// price relations from patch positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchLayout {
    prices: Vec<Vec<f64>>,
    /// Budget index -> duplicate class id (classes ordered by first
    /// occurrence).
    classes: Vec<usize>,
    /// Class id -> representative budget index.
    class_reps: Vec<usize>,
    /// `pair_geometry[c][c']`: relation of class c's plane to class c''s.
    pair_geometry: Vec<Vec<PairGeometry>>,
    per_budget: Vec<Vec<Patch>>,
    row_offsets: Vec<usize>,
    total_rows: usize,
}

impl PatchLayout {
    /// Number of budgets T.
    pub fn budgets(&self) -> usize {
        self.prices.len()
    }

    /// Number of goods L.
    pub fn dim(&self) -> usize {
        self.prices[0].len()
    }

    pub fn prices(&self, t: usize) -> &[f64] {
        &self.prices[t]
    }

    pub fn price_vectors(&self) -> &[Vec<f64>] {
        &self.prices
    }

    pub fn class_of(&self, t: usize) -> usize {
        self.classes[t]
    }

    pub fn class_count(&self) -> usize {
        self.class_reps.len()
    }

    /// Representative budget index of a duplicate class.
    pub fn class_rep(&self, c: usize) -> usize {
        self.class_reps[c]
    }

    /// Budgets belonging to each duplicate class.
    pub fn class_members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.class_reps.len()];
        for (t, &c) in self.classes.iter().enumerate() {
            members[c].push(t);
        }
        members
    }

    pub fn pair_geometry(&self, c: usize, c_other: usize) -> PairGeometry {
        self.pair_geometry[c][c_other]
    }

    pub fn patches(&self, t: usize) -> &[Patch] {
        &self.per_budget[t]
    }

    /// Patch count `I_t` of budget `t`.
    pub fn patch_count(&self, t: usize) -> usize {
        self.per_budget[t].len()
    }

    /// First stacked row index of budget `t`'s block.
    pub fn row_offset(&self, t: usize) -> usize {
        self.row_offsets[t]
    }

    /// Total stacked rows `I = sum_t I_t`.
    pub fn total_rows(&self) -> usize {
        self.total_rows
    }

    /// Side of the patch chosen on `budget` relative to `other_class`,
    /// combining patch-level signs with the constant cross-class
    /// geometry. `None` when the classes coincide.
    pub fn side_of_patch(
        &self,
        budget: usize,
        patch: usize,
        other_class: usize,
    ) -> Option<HalfSide> {
        let own = self.classes[budget];
        match self.pair_geometry[own][other_class] {
            PairGeometry::SameClass => None,
            PairGeometry::Constant(side) => Some(side),
            PairGeometry::Crossing => self.per_budget[budget][patch]
                .signs
                .iter()
                .find(|(c, _)| *c == other_class)
                .map(|&(_, side)| side),
        }
    }

    /// Stable identifier binding derived artifacts (type matrices,
    /// probability vectors) to this layout.
    pub fn id(&self) -> String {
        let mut hasher = Sha256::new();
        for p in &self.prices {
            for v in p {
                hasher.update(v.to_bits().to_le_bytes());
            }
            hasher.update([0xff]);
        }
        for patches in &self.per_budget {
            for patch in patches {
                for &(c, side) in &patch.signs {
                    hasher.update((c as u64).to_le_bytes());
                    hasher.update([side as u8]);
                }
                hasher.update([0xfe]);
            }
        }
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn prices_equal(a: &[f64], b: &[f64]) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| (x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1.0))
}

/// Max-slack feasibility program for a sign pattern on the plane of
/// class `rep`: maximize `s` subject to `p·x = 1`, `x >= 0`, and each
/// `(class, side)` constraint held with margin `s`.
fn max_slack(
    prices: &[Vec<f64>],
    rep: usize,
    class_reps: &[usize],
    signs: &[(usize, HalfSide)],
) -> Result<Option<(Vec<f64>, f64)>> {
    let dim = prices[rep].len();
    if signs.is_empty() {
        // the whole plane; use the equal-budget-share point
        let witness: Vec<f64> = prices[rep].iter().map(|p| 1.0 / (dim as f64 * p)).collect();
        return Ok(Some((witness, 1.0)));
    }
    let n = dim + 1; // x then s
    let mut rows = Vec::with_capacity(signs.len() + 1);
    let mut senses = Vec::with_capacity(signs.len() + 1);
    let mut rhs = Vec::with_capacity(signs.len() + 1);
    let mut base = prices[rep].clone();
    base.push(0.0);
    rows.push(base);
    senses.push(Sense::Eq);
    rhs.push(1.0);
    for &(class, side) in signs {
        let q = &prices[class_reps[class]];
        let mut row: Vec<f64> = q.clone();
        match side {
            HalfSide::Below => {
                row.push(1.0);
                senses.push(Sense::Le);
            }
            HalfSide::Above => {
                row.push(-1.0);
                senses.push(Sense::Ge);
            }
        }
        rows.push(row);
        rhs.push(1.0);
    }
    // slack capped at 1 so the program stays bounded even when a sign
    // constraint happens to be slack everywhere on the plane
    let mut bounds = vec![(0.0, f64::INFINITY); dim];
    bounds.push((f64::NEG_INFINITY, 1.0));
    let mut objective = vec![0.0; n];
    objective[dim] = 1.0;
    let lp = LinearProgram {
        direction: Direction::Maximize,
        objective,
        rows,
        senses,
        rhs,
        bounds,
    };
    let sol = lp_solve(&lp)?;
    match sol.status {
        LpStatus::Optimal => {
            let slack = sol.x[dim];
            if slack > SLACK_THRESHOLD {
                Ok(Some((sol.x[..dim].to_vec(), slack)))
            } else {
                Ok(None)
            }
        }
        LpStatus::Infeasible => Ok(None),
        LpStatus::Unbounded => Err(Error::Internal(
            "max-slack program unbounded on a compact budget plane".into(),
        )),
    }
}

/// Enumerates the patches of every budget plane.
///
/// Candidate sign vectors are generated by depth-first splitting over
/// the crossing classes, pruning any prefix whose max-slack program
/// cannot clear [`SLACK_THRESHOLD`]; completions of an infeasible
/// prefix are never visited, which keeps the search polynomial in the
/// arrangement size rather than 2^(T-1). Patches come out in
/// lexicographic sign order (Below < Above).
pub fn enumerate_patches(prices: &[Vec<f64>]) -> Result<PatchLayout> {
    if prices.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let dim = prices[0].len();
    if dim == 0 || prices.iter().any(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch {
            row: 0,
            expected: dim,
            found: prices.iter().map(|p| p.len()).find(|&l| l != dim).unwrap_or(0),
        });
    }
    for (t, p) in prices.iter().enumerate() {
        if p.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::NonpositivePrice {
                row: t + 1,
                component: p.iter().position(|&v| !(v > 0.0)).unwrap_or(0) + 1,
                value: 0.0,
            });
        }
    }

    // duplicate classes by first occurrence
    let t_count = prices.len();
    let mut classes = vec![usize::MAX; t_count];
    let mut class_reps: Vec<usize> = Vec::new();
    for t in 0..t_count {
        let found = class_reps
            .iter()
            .position(|&rep| prices_equal(&prices[rep], &prices[t]));
        classes[t] = match found {
            Some(c) => c,
            None => {
                class_reps.push(t);
                class_reps.len() - 1
            }
        };
    }
    let n_classes = class_reps.len();

    // cross-class geometry
    let mut pair_geometry = vec![vec![PairGeometry::SameClass; n_classes]; n_classes];
    for c in 0..n_classes {
        for other in 0..n_classes {
            if c == other {
                continue;
            }
            let below = max_slack(prices, class_reps[c], &class_reps, &[(other, HalfSide::Below)])?;
            let above = max_slack(prices, class_reps[c], &class_reps, &[(other, HalfSide::Above)])?;
            pair_geometry[c][other] = match (below, above) {
                (Some(_), Some(_)) => PairGeometry::Crossing,
                (Some(_), None) => PairGeometry::Constant(HalfSide::Below),
                (None, Some(_)) => PairGeometry::Constant(HalfSide::Above),
                (None, None) => {
                    // planes within the slack threshold of each other but
                    // not bitwise duplicates; pick the dominant side
                    let on = dot(&prices[class_reps[other]], &prices[class_reps[c]]);
                    let own = dot(&prices[class_reps[c]], &prices[class_reps[c]]);
                    PairGeometry::Constant(if on < own { HalfSide::Below } else { HalfSide::Above })
                }
            };
        }
    }

    // per-class patch enumeration by recursive splitting with pruning
    let mut class_patches: Vec<Vec<Patch>> = Vec::with_capacity(n_classes);
    for c in 0..n_classes {
        let crossing: Vec<usize> = (0..n_classes)
            .filter(|&o| pair_geometry[c][o] == PairGeometry::Crossing)
            .collect();
        let mut found: Vec<Patch> = Vec::new();
        let mut prefix: Vec<(usize, HalfSide)> = Vec::new();
        split(
            prices,
            class_reps[c],
            &class_reps,
            &crossing,
            &mut prefix,
            &mut found,
        )?;
        class_patches.push(found);
    }

    let per_budget: Vec<Vec<Patch>> = (0..t_count)
        .map(|t| {
            class_patches[classes[t]]
                .iter()
                .map(|p| Patch {
                    budget: t,
                    ..p.clone()
                })
                .collect()
        })
        .collect();
    let mut row_offsets = Vec::with_capacity(t_count);
    let mut total = 0usize;
    for patches in &per_budget {
        row_offsets.push(total);
        total += patches.len();
    }
    Ok(PatchLayout {
        prices: prices.to_vec(),
        classes,
        class_reps,
        pair_geometry,
        per_budget,
        row_offsets,
        total_rows: total,
    })
}

fn split(
    prices: &[Vec<f64>],
    rep: usize,
    class_reps: &[usize],
    crossing: &[usize],
    prefix: &mut Vec<(usize, HalfSide)>,
    found: &mut Vec<Patch>,
) -> Result<()> {
    let depth = prefix.len();
    if depth == crossing.len() {
        if let Some((witness, margin)) = max_slack(prices, rep, class_reps, prefix)? {
            found.push(Patch {
                budget: rep,
                signs: prefix.clone(),
                witness,
                margin,
            });
        }
        return Ok(());
    }
    for side in [HalfSide::Below, HalfSide::Above] {
        prefix.push((crossing[depth], side));
        if max_slack(prices, rep, class_reps, prefix)?.is_some() {
            split(prices, rep, class_reps, crossing, prefix, found)?;
        }
        prefix.pop();
    }
    Ok(())
}

/// Maps a choice on budget `t` to its patch index.
///
/// The bundle is normalized onto the plane (`x/(p^t·x)`) and the signs
/// relative to every other budget class determine the patch. A sign
/// within [`BOUNDARY_TOL`] of zero is a boundary case and is reported
/// as an error for the caller's drop-or-abort policy.
pub fn assign_patch(bundle: &[f64], t: usize, layout: &PatchLayout) -> Result<usize> {
    let prices = layout.prices(t);
    if bundle.len() != prices.len() {
        return Err(Error::BundleDimension {
            expected: prices.len(),
            found: bundle.len(),
        });
    }
    let spend = dot(prices, bundle);
    if !(spend > 0.0) {
        return Err(Error::ZeroExpenditure { row: t + 1 });
    }
    let own_class = layout.class_of(t);
    let mut signs: Vec<(usize, HalfSide)> = Vec::new();
    for other in 0..layout.class_count() {
        if other == own_class {
            continue;
        }
        let q = layout.prices(layout.class_reps[other]);
        let value = dot(q, bundle) / spend - 1.0;
        if value.abs() <= BOUNDARY_TOL {
            return Err(Error::OnBoundary { budget: t, other });
        }
        if layout.pair_geometry(own_class, other) == PairGeometry::Crossing {
            signs.push((
                other,
                if value < 0.0 {
                    HalfSide::Below
                } else {
                    HalfSide::Above
                },
            ));
        }
    }
    layout
        .patches(t)
        .iter()
        .position(|p| p.signs == signs)
        .ok_or(Error::NoMatchingPatch { budget: t })
}
