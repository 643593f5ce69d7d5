//! Revealed-preference relations over bundles and over prices.
//!
//! Direct relations compare expenditures observation by observation:
//! bundle `x^{t'}` is revealed (strictly) preferred to `x^t` when
//! `p^{t'}·x^{t'} >= (>) p^{t'}·x^t`, and price `p^{t'}` is revealed
//! (strictly) preferred to `p^t` when `p^{t'}·x^t <= (<) p^t·x^t`.
//! GARP and GAPP forbid cycles in the respective transitive closures
//! that contain a strict edge.

use crate::data::{dot, CostMatrix, DeterministicDataset};
use crate::error::{Error, Result};
use crate::REL_TOL;
use serde::{Deserialize, Serialize};

/// A weak/strict pair of T×T boolean relation matrices.
///
/// `strict[i][j]` implies `weak[i][j]`. After [`transitive_closure`],
/// `weak` is transitive and `strict[i][j]` holds iff some weak chain
/// from `i` to `j` contains a strict direct edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationPair {
    pub weak: Vec<Vec<bool>>,
    pub strict: Vec<Vec<bool>>,
}

impl RelationPair {
    fn empty(n: usize) -> Self {
        Self {
            weak: vec![vec![false; n]; n],
            strict: vec![vec![false; n]; n],
        }
    }

    pub fn len(&self) -> usize {
        self.weak.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weak.is_empty()
    }
}

/// A concrete cycle demonstrating a GARP or GAPP violation.
///
/// Adjacent entries of `sequence` (cyclically) are weak direct edges;
/// the edge starting at position `strict_edge_at` is strict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleWitness {
    pub sequence: Vec<usize>,
    pub strict_edge_at: usize,
}

impl CycleWitness {
    /// Re-verifies the witness against direct relation matrices.
    pub fn verify(&self, direct: &RelationPair) -> bool {
        let n = self.sequence.len();
        if n < 2 || self.strict_edge_at >= n {
            return false;
        }
        for i in 0..n {
            let from = self.sequence[i];
            let to = self.sequence[(i + 1) % n];
            if !direct.weak[from][to] {
                return false;
            }
            if i == self.strict_edge_at && !direct.strict[from][to] {
                return false;
            }
        }
        true
    }
}

/// Outcome of a GARP or GAPP check.
#[derive(Debug, Clone)]
pub struct AxiomCheck {
    pub passes: bool,
    pub witness: Option<CycleWitness>,
}

/// Direct revealed preference over bundles: `weak[t'][t]` iff
/// `p^{t'}·x^{t'} >= p^{t'}·x^t - tol`.
pub fn direct_bundle_relations(data: &DeterministicDataset) -> RelationPair {
    let n = data.len();
    let mut rel = RelationPair::empty(n);
    for i in 0..n {
        let own = data.expenditure(i);
        for j in 0..n {
            let other = dot(data.prices(i), data.bundle(j));
            rel.weak[i][j] = own >= other - REL_TOL;
            rel.strict[i][j] = own > other + REL_TOL;
        }
        rel.weak[i][i] = true;
        rel.strict[i][i] = false;
    }
    rel
}

/// Direct revealed preference over prices: `weak[t'][t]` iff
/// `p^{t'}·x^t <= p^t·x^t + tol`.
pub fn direct_price_relations(data: &DeterministicDataset) -> RelationPair {
    let n = data.len();
    let mut rel = RelationPair::empty(n);
    for i in 0..n {
        for j in 0..n {
            let at_own = data.expenditure(j);
            let at_other = dot(data.prices(i), data.bundle(j));
            rel.weak[i][j] = at_other <= at_own + REL_TOL;
            rel.strict[i][j] = at_other < at_own - REL_TOL;
        }
        rel.weak[i][i] = true;
        rel.strict[i][i] = false;
    }
    rel
}

/// Direct revealed preference over nonlinear price systems:
/// `weak[t'][t]` iff `costs[t'][t] <= costs[t][t] + tol`.
pub fn direct_cost_relations(costs: &CostMatrix) -> RelationPair {
    let n = costs.len();
    let mut rel = RelationPair::empty(n);
    for i in 0..n {
        for j in 0..n {
            rel.weak[i][j] = costs.cost(i, j) <= costs.cost(j, j) + REL_TOL;
            rel.strict[i][j] = costs.cost(i, j) < costs.cost(j, j) - REL_TOL;
        }
        rel.weak[i][i] = true;
        rel.strict[i][i] = false;
    }
    rel
}

/// Transitive closure with strict-edge propagation (Floyd–Warshall).
pub fn transitive_closure(direct: &RelationPair) -> RelationPair {
    let n = direct.len();
    let mut weak = direct.weak.clone();
    let mut strict = direct.strict.clone();
    for k in 0..n {
        for i in 0..n {
            if !weak[i][k] {
                continue;
            }
            for j in 0..n {
                if weak[k][j] {
                    weak[i][j] = true;
                    if strict[i][k] || strict[k][j] {
                        strict[i][j] = true;
                    }
                }
            }
        }
    }
    // A second sweep settles strict flags along paths discovered late in
    // the first pass.
    for k in 0..n {
        for i in 0..n {
            if !weak[i][k] {
                continue;
            }
            for j in 0..n {
                if weak[k][j] && (strict[i][k] || strict[k][j]) {
                    strict[i][j] = true;
                }
            }
        }
    }
    RelationPair { weak, strict }
}

/// Shortest weak direct path from `from` to `to` (inclusive of both), by
/// breadth-first search on the direct relation. `None` if unreachable.
fn weak_path(direct: &RelationPair, from: usize, to: usize) -> Option<Vec<usize>> {
    let n = direct.len();
    if from == to {
        return Some(vec![from]);
    }
    let mut prev = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(from);
    prev[from] = from;
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            if v != u && direct.weak[u][v] && prev[v] == usize::MAX {
                prev[v] = u;
                if v == to {
                    let mut path = vec![to];
                    let mut cur = to;
                    while cur != from {
                        cur = prev[cur];
                        path.push(cur);
                    }
                    path.reverse();
                    return Some(path);
                }
                queue.push_back(v);
            }
        }
    }
    None
}

/// Extracts a shortest violating cycle, if any: a weak cycle exists
/// containing a strict edge iff some strict direct edge `(u, v)` admits
/// a weak direct return path `v -> u`.
fn extract_witness(direct: &RelationPair) -> Option<CycleWitness> {
    let n = direct.len();
    let mut best: Option<Vec<usize>> = None;
    for u in 0..n {
        for v in 0..n {
            if u == v || !direct.strict[u][v] {
                continue;
            }
            let Some(back) = weak_path(direct, v, u) else {
                continue;
            };
            // cycle u -> v -> ... -> u; drop the final repeat of u
            let mut seq = vec![u];
            seq.extend_from_slice(&back[..back.len() - 1]);
            if best.as_ref().map_or(true, |b| seq.len() < b.len()) {
                best = Some(seq);
            }
        }
    }
    best.map(|sequence| {
        let witness = CycleWitness {
            sequence,
            strict_edge_at: 0,
        };
        debug_assert!(witness.verify(direct));
        witness
    })
}

fn check_axiom(direct: &RelationPair) -> AxiomCheck {
    let witness = extract_witness(direct);
    debug_assert_eq!(witness.is_some(), {
        let closed = transitive_closure(direct);
        let n = direct.len();
        (0..n).any(|a| (0..n).any(|b| a != b && closed.weak[a][b] && closed.strict[b][a]))
    });
    AxiomCheck {
        passes: witness.is_none(),
        witness,
    }
}

/// Generalized Axiom of Revealed Preference: no weak bundle cycle with a
/// strict edge.
pub fn check_garp(data: &DeterministicDataset) -> AxiomCheck {
    check_axiom(&direct_bundle_relations(data))
}

/// Generalized Axiom of Price Preference: no weak price cycle with a
/// strict edge. Characterizes rationalizability by an
/// expenditure-augmented utility function.
pub fn check_gapp(data: &DeterministicDataset) -> AxiomCheck {
    check_axiom(&direct_price_relations(data))
}

/// GAPP over nonlinear price systems given as an observed cost matrix.
/// With linear pricing (`costs[t][s] = p^t·x^s`) this coincides with
/// [`check_gapp`].
pub fn check_gapp_nonlinear(costs: &CostMatrix) -> AxiomCheck {
    check_axiom(&direct_cost_relations(costs))
}

/// Rescales each bundle to unit expenditure: `x̆^t = x^t/(p^t·x^t)`.
///
/// GAPP on the original data is equivalent to GARP on the normalized
/// data, and the closed price relations coincide with the closed bundle
/// relations of the normalized data.
pub fn normalize_expenditure(data: &DeterministicDataset) -> DeterministicDataset {
    let prices: Vec<Vec<f64>> = (0..data.len()).map(|t| data.prices(t).to_vec()).collect();
    let bundles: Vec<Vec<f64>> = (0..data.len())
        .map(|t| {
            let e = data.expenditure(t);
            data.bundle(t).iter().map(|x| x / e).collect()
        })
        .collect();
    let labels = data.labels().map(|l| l.to_vec());
    DeterministicDataset::with_labels(prices, bundles, labels)
        .expect("normalization preserves dataset invariants")
}

/// Local robustness margin of the GAPP test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustnessMargin {
    /// `min_{t≠t'} |p^t·x^t − p^{t'}·x^t|`.
    pub min_gap: f64,
    /// `B = max_t Σ_i |x_i^t|`.
    pub bundle_norm: f64,
}

/// Computes the margin quantities of the local-robustness bound: a GAPP
/// verdict is unchanged by perturbations `(δ, ε)` of wealth and prices
/// whenever `2·max|δ^t| + 2·B·max|ε_i^t| < min_gap`.
///
/// Errors if the data is non-generic, i.e. some cross-expenditure gap is
/// zero within tolerance.
pub fn robustness_margin(data: &DeterministicDataset) -> Result<RobustnessMargin> {
    let n = data.len();
    let mut min_gap = f64::INFINITY;
    for t in 0..n {
        for s in 0..n {
            if t == s {
                continue;
            }
            let gap = (data.expenditure(t) - dot(data.prices(s), data.bundle(t))).abs();
            if gap <= REL_TOL {
                return Err(Error::GenericityFailure { t, t_other: s });
            }
            min_gap = min_gap.min(gap);
        }
    }
    if !min_gap.is_finite() {
        // Single observation: no cross terms to perturb.
        min_gap = f64::INFINITY;
    }
    let bundle_norm = (0..n)
        .map(|t| data.bundle(t).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0_f64, f64::max);
    Ok(RobustnessMargin {
        min_gap,
        bundle_norm,
    })
}
