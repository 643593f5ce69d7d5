//! Rational types: GARP-consistent assignments of one patch per budget.
//!
//! A type is a choice of patch on every budget such that the implied
//! revealed price preference digraph is acyclic. The binary matrix `A`
//! has one row per (budget, patch) pair and one column per type, with a
//! 1 where the type's choice on that budget lands in that patch.
//! Duplicate budgets (identical prices) are forced to share a patch,
//! since a single utility picks the same maximizer on the same budget.

use crate::error::{Error, Result};
use crate::patches::{HalfSide, PatchLayout};
use serde::{Deserialize, Serialize};

/// Default cap on the number of enumerated columns.
pub const DEFAULT_TYPE_CAP: usize = 10_000_000;

/// The binary matrix of rational types over a [`PatchLayout`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeMatrix {
    /// Per column: chosen patch index for each budget.
    assignments: Vec<Vec<u16>>,
    row_offsets: Vec<usize>,
    rows: usize,
    layout_id: String,
}

impl TypeMatrix {
    /// Number of types (columns) `H = |A|`.
    pub fn h(&self) -> usize {
        self.assignments.len()
    }

    /// Number of stacked rows `I`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of budgets T.
    pub fn budgets(&self) -> usize {
        self.row_offsets.len()
    }

    /// Identifier of the generating layout.
    pub fn layout_id(&self) -> &str {
        &self.layout_id
    }

    /// The patch assignment of column `j` (one patch index per budget).
    pub fn assignment(&self, j: usize) -> &[u16] {
        &self.assignments[j]
    }

    /// Stacked row indices where column `j` is 1 (one per budget).
    pub fn column_rows(&self, j: usize) -> Vec<usize> {
        self.assignments[j]
            .iter()
            .enumerate()
            .map(|(t, &i)| self.row_offsets[t] + i as usize)
            .collect()
    }

    /// Materializes `A` as a dense row-major I×H matrix.
    pub fn dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.h()]; self.rows];
        for j in 0..self.h() {
            for r in self.column_rows(j) {
                a[r][j] = 1.0;
            }
        }
        a
    }

    /// `A · nu` without materializing the matrix.
    pub fn matvec(&self, nu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        for (j, &w) in nu.iter().enumerate() {
            if w != 0.0 {
                for r in self.column_rows(j) {
                    out[r] += w;
                }
            }
        }
        out
    }
}

/// Per-type indicator of `p^t` being revealed preferred to `p^{t'}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorVector {
    pub rho: Vec<f64>,
    pub pair: (usize, usize),
}

/// Enumerates all rational types with the default column cap.
pub fn enumerate_types(layout: &PatchLayout) -> Result<TypeMatrix> {
    enumerate_types_with_cap(layout, DEFAULT_TYPE_CAP)
}

/// Enumerates all rational types.
///
/// Depth-first search over per-class patch choices; partial assignments
/// are pruned as soon as the strict price-preference digraph acquires a
/// cycle, so infeasible subtrees are never expanded. Under the layout's
/// genericity every cross-class relation is strict, which reduces GARP
/// to acyclicity. Columns come out in lexicographic assignment order.
pub fn enumerate_types_with_cap(layout: &PatchLayout, cap: usize) -> Result<TypeMatrix> {
    let n_classes = layout.class_count();
    let members = layout.class_members();
    // relations are computed on class representatives
    let reps: Vec<usize> = (0..n_classes).map(|c| layout.class_rep(c)).collect();

    struct Dfs<'a> {
        layout: &'a PatchLayout,
        reps: Vec<usize>,
        members: Vec<Vec<usize>>,
        cap: usize,
        chosen: Vec<u16>,
        adjacency: Vec<Vec<bool>>,
        columns: Vec<Vec<u16>>,
    }

    impl Dfs<'_> {
        /// Would adding `class`'s edges close a cycle through it?
        fn creates_cycle(&self, class: usize) -> bool {
            // depth-first reachability from `class` back to itself
            let n = self.adjacency.len();
            let mut stack: Vec<usize> = (0..n)
                .filter(|&v| self.adjacency[class][v])
                .collect();
            let mut seen = vec![false; n];
            while let Some(u) = stack.pop() {
                if u == class {
                    return true;
                }
                if seen[u] {
                    continue;
                }
                seen[u] = true;
                for v in 0..n {
                    if self.adjacency[u][v] && !seen[v] {
                        stack.push(v);
                    }
                }
            }
            false
        }

        fn descend(&mut self, class: usize) -> Result<()> {
            let n_classes = self.adjacency.len();
            if class == n_classes {
                if self.columns.len() >= self.cap {
                    return Err(Error::TypeBudgetExceeded {
                        cap: self.cap,
                        reached: self.columns.len() + 1,
                    });
                }
                let mut column = vec![0u16; self.layout.budgets()];
                for (c, &patch) in self.chosen.iter().enumerate() {
                    for &t in &self.members[c] {
                        column[t] = patch;
                    }
                }
                self.columns.push(column);
                return Ok(());
            }
            let rep = self.reps[class];
            let patch_count = self.layout.patch_count(rep);
            for patch in 0..patch_count {
                // edges induced by choosing `patch` on `class`:
                //   other -> class  when the patch lies Below `other`
                //   class -> other  when `other`'s chosen patch lies Below `class`
                let mut added: Vec<(usize, usize)> = Vec::new();
                for other in 0..class {
                    if self.layout.side_of_patch(rep, patch, other) == Some(HalfSide::Below) {
                        added.push((other, class));
                    }
                    let other_rep = self.reps[other];
                    let other_patch = self.chosen[other] as usize;
                    if self.layout.side_of_patch(other_rep, other_patch, class)
                        == Some(HalfSide::Below)
                    {
                        added.push((class, other));
                    }
                }
                for &(u, v) in &added {
                    self.adjacency[u][v] = true;
                }
                if !self.creates_cycle(class) {
                    self.chosen.push(patch as u16);
                    self.descend(class + 1)?;
                    self.chosen.pop();
                }
                for &(u, v) in &added {
                    self.adjacency[u][v] = false;
                }
            }
            Ok(())
        }
    }

    let mut dfs = Dfs {
        layout,
        reps,
        members,
        cap,
        chosen: Vec::with_capacity(n_classes),
        adjacency: vec![vec![false; n_classes]; n_classes],
        columns: Vec::new(),
    };
    dfs.descend(0)?;

    let row_offsets: Vec<usize> = (0..layout.budgets()).map(|t| layout.row_offset(t)).collect();
    Ok(TypeMatrix {
        assignments: dfs.columns,
        row_offsets,
        rows: layout.total_rows(),
        layout_id: layout.id(),
    })
}

/// Computes, for each type, whether `p^t` is revealed preferred to
/// `p^{t'}` (the transitive closure of the strict relations implied by
/// the type's patch positions). Budgets in the same duplicate class
/// carry no cross information, so the indicator is identically zero
/// when `t` and `t'` share a class.
pub fn type_indicator(
    types: &TypeMatrix,
    layout: &PatchLayout,
    t: usize,
    t_prime: usize,
) -> Result<IndicatorVector> {
    if t == t_prime || t >= layout.budgets() || t_prime >= layout.budgets() {
        return Err(Error::InvalidConfig(format!(
            "indicator pair ({t}, {t_prime}) must name two distinct budgets"
        )));
    }
    if types.layout_id() != layout.id() {
        return Err(Error::InvalidConfig(
            "type matrix was built from a different layout".into(),
        ));
    }
    let n_classes = layout.class_count();
    let from = layout.class_of(t);
    let to = layout.class_of(t_prime);
    let mut rho = vec![0.0; types.h()];
    if from == to {
        return Ok(IndicatorVector {
            rho,
            pair: (t, t_prime),
        });
    }
    for (j, value) in rho.iter_mut().enumerate() {
        let assignment = types.assignment(j);
        // adjacency over classes implied by this column
        let mut adjacency = vec![vec![false; n_classes]; n_classes];
        for u in 0..n_classes {
            for v in 0..n_classes {
                if u == v {
                    continue;
                }
                let v_rep = layout.class_rep(v);
                let v_patch = assignment[v_rep] as usize;
                if layout.side_of_patch(v_rep, v_patch, u) == Some(HalfSide::Below) {
                    adjacency[u][v] = true;
                }
            }
        }
        // reachability from `from` to `to`
        let mut seen = vec![false; n_classes];
        let mut stack = vec![from];
        seen[from] = true;
        let mut reachable = false;
        while let Some(u) = stack.pop() {
            if u == to {
                reachable = true;
                break;
            }
            for v in 0..n_classes {
                if adjacency[u][v] && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        *value = if reachable && from != to { 1.0 } else { 0.0 };
        // `from == to` handled above; reaching `to` from `from` uses at
        // least one strict edge, so weak and strict coincide here
    }
    Ok(IndicatorVector {
        rho,
        pair: (t, t_prime),
    })
}
