//! Dense two-phase simplex with Bland's rule.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

/// A dense linear program over variables with box bounds.
///
/// Rows are `rows[i] · x  (<=|=|>=)  rhs[i]`; variable `j` ranges over
/// `[bounds[j].0, bounds[j].1]` with infinities allowed.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub direction: Direction,
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub senses: Vec<Sense>,
    pub rhs: Vec<f64>,
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    /// Minimization problem with all variables in `[0, +inf)`.
    pub fn minimize(objective: Vec<f64>, rows: Vec<Vec<f64>>, senses: Vec<Sense>, rhs: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram {
            direction: Direction::Minimize,
            objective,
            rows,
            senses,
            rhs,
            bounds: vec![(0.0, f64::INFINITY); n],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal solution in the original variable space (empty unless Optimal).
    pub x: Vec<f64>,
    /// Objective value in the original orientation (0 unless Optimal).
    pub objective: f64,
    /// Row duals for the original constraints, oriented for the
    /// minimization form: `>=` rows carry nonnegative duals, `<=` rows
    /// nonpositive ones (signs flip under maximization).
    pub dual: Vec<f64>,
}

/// How an original variable maps into the standard-form column space.
enum VarMap {
    /// `x = lo + z[k]`
    Shift { k: usize, lo: f64 },
    /// `x = hi - z[k]`
    Mirror { k: usize, hi: f64 },
    /// `x = z[kp] - z[km]`
    Split { kp: usize, km: usize },
}

/// Solves the program with a deterministic two-phase dense simplex.
///
/// Bland's rule resolves pivot ties, so identical inputs take identical
/// pivot sequences on every run.
pub fn lp_solve(prob: &LinearProgram) -> Result<LpSolution> {
    let n = prob.objective.len();
    let m = prob.rows.len();
    for (i, row) in prob.rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Internal(format!(
                "lp row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
    }
    if prob.senses.len() != m || prob.rhs.len() != m || prob.bounds.len() != n {
        return Err(Error::Internal("lp dimensions inconsistent".into()));
    }
    for (j, &(lo, hi)) in prob.bounds.iter().enumerate() {
        if lo > hi {
            return Err(Error::Internal(format!("lp bound {j} has lo > hi")));
        }
    }

    // --- objective orientation ---
    let sign = match prob.direction {
        Direction::Minimize => 1.0,
        Direction::Maximize => -1.0,
    };

    // --- variable transform to z >= 0 ---
    let mut maps = Vec::with_capacity(n);
    let mut n_z = 0usize;
    // extra `z_k <= hi - lo` rows for doubly bounded variables
    let mut extra_rows: Vec<(usize, f64)> = Vec::new();
    for &(lo, hi) in &prob.bounds {
        if lo.is_finite() {
            let k = n_z;
            n_z += 1;
            if hi.is_finite() {
                extra_rows.push((k, hi - lo));
            }
            maps.push(VarMap::Shift { k, lo });
        } else if hi.is_finite() {
            let k = n_z;
            n_z += 1;
            maps.push(VarMap::Mirror { k, hi });
        } else {
            let kp = n_z;
            let km = n_z + 1;
            n_z += 2;
            maps.push(VarMap::Split { kp, km });
        }
    }

    let m_all = m + extra_rows.len();
    // columns: z (n_z) | slacks (one per row) | artificials (assigned later)
    let n_slack = m_all;
    let mut tab: Vec<Vec<f64>> = vec![vec![0.0; n_z + n_slack]; m_all];
    let mut rhs: Vec<f64> = vec![0.0; m_all];
    let mut negated = vec![false; m_all];
    let mut obj: Vec<f64> = vec![0.0; n_z + n_slack];
    let mut obj_const = 0.0;

    for (j, map) in maps.iter().enumerate() {
        let c = sign * prob.objective[j];
        match *map {
            VarMap::Shift { k, lo } => {
                obj[k] += c;
                obj_const += c * lo;
            }
            VarMap::Mirror { k, hi } => {
                obj[k] -= c;
                obj_const += c * hi;
            }
            VarMap::Split { kp, km } => {
                obj[kp] += c;
                obj[km] -= c;
            }
        }
    }

    for i in 0..m {
        let mut b = prob.rhs[i];
        for (j, map) in maps.iter().enumerate() {
            let a = prob.rows[i][j];
            if a == 0.0 {
                continue;
            }
            match *map {
                VarMap::Shift { k, lo } => {
                    tab[i][k] += a;
                    b -= a * lo;
                }
                VarMap::Mirror { k, hi } => {
                    tab[i][k] -= a;
                    b -= a * hi;
                }
                VarMap::Split { kp, km } => {
                    tab[i][kp] += a;
                    tab[i][km] -= a;
                }
            }
        }
        rhs[i] = b;
        // slack column
        match prob.senses[i] {
            Sense::Le => tab[i][n_z + i] = 1.0,
            Sense::Ge => tab[i][n_z + i] = -1.0,
            Sense::Eq => {}
        }
    }
    for (e, &(k, ub)) in extra_rows.iter().enumerate() {
        let i = m + e;
        tab[i][k] = 1.0;
        tab[i][n_z + i] = 1.0;
        rhs[i] = ub;
    }

    // make rhs nonnegative
    for i in 0..m_all {
        if rhs[i] < 0.0 {
            negated[i] = true;
            rhs[i] = -rhs[i];
            for v in tab[i].iter_mut() {
                *v = -*v;
            }
        }
    }

    // initial basis: slack if its coefficient is +1, else artificial
    let mut basis = vec![usize::MAX; m_all];
    let mut artificial_of_row = vec![usize::MAX; m_all];
    let mut n_art = 0usize;
    for i in 0..m_all {
        if tab[i][n_z + i] > 0.5 {
            basis[i] = n_z + i;
        } else {
            artificial_of_row[i] = n_z + n_slack + n_art;
            n_art += 1;
        }
    }
    let n_total = n_z + n_slack + n_art;
    for row in tab.iter_mut() {
        row.resize(n_total, 0.0);
    }
    for i in 0..m_all {
        if artificial_of_row[i] != usize::MAX {
            tab[i][artificial_of_row[i]] = 1.0;
            basis[i] = artificial_of_row[i];
        }
    }
    obj.resize(n_total, 0.0);

    let art_start = n_z + n_slack;
    let max_iter = 50 * (n_total + m_all).max(10);

    // --- phase 1 ---
    if n_art > 0 {
        let mut phase1_obj = vec![0.0; n_total];
        for c in phase1_obj.iter_mut().skip(art_start) {
            *c = 1.0;
        }
        run_simplex(
            &mut tab,
            &mut rhs,
            &mut basis,
            &phase1_obj,
            n_total,
            max_iter,
            "phase 1",
        )?;
        let infeas: f64 = basis
            .iter()
            .zip(rhs.iter())
            .filter(|(b, _)| **b >= art_start)
            .map(|(_, v)| *v)
            .sum();
        if infeas > FEAS_TOL {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: Vec::new(),
                objective: 0.0,
                dual: Vec::new(),
            });
        }
        // drive artificials out of the basis where possible
        for i in 0..m_all {
            if basis[i] >= art_start {
                if let Some(j) = (0..art_start).find(|&j| tab[i][j].abs() > FEAS_TOL) {
                    pivot(&mut tab, &mut rhs, &mut basis, i, j);
                }
            }
        }
    }

    // --- phase 2 (artificial columns banned from entering) ---
    let status = run_simplex(&mut tab, &mut rhs, &mut basis, &obj, art_start, max_iter, "phase 2")?;
    if status == LpStatus::Unbounded {
        return Ok(LpSolution {
            status,
            x: Vec::new(),
            objective: 0.0,
            dual: Vec::new(),
        });
    }

    // --- recover primal ---
    let mut z = vec![0.0; n_total];
    for (i, &b) in basis.iter().enumerate() {
        z[b] = rhs[i];
    }
    let mut x = vec![0.0; n];
    for (j, map) in maps.iter().enumerate() {
        x[j] = match *map {
            VarMap::Shift { k, lo } => lo + z[k],
            VarMap::Mirror { k, hi } => hi - z[k],
            VarMap::Split { kp, km } => z[kp] - z[km],
        };
    }
    let objective: f64 = prob
        .objective
        .iter()
        .zip(&x)
        .map(|(c, v)| c * v)
        .sum();
    debug_assert!({
        let std_obj: f64 = obj.iter().zip(&z).map(|(c, v)| c * v).sum::<f64>() + obj_const;
        (std_obj - sign * objective).abs() <= 1e-6 * (1.0 + objective.abs())
    });

    // --- duals from reduced costs of the per-row unit columns ---
    let reduced = reduced_costs(&tab, &basis, &obj);
    let mut dual = vec![0.0; m];
    for i in 0..m {
        let unit_col = if artificial_of_row[i] != usize::MAX {
            artificial_of_row[i]
        } else {
            n_z + i
        };
        // the unit column has cost 0, so its reduced cost is -y_i in the
        // standardized row orientation
        let y_std = -reduced[unit_col];
        dual[i] = if negated[i] { -y_std } else { y_std } * sign;
    }

    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective,
        dual,
    })
}

fn reduced_costs(tab: &[Vec<f64>], basis: &[usize], obj: &[f64]) -> Vec<f64> {
    let n_total = obj.len();
    let mut reduced = obj.to_vec();
    for (i, &b) in basis.iter().enumerate() {
        let cb = obj[b];
        if cb != 0.0 {
            for j in 0..n_total {
                reduced[j] -= cb * tab[i][j];
            }
        }
    }
    reduced
}

fn pivot(tab: &mut [Vec<f64>], rhs: &mut [f64], basis: &mut [usize], r: usize, c: usize) {
    let piv = tab[r][c];
    let inv = 1.0 / piv;
    for v in tab[r].iter_mut() {
        *v *= inv;
    }
    rhs[r] *= inv;
    tab[r][c] = 1.0; // avoid residual rounding on the pivot itself
    for i in 0..tab.len() {
        if i == r {
            continue;
        }
        let factor = tab[i][c];
        if factor == 0.0 {
            continue;
        }
        let (pivot_row, row) = if i < r {
            let (a, b) = tab.split_at_mut(r);
            (&b[0], &mut a[i])
        } else {
            let (a, b) = tab.split_at_mut(i);
            (&a[r], &mut b[0])
        };
        for (v, p) in row.iter_mut().zip(pivot_row.iter()) {
            *v -= factor * p;
        }
        row[c] = 0.0;
        rhs[i] -= factor * rhs[r];
    }
    basis[r] = c;
}

/// Runs simplex iterations until optimality or unboundedness. Columns at
/// index `enter_limit` and beyond may not enter the basis.
fn run_simplex(
    tab: &mut [Vec<f64>],
    rhs: &mut [f64],
    basis: &mut [usize],
    obj: &[f64],
    enter_limit: usize,
    max_iter: usize,
    phase: &'static str,
) -> Result<LpStatus> {
    for _ in 0..max_iter {
        let reduced = reduced_costs(tab, basis, obj);
        // Bland: smallest-index entering column with negative reduced cost
        let entering = (0..enter_limit).find(|&j| reduced[j] < -COST_TOL);
        let Some(col) = entering else {
            return Ok(LpStatus::Optimal);
        };
        // ratio test; Bland tie-break on the smallest basic variable index
        let mut best: Option<(f64, usize, usize)> = None; // (ratio, basis var, row)
        for i in 0..tab.len() {
            let a = tab[i][col];
            if a > PIVOT_TOL {
                let ratio = rhs[i] / a;
                let candidate = (ratio, basis[i], i);
                best = match best {
                    None => Some(candidate),
                    Some(cur) => {
                        if ratio < cur.0 - PIVOT_TOL
                            || (ratio < cur.0 + PIVOT_TOL && basis[i] < cur.1)
                        {
                            Some(candidate)
                        } else {
                            Some(cur)
                        }
                    }
                };
            }
        }
        let Some((_, _, row)) = best else {
            return Ok(LpStatus::Unbounded);
        };
        pivot(tab, rhs, basis, row, col);
    }
    Err(Error::LpStall {
        iterations: max_iter,
        phase,
        basis: basis.to_vec(),
    })
}
