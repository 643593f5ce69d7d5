//! Active-set solver for weighted least squares with lower bounds and
//! linear equality constraints.
//!
//! Solves `min (b - Ax)' diag(w) (b - Ax)` subject to `Cx = d` and
//! `x >= l`. The working set holds the bound constraints currently at
//! equality; each iteration solves the equality-constrained subproblem
//! restricted to the free variables by a nullspace method, then either
//! takes the full step, blocks on the first bound hit, or releases an
//! active bound with a negative multiplier. Entering and blocking
//! choices break ties on the smallest index, which keeps runs
//! deterministic. All dense factorizations are pivoted Householder QR
//! (rank-revealing), implemented here so results are bitwise stable.

use crate::error::{Error, Result};
use crate::solver::{lp_solve, Direction, LinearProgram, LpStatus, Sense};
use nalgebra::{DMatrix, DVector};

const FEAS_TOL: f64 = 1e-10;
const KKT_TOL: f64 = 1e-9;
const RANK_TOL: f64 = 1e-11;

#[derive(Debug, Clone)]
pub struct ConstrainedLeastSquares {
    /// I×H design matrix, row major.
    pub design: Vec<Vec<f64>>,
    /// Length-I target vector.
    pub target: Vec<f64>,
    /// Length-I strictly positive diagonal weights.
    pub weights: Vec<f64>,
    /// Per-variable lower bounds (often all zero).
    pub lower_bounds: Vec<f64>,
    /// Equality constraints `(c, d)` meaning `c·x = d`.
    pub equalities: Vec<(Vec<f64>, f64)>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct KktResiduals {
    /// Largest stationarity violation over free variables.
    pub stationarity: f64,
    /// Largest negative multiplier over active bounds (as a magnitude).
    pub dual_feasibility: f64,
    /// Largest `|(x_j - l_j) * kappa_j|`.
    pub complementarity: f64,
    /// Largest equality-constraint residual.
    pub equality: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.dual_feasibility)
            .max(self.complementarity)
            .max(self.equality)
    }
}

#[derive(Debug, Clone)]
pub struct ClsSolution {
    pub x: Vec<f64>,
    /// The weighted squared residual at `x`.
    pub residual_norm_sq: f64,
    pub kkt: KktResiduals,
    pub iterations: usize,
}

// ---------------------------------------------------------------------------
// Dense pivoted Householder QR
// ---------------------------------------------------------------------------

/// Rank-revealing QR with column pivoting: `A Π = Q R`, reflectors kept
/// explicitly.
struct Qr {
    /// Upper-triangular factor (m×n, entries below the diagonal zeroed).
    r: DMatrix<f64>,
    /// Householder vectors, each of length m.
    reflectors: Vec<DVector<f64>>,
    betas: Vec<f64>,
    perm: Vec<usize>,
    rank: usize,
    rows: usize,
}

fn pivoted_qr(a: &DMatrix<f64>) -> Qr {
    let m = a.nrows();
    let n = a.ncols();
    let mut r = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut reflectors = Vec::new();
    let mut betas = Vec::new();
    let scale = a.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())).max(1.0);
    let tol = RANK_TOL * scale;
    let kmax = m.min(n);
    let mut rank = 0;
    for k in 0..kmax {
        let mut best = k;
        let mut best_norm = 0.0;
        for j in k..n {
            let norm = r.view_range(k..m, j..j + 1).norm();
            if norm > best_norm {
                best_norm = norm;
                best = j;
            }
        }
        if best_norm <= tol {
            break;
        }
        r.swap_columns(k, best);
        perm.swap(k, best);
        let head = r[(k, k)];
        let alpha = if head >= 0.0 { -best_norm } else { best_norm };
        let mut v = DVector::zeros(m);
        for i in k..m {
            v[i] = r[(i, k)];
        }
        v[k] -= alpha;
        let vnorm_sq = v.norm_squared();
        let beta = if vnorm_sq > 0.0 { 2.0 / vnorm_sq } else { 0.0 };
        for j in k..n {
            let mut dot = 0.0;
            for i in k..m {
                dot += v[i] * r[(i, j)];
            }
            let s = beta * dot;
            for i in k..m {
                r[(i, j)] -= s * v[i];
            }
        }
        r[(k, k)] = alpha;
        for i in k + 1..m {
            r[(i, k)] = 0.0;
        }
        reflectors.push(v);
        betas.push(beta);
        rank += 1;
    }
    while rank > 0 && r[(rank - 1, rank - 1)].abs() <= tol {
        rank -= 1;
    }
    Qr {
        r,
        reflectors,
        betas,
        perm,
        rank,
        rows: m,
    }
}

impl Qr {
    fn apply_q_transpose(&self, b: &mut DVector<f64>) {
        for (v, &beta) in self.reflectors.iter().zip(&self.betas) {
            if beta == 0.0 {
                continue;
            }
            let s = beta * v.dot(b);
            b.axpy(-s, v, 1.0);
        }
    }

    fn apply_q(&self, b: &mut DVector<f64>) {
        for (v, &beta) in self.reflectors.iter().zip(&self.betas).rev() {
            if beta == 0.0 {
                continue;
            }
            let s = beta * v.dot(b);
            b.axpy(-s, v, 1.0);
        }
    }

    /// Basic least-squares solution of `min ||A x - b||`: pivots beyond
    /// the numerical rank are fixed at zero.
    fn solve_least_squares(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.r.ncols();
        let mut qtb = b.clone();
        self.apply_q_transpose(&mut qtb);
        let mut y = DVector::zeros(n);
        for i in (0..self.rank).rev() {
            let mut acc = qtb[i];
            for j in i + 1..self.rank {
                acc -= self.r[(i, j)] * y[j];
            }
            y[i] = acc / self.r[(i, i)];
        }
        let mut x = DVector::zeros(n);
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        x
    }

    /// Columns `rank..m` of `Q`: an orthonormal basis of the orthogonal
    /// complement of the column space.
    fn orthogonal_complement(&self) -> DMatrix<f64> {
        let m = self.rows;
        let cols = m - self.rank;
        let mut z = DMatrix::zeros(m, cols);
        for c in 0..cols {
            let mut e = DVector::zeros(m);
            e[self.rank + c] = 1.0;
            self.apply_q(&mut e);
            z.set_column(c, &e);
        }
        z
    }
}

/// Least squares `min ||a x - b||` by pivoted QR (basic solution).
fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if a.ncols() == 0 {
        return DVector::zeros(0);
    }
    if a.nrows() == 0 {
        return DVector::zeros(a.ncols());
    }
    pivoted_qr(a).solve_least_squares(b)
}

// ---------------------------------------------------------------------------
// Active-set iteration
// ---------------------------------------------------------------------------

/// Solves the problem from the default feasible start (the lower bounds
/// themselves, or a phase-1 vertex when equalities are present).
pub fn cls_solve(prob: &ConstrainedLeastSquares) -> Result<ClsSolution> {
    let start = feasible_start(prob)?;
    solve_from_feasible(prob, start)
}

/// Solves the problem from a caller-supplied feasible point.
pub fn cls_solve_from(prob: &ConstrainedLeastSquares, start: &[f64]) -> Result<ClsSolution> {
    let h = prob.lower_bounds.len();
    if start.len() != h {
        return Err(Error::Internal("cls start has wrong dimension".into()));
    }
    for (j, &v) in start.iter().enumerate() {
        if v < prob.lower_bounds[j] - 1e-9 {
            return Err(Error::Infeasible(format!(
                "start violates lower bound on variable {j}"
            )));
        }
    }
    for (c, d) in &prob.equalities {
        let lhs: f64 = c.iter().zip(start).map(|(a, b)| a * b).sum();
        if (lhs - d).abs() > 1e-7 {
            return Err(Error::Infeasible(
                "start violates an equality constraint".into(),
            ));
        }
    }
    let mut start = start.to_vec();
    for (j, v) in start.iter_mut().enumerate() {
        if *v < prob.lower_bounds[j] {
            *v = prob.lower_bounds[j];
        }
    }
    solve_from_feasible(prob, start)
}

fn feasible_start(prob: &ConstrainedLeastSquares) -> Result<Vec<f64>> {
    let h = prob.lower_bounds.len();
    if prob.equalities.is_empty() {
        return Ok(prob
            .lower_bounds
            .iter()
            .map(|&l| if l.is_finite() { l } else { 0.0 })
            .collect());
    }
    let rows: Vec<Vec<f64>> = prob.equalities.iter().map(|(c, _)| c.clone()).collect();
    let rhs: Vec<f64> = prob.equalities.iter().map(|(_, d)| *d).collect();
    let lp = LinearProgram {
        direction: Direction::Minimize,
        objective: vec![0.0; h],
        rows,
        senses: vec![Sense::Eq; prob.equalities.len()],
        rhs,
        bounds: prob
            .lower_bounds
            .iter()
            .map(|&l| (l, f64::INFINITY))
            .collect(),
    };
    let sol = lp_solve(&lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.x),
        LpStatus::Infeasible => Err(Error::Infeasible(
            "no point satisfies the equality constraints and lower bounds".into(),
        )),
        LpStatus::Unbounded => Err(Error::Internal(
            "feasibility phase reported an unbounded problem".into(),
        )),
    }
}

struct Workspace {
    a: DMatrix<f64>,      // I×H
    sqrt_w: DVector<f64>, // I
    b: DVector<f64>,      // I
    c: DMatrix<f64>,      // k×H (possibly 0×H)
    d: DVector<f64>,      // k
}

fn solve_from_feasible(prob: &ConstrainedLeastSquares, mut x: Vec<f64>) -> Result<ClsSolution> {
    let i_rows = prob.target.len();
    let h = prob.lower_bounds.len();
    let k = prob.equalities.len();
    if prob.design.len() != i_rows || prob.weights.len() != i_rows {
        return Err(Error::Internal("cls dimensions inconsistent".into()));
    }
    for row in &prob.design {
        if row.len() != h {
            return Err(Error::Internal("cls design row has wrong length".into()));
        }
    }
    if prob.weights.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::Internal(
            "cls weights must be strictly positive".into(),
        ));
    }

    let ws = Workspace {
        a: DMatrix::from_fn(i_rows, h, |r, c| prob.design[r][c]),
        sqrt_w: DVector::from_iterator(i_rows, prob.weights.iter().map(|w| w.sqrt())),
        b: DVector::from_column_slice(&prob.target),
        c: DMatrix::from_fn(k, h, |r, c| prob.equalities[r].0[c]),
        d: DVector::from_iterator(k, prob.equalities.iter().map(|(_, d)| *d)),
    };
    let lb = &prob.lower_bounds;

    // working set: bound constraints currently held at equality
    let mut active: Vec<bool> = (0..h).map(|j| x[j] - lb[j] <= FEAS_TOL).collect();
    let cap = (100 * i_rows).max(100);
    let mut iterations = 0usize;

    loop {
        if iterations > cap {
            return Err(Error::IterationCap { cap });
        }
        iterations += 1;

        let free: Vec<usize> = (0..h).filter(|&j| !active[j]).collect();
        let candidate = subproblem(&ws, lb, &active, &free)?;

        let feasible_step = free
            .iter()
            .enumerate()
            .all(|(fi, &j)| candidate[fi] >= lb[j] - FEAS_TOL);
        if feasible_step {
            for (fi, &j) in free.iter().enumerate() {
                x[j] = candidate[fi].max(lb[j]);
            }
            let (kappa, stationarity) = multipliers(&ws, &x, &free);
            let mut release: Option<usize> = None;
            for j in 0..h {
                if active[j] && kappa[j] < -KKT_TOL {
                    release = Some(j);
                    break; // smallest index rule
                }
            }
            match release {
                Some(j) => {
                    active[j] = false;
                }
                None => {
                    return Ok(finish(prob, &ws, x, stationarity, &kappa, iterations));
                }
            }
        } else {
            // partial step to the first blocking bound
            let mut alpha = 1.0f64;
            let mut blocker = usize::MAX;
            for (fi, &j) in free.iter().enumerate() {
                let step = candidate[fi] - x[j];
                if step < -FEAS_TOL {
                    let limit = ((lb[j] - x[j]) / step).max(0.0);
                    if limit < alpha - 1e-14 || (limit < alpha + 1e-14 && j < blocker) {
                        alpha = limit;
                        blocker = j;
                    }
                }
            }
            if blocker == usize::MAX {
                return Err(Error::Internal(
                    "active-set step had no blocking bound".into(),
                ));
            }
            for (fi, &j) in free.iter().enumerate() {
                let step = candidate[fi] - x[j];
                x[j] += alpha * step;
                if x[j] < lb[j] {
                    x[j] = lb[j];
                }
            }
            x[blocker] = lb[blocker];
            active[blocker] = true;
        }
    }
}

/// Solves the equality-constrained weighted least squares over the free
/// variables, holding active variables at their bounds: factor the free
/// equality block, parameterize the constraint manifold as `x_p + Z y`
/// with `Z` an orthonormal nullspace basis, and solve the reduced least
/// squares for `y`.
fn subproblem(
    ws: &Workspace,
    lb: &[f64],
    active: &[bool],
    free: &[usize],
) -> Result<DVector<f64>> {
    let i_rows = ws.a.nrows();
    let k = ws.c.nrows();
    let nf = free.len();
    if nf == 0 {
        return Ok(DVector::zeros(0));
    }

    // residual target once active variables are pinned at bounds
    let mut b_eff = ws.b.clone();
    let mut d_eff = ws.d.clone();
    for (j, &is_active) in active.iter().enumerate() {
        if is_active && lb[j] != 0.0 {
            for r in 0..i_rows {
                b_eff[r] -= ws.a[(r, j)] * lb[j];
            }
            for r in 0..k {
                d_eff[r] -= ws.c[(r, j)] * lb[j];
            }
        }
    }

    let a_f = ws.a.select_columns(free.iter());
    let mut wa = a_f.clone();
    for r in 0..i_rows {
        let s = ws.sqrt_w[r];
        for c in 0..nf {
            wa[(r, c)] *= s;
        }
    }
    let mut wb = b_eff.clone();
    for r in 0..i_rows {
        wb[r] *= ws.sqrt_w[r];
    }

    if k == 0 {
        return Ok(lstsq(&wa, &wb));
    }

    // QR of the transposed free equality block: leading Q columns span
    // the row space of C_F, trailing ones its null space
    let c_f = ws.c.select_columns(free.iter());
    let qr = pivoted_qr(&c_f.transpose());
    let rank = qr.rank;
    // particular solution: solve R^T w = (permuted d), x_p = Q[:, ..rank] w
    let mut w = DVector::zeros(rank);
    for i in 0..rank {
        let mut acc = d_eff[qr.perm[i]];
        for j in 0..i {
            acc -= qr.r[(j, i)] * w[j];
        }
        w[i] = acc / qr.r[(i, i)];
    }
    // consistency of dropped (dependent) constraints
    for i in rank..k {
        let mut acc = d_eff[qr.perm[i]];
        for j in 0..rank {
            acc -= qr.r[(j, i)] * w[j];
        }
        if acc.abs() > 1e-7 * (1.0 + d_eff.norm()) {
            return Err(Error::Infeasible(
                "equality constraints inconsistent on the free variables".into(),
            ));
        }
    }
    let mut x_p = DVector::zeros(nf);
    for c in 0..rank {
        let mut e = DVector::zeros(nf);
        e[c] = w[c];
        qr.apply_q(&mut e);
        x_p += e;
    }
    let z = qr.orthogonal_complement(); // nf × (nf - rank)
    if z.ncols() == 0 {
        return Ok(x_p);
    }
    let waz = &wa * &z;
    let reduced_rhs = &wb - &wa * &x_p;
    let y = lstsq(&waz, &reduced_rhs);
    Ok(x_p + z * y)
}

/// Gradient-based multipliers: `kappa = g - C' mu` with `mu` chosen to
/// zero the free components of the Lagrangian gradient.
fn multipliers(ws: &Workspace, x: &[f64], free: &[usize]) -> (Vec<f64>, f64) {
    let h = x.len();
    let k = ws.c.nrows();
    let xv = DVector::from_column_slice(x);
    let residual = &ws.b - &ws.a * &xv;
    let mut weighted = residual;
    for r in 0..ws.a.nrows() {
        weighted[r] *= ws.sqrt_w[r] * ws.sqrt_w[r];
    }
    let gradient = -2.0 * ws.a.tr_mul(&weighted);

    let mut kappa: Vec<f64> = gradient.iter().copied().collect();
    let mut stationarity = 0.0f64;
    if k > 0 && !free.is_empty() {
        let mut g_f = DVector::zeros(free.len());
        for (fi, &j) in free.iter().enumerate() {
            g_f[fi] = gradient[j];
        }
        let c_f_t = ws.c.select_columns(free.iter()).transpose();
        let mu = lstsq(&c_f_t, &g_f);
        let correction = ws.c.tr_mul(&mu);
        for j in 0..h {
            kappa[j] -= correction[j];
        }
    }
    for &j in free {
        stationarity = stationarity.max(kappa[j].abs());
    }
    (kappa, stationarity)
}

fn finish(
    prob: &ConstrainedLeastSquares,
    ws: &Workspace,
    x: Vec<f64>,
    stationarity: f64,
    kappa: &[f64],
    iterations: usize,
) -> ClsSolution {
    let xv = DVector::from_column_slice(&x);
    let residual = &ws.b - &ws.a * &xv;
    let mut obj = 0.0;
    for r in 0..ws.a.nrows() {
        obj += prob.weights[r] * residual[r] * residual[r];
    }
    let mut dual_feasibility = 0.0f64;
    let mut complementarity = 0.0f64;
    for (j, &kap) in kappa.iter().enumerate() {
        let slack = x[j] - prob.lower_bounds[j];
        if slack <= FEAS_TOL {
            dual_feasibility = dual_feasibility.max(-kap);
        }
        complementarity = complementarity.max((slack * kap).abs());
    }
    let mut equality = 0.0f64;
    for (c, d) in &prob.equalities {
        let lhs: f64 = c.iter().zip(&x).map(|(a, b)| a * b).sum();
        equality = equality.max((lhs - d).abs());
    }
    ClsSolution {
        x,
        residual_norm_sq: obj,
        kkt: KktResiduals {
            stationarity,
            dual_feasibility: dual_feasibility.max(0.0),
            complementarity,
            equality,
        },
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn qr_least_squares_matches_normal_equations() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let qr = pivoted_qr(&a);
        assert_eq!(qr.rank, 2);
        let b = DVector::from_column_slice(&[1.0, -1.0, 2.0]);
        let x = qr.solve_least_squares(&b);
        let xne = (a.transpose() * &a)
            .lu()
            .solve(&(a.transpose() * &b))
            .unwrap();
        assert_abs_diff_eq!(x[0], xne[0], epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], xne[1], epsilon = 1e-12);
    }

    #[test]
    fn qr_detects_rank_deficiency_and_still_minimizes() {
        // third column is the sum of the first two
        let a = DMatrix::from_row_slice(
            4,
            3,
            &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 1.0, 3.0],
        );
        let qr = pivoted_qr(&a);
        assert_eq!(qr.rank, 2);
        let b = DVector::from_column_slice(&[1.0, 2.0, 0.0, 1.0]);
        let x = qr.solve_least_squares(&b);
        let normal = a.transpose() * (&a * &x - &b);
        assert!(normal.norm() < 1e-10, "normal residual {normal}");
    }

    #[test]
    fn orthogonal_complement_spans_the_nullspace() {
        let c = DMatrix::from_row_slice(2, 4, &[1.0, 1.0, 1.0, 1.0, 0.2, 0.4, 0.1, 0.9]);
        let qr = pivoted_qr(&c.transpose());
        let z = qr.orthogonal_complement();
        assert_eq!(z.ncols(), 2);
        assert!((c * &z).norm() < 1e-12);
        let gram = z.transpose() * &z;
        assert!((gram - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn matches_normal_equations_when_unconstrained() {
        let prob = ConstrainedLeastSquares {
            design: vec![vec![1.0, 0.5], vec![0.2, 1.0], vec![1.0, 1.0]],
            target: vec![1.0, 2.0, 2.5],
            weights: vec![1.0; 3],
            lower_bounds: vec![-1e6, -1e6],
            equalities: vec![],
        };
        let sol = cls_solve(&prob).unwrap();
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.5, 0.2, 1.0, 1.0, 1.0]);
        let b = DVector::from_column_slice(&[1.0, 2.0, 2.5]);
        let xne = (a.transpose() * &a)
            .lu()
            .solve(&(a.transpose() * b))
            .unwrap();
        assert_abs_diff_eq!(sol.x[0], xne[0], epsilon = 1e-10);
        assert_abs_diff_eq!(sol.x[1], xne[1], epsilon = 1e-10);
    }

    #[test]
    fn projects_example_mixture_exactly() {
        let design = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 1.0],
            vec![0.0, 1.0, 0.0],
            vec![1.0, 0.0, 1.0],
        ];
        let prob = ConstrainedLeastSquares {
            design,
            target: vec![0.4, 0.6, 0.5, 0.5],
            weights: vec![1.0; 4],
            lower_bounds: vec![0.0; 3],
            equalities: vec![],
        };
        let sol = cls_solve(&prob).unwrap();
        assert!(sol.residual_norm_sq < 1e-18);
        assert_abs_diff_eq!(sol.x[0], 0.4, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.x[1], 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.x[2], 0.1, epsilon = 1e-9);
        assert!(sol.kkt.max() < 1e-8);
    }

    /// Projected-gradient oracle for bound-constrained problems; an
    /// independent algorithm used to cross-check objectives.
    fn projected_gradient(prob: &ConstrainedLeastSquares, iters: usize) -> f64 {
        let i = prob.target.len();
        let h = prob.lower_bounds.len();
        let a = DMatrix::from_fn(i, h, |r, c| prob.design[r][c]);
        let b = DVector::from_column_slice(&prob.target);
        let w = DVector::from_column_slice(&prob.weights);
        let mut x = DVector::from_column_slice(&prob.lower_bounds);
        let mut wa = a.clone();
        for r in 0..i {
            for c in 0..h {
                wa[(r, c)] *= w[r].sqrt();
            }
        }
        let lip = 2.0 * (wa.transpose() * &wa).norm() + 1e-12;
        let step = 1.0 / lip;
        for _ in 0..iters {
            let r = &b - &a * &x;
            let mut wr = r;
            for k in 0..i {
                wr[k] *= w[k];
            }
            let g = -2.0 * (a.transpose() * wr);
            x -= step * g;
            for j in 0..h {
                if x[j] < prob.lower_bounds[j] {
                    x[j] = prob.lower_bounds[j];
                }
            }
        }
        let r = &b - &a * &x;
        (0..i).map(|k| w[k] * r[k] * r[k]).sum()
    }

    #[test]
    fn random_nnls_matches_projected_gradient() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5150);
        for case in 0..30 {
            let i = rng.gen_range(3..8);
            let h = rng.gen_range(2..8);
            let prob = ConstrainedLeastSquares {
                design: (0..i)
                    .map(|_| (0..h).map(|_| rng.gen_range(-1.0..2.0)).collect())
                    .collect(),
                target: (0..i).map(|_| rng.gen_range(-1.0..2.0)).collect(),
                weights: (0..i).map(|_| rng.gen_range(0.5..2.0)).collect(),
                lower_bounds: vec![0.0; h],
                equalities: vec![],
            };
            let sol = cls_solve(&prob).unwrap();
            let oracle = projected_gradient(&prob, 200_000);
            assert!(
                sol.residual_norm_sq <= oracle + 1e-6,
                "case {case}: active set {} vs oracle {}",
                sol.residual_norm_sq,
                oracle
            );
            assert!(
                sol.residual_norm_sq >= oracle - 1e-4,
                "case {case}: oracle beat active set: {} vs {}",
                sol.residual_norm_sq,
                oracle
            );
            assert!(sol.kkt.max() < 1e-8, "case {case}: kkt {:?}", sol.kkt);
        }
    }

    /// Exact oracle for small equality-constrained problems: enumerate
    /// every subset of bounds as the active set, solve the resulting
    /// KKT linear system, and keep the best feasible candidate.
    fn equality_oracle(prob: &ConstrainedLeastSquares) -> f64 {
        let i = prob.target.len();
        let h = prob.lower_bounds.len();
        let a = DMatrix::from_fn(i, h, |r, c| prob.design[r][c]);
        let b = DVector::from_column_slice(&prob.target);
        let k = prob.equalities.len();
        let c = DMatrix::from_fn(k, h, |r, j| prob.equalities[r].0[j]);
        let d = DVector::from_iterator(k, prob.equalities.iter().map(|(_, v)| *v));
        let mut best = f64::INFINITY;
        for mask in 0u32..(1 << h) {
            let free: Vec<usize> = (0..h).filter(|j| mask & (1 << j) == 0).collect();
            let nf = free.len();
            // KKT system on the free block: [2A_F'A_F  C_F'; C_F  0]
            let a_f = a.select_columns(free.iter());
            let c_f = c.select_columns(free.iter());
            let mut kkt = DMatrix::zeros(nf + k, nf + k);
            let gram = 2.0 * a_f.transpose() * &a_f;
            kkt.view_range_mut(0..nf, 0..nf).copy_from(&gram);
            kkt.view_range_mut(0..nf, nf..nf + k)
                .copy_from(&c_f.transpose());
            kkt.view_range_mut(nf..nf + k, 0..nf).copy_from(&c_f);
            let mut rhs = DVector::zeros(nf + k);
            let atb = 2.0 * a_f.transpose() * &b;
            for fi in 0..nf {
                rhs[fi] = atb[fi];
            }
            for r in 0..k {
                rhs[nf + r] = d[r];
            }
            let Some(sol) = kkt.clone().lu().solve(&rhs) else {
                continue;
            };
            // reject if the linear solve did not actually satisfy the
            // system (singular KKT) or the point is infeasible
            if (&kkt * &sol - &rhs).norm() > 1e-8 {
                continue;
            }
            if (0..nf).any(|fi| sol[fi] < prob.lower_bounds[free[fi]] - 1e-9) {
                continue;
            }
            let mut x = DVector::zeros(h);
            for (fi, &j) in free.iter().enumerate() {
                x[j] = sol[fi];
            }
            for j in 0..h {
                if mask & (1 << j) != 0 {
                    x[j] = prob.lower_bounds[j];
                }
            }
            if ((&c * &x) - &d).norm() > 1e-8 {
                continue;
            }
            let r = &b - &a * &x;
            best = best.min(r.norm_squared());
        }
        best
    }

    #[test]
    fn equality_constraint_is_honored_exactly() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for case in 0..20 {
            let i = 5;
            let h = 4;
            let rho: Vec<f64> = (0..h).map(|_| rng.gen_range(0.0..1.0)).collect();
            let theta = 0.4;
            let prob = ConstrainedLeastSquares {
                design: (0..i)
                    .map(|_| (0..h).map(|_| rng.gen_range(0.0..1.5)).collect())
                    .collect(),
                target: (0..i).map(|_| rng.gen_range(0.0..1.0)).collect(),
                weights: vec![1.0; i],
                lower_bounds: vec![0.0; h],
                equalities: vec![(vec![1.0; h], 1.0), (rho.clone(), theta)],
            };
            match cls_solve(&prob) {
                Ok(sol) => {
                    let total: f64 = sol.x.iter().sum();
                    let rx: f64 = rho.iter().zip(&sol.x).map(|(a, b)| a * b).sum();
                    assert_abs_diff_eq!(total, 1.0, epsilon = 1e-8);
                    assert_abs_diff_eq!(rx, theta, epsilon = 1e-8);
                    assert!(sol.kkt.max() < 1e-8, "case {case}: kkt {:?}", sol.kkt);
                    let oracle = equality_oracle(&prob);
                    assert!(
                        sol.residual_norm_sq <= oracle + 1e-6,
                        "case {case}: {} vs oracle {}",
                        sol.residual_norm_sq,
                        oracle
                    );
                }
                Err(Error::Infeasible(_)) => {
                    let max_rho = rho.iter().cloned().fold(f64::MIN, f64::max);
                    let min_rho = rho.iter().cloned().fold(f64::MAX, f64::min);
                    assert!(theta > max_rho + 1e-12 || theta < min_rho - 1e-12);
                }
                Err(e) => panic!("unexpected error: {e}"),
            }
        }
    }

    #[test]
    fn simplex_grid_oracle_small_case() {
        // exhaustive 0.001-step grid over the 3-simplex
        let design = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 1.0],
            vec![0.0, 1.0, 0.0],
            vec![1.0, 0.0, 1.0],
        ];
        let target = vec![0.25, 0.75, 0.7, 0.3];
        let prob = ConstrainedLeastSquares {
            design: design.clone(),
            target: target.clone(),
            weights: vec![1.0; 4],
            lower_bounds: vec![0.0; 3],
            equalities: vec![(vec![1.0, 1.0, 1.0], 1.0)],
        };
        let sol = cls_solve(&prob).unwrap();
        let mut best = f64::INFINITY;
        let steps = 1000usize;
        for a in 0..=steps {
            for b in 0..=(steps - a) {
                let c = steps - a - b;
                let nu = [a as f64 / 1000.0, b as f64 / 1000.0, c as f64 / 1000.0];
                let mut obj = 0.0;
                for (row, t) in design.iter().zip(&target) {
                    let fit: f64 = row.iter().zip(&nu).map(|(r, n)| r * n).sum();
                    obj += (t - fit) * (t - fit);
                }
                best = best.min(obj);
            }
        }
        assert!(
            (sol.residual_norm_sq - best).abs() < 1e-5,
            "active set {} vs grid {}",
            sol.residual_norm_sq,
            best
        );
    }

    #[test]
    fn adding_a_constraint_never_improves_the_objective() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31337);
        for _ in 0..20 {
            let i = 6;
            let h = 5;
            let design: Vec<Vec<f64>> = (0..i)
                .map(|_| (0..h).map(|_| rng.gen_range(0.0..1.0)).collect())
                .collect();
            let target: Vec<f64> = (0..i).map(|_| rng.gen_range(0.0..1.0)).collect();
            let base = ConstrainedLeastSquares {
                design: design.clone(),
                target: target.clone(),
                weights: vec![1.0; i],
                lower_bounds: vec![0.0; h],
                equalities: vec![],
            };
            let with_simplex = ConstrainedLeastSquares {
                equalities: vec![(vec![1.0; h], 1.0)],
                ..base.clone()
            };
            let b = cls_solve(&base).unwrap();
            let s = cls_solve(&with_simplex).unwrap();
            assert!(s.residual_norm_sq >= b.residual_norm_sq - 1e-10);
        }
    }

    #[test]
    fn distinct_starts_agree_on_fitted_values() {
        // eta = A·x is unique even when x is not; start the solver at two
        // different feasible points and compare fits.
        let design = vec![
            vec![1.0, 1.0, 0.0, 0.5],
            vec![0.0, 0.0, 1.0, 0.5],
            vec![0.0, 1.0, 0.0, 0.5],
            vec![1.0, 0.0, 1.0, 0.5],
        ];
        let prob = ConstrainedLeastSquares {
            design: design.clone(),
            target: vec![0.55, 0.45, 0.4, 0.6],
            weights: vec![1.0; 4],
            lower_bounds: vec![0.0; 4],
            equalities: vec![],
        };
        let a = cls_solve(&prob).unwrap();
        let b = cls_solve_from(&prob, &[0.2, 0.2, 0.2, 0.2]).unwrap();
        for r in 0..4 {
            let fit_a: f64 = design[r].iter().zip(&a.x).map(|(d, x)| d * x).sum();
            let fit_b: f64 = design[r].iter().zip(&b.x).map(|(d, x)| d * x).sum();
            assert_abs_diff_eq!(fit_a, fit_b, epsilon = 1e-7);
        }
    }

    #[test]
    fn infeasible_floors_are_reported() {
        let prob = ConstrainedLeastSquares {
            design: vec![vec![1.0, 1.0]],
            target: vec![1.0],
            weights: vec![1.0],
            lower_bounds: vec![0.6, 0.6],
            equalities: vec![(vec![1.0, 1.0], 1.0)],
        };
        assert!(matches!(cls_solve(&prob), Err(Error::Infeasible(_))));
    }

    #[test]
    fn solutions_are_bitwise_deterministic() {
        let prob = ConstrainedLeastSquares {
            design: vec![
                vec![1.1, 0.3, 0.7, 0.2],
                vec![0.5, 0.9, 0.1, 0.8],
                vec![0.2, 0.4, 1.3, 0.6],
            ],
            target: vec![0.9, 0.4, 0.7],
            weights: vec![1.0, 2.0, 0.5],
            lower_bounds: vec![0.0; 4],
            equalities: vec![(vec![1.0; 4], 1.0)],
        };
        let a = cls_solve(&prob).unwrap();
        let b = cls_solve(&prob).unwrap();
        for (u, v) in a.x.iter().zip(&b.x) {
            assert_eq!(u.to_bits(), v.to_bits());
        }
        assert_eq!(a.residual_norm_sq.to_bits(), b.residual_norm_sq.to_bits());
    }
}
