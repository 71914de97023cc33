//! Dense semidefinite feasibility by a primal log-det barrier.
//!
//! The engine answers one question: does the constraint set
//! { F_k(x) < 0 } admit a strictly feasible point inside the variable box?
//! It minimizes the slack s subject to F_k(x) <= s I by Newton steps on the
//! barrier t s - sum_k logdet(sI - F_k(x)) plus a box barrier, returning as
//! soon as the true margin (re-verified by symmetric eigensolve) clears the
//! feasibility tolerance.

use crate::linalg::{self, cholesky, solve_lower, sym_eig, Matrix};

use super::affine::AffineMat;
use super::LmiError;

pub const FEAS_TOL: f64 = 1e-7;
pub const VAR_BOUND: f64 = 1e6;

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub feas_tol: f64,
    pub var_bound: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// When set, do not stop at the first strictly feasible point; keep
    /// driving the worst margin down and return the best point found. Used
    /// by the alternating designs, which need well-centered certificates.
    pub optimize_margin: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            feas_tol: FEAS_TOL,
            var_bound: VAR_BOUND,
            max_outer: 14,
            max_inner: 60,
            optimize_margin: false,
        }
    }
}

impl SolverOptions {
    pub fn centered() -> Self {
        SolverOptions { optimize_margin: true, ..Default::default() }
    }
}

/// Feasible point plus its independently re-verified margin (most-positive
/// constraint eigenvalue; negative means strictly inside).
#[derive(Debug, Clone)]
pub struct Certificate {
    pub assignment: Vec<f64>,
    pub margin: f64,
    pub per_constraint: Vec<(String, f64)>,
    pub newton_steps: usize,
}

#[derive(Debug, Clone)]
pub enum SolveOutcome {
    Feasible(Certificate),
    /// Best margin achieved; positive or nearly so.
    Infeasible { best_margin: f64 },
    /// The search ran into the variable box; feasibility undecided.
    Inconclusive { best_margin: f64 },
}

impl SolveOutcome {
    pub fn certificate(&self) -> Option<&Certificate> {
        match self {
            SolveOutcome::Feasible(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, SolveOutcome::Feasible(_))
    }

    pub fn best_margin(&self) -> f64 {
        match self {
            SolveOutcome::Feasible(c) => c.margin,
            SolveOutcome::Infeasible { best_margin } | SolveOutcome::Inconclusive { best_margin } => {
                *best_margin
            }
        }
    }
}

pub(super) struct Constraint {
    pub expr: AffineMat,
    pub label: String,
}

/// Margin of one constraint at x: lambda_max(F(x)).
fn constraint_margin(expr: &AffineMat, x: &[f64]) -> f64 {
    let (vals, _) = sym_eig(&expr.eval(x));
    *vals.last().unwrap()
}

pub(super) fn verify_margins(constraints: &[Constraint], x: &[f64]) -> (f64, Vec<(String, f64)>) {
    let mut worst = f64::NEG_INFINITY;
    let mut per = Vec::with_capacity(constraints.len());
    for c in constraints {
        let m = constraint_margin(&c.expr, x);
        worst = worst.max(m);
        per.push((c.label.clone(), m));
    }
    (worst, per)
}

struct BarrierState<'a> {
    constraints: &'a [Constraint],
    nv: usize,
    bound: f64,
}

impl BarrierState<'_> {
    /// Barrier value at (x, s); None when (x, s) is not strictly interior.
    fn value(&self, t: f64, x: &[f64], s: f64) -> Option<f64> {
        let mut f = t * s;
        for c in self.constraints {
            let g = self.slack(c, x, s);
            let l = cholesky(&g)?;
            let mut logdet = 0.0;
            for i in 0..l.rows() {
                logdet += l[(i, i)].ln();
            }
            f -= 2.0 * logdet;
        }
        for &xi in x.iter().take(self.nv) {
            if xi.abs() >= self.bound {
                return None;
            }
            f -= (self.bound - xi).ln() + (self.bound + xi).ln();
        }
        Some(f)
    }

    fn slack(&self, c: &Constraint, x: &[f64], s: f64) -> Matrix {
        let f = c.expr.eval(x);
        let mut g = f.scale(-1.0);
        for i in 0..g.rows() {
            g[(i, i)] += s;
        }
        g
    }
}

#[cfg(test)]
pub(super) fn debug_barrier_value(
    constraints: &[Constraint],
    nv: usize,
    t: f64,
    x: &[f64],
    s: f64,
    bound: f64,
) -> Option<f64> {
    let state = BarrierState { constraints, nv, bound };
    state.value(t, x, s)
}

/// Minimizes s subject to F_k(x) <= s I over the variable box, returning as
/// soon as the verified margin is below -feas_tol.
pub(super) fn solve_barrier(
    constraints: &[Constraint],
    nv: usize,
    warm: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<SolveOutcome, LmiError> {
    for c in constraints {
        if c.expr.rows() != c.expr.cols() {
            return Err(LmiError::BadProblem(format!("constraint {} is not square", c.label)));
        }
    }

    let bound = opts.var_bound;
    let mut x = vec![0.0; nv];
    if let Some(w) = warm {
        for (xi, &wi) in x.iter_mut().zip(w.iter()) {
            *xi = wi.clamp(-0.9 * bound, 0.9 * bound);
        }
    }

    let state = BarrierState { constraints, nv, bound };
    let (mut true_margin, _) = verify_margins(constraints, &x);
    if true_margin < -opts.feas_tol && !opts.optimize_margin {
        let (margin, per) = verify_margins(constraints, &x);
        return Ok(SolveOutcome::Feasible(Certificate {
            assignment: x,
            margin,
            per_constraint: per,
            newton_steps: 0,
        }));
    }
    let mut s = true_margin + 1.0 + 0.1 * true_margin.abs();
    let mut best_margin = true_margin;
    let mut best_x = x.clone();

    // Union of scalar variables actually appearing in constraints; the slack
    // variable s is appended at local index vars.len().
    let mut vars: Vec<usize> = Vec::new();
    for c in constraints {
        for k in c.expr.var_indices() {
            if let Err(pos) = vars.binary_search(&k) {
                vars.insert(pos, k);
            }
        }
    }
    let na = vars.len() + 1; // active variables + s
    let s_local = vars.len();
    let m_total: usize =
        constraints.iter().map(|c| c.expr.rows()).sum::<usize>() + 2 * vars.len();

    let mut t = 1.0;
    let mut newton_steps = 0usize;
    for _outer in 0..opts.max_outer {
        for _inner in 0..opts.max_inner {
            // Assemble gradient and Hessian over active variables.
            let mut grad = vec![0.0; na];
            let mut hess = Matrix::zeros(na, na);
            grad[s_local] += t;

            for c in constraints {
                let g = state.slack(c, &x, s);
                let l = match cholesky(&g) {
                    Some(l) => l,
                    None => {
                        return Err(LmiError::NumericalBreakdown(
                            "barrier iterate left the interior".into(),
                        ))
                    }
                };
                let d = g.rows();
                // W_i = L^-1 dG_i L^-T for dG_i = -coeff_i, and dG_s = I.
                let mut active: Vec<(usize, Matrix)> = Vec::new();
                for (local, &k) in vars.iter().enumerate() {
                    if let Some(coeff) = c.expr.coeff(k) {
                        let w = solve_lower(&l, &solve_lower(&l, &coeff.transpose()).transpose())
                            .scale(-1.0);
                        active.push((local, w));
                    }
                }
                let w_s = {
                    let inv_l = solve_lower(&l, &Matrix::identity(d));
                    &inv_l * &inv_l.transpose()
                };
                active.push((s_local, w_s));

                for (local_i, w_i) in &active {
                    // d/dz_i of -logdet G = -tr(G^-1 dG_i) = -tr(W_i).
                    let mut tr = 0.0;
                    for q in 0..d {
                        tr += w_i[(q, q)];
                    }
                    grad[*local_i] -= tr;
                    for (local_j, w_j) in &active {
                        if local_j < local_i {
                            continue;
                        }
                        let mut dot = 0.0;
                        for q in 0..d * d {
                            dot += w_i.data()[q] * w_j.data()[q];
                        }
                        hess[(*local_i, *local_j)] += dot;
                        if local_i != local_j {
                            hess[(*local_j, *local_i)] += dot;
                        }
                    }
                }
            }
            for (local, &k) in vars.iter().enumerate() {
                let (lo, hi) = (bound + x[k], bound - x[k]);
                grad[local] += 1.0 / hi - 1.0 / lo + x[k] * 1e-12;
                hess[(local, local)] += 1.0 / (lo * lo) + 1.0 / (hi * hi) + 1e-12;
            }
            hess[(s_local, s_local)] += 1e-12;

            // Jacobi equilibration keeps the Newton solve accurate when the
            // barrier curvature spreads over many orders of magnitude.
            let scales: Vec<f64> =
                (0..na).map(|i| 1.0 / hess[(i, i)].abs().max(1e-300).sqrt()).collect();
            let scaled = Matrix::from_fn(na, na, |i, j| hess[(i, j)] * scales[i] * scales[j]);
            let rhs = Matrix::from_fn(na, 1, |i, _| -grad[i] * scales[i]);
            let step_scaled = match cholesky(&scaled) {
                Some(l) => {
                    let y = solve_lower(&l, &rhs);
                    // Back substitution with L^T.
                    let mut w = Matrix::zeros(na, 1);
                    for i in (0..na).rev() {
                        let mut v = y[(i, 0)];
                        for j in (i + 1)..na {
                            v -= l[(j, i)] * w[(j, 0)];
                        }
                        w[(i, 0)] = v / l[(i, i)];
                    }
                    w
                }
                None => {
                    let ridge =
                        &scaled + &Matrix::identity(na).scale(1e-10 * scaled.max_abs().max(1.0));
                    linalg::solve(&ridge, &rhs).map_err(|e| {
                        LmiError::NumericalBreakdown(format!("Newton system unsolvable: {e}"))
                    })?
                }
            };
            let step = Matrix::from_fn(na, 1, |i, _| step_scaled[(i, 0)] * scales[i]);
            newton_steps += 1;

            let decrement: f64 = -(0..na).map(|i| grad[i] * step[(i, 0)]).sum::<f64>();
            if !decrement.is_finite() {
                return Err(LmiError::NumericalBreakdown("non-finite Newton decrement".into()));
            }

            // Backtracking line search keeping strict interiority.
            let f0 = state
                .value(t, &x, s)
                .ok_or_else(|| LmiError::NumericalBreakdown("iterate left the interior".into()))?;
            let mut alpha = 1.0;
            let mut moved = false;
            for _ in 0..50 {
                let mut x_try = x.clone();
                for (local, &k) in vars.iter().enumerate() {
                    x_try[k] += alpha * step[(local, 0)];
                }
                let s_try = s + alpha * step[(s_local, 0)];
                if let Some(f_try) = state.value(t, &x_try, s_try) {
                    if f_try <= f0 - 0.25 * alpha * decrement {
                        x = x_try;
                        s = s_try;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }

            let (margin, per) = verify_margins(constraints, &x);
            true_margin = margin;
            if margin < best_margin {
                best_margin = margin;
                best_x = x.clone();
            }
            if margin < -opts.feas_tol && !opts.optimize_margin {
                return Ok(SolveOutcome::Feasible(Certificate {
                    assignment: x,
                    margin,
                    per_constraint: per,
                    newton_steps,
                }));
            }
            if !moved || decrement.abs() < 1e-11 * (1.0 + m_total as f64) {
                break;
            }
        }
        // Barrier gap: m_total / t bounds s - s*. In margin-optimizing mode
        // a few percent of resolution is enough for centering.
        let gap = (m_total as f64) / t;
        let target = if opts.optimize_margin {
            (0.02 * best_margin.abs()).max(1e-9)
        } else {
            1e-9 * (1.0 + true_margin.abs())
        };
        if gap < target {
            break;
        }
        t *= 20.0;
    }

    if best_margin < -opts.feas_tol {
        let (margin, per) = verify_margins(constraints, &best_x);
        return Ok(SolveOutcome::Feasible(Certificate {
            assignment: best_x,
            margin,
            per_constraint: per,
            newton_steps,
        }));
    }
    let box_hit = best_x.iter().any(|v| v.abs() > 0.99 * bound);
    if box_hit {
        Ok(SolveOutcome::Inconclusive { best_margin })
    } else {
        Ok(SolveOutcome::Infeasible { best_margin })
    }
}
