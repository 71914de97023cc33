//! Small dense semidefinite feasibility engine plus the synthesis problems
//! and certificate checks built on top of it.
//!
//! Every design operation re-verifies its output through the analysis
//! module (eigenvalue region placement plus a Hamiltonian-bisection norm)
//! before reporting numbers; the feasibility engine itself re-verifies
//! certificates with an independent symmetric eigensolve.

mod affine;
mod design;
mod solver;

pub use affine::{he, AffineMat, MatVar, VarRegistry, VarShape};
pub use design::{
    design_common_p, design_dilated, design_dilated_with_grid, design_fixed_graph,
    design_separated, local_gain_certificate,
    local_gain_lmi, minimize_edges, sweep_agent_count, AgentCountSweep, AlternationOptions,
    CommonPDesign, DilatedDesign, EdgeMinimization, FixedGraphDesign, GraphVerdict, HinfObjective,
    LocalGainCertificate, SeparatedDesign,
};
pub use solver::{Certificate, SolveOutcome, SolverOptions, FEAS_TOL, VAR_BOUND};

/// Smallest gamma certified by the bounded-real inequality, found by
/// bisection over feasibility solves (the analysis leg of the designs).
pub fn brl_gamma(t: &TransferRealization, rel_tol: f64) -> Result<f64, LmiError> {
    let mut hi = 1.0;
    let mut grew = 0;
    while !brl_check(t, hi)?.is_feasible() {
        hi *= 4.0;
        grew += 1;
        if grew > 12 {
            return Err(LmiError::Infeasible("no bounded-real certificate found".into()));
        }
    }
    let mut lo = 0.0;
    while hi - lo > rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if brl_check(t, mid)?.is_feasible() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

use thiserror::Error;

use crate::analysis::{AnalysisError, TransferRealization};
use crate::linalg::Matrix;

#[derive(Debug, Error)]
pub enum LmiError {
    #[error("ill-formed problem: {0}")]
    BadProblem(String),
    #[error("numerical breakdown in the feasibility engine: {0}")]
    NumericalBreakdown(String),
    #[error("synthesis infeasible: {0}")]
    Infeasible(String),
    #[error("no digraph meets the target: {summary}")]
    EdgeSearchExhausted { summary: String, verdicts: Vec<design::GraphVerdict> },
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Linalg(#[from] crate::linalg::LinalgError),
    #[error(transparent)]
    System(#[from] crate::system::SystemError),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
}

/// A feasibility problem: affine symmetric matrix expressions required
/// negative definite over box-bounded variables.
pub struct LmiProblem {
    registry: VarRegistry,
    constraints: Vec<solver::Constraint>,
}

impl Default for LmiProblem {
    fn default() -> Self {
        Self::new()
    }
}

impl LmiProblem {
    pub fn new() -> Self {
        LmiProblem { registry: VarRegistry::new(), constraints: Vec::new() }
    }

    pub fn registry(&self) -> &VarRegistry {
        &self.registry
    }

    pub fn sym_var(&mut self, name: &str, d: usize) -> MatVar {
        self.registry.sym(name, d)
    }

    pub fn rect_var(&mut self, name: &str, rows: usize, cols: usize) -> MatVar {
        self.registry.rect(name, rows, cols)
    }

    pub fn scalar_var(&mut self, name: &str) -> MatVar {
        self.registry.scalar(name)
    }

    pub fn expr(&self, var: MatVar) -> AffineMat {
        AffineMat::var(&self.registry, var)
    }

    /// Requires `expr < 0`; the expression must be symmetric in structure.
    pub fn require_neg_def(&mut self, expr: AffineMat, label: &str) -> Result<(), LmiError> {
        if expr.rows() != expr.cols() {
            return Err(LmiError::BadProblem(format!("constraint {label} is not square")));
        }
        // Symmetry is structural: check the constant and every coefficient.
        let sym_tol = 1e-9;
        let check = |m: &Matrix| -> bool { m.is_symmetric(sym_tol * m.max_abs().max(1.0)) };
        if !check(&expr.eval(&vec![0.0; self.registry.scalar_count()])) {
            return Err(LmiError::BadProblem(format!("constraint {label} has asymmetric constant")));
        }
        for k in expr.var_indices().collect::<Vec<_>>() {
            if let Some(c) = expr.coeff(k) {
                if !check(c) {
                    return Err(LmiError::BadProblem(format!(
                        "constraint {label} has an asymmetric coefficient"
                    )));
                }
            }
        }
        self.constraints.push(solver::Constraint { expr, label: label.to_string() });
        Ok(())
    }

    /// Requires `expr > 0`.
    pub fn require_pos_def(&mut self, expr: AffineMat, label: &str) -> Result<(), LmiError> {
        self.require_neg_def(expr.scale(-1.0), label)
    }

    pub fn solve(&self) -> Result<SolveOutcome, LmiError> {
        self.solve_with(None, &SolverOptions::default())
    }

    pub fn solve_with(
        &self,
        warm: Option<&[f64]>,
        opts: &SolverOptions,
    ) -> Result<SolveOutcome, LmiError> {
        solver::solve_barrier(&self.constraints, self.registry.scalar_count(), warm, opts)
    }

    /// Evaluates a variable from a certificate assignment.
    pub fn value(&self, cert: &Certificate, var: MatVar) -> Matrix {
        self.registry.value(var, &cert.assignment)
    }

    /// Re-verifies an externally supplied assignment; returns the worst
    /// margin (negative = strictly feasible) and per-constraint margins.
    pub fn check_assignment(&self, x: &[f64]) -> (f64, Vec<(String, f64)>) {
        solver::verify_margins(&self.constraints, x)
    }
}

/// Bounded-real check: feasible iff ||T||_inf < gamma, certified by the
/// Lyapunov matrix of the standard block inequality.
pub fn brl_check(t: &TransferRealization, gamma: f64) -> Result<SolveOutcome, LmiError> {
    let n = t.a.rows();
    let m_in = t.b.cols();
    let q_out = t.c.rows();
    let d = t.d.clone().unwrap_or_else(|| Matrix::zeros(q_out, m_in));

    let mut prob = LmiProblem::new();
    let p_h = prob.sym_var("P_H", n);
    let p_expr = prob.expr(p_h);

    let block = AffineMat::block(&[
        vec![
            he(&t.a, &p_expr),
            p_expr.rmul(&t.b),
            AffineMat::constant(t.c.transpose()),
        ],
        vec![
            p_expr.rmul(&t.b).transpose(),
            AffineMat::constant(Matrix::identity(m_in).scale(-gamma)),
            AffineMat::constant(d.transpose()),
        ],
        vec![
            AffineMat::constant(t.c.clone()),
            AffineMat::constant(d.clone()),
            AffineMat::constant(Matrix::identity(q_out).scale(-gamma)),
        ],
    ]);
    prob.require_neg_def(block, "bounded-real")?;
    prob.require_pos_def(prob.expr(p_h), "P_H > 0")?;
    prob.solve()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::hinf_norm;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lyapunov_feasibility_trivial_cases() {
        // A = -I: P = I certifies A^T P + P A < 0.
        let mut prob = LmiProblem::new();
        let p = prob.sym_var("P", 2);
        let a = Matrix::identity(2).scale(-1.0);
        prob.require_neg_def(he(&a, &prob.expr(p)), "lyap").unwrap();
        prob.require_pos_def(prob.expr(p), "P > 0").unwrap();
        let out = prob.solve().unwrap();
        let cert = out.certificate().expect("feasible");
        assert!(cert.margin < -1e-7);

        // A = +I: infeasible.
        let mut prob = LmiProblem::new();
        let p = prob.sym_var("P", 2);
        let a = Matrix::identity(2);
        prob.require_neg_def(he(&a, &prob.expr(p)), "lyap").unwrap();
        prob.require_pos_def(prob.expr(p), "P > 0").unwrap();
        assert!(!prob.solve().unwrap().is_feasible());
    }

    #[test]
    fn certificate_margin_reverifies() {
        let mut prob = LmiProblem::new();
        let p = prob.sym_var("P", 3);
        let a = Matrix::from_rows(&[
            vec![-1.0, 0.5, 0.0],
            vec![0.0, -2.0, 1.0],
            vec![0.2, 0.0, -3.0],
        ])
        .unwrap();
        prob.require_neg_def(he(&a, &prob.expr(p)), "lyap").unwrap();
        prob.require_pos_def(prob.expr(p), "P > 0").unwrap();
        let out = prob.solve().unwrap();
        let cert = out.certificate().unwrap();
        let (margin, per) = prob.check_assignment(&cert.assignment);
        assert!((margin - cert.margin).abs() < 1e-12);
        assert_eq!(per.len(), 2);
        assert!(per.iter().all(|(_, m)| *m < 0.0));
    }

    #[test]
    fn brl_scalar_luenberger_thresholds() {
        let t = TransferRealization::new(
            Matrix::scalar(-2.5),
            Matrix::scalar(2.0),
            Matrix::scalar(1.0),
            None,
        )
        .unwrap();
        assert!(brl_check(&t, 0.81).unwrap().is_feasible());
        assert!(!brl_check(&t, 0.79).unwrap().is_feasible());
        // Large gamma is always feasible for a stable system.
        assert!(brl_check(&t, 1e6).unwrap().is_feasible());
    }

    #[test]
    fn brl_flip_point_matches_hinf_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for case in 0..8 {
            let n = 2 + case % 3;
            let raw = Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let shift = crate::linalg::spectral_abscissa(&raw).unwrap() + rng.gen_range(0.4..1.2);
            let a = &raw - &Matrix::identity(n).scale(shift);
            let b = Matrix::from_fn(n, 1, |_, _| rng.gen_range(-1.0..1.0));
            let c = Matrix::from_fn(1, n, |_, _| rng.gen_range(-1.0..1.0));
            let t = TransferRealization::new(a, b, c, None).unwrap();
            let gamma = hinf_norm(&t, 1e-9).unwrap();
            if gamma < 1e-6 {
                continue;
            }
            // Bisect the BRL feasibility flip point.
            let (mut lo, mut hi) = (gamma * 0.5, gamma * 2.0);
            assert!(brl_check(&t, hi).unwrap().is_feasible());
            assert!(!brl_check(&t, lo).unwrap().is_feasible());
            for _ in 0..24 {
                let mid = 0.5 * (lo + hi);
                if brl_check(&t, mid).unwrap().is_feasible() {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let flip = 0.5 * (lo + hi);
            assert!(
                (flip - gamma).abs() / gamma < 1e-4,
                "flip {flip} vs hinf {gamma}"
            );
        }
    }
}


#[cfg(test)]
mod fd_check_hess {
    use super::affine::AffineMat;
    use super::*;
    use crate::linalg::{cholesky, solve_lower, Matrix};

    fn barrier_grad(
        constraints: &[solver::Constraint],
        nv: usize,
        t: f64,
        x: &[f64],
        s: f64,
        bound: f64,
    ) -> Vec<f64> {
        let mut grad = vec![0.0; nv + 1];
        grad[nv] += t;
        for cst in constraints {
            let fx = cst.expr.eval(x);
            let mut g = fx.scale(-1.0);
            for i in 0..g.rows() {
                g[(i, i)] += s;
            }
            let l = cholesky(&g).unwrap();
            for k in 0..nv {
                if let Some(coeff) = cst.expr.coeff(k) {
                    let w = solve_lower(&l, &solve_lower(&l, &coeff.transpose()).transpose())
                        .scale(-1.0);
                    let tr: f64 = (0..w.rows()).map(|q| w[(q, q)]).sum();
                    grad[k] -= tr;
                }
            }
            let inv_l = solve_lower(&l, &Matrix::identity(g.rows()));
            let w_s = &inv_l * &inv_l.transpose();
            let tr: f64 = (0..w_s.rows()).map(|q| w_s[(q, q)]).sum();
            grad[nv] -= tr;
        }
        for (k, &xi) in x.iter().enumerate() {
            grad[k] += 1.0 / (bound - xi) - 1.0 / (bound + xi);
        }
        grad
    }

    #[test]
    fn barrier_hessian_matches_finite_differences() {
        let a = Matrix::from_rows(&[vec![-1.0, 0.8], vec![-0.3, -2.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![1.0], vec![0.5]]).unwrap();
        let c = Matrix::from_rows(&[vec![0.7, -0.2]]).unwrap();
        let gamma = 2.0;
        let mut prob = LmiProblem::new();
        let p = prob.sym_var("P", 2);
        let p_expr = prob.expr(p);
        let block = AffineMat::block(&[
            vec![he(&a, &p_expr), p_expr.rmul(&b), AffineMat::constant(c.transpose())],
            vec![
                p_expr.rmul(&b).transpose(),
                AffineMat::constant(Matrix::identity(1).scale(-gamma)),
                AffineMat::zero(1, 1),
            ],
            vec![
                AffineMat::constant(c.clone()),
                AffineMat::zero(1, 1),
                AffineMat::constant(Matrix::identity(1).scale(-gamma)),
            ],
        ]);
        prob.require_neg_def(block, "brl").unwrap();
        prob.require_pos_def(prob.expr(p), "P>0").unwrap();

        let nv = prob.registry.scalar_count();
        let x = vec![0.3, -0.1, 0.5];
        let s = 5.0;
        let t = 7.0;
        let bound = 1e6;

        // Analytic Hessian replicated from the solver.
        let na = nv + 1;
        let mut hess = Matrix::zeros(na, na);
        for cst in &prob.constraints {
            let fx = cst.expr.eval(&x);
            let mut g = fx.scale(-1.0);
            for i in 0..g.rows() {
                g[(i, i)] += s;
            }
            let d = g.rows();
            let l = cholesky(&g).unwrap();
            let mut active: Vec<(usize, Matrix)> = Vec::new();
            for k in 0..nv {
                if let Some(coeff) = cst.expr.coeff(k) {
                    let w = solve_lower(&l, &solve_lower(&l, &coeff.transpose()).transpose())
                        .scale(-1.0);
                    active.push((k, w));
                }
            }
            let inv_l = solve_lower(&l, &Matrix::identity(d));
            active.push((nv, &inv_l * &inv_l.transpose()));
            for (i, wi) in &active {
                for (j, wj) in &active {
                    if j < i {
                        continue;
                    }
                    let mut dot = 0.0;
                    for q in 0..d * d {
                        dot += wi.data()[q] * wj.data()[q];
                    }
                    hess[(*i, *j)] += dot;
                    if i != j {
                        hess[(*j, *i)] += dot;
                    }
                }
            }
        }
        for (k, &xi) in x.iter().enumerate() {
            hess[(k, k)] += 1.0 / (bound - xi).powi(2) + 1.0 / (bound + xi).powi(2);
        }

        let h = 1e-5;
        for k in 0..na {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            let (mut sp, mut sm) = (s, s);
            if k < nv {
                xp[k] += h;
                xm[k] -= h;
            } else {
                sp += h;
                sm -= h;
            }
            let gp = barrier_grad(&prob.constraints, nv, t, &xp, sp, bound);
            let gm = barrier_grad(&prob.constraints, nv, t, &xm, sm, bound);
            for l in 0..na {
                let fd = (gp[l] - gm[l]) / (2.0 * h);
                assert!(
                    (fd - hess[(k, l)]).abs() <= 1e-4 * (1.0 + fd.abs()),
                    "hess[{k},{l}]: analytic {} vs fd {fd}",
                    hess[(k, l)]
                );
            }
        }
    }
}
