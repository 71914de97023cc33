//! Certificates and metrics for assembled error systems: H-infinity norms,
//! KL bounds under the three stability conditions, comparisons against the
//! single-observer baseline, steady states, and the closed-form two-agent
//! scalar norm.

use thiserror::Error;

use crate::linalg::{self, transfer_gain_at, Matrix};
use crate::system::{ErrorOutput, ErrorSystem, NoiseInput};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("system matrix is not Hurwitz (spectral abscissa {0:.6})")]
    NotHurwitz(f64),
    #[error("condition not satisfied: {0}")]
    ConditionViolated(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
    #[error(transparent)]
    System(#[from] crate::system::SystemError),
}

pub type Result<T> = std::result::Result<T, AnalysisError>;

/// State-space realization T(s) = C (sI - A)^-1 B + D.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferRealization {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub d: Option<Matrix>,
}

impl TransferRealization {
    pub fn new(a: Matrix, b: Matrix, c: Matrix, d: Option<Matrix>) -> Result<Self> {
        if !a.is_square() {
            return Err(AnalysisError::Dimension("state matrix must be square".into()));
        }
        if b.rows() != a.rows() || c.cols() != a.rows() {
            return Err(AnalysisError::Dimension(
                "B rows and C columns must match the state dimension".into(),
            ));
        }
        if let Some(d) = &d {
            if d.rows() != c.rows() || d.cols() != b.cols() {
                return Err(AnalysisError::Dimension("D must be (C rows) x (B cols)".into()));
            }
        }
        Ok(TransferRealization { a, b, c, d })
    }

    /// Realization of the noise-to-error map of an assembled system for the
    /// selected output block and noise model.
    pub fn from_error_system(
        es: &ErrorSystem,
        output: ErrorOutput,
        noise: NoiseInput,
    ) -> Result<Self> {
        TransferRealization::new(
            es.a_cal().clone(),
            es.input_matrix(noise),
            es.output_matrix(output)?,
            None,
        )
    }

    fn d_or_zero(&self) -> Matrix {
        self.d
            .clone()
            .unwrap_or_else(|| Matrix::zeros(self.c.rows(), self.b.cols()))
    }

    /// sigma_max of T(j omega).
    pub fn gain_at(&self, omega: f64) -> Result<f64> {
        Ok(transfer_gain_at(&self.a, &self.b, &self.c, self.d.as_ref(), omega)?)
    }
}

fn require_hurwitz(a: &Matrix) -> Result<f64> {
    let alpha = linalg::spectral_abscissa(a)?;
    if alpha >= 0.0 {
        return Err(AnalysisError::NotHurwitz(alpha));
    }
    Ok(alpha)
}

/// Hamiltonian test: for Hurwitz A and gamma > sigma_max(D), the norm bound
/// ||T||_inf < gamma holds iff the Hamiltonian has no imaginary-axis
/// eigenvalue.
fn hamiltonian_has_imaginary_eig(t: &TransferRealization, gamma: f64) -> Result<bool> {
    let n = t.a.rows();
    let d = t.d_or_zero();
    let m_in = t.b.cols();
    let r = &Matrix::identity(m_in).scale(gamma * gamma) - &(&d.transpose() * &d);
    let r_inv = linalg::inverse(&r)
        .map_err(|_| AnalysisError::ConditionViolated("gamma below sigma_max(D)".into()))?;
    let brd = &t.b * &r_inv;
    let a_shift = &t.a + &(&brd * &(&d.transpose() * &t.c));
    let top_right = &brd * &t.b.transpose();
    let inner = &Matrix::identity(d.rows()) + &(&(&d * &r_inv) * &d.transpose());
    let bottom_left = (&t.c.transpose() * &(&inner * &t.c)).scale(-1.0);

    let mut h = Matrix::zeros(2 * n, 2 * n);
    h.set_block(0, 0, &a_shift);
    h.set_block(0, n, &top_right);
    h.set_block(n, 0, &bottom_left);
    h.set_block(n, n, &a_shift.transpose().scale(-1.0));

    let spec = linalg::eig(&h, false)?;
    Ok(spec
        .eigenvalues
        .iter()
        .any(|l| l.re.abs() <= 1e-7 * (1.0 + l.norm())))
}

/// H-infinity norm by bisection on the Hamiltonian imaginary-axis test,
/// to relative accuracy `rel_tol`.
pub fn hinf_norm(t: &TransferRealization, rel_tol: f64) -> Result<f64> {
    let alpha = require_hurwitz(&t.a)?;
    let d = t.d_or_zero();
    let sigma_d = d.spectral_norm();
    if t.b.max_abs() == 0.0 || t.c.max_abs() == 0.0 {
        return Ok(sigma_d);
    }

    // Resolvent overbound seeds the bracket; grow it if the test disagrees
    // (the estimate is not sharp for strongly non-normal dynamics).
    let mut hi = t.c.spectral_norm() * t.b.spectral_norm() / alpha.abs() + sigma_d;
    let mut grow = 0;
    while hamiltonian_has_imaginary_eig(t, hi)? {
        hi *= 2.0;
        grow += 1;
        if grow > 60 {
            return Err(AnalysisError::ConditionViolated(
                "failed to bracket the norm from above".into(),
            ));
        }
    }
    let mut lo = sigma_d.max(t.gain_at(0.0)?);
    if lo >= hi {
        lo = sigma_d;
    }

    while hi - lo > rel_tol * hi.max(f64::MIN_POSITIVE) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if hamiltonian_has_imaginary_eig(t, mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Independent oracle: max gain over a log-spaced frequency grid plus
/// omega = 0.
pub fn frequency_sweep_norm(t: &TransferRealization, points: usize, omega_max: f64) -> Result<f64> {
    let mut best = t.gain_at(0.0)?;
    let omega_min: f64 = 1e-4;
    for k in 0..points {
        let frac = k as f64 / (points - 1) as f64;
        let omega = omega_min * (omega_max / omega_min).powf(frac);
        best = best.max(t.gain_at(omega)?);
    }
    Ok(best)
}

/// The three stability certificates of the KL characterization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KlCondition {
    /// Hurwitz with distinct eigenvalues.
    DistinctEig,
    /// Dissipative: A^T + A <= -2 alpha_bar I.
    Dissipative,
    /// Lyapunov: He(A, P) <= -2 alpha_bar P.
    Lyapunov,
}

impl KlCondition {
    pub fn tag(&self) -> &'static str {
        match self {
            KlCondition::DistinctEig => "distinct-eig",
            KlCondition::Dissipative => "dissipative",
            KlCondition::Lyapunov => "lyapunov",
        }
    }
}

/// Exponential-plus-offset estimate |ebar(t)| <= c e^{-lambda t} |e(0)|
/// + g |m|_inf.
#[derive(Debug, Clone, PartialEq)]
pub struct KlBound {
    pub coeff: f64,
    pub rate: f64,
    pub noise_gain: f64,
    pub condition: KlCondition,
}

impl KlBound {
    pub fn envelope(&self, e0_norm: f64, t: f64, m_inf: f64) -> f64 {
        self.coeff * (-self.rate * t).exp() * e0_norm + self.noise_gain * m_inf
    }
}

/// Derives the KL bound for the selected output/noise realization under the
/// requested condition. `p` and `alpha_bar` feed the Lyapunov case; when
/// `alpha_bar` is omitted the largest admissible decay is used.
pub fn kl_bound(
    es: &ErrorSystem,
    condition: KlCondition,
    p: Option<&Matrix>,
    alpha_bar: Option<f64>,
    output: ErrorOutput,
    noise: NoiseInput,
) -> Result<KlBound> {
    let a = es.a_cal();
    let b_norm = es.input_matrix(noise).spectral_norm();
    let c_norm = es.output_matrix(output)?.spectral_norm();

    match condition {
        KlCondition::DistinctEig => {
            let alpha = require_hurwitz(a)?;
            let kappa = linalg::jordan_condition(a).map_err(|e| match e {
                linalg::LinalgError::RepeatedEigenvalues { .. } => AnalysisError::ConditionViolated(
                    "distinct eigenvalues required for condition 1".into(),
                ),
                other => AnalysisError::Linalg(other),
            })?;
            Ok(KlBound {
                coeff: kappa * c_norm,
                rate: -alpha,
                noise_gain: kappa * b_norm * c_norm / alpha.abs(),
                condition,
            })
        }
        KlCondition::Dissipative => {
            let mu = linalg::log_norm(a)?;
            let alpha_bar = alpha_bar.unwrap_or(-mu);
            if alpha_bar <= 0.0 || mu > -alpha_bar + 1e-12 {
                return Err(AnalysisError::ConditionViolated(format!(
                    "A^T + A <= -2 alpha_bar I fails: mu(A) = {mu:.6}, alpha_bar = {alpha_bar:.6}"
                )));
            }
            Ok(KlBound {
                coeff: c_norm,
                rate: -mu,
                noise_gain: b_norm * c_norm / mu.abs(),
                condition,
            })
        }
        KlCondition::Lyapunov => {
            let p = p.ok_or_else(|| {
                AnalysisError::ConditionViolated("condition 3 needs a Lyapunov matrix P".into())
            })?;
            if !p.is_symmetric(1e-9 * p.max_abs().max(1.0)) {
                return Err(AnalysisError::ConditionViolated("P must be symmetric".into()));
            }
            let (p_vals, _) = linalg::sym_eig(p);
            let (p_min, p_max) = (p_vals[0], *p_vals.last().unwrap());
            if p_min <= 0.0 {
                return Err(AnalysisError::ConditionViolated("P must be positive definite".into()));
            }
            // Largest alpha_bar with He(A, P) <= -2 alpha_bar P, found from
            // the P-weighted eigenproblem L^-1 He(A, P) L^-T with P = L L^T.
            let l = linalg::cholesky(p).ok_or_else(|| {
                AnalysisError::ConditionViolated("P must be positive definite".into())
            })?;
            let he = &(&a.transpose() * p) + &(p * a);
            let w = linalg::solve_lower(&l, &linalg::solve_lower(&l, &he.transpose()).transpose());
            let (w_vals, _) = linalg::sym_eig(&w);
            let alpha_star = -w_vals.last().unwrap() / 2.0;
            let alpha_bar = alpha_bar.unwrap_or(alpha_star);
            if alpha_bar <= 0.0 || alpha_bar > alpha_star + 1e-9 * alpha_star.abs().max(1.0) {
                return Err(AnalysisError::ConditionViolated(format!(
                    "He(A, P) <= -2 alpha_bar P fails: best alpha_bar = {alpha_star:.6}, requested {alpha_bar:.6}"
                )));
            }
            let c_p = p_max / p_min;
            let lambda = alpha_bar * p_min / p_max;
            Ok(KlBound {
                coeff: c_p.sqrt() * c_norm,
                rate: lambda,
                noise_gain: c_p * b_norm * c_norm / lambda,
                condition,
            })
        }
    }
}

/// Outcome of comparing a design's KL bound against the baseline bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundComparison {
    pub rate_strictly_better: bool,
    pub gain_strictly_better: bool,
    /// Time after which the design envelope stays below the baseline
    /// envelope, when the envelopes cross.
    pub crossover: Option<f64>,
}

/// Envelope comparison: the crossover solves
/// c e^{-lambda t} e0 = c_L e^{-lambda_L t} eL0 when lambda > lambda_L,
/// clamped at zero.
pub fn compare_bounds(
    ours: &KlBound,
    baseline: &KlBound,
    e0_norm: f64,
    baseline_e0_norm: f64,
) -> BoundComparison {
    let rate_strictly_better = ours.rate > baseline.rate;
    let gain_strictly_better = ours.noise_gain < baseline.noise_gain;
    let ours_at0 = ours.coeff * e0_norm;
    let base_at0 = baseline.coeff * baseline_e0_norm;
    let rate_gap = ours.rate - baseline.rate;
    let crossover = if rate_gap.abs() <= 1e-12 * ours.rate.max(baseline.rate) {
        // Parallel envelopes never cross; they coincide or stay ordered.
        if ours_at0 <= base_at0 {
            Some(0.0)
        } else {
            None
        }
    } else if rate_gap > 0.0 {
        Some(((ours_at0 / base_at0).ln() / rate_gap).max(0.0))
    } else {
        None
    };
    BoundComparison { rate_strictly_better, gain_strictly_better, crossover }
}

/// Steady-state output error under constant per-agent noise:
/// ebar* = -C A^-1 B m.
pub fn steady_state_error(es: &ErrorSystem, m_const: &Matrix) -> Result<Matrix> {
    require_hurwitz(es.a_cal())?;
    if m_const.rows() != es.b_cal().cols() || m_const.cols() != 1 {
        return Err(AnalysisError::Dimension(format!(
            "constant noise must be a {}-vector",
            es.b_cal().cols()
        )));
    }
    let x = linalg::solve(es.a_cal(), &(es.b_cal() * m_const))?;
    Ok((es.c_cal() * &x).scale(-1.0))
}

/// Absolute value of the real part of the dominant pole.
pub fn convergence_rate(es: &ErrorSystem) -> Result<f64> {
    Ok(-require_hurwitz(es.a_cal())?)
}

/// Closed-form two-agent scalar H-infinity norm with K11 = K22 = K_L over
/// the all-to-all graph under common noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarHinf {
    pub value: f64,
    /// True when the pseudo-concavity domain admitted the omega = 0 closed
    /// form; false when the Hamiltonian fallback was used.
    pub closed_form: bool,
}

/// Domain check and evaluation of ||T||_inf^2 = e / (4 d) for the scalar
/// two-agent common-noise design (the K12 K21 = 0 branch).
pub fn scalar_two_agent_hinf(a: f64, k_l: f64, k12: f64, k21: f64) -> Result<ScalarHinf> {
    if a - k_l >= 0.0 {
        return Err(AnalysisError::ConditionViolated("requires a - K_L < 0".into()));
    }
    let alpha = k12 + k21;
    let beta = k12 * k21;
    let a_t = (2.0 * k_l + alpha).powi(2);
    let c = 2.0 * (a - k_l).powi(2) + 2.0 * beta;
    let d = ((a - k_l).powi(2) - beta).powi(2);
    let e = (2.0 * k_l * (k_l - a) - a * alpha - 2.0 * beta).powi(2);

    let in_domain = beta == 0.0 && e * c - a_t * d > 0.0 && alpha > -2.0 * k_l;
    if in_domain {
        return Ok(ScalarHinf { value: 0.5 * (e / d).sqrt(), closed_form: true });
    }

    // Outside D_1 the maximizing frequency may move off omega = 0; fall back
    // to the assembled system.
    let plant = crate::system::Plant::scalar(a);
    let grid = vec![
        vec![Matrix::scalar(k_l), Matrix::scalar(k12)],
        vec![Matrix::scalar(k21), Matrix::scalar(k_l)],
    ];
    let gains = crate::system::GainSchedule::from_blocks(&grid)?;
    let es = crate::system::assemble(&plant, &crate::graph::Digraph::all_to_all(2), &gains)?;
    let t = TransferRealization::from_error_system(&es, ErrorOutput::Local(1), NoiseInput::Common)?;
    Ok(ScalarHinf { value: hinf_norm(&t, 1e-9)?, closed_form: false })
}

/// Steady-state comparison for two uncoupled observers whose outputs are
/// averaged: the average can never beat the single baseline observer.
#[derive(Debug, Clone, PartialEq)]
pub struct UncoupledAverage {
    pub avg_abs: f64,
    pub luenberger_abs: f64,
}

pub fn uncoupled_average_oracle(
    a: f64,
    k_l: f64,
    k1: f64,
    k2: f64,
    m: f64,
) -> Result<UncoupledAverage> {
    if k_l < 0.0 || a - k_l >= 0.0 || k1 < k_l || k2 < k_l {
        return Err(AnalysisError::ConditionViolated(
            "requires K1 >= K_L, K2 >= K_L, K_L >= 0 and a - K_L < 0".into(),
        ));
    }
    let avg = 0.5 * (k1 / (k1 - a) + k2 / (k2 - a)) * m;
    let single = k_l / (k_l - a) * m;
    let out = UncoupledAverage { avg_abs: avg.abs(), luenberger_abs: single.abs() };
    debug_assert!(out.avg_abs >= out.luenberger_abs - 1e-12);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Digraph;
    use crate::system::{assemble, GainSchedule, LuenbergerGain, Plant};
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "expected {b}, got {a} (tol {tol})");
    }

    fn scalar_gains(entries: [[f64; 2]; 2]) -> GainSchedule {
        let grid: Vec<Vec<Matrix>> = entries
            .iter()
            .map(|row| row.iter().map(|&v| Matrix::scalar(v)).collect())
            .collect();
        GainSchedule::from_blocks(&grid).unwrap()
    }

    fn scalar_luenberger() -> TransferRealization {
        TransferRealization::new(
            Matrix::scalar(-2.5),
            Matrix::scalar(2.0),
            Matrix::scalar(1.0),
            None,
        )
        .unwrap()
    }

    fn example1_system() -> ErrorSystem {
        let plant = Plant::scalar(-0.5);
        let gains = scalar_gains([[1.7896, 0.0538], [-1.1633, 2.2278]]);
        assemble(&plant, &Digraph::all_to_all(2), &gains).unwrap()
    }

    fn example4_system() -> ErrorSystem {
        let plant = Plant::scalar(-0.5);
        let gains = scalar_gains([[3.5198, -8.0142], [0.2883, 0.4802]]);
        assemble(&plant, &Digraph::all_to_all(2), &gains).unwrap()
    }

    #[test]
    fn hinf_scalar_luenberger() {
        let gamma = hinf_norm(&scalar_luenberger(), 1e-7).unwrap();
        assert_close(gamma, 0.8, 1e-6);
    }

    #[test]
    fn hinf_example4_published_gains() {
        let t = TransferRealization::from_error_system(
            &example4_system(),
            ErrorOutput::Local(1),
            NoiseInput::Common,
        )
        .unwrap();
        let gamma = hinf_norm(&t, 1e-7).unwrap();
        assert_close(gamma, 0.4953, 5e-3);
    }

    #[test]
    fn hinf_zero_input_is_zero() {
        let t = TransferRealization::new(
            Matrix::scalar(-1.0),
            Matrix::scalar(0.0),
            Matrix::scalar(1.0),
            None,
        )
        .unwrap();
        assert_eq!(hinf_norm(&t, 1e-6).unwrap(), 0.0);
    }

    #[test]
    fn hinf_rejects_unstable() {
        let t = TransferRealization::new(
            Matrix::scalar(0.5),
            Matrix::scalar(1.0),
            Matrix::scalar(1.0),
            None,
        )
        .unwrap();
        assert!(matches!(hinf_norm(&t, 1e-6), Err(AnalysisError::NotHurwitz(_))));
    }

    #[test]
    fn hinf_matches_frequency_sweep_on_random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for case in 0..12 {
            let n = 2 + case % 4;
            let raw = Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let shift = linalg::spectral_abscissa(&raw).unwrap() + rng.gen_range(0.3..1.0);
            let a = &raw - &Matrix::identity(n).scale(shift);
            let b = Matrix::from_fn(n, 2, |_, _| rng.gen_range(-1.0..1.0));
            let c = Matrix::from_fn(2, n, |_, _| rng.gen_range(-1.0..1.0));
            let t = TransferRealization::new(a, b, c, None).unwrap();
            let gamma = hinf_norm(&t, 1e-7).unwrap();
            let swept = frequency_sweep_norm(&t, 10_000, 1e3).unwrap();
            assert!(swept <= gamma * (1.0 + 2e-7) + 1e-12, "sweep above bisection");
            assert!(
                (gamma - swept) / gamma <= 2e-4,
                "bisection {gamma} far above sweep {swept}"
            );
        }
    }

    #[test]
    fn hinf_invariant_under_similarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t = TransferRealization::from_error_system(
            &example1_system(),
            ErrorOutput::Global,
            NoiseInput::Independent,
        )
        .unwrap();
        let gamma = hinf_norm(&t, 1e-8).unwrap();
        for _ in 0..5 {
            let s = &Matrix::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0))
                + &Matrix::identity(2).scale(2.0);
            let s_inv = linalg::inverse(&s).unwrap();
            let t2 = TransferRealization::new(
                &(&s_inv * &t.a) * &s,
                &s_inv * &t.b,
                &t.c * &s,
                None,
            )
            .unwrap();
            let gamma2 = hinf_norm(&t2, 1e-8).unwrap();
            assert_close(gamma2, gamma, 1e-6 * gamma);
        }
    }

    #[test]
    fn kl_bound_scalar_luenberger_dissipative() {
        let plant = Plant::scalar(-0.5);
        let gain = LuenbergerGain::new(&plant, Matrix::scalar(2.0)).unwrap();
        let es = crate::system::luenberger_error_system(&plant, &gain).unwrap();
        let b = kl_bound(
            &es,
            KlCondition::Dissipative,
            None,
            None,
            ErrorOutput::Global,
            NoiseInput::Independent,
        )
        .unwrap();
        assert_close(b.coeff, 1.0, 1e-12);
        assert_close(b.rate, 2.5, 1e-12);
        assert_close(b.noise_gain, 0.8, 1e-12);
    }

    #[test]
    fn kl_bound_condition3_with_identity_reduces_to_condition2() {
        let es = example1_system();
        let b2 = kl_bound(
            &es,
            KlCondition::Dissipative,
            None,
            None,
            ErrorOutput::Global,
            NoiseInput::Independent,
        )
        .unwrap();
        let b3 = kl_bound(
            &es,
            KlCondition::Lyapunov,
            Some(&Matrix::identity(2)),
            None,
            ErrorOutput::Global,
            NoiseInput::Independent,
        )
        .unwrap();
        assert_close(b3.coeff, b2.coeff, 1e-9);
        assert_close(b3.rate, b2.rate, 1e-9);
        assert_close(b3.noise_gain, b2.noise_gain, 1e-9);
    }

    #[test]
    fn kl_bound_example1_rate() {
        let b = kl_bound(
            &example1_system(),
            KlCondition::Dissipative,
            None,
            None,
            ErrorOutput::Local(1),
            NoiseInput::Common,
        )
        .unwrap();
        assert_close(b.rate, 1.9123, 1e-3);
    }

    #[test]
    fn kl_bound_rejects_violated_conditions() {
        // A rotation is not dissipative: mu = 0.
        let plant = Plant::new(
            Matrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap(),
            Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap(),
        )
        .unwrap();
        let gains = GainSchedule::diagonal(&Matrix::col_vec(&[0.0, 0.0]), 1);
        let es = assemble(&plant, &Digraph::self_loops_only(1), &gains).unwrap();
        assert!(matches!(
            kl_bound(
                &es,
                KlCondition::Dissipative,
                None,
                None,
                ErrorOutput::Global,
                NoiseInput::Independent
            ),
            Err(AnalysisError::ConditionViolated(_))
        ));
    }

    #[test]
    fn compare_bounds_trivial_cases() {
        let b = KlBound {
            coeff: 1.0,
            rate: 2.0,
            noise_gain: 0.5,
            condition: KlCondition::Dissipative,
        };
        let same = compare_bounds(&b, &b.clone(), 1.0, 1.0);
        assert_eq!(same.crossover, Some(0.0));
        assert!(!same.rate_strictly_better);
        assert!(!same.gain_strictly_better);

        let bigger = KlBound { coeff: 2.0, ..b.clone() };
        let cmp = compare_bounds(&bigger, &b, 1.0, 1.0);
        assert_eq!(cmp.crossover, None);
    }

    #[test]
    fn compare_bounds_closed_form_crossover() {
        let ours = KlBound {
            coeff: 2.0,
            rate: 3.0,
            noise_gain: 0.4,
            condition: KlCondition::Dissipative,
        };
        let base = KlBound {
            coeff: 1.0,
            rate: 2.0,
            noise_gain: 0.8,
            condition: KlCondition::Dissipative,
        };
        let cmp = compare_bounds(&ours, &base, 1.0, 1.0);
        assert!(cmp.rate_strictly_better);
        assert!(cmp.gain_strictly_better);
        // 2 e^{-3t} = e^{-2t}  =>  t = ln 2.
        assert_close(cmp.crossover.unwrap(), std::f64::consts::LN_2, 1e-12);
        // The ordering claim holds numerically past the crossover.
        let t = cmp.crossover.unwrap() + 0.01;
        assert!(ours.envelope(1.0, t, 0.0) < base.envelope(1.0, t, 0.0));
    }

    #[test]
    fn steady_state_noise_rejection_choices() {
        let (a, k_l) = (-0.5, 2.0);
        let plant = Plant::scalar(a);
        let graph = Digraph::from_adjacency(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();

        // K21 = 2 K_L (K_L - a) / a completely rejects common constant noise
        // at agent 2.
        let k21_reject = 2.0 * k_l * (k_l - a) / a;
        let gains = scalar_gains([[k_l, 0.0], [k21_reject, k_l]]);
        let es = assemble(&plant, &graph, &gains).unwrap();
        let m0 = 0.7;
        let ss = steady_state_error(&es, &Matrix::col_vec(&[m0, m0])).unwrap();
        assert!(ss[(1, 0)].abs() < 1e-10, "expected exact rejection, got {}", ss[(1, 0)]);

        // K21 = K_L (K_L - a) / a halves the agent-2 steady state.
        let k21_half = k_l * (k_l - a) / a;
        let gains = scalar_gains([[k_l, 0.0], [k21_half, k_l]]);
        let es = assemble(&plant, &graph, &gains).unwrap();
        let m2 = 0.3;
        let ss = steady_state_error(&es, &Matrix::col_vec(&[0.0, m2])).unwrap();
        assert_close(ss[(1, 0)], k_l / (2.0 * (k_l - a)) * m2, 1e-9);
        assert_close(ss[(1, 0)], 0.4 * m2, 1e-9);
    }

    #[test]
    fn steady_state_example1() {
        let es = example1_system();
        let ss = steady_state_error(&es, &Matrix::col_vec(&[0.3, 0.3])).unwrap();
        assert_close(ss[(0, 0)], 0.2272, 1e-3);
        assert_close(ss[(1, 0)], 0.2272, 1e-3);

        // Luenberger baseline: K_L/(K_L - a) * m = 0.24.
        let plant = Plant::scalar(-0.5);
        let gain = LuenbergerGain::new(&plant, Matrix::scalar(2.0)).unwrap();
        let es_l = crate::system::luenberger_error_system(&plant, &gain).unwrap();
        let ss_l = steady_state_error(&es_l, &Matrix::col_vec(&[0.3])).unwrap();
        assert_close(ss_l[(0, 0)], 0.24, 1e-6);
    }

    #[test]
    fn convergence_rate_examples() {
        let plant = Plant::new(
            Matrix::from_rows(&[vec![-2.5, 0.1], vec![0.04, -3.0]]).unwrap(),
            Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap(),
        )
        .unwrap();
        let gain = LuenbergerGain::new(&plant, Matrix::col_vec(&[1.5, -0.16])).unwrap();
        let es = crate::system::luenberger_error_system(&plant, &gain).unwrap();
        assert_close(convergence_rate(&es).unwrap(), 3.34, 1e-2);

        let osc = Plant::new(
            Matrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap(),
            Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap(),
        )
        .unwrap();
        let gain = LuenbergerGain::new(&osc, Matrix::col_vec(&[2.0, 0.0])).unwrap();
        let es = crate::system::luenberger_error_system(&osc, &gain).unwrap();
        assert_close(convergence_rate(&es).unwrap(), 1.0, 1e-6);

        let scalar = Plant::scalar(-0.5);
        let gain = LuenbergerGain::new(&scalar, Matrix::scalar(2.0)).unwrap();
        let es = crate::system::luenberger_error_system(&scalar, &gain).unwrap();
        assert_close(convergence_rate(&es).unwrap(), 2.5, 1e-12);
    }

    #[test]
    fn scalar_two_agent_closed_form() {
        // Uncoupled reduction returns the baseline 0.8.
        let r = scalar_two_agent_hinf(-0.5, 2.0, 0.0, 0.0).unwrap();
        assert!(r.closed_form);
        assert_close(r.value, 0.8, 1e-12);

        // A coupling gain in D_2 beats the baseline.
        let r = scalar_two_agent_hinf(-0.5, 2.0, -2.0, 0.0).unwrap();
        assert!(r.value < 0.8);

        assert!(scalar_two_agent_hinf(1.0, 0.5, 0.0, 0.0).is_err());
    }

    #[test]
    fn scalar_two_agent_matches_assembled_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let (a, k_l) = (-0.5, 2.0);
        let mut checked = 0;
        while checked < 10 {
            let k12 = rng.gen_range(-3.9..1.5);
            let r = scalar_two_agent_hinf(a, k_l, k12, 0.0).unwrap();
            if !r.closed_form {
                continue;
            }
            let grid = vec![
                vec![Matrix::scalar(k_l), Matrix::scalar(k12)],
                vec![Matrix::scalar(0.0), Matrix::scalar(k_l)],
            ];
            let gains = GainSchedule::from_blocks(&grid).unwrap();
            let es = assemble(&Plant::scalar(a), &Digraph::all_to_all(2), &gains).unwrap();
            let t = TransferRealization::from_error_system(
                &es,
                ErrorOutput::Local(1),
                NoiseInput::Common,
            )
            .unwrap();
            let bisected = hinf_norm(&t, 1e-9).unwrap();
            let swept = frequency_sweep_norm(&t, 10_000, 1e3).unwrap();
            assert_close(r.value, bisected, 1e-6 * r.value.max(1.0));
            assert_close(r.value, swept, 1e-5 * r.value.max(1.0));
            checked += 1;
        }
    }

    #[test]
    fn uncoupled_average_examples() {
        let eq = uncoupled_average_oracle(-0.5, 2.0, 2.0, 2.0, 1.0).unwrap();
        assert_close(eq.avg_abs, eq.luenberger_abs, 1e-15);

        let r = uncoupled_average_oracle(-0.5, 2.0, 3.0, 4.0, 1.0).unwrap();
        assert_close(r.avg_abs, 0.8730, 1e-4);
        assert!(r.avg_abs >= 0.8);

        let r = uncoupled_average_oracle(-0.5, 2.0, 2.0, 10.0, 1.0).unwrap();
        assert_close(r.avg_abs, 0.8762, 1e-4);

        assert!(uncoupled_average_oracle(-0.5, 2.0, 1.0, 3.0, 1.0).is_err());
    }
}
