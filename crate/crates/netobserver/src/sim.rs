//! Time-domain validation: plant plus interconnected observers under
//! measurement noise, error statistics, and the dynamic-average-consensus
//! layer.
//!
//! The integrator exploits linearity: the one-step map exp(A dt) is computed
//! once and the forced response is quadratured per step with fixed
//! Gauss-Legendre nodes, so constant-noise steady states are exact and
//! high-gain designs carry no stiffness penalty.

use thiserror::Error;

use crate::graph::Digraph;
use crate::linalg::{self, kron, Matrix};
use crate::system::{assemble, ErrorSystem, GainSchedule, Plant, SystemError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid time grid: {0}")]
    Grid(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("consensus precondition violated: {0}")]
    Consensus(String),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
}

/// Measurement-noise model per agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    Zero,
    Constant { offset: f64 },
    /// m(t) = offset + amplitude * sin(omega t).
    Sinusoid { offset: f64, amplitude: f64, omega: f64 },
    /// Grid-sampled i.i.d. uniform on [-amplitude, amplitude] with hold; a
    /// simulation artifact standing in for wideband noise.
    White { amplitude: f64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseSharing {
    /// All agents observe the same channel.
    Common,
    /// Each agent draws its own channel (white noise reseeds per agent).
    Independent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub sharing: NoiseSharing,
}

impl NoiseSpec {
    pub fn zero() -> NoiseSpec {
        NoiseSpec { kind: NoiseKind::Zero, sharing: NoiseSharing::Common }
    }

    pub fn constant(offset: f64) -> NoiseSpec {
        NoiseSpec { kind: NoiseKind::Constant { offset }, sharing: NoiseSharing::Common }
    }

    pub fn sup_norm(&self, n_agents: usize) -> f64 {
        let per_agent = match self.kind {
            NoiseKind::Zero => 0.0,
            NoiseKind::Constant { offset } => offset.abs(),
            NoiseKind::Sinusoid { offset, amplitude, .. } => offset.abs() + amplitude.abs(),
            NoiseKind::White { amplitude, .. } => amplitude.abs(),
        };
        // Stacked noise vector over agents.
        per_agent * (n_agents as f64).sqrt()
    }
}

/// Deterministic white-noise stream: one value per grid index, per agent.
fn white_sample(seed: u64, agent: usize, index: usize, amplitude: f64) -> f64 {
    // splitmix64 keyed by (seed, agent, grid index); reproducible and
    // order-independent.
    let mut z = seed ^ (agent as u64).wrapping_mul(0x9E3779B97F4A7C15) ^ (index as u64 + 1);
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^= z >> 31;
    let unit = (z >> 11) as f64 / (1u64 << 53) as f64;
    amplitude * (2.0 * unit - 1.0)
}

/// Scalar noise sample for an agent at time t; white noise holds the value
/// drawn at the enclosing grid index.
pub fn noise_sample(spec: &NoiseSpec, t: f64, dt: f64, agent: usize) -> f64 {
    let channel = match spec.sharing {
        NoiseSharing::Common => 0,
        NoiseSharing::Independent => agent,
    };
    match spec.kind {
        NoiseKind::Zero => 0.0,
        NoiseKind::Constant { offset } => offset,
        NoiseKind::Sinusoid { offset, amplitude, omega } => offset + amplitude * (omega * t).sin(),
        NoiseKind::White { amplitude, seed } => {
            let index = (t / dt).floor().max(0.0) as usize;
            white_sample(seed, channel, index, amplitude)
        }
    }
}

/// Simulated trajectories on a uniform grid; vectors are stacked
/// agent-major, coordinate-minor.
#[derive(Debug, Clone)]
pub struct SimTrace {
    pub dt: f64,
    pub times: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub xhat: Vec<Vec<f64>>,
    pub ebar: Vec<Vec<f64>>,
    pub m: Vec<Vec<f64>>,
    pub integrator: &'static str,
}

impl SimTrace {
    pub fn ebar_norm(&self, sample: usize) -> f64 {
        self.ebar[sample].iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Euclidean norm of one agent's local error at a sample.
    pub fn ebar_agent_norm(&self, sample: usize, agent: usize, n: usize) -> f64 {
        let s = &self.ebar[sample][(agent - 1) * n..agent * n];
        s.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn csv_header(&self, n: usize, p: usize, n_agents: usize) -> String {
        let mut cols = vec!["t".to_string()];
        for k in 1..=n {
            cols.push(format!("x_{k}"));
        }
        for i in 1..=n_agents {
            for k in 1..=n {
                cols.push(format!("xhat_{i}_{k}"));
            }
        }
        for i in 1..=n_agents {
            for k in 1..=n {
                cols.push(format!("ebar_{i}_{k}"));
            }
        }
        for j in 1..=n_agents {
            for l in 1..=p {
                if p == 1 {
                    cols.push(format!("m_{j}"));
                } else {
                    cols.push(format!("m_{j}_{l}"));
                }
            }
        }
        cols.join(",")
    }

    pub fn to_csv(&self, n: usize, p: usize, n_agents: usize) -> String {
        let mut out = String::new();
        out.push_str(&self.csv_header(n, p, n_agents));
        out.push('\n');
        for (idx, t) in self.times.iter().enumerate() {
            let mut row = vec![format!("{t}")];
            row.extend(self.x[idx].iter().map(|v| format!("{v}")));
            row.extend(self.xhat[idx].iter().map(|v| format!("{v}")));
            row.extend(self.ebar[idx].iter().map(|v| format!("{v}")));
            row.extend(self.m[idx].iter().map(|v| format!("{v}")));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

// 4-node Gauss-Legendre nodes/weights on [0, 1].
const GL_NODES: [f64; 4] = [
    0.069431844202973712,
    0.330009478207571868,
    0.669990521792428132,
    0.930568155797026288,
];
const GL_WEIGHTS: [f64; 4] = [
    0.173927422568726929,
    0.326072577431273071,
    0.326072577431273071,
    0.173927422568726929,
];

fn stacked_noise(spec: &NoiseSpec, es: &ErrorSystem, t: f64, dt: f64) -> Matrix {
    let p = es.output_dim();
    Matrix::from_fn(es.n_agents() * p, 1, |row, _| {
        let agent = row / p;
        noise_sample(spec, t, dt, agent)
    })
}

/// Integrates the error system and the plant by exact discretization plus
/// per-step Gauss-Legendre quadrature of the forced response.
pub fn simulate(
    plant: &Plant,
    graph: &Digraph,
    gains: &GainSchedule,
    noise: &NoiseSpec,
    x0: &[f64],
    xhat0: &[Vec<f64>],
    t_end: f64,
    dt: f64,
) -> Result<SimTrace, SimError> {
    if dt <= 0.0 || t_end < dt {
        return Err(SimError::Grid(format!("need dt > 0 and T >= dt, got dt = {dt}, T = {t_end}")));
    }
    let es = assemble(plant, graph, gains)?;
    let n = plant.state_dim();
    let n_agents = graph.node_count();
    if x0.len() != n {
        return Err(SimError::Dimension(format!("x0 must have {n} entries")));
    }
    if xhat0.len() != n_agents || xhat0.iter().any(|v| v.len() != n) {
        return Err(SimError::Dimension(format!(
            "xhat0 must hold {n_agents} vectors of {n} entries"
        )));
    }

    let steps = (t_end / dt).round() as usize;
    let phi_plant = linalg::expm(plant.a(), dt)?;
    let phi = linalg::expm(es.a_cal(), dt)?;
    // exp(A s_q dt) B precomputed at the quadrature nodes (s measured
    // backward from the step end).
    let forced: Vec<Matrix> = GL_NODES
        .iter()
        .map(|&node| Ok::<_, SimError>(linalg::expm(es.a_cal(), node * dt)? * es.b_cal()))
        .collect::<Result<_, _>>()?;

    let mut x = Matrix::col_vec(x0);
    let mut e = Matrix::from_fn(n * n_agents, 1, |row, _| {
        let agent = row / n;
        xhat0[agent][row % n] - x0[row % n]
    });

    let mut trace = SimTrace {
        dt,
        times: Vec::with_capacity(steps + 1),
        x: Vec::with_capacity(steps + 1),
        xhat: Vec::with_capacity(steps + 1),
        ebar: Vec::with_capacity(steps + 1),
        m: Vec::with_capacity(steps + 1),
        integrator: "exact-discretization+gauss-legendre-4",
    };

    let record = |t: f64, x: &Matrix, e: &Matrix, trace: &mut SimTrace| {
        let ebar = es.c_cal() * e;
        trace.times.push(t);
        trace.x.push(x.data().to_vec());
        trace
            .xhat
            .push((0..n * n_agents).map(|row| e[(row, 0)] + x[(row % n, 0)]).collect());
        trace.ebar.push(ebar.data().to_vec());
        trace.m.push(stacked_noise(noise, &es, t, dt).data().to_vec());
    };
    record(0.0, &x, &e, &mut trace);

    for step in 0..steps {
        let t = step as f64 * dt;
        // e(t+dt) = Phi e(t) + sum_q w_q dt exp(A s_q dt) B m(t + (1-s_q) dt).
        let mut next = &phi * &e;
        for (q, fb) in forced.iter().enumerate() {
            let sample_t = t + (1.0 - GL_NODES[q]) * dt;
            let m = stacked_noise(noise, &es, sample_t, dt);
            next = &next + &(fb * &m).scale(GL_WEIGHTS[q] * dt);
        }
        e = next;
        x = &phi_plant * &x;
        record(t + dt, &x, &e, &mut trace);
    }
    Ok(trace)
}

/// Per-agent mean and standard deviation of the local error norm after the
/// transient cut.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn error_stats(trace: &SimTrace, n: usize, transient_cut: f64) -> Result<ErrorStats, SimError> {
    let start = trace.times.iter().position(|&t| t >= transient_cut).ok_or_else(|| {
        SimError::Grid(format!(
            "transient cut {transient_cut} leaves no samples (T = {:?})",
            trace.times.last()
        ))
    })?;
    let count = trace.times.len() - start;
    if count == 0 {
        return Err(SimError::Grid("empty averaging window".into()));
    }
    let n_agents = trace.ebar[0].len() / n;
    let mut mean = vec![0.0; n_agents];
    let mut std = vec![0.0; n_agents];
    for agent in 0..n_agents {
        let vals: Vec<f64> = (start..trace.times.len())
            .map(|idx| trace.ebar_agent_norm(idx, agent + 1, n))
            .collect();
        let m: f64 = vals.iter().sum::<f64>() / count as f64;
        let var: f64 = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / count as f64;
        mean[agent] = m;
        std[agent] = var.sqrt();
    }
    Ok(ErrorStats { mean, std })
}

/// Dynamic-average-consensus run: agreement states track the network
/// average of the observer states.
#[derive(Debug, Clone)]
pub struct ConsensusTrace {
    pub times: Vec<f64>,
    /// xi per sample, stacked agent-major.
    pub xi: Vec<Vec<f64>>,
    /// Per-sample max_i |delta_i| with delta_i = xi_i - avg_j xhat_j.
    pub delta_max: Vec<f64>,
    /// Per-sample |sum_i v_i| (conserved at zero on weight-balanced graphs).
    pub v_sum_norm: Vec<f64>,
}

/// Integrates the consensus layer alongside the noise-free observers. The
/// whole stack (plant, observers, agreement and auxiliary states) is LTI, so
/// one matrix exponential advances everything exactly.
#[allow(clippy::too_many_arguments)]
pub fn consensus_simulate(
    plant: &Plant,
    graph: &Digraph,
    gains: &GainSchedule,
    beta1: f64,
    beta2: f64,
    x0: &[f64],
    xhat0: &[Vec<f64>],
    xi0: &[Vec<f64>],
    v0: &[Vec<f64>],
    t_end: f64,
    dt: f64,
) -> Result<ConsensusTrace, SimError> {
    if beta1 <= 0.0 || beta2 <= 0.0 {
        return Err(SimError::Consensus("beta1 and beta2 must be positive".into()));
    }
    if !graph.is_strongly_connected() || !graph.is_weight_balanced() {
        return Err(SimError::Consensus(
            "digraph must be strongly connected and weight balanced".into(),
        ));
    }
    if dt <= 0.0 || t_end < dt {
        return Err(SimError::Grid("need dt > 0 and T >= dt".into()));
    }
    let n = plant.state_dim();
    let n_agents = graph.node_count();
    let nn = n * n_agents;
    if xhat0.len() != n_agents || xi0.len() != n_agents || v0.len() != n_agents {
        return Err(SimError::Dimension("per-agent initial conditions required".into()));
    }
    let sum_v0: Vec<f64> = (0..n).map(|k| v0.iter().map(|v| v[k]).sum::<f64>()).collect();
    if sum_v0.iter().any(|s| s.abs() > 1e-12) {
        return Err(SimError::Consensus("sum of v_i(0) must vanish".into()));
    }

    let es = assemble(plant, graph, gains)?;
    // Observer dynamics with zero noise, in (x, xhat) coordinates:
    //   d/dt xhat = (I (x) A) xhat - B (I_N (x) C) xhat + B (1_N (x) C) x.
    let b = es.b_cal();
    let i_c = kron(&Matrix::identity(n_agents), plant.c());
    let ones_c = kron(&Matrix::from_fn(n_agents, 1, |_, _| 1.0), plant.c());
    let obs_self = &kron(&Matrix::identity(n_agents), plant.a()) - &(b * &i_c);
    let obs_from_x = b * &ones_c;

    let lap = kron(&graph.laplacian(true), &Matrix::identity(n));

    // Stacked state z = (x, xhat, xi, v).
    let dim = n + 3 * nn;
    let mut a_big = Matrix::zeros(dim, dim);
    a_big.set_block(0, 0, plant.a());
    a_big.set_block(n, 0, &obs_from_x);
    a_big.set_block(n, n, &obs_self);
    // xi' = -beta1 (xi - xhat) - beta2 (L (x) I) xi - v + xhat'.
    let xi_off = n + nn;
    let v_off = n + 2 * nn;
    a_big.set_block(xi_off, 0, &obs_from_x);
    a_big.set_block(xi_off, n, &(&obs_self + &Matrix::identity(nn).scale(beta1)));
    a_big.set_block(
        xi_off,
        xi_off,
        &(&lap.scale(-beta2) - &Matrix::identity(nn).scale(beta1)),
    );
    a_big.set_block(xi_off, v_off, &Matrix::identity(nn).scale(-1.0));
    // v' = beta1 beta2 (L (x) I) xi.
    a_big.set_block(v_off, xi_off, &lap.scale(beta1 * beta2));

    let phi = linalg::expm(&a_big, dt)?;
    let mut z = Matrix::zeros(dim, 1);
    for k in 0..n {
        z[(k, 0)] = x0[k];
    }
    for i in 0..n_agents {
        for k in 0..n {
            z[(n + i * n + k, 0)] = xhat0[i][k];
            z[(xi_off + i * n + k, 0)] = xi0[i][k];
            z[(v_off + i * n + k, 0)] = v0[i][k];
        }
    }

    let steps = (t_end / dt).round() as usize;
    let mut trace = ConsensusTrace {
        times: Vec::with_capacity(steps + 1),
        xi: Vec::with_capacity(steps + 1),
        delta_max: Vec::with_capacity(steps + 1),
        v_sum_norm: Vec::with_capacity(steps + 1),
    };
    let record = |t: f64, z: &Matrix, trace: &mut ConsensusTrace| {
        let mut avg = vec![0.0; n];
        for i in 0..n_agents {
            for k in 0..n {
                avg[k] += z[(n + i * n + k, 0)] / n_agents as f64;
            }
        }
        let mut worst = 0.0_f64;
        let mut xi_flat = Vec::with_capacity(nn);
        for i in 0..n_agents {
            let mut d2 = 0.0;
            for k in 0..n {
                let xi_ik = z[(xi_off + i * n + k, 0)];
                xi_flat.push(xi_ik);
                let d = xi_ik - avg[k];
                d2 += d * d;
            }
            worst = worst.max(d2.sqrt());
        }
        let mut vsum2 = 0.0;
        for k in 0..n {
            let s: f64 = (0..n_agents).map(|i| z[(v_off + i * n + k, 0)]).sum();
            vsum2 += s * s;
        }
        trace.times.push(t);
        trace.xi.push(xi_flat);
        trace.delta_max.push(worst);
        trace.v_sum_norm.push(vsum2.sqrt());
    };
    record(0.0, &z, &mut trace);
    for step in 0..steps {
        z = &phi * &z;
        record((step + 1) as f64 * dt, &z, &mut trace);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis;
    use crate::system::LuenbergerGain;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "expected {b}, got {a} (tol {tol})");
    }

    fn example1() -> (Plant, Digraph, GainSchedule) {
        let plant = Plant::scalar(-0.5);
        let grid = vec![
            vec![Matrix::scalar(1.7896), Matrix::scalar(0.0538)],
            vec![Matrix::scalar(-1.1633), Matrix::scalar(2.2278)],
        ];
        (plant, Digraph::all_to_all(2), GainSchedule::from_blocks(&grid).unwrap())
    }

    #[test]
    fn zero_noise_decay() {
        let (plant, graph, gains) = example1();
        let trace = simulate(
            &plant,
            &graph,
            &gains,
            &NoiseSpec::zero(),
            &[3.0],
            &[vec![5.0], vec![5.0]],
            8.0,
            1e-3,
        )
        .unwrap();
        let e0 = trace.ebar_norm(0);
        assert_close(e0, 8.0_f64.sqrt(), 1e-12);
        let idx = trace.times.iter().position(|&t| t >= 4.0).unwrap();
        assert!(trace.ebar_norm(idx) < e0 * (-2.5 * 4.0_f64).exp() * 10.0);
    }

    #[test]
    fn constant_noise_matches_steady_state_formula() {
        let (plant, graph, gains) = example1();
        let trace = simulate(
            &plant,
            &graph,
            &gains,
            &NoiseSpec::constant(0.3),
            &[3.0],
            &[vec![5.0], vec![5.0]],
            20.0,
            1e-3,
        )
        .unwrap();
        let es = assemble(&plant, &graph, &gains).unwrap();
        let ss = analysis::steady_state_error(&es, &Matrix::col_vec(&[0.3, 0.3])).unwrap();
        let last = trace.ebar.last().unwrap();
        for (k, &v) in last.iter().enumerate() {
            assert!(
                (v - ss[(k, 0)]).abs() <= 1e-6 * ss[(k, 0)].abs(),
                "terminal {v} vs formula {}",
                ss[(k, 0)]
            );
        }
        assert_close(last[0], 0.2272, 1e-3);
    }

    #[test]
    fn zero_initial_error_stays_zero() {
        let (plant, graph, gains) = example1();
        let trace = simulate(
            &plant,
            &graph,
            &gains,
            &NoiseSpec::zero(),
            &[1.5],
            &[vec![1.5], vec![1.5]],
            1.0,
            1e-3,
        )
        .unwrap();
        for idx in 0..trace.times.len() {
            assert!(trace.ebar_norm(idx) < 1e-13);
        }
    }

    #[test]
    fn integrator_order_halving_dt() {
        let (plant, graph, gains) = example1();
        let noise = NoiseSpec {
            kind: NoiseKind::Sinusoid { offset: 0.3, amplitude: 0.3, omega: 20.0 },
            sharing: NoiseSharing::Common,
        };
        let run = |dt: f64| {
            simulate(&plant, &graph, &gains, &noise, &[3.0], &[vec![5.0], vec![5.0]], 2.0, dt)
                .unwrap()
                .ebar
                .last()
                .unwrap()
                .clone()
        };
        let coarse = run(1e-3);
        let fine = run(5e-4);
        for (a, b) in coarse.iter().zip(fine.iter()) {
            assert!(
                (a - b).abs() <= 1e-8 * b.abs().max(1e-3),
                "dt-halving changed terminal state: {a} vs {b}"
            );
        }
    }

    #[test]
    fn table_one_statistics_window() {
        let (plant, graph, gains) = example1();
        // Low-frequency sinusoid: mean ~ 0.2286, std ~ 0.0154 (10%).
        let noise = NoiseSpec {
            kind: NoiseKind::Sinusoid { offset: 0.3, amplitude: 0.3, omega: 20.0 },
            sharing: NoiseSharing::Common,
        };
        let trace =
            simulate(&plant, &graph, &gains, &noise, &[3.0], &[vec![5.0], vec![5.0]], 20.0, 1e-3)
                .unwrap();
        let stats = error_stats(&trace, 1, 5.0).unwrap();
        assert_close(stats.mean[0], 0.2286, 0.02286);
        assert_close(stats.std[0], 0.0154, 0.00154);

        // High-frequency sinusoid: mean ~ 0.2268, std ~ 0.0016.
        let noise = NoiseSpec {
            kind: NoiseKind::Sinusoid { offset: 0.3, amplitude: 0.3, omega: 200.0 },
            sharing: NoiseSharing::Common,
        };
        let trace =
            simulate(&plant, &graph, &gains, &noise, &[3.0], &[vec![5.0], vec![5.0]], 20.0, 1e-3)
                .unwrap();
        let stats = error_stats(&trace, 1, 5.0).unwrap();
        assert_close(stats.mean[0], 0.2268, 0.02268);
        assert_close(stats.std[0], 0.0016, 0.00016);

        // Constant noise: zero variance, mean at the steady state.
        let trace = simulate(
            &plant,
            &graph,
            &gains,
            &NoiseSpec::constant(0.3),
            &[3.0],
            &[vec![5.0], vec![5.0]],
            20.0,
            1e-3,
        )
        .unwrap();
        let stats = error_stats(&trace, 1, 10.0).unwrap();
        assert_close(stats.mean[0], 0.2272, 1e-3);
        assert!(stats.std[0] < 1e-9);
    }

    #[test]
    fn luenberger_table_one_baseline() {
        let plant = Plant::scalar(-0.5);
        let gain = LuenbergerGain::new(&plant, Matrix::scalar(2.0)).unwrap();
        let gains = GainSchedule::diagonal(gain.matrix(), 1);
        let graph = Digraph::self_loops_only(1);
        let noise = NoiseSpec {
            kind: NoiseKind::Sinusoid { offset: 0.3, amplitude: 0.3, omega: 20.0 },
            sharing: NoiseSharing::Common,
        };
        let trace =
            simulate(&plant, &graph, &gains, &noise, &[3.0], &[vec![5.0]], 20.0, 1e-3).unwrap();
        let stats = error_stats(&trace, 1, 5.0).unwrap();
        assert_close(stats.mean[0], 0.2419, 0.02419);
        assert_close(stats.std[0], 0.0211, 0.00211);
    }

    #[test]
    fn white_noise_is_reproducible_and_bounded() {
        let spec = NoiseSpec {
            kind: NoiseKind::White { amplitude: 0.5, seed: 42 },
            sharing: NoiseSharing::Independent,
        };
        let a = noise_sample(&spec, 0.1234, 1e-3, 0);
        let b = noise_sample(&spec, 0.1234, 1e-3, 0);
        assert_eq!(a, b);
        let c = noise_sample(&spec, 0.1234, 1e-3, 1);
        assert_ne!(a, c);
        for idx in 0..1000 {
            let v = noise_sample(&spec, idx as f64 * 1e-3, 1e-3, 0);
            assert!(v.abs() <= 0.5);
        }
        // Common sharing: identical across agents.
        let common = NoiseSpec { kind: spec.kind, sharing: NoiseSharing::Common };
        assert_eq!(noise_sample(&common, 0.5, 1e-3, 0), noise_sample(&common, 0.5, 1e-3, 3));
    }

    #[test]
    fn sinusoid_sample_values() {
        let spec = NoiseSpec {
            kind: NoiseKind::Sinusoid { offset: 0.3, amplitude: 0.3, omega: 20.0 },
            sharing: NoiseSharing::Common,
        };
        assert_close(noise_sample(&spec, 0.0, 1e-3, 0), 0.3, 1e-15);
        assert_close(
            noise_sample(&spec, 0.1, 1e-3, 0),
            0.3 + 0.3 * (2.0_f64).sin(),
            1e-15,
        );
        assert_eq!(noise_sample(&NoiseSpec::zero(), 1.0, 1e-3, 2), 0.0);
    }

    #[test]
    fn consensus_reaches_average_and_conserves_v() {
        let (plant, graph, gains) = example1();
        let trace = consensus_simulate(
            &plant,
            &graph,
            &gains,
            1.0,
            1.0,
            &[3.0],
            &[vec![5.0], vec![4.0]],
            &[vec![0.0], vec![1.0]],
            &[vec![0.5], vec![-0.5]],
            20.0,
            1e-3,
        )
        .unwrap();
        assert!(*trace.delta_max.last().unwrap() < 1e-6);
        assert!(trace.v_sum_norm.iter().all(|&v| v < 1e-9));
    }

    #[test]
    fn consensus_trivial_fixed_point() {
        // Plant at the origin, observers exact, agreement already at the
        // average: delta stays identically zero.
        let (plant, graph, gains) = example1();
        let trace = consensus_simulate(
            &plant,
            &graph,
            &gains,
            1.0,
            1.0,
            &[0.0],
            &[vec![0.0], vec![0.0]],
            &[vec![0.0], vec![0.0]],
            &[vec![0.0], vec![0.0]],
            2.0,
            1e-3,
        )
        .unwrap();
        assert!(trace.delta_max.iter().all(|&d| d < 1e-14));
    }

    #[test]
    fn consensus_rejects_bad_graphs_and_inputs() {
        let plant = Plant::scalar(-0.5);
        let graph = Digraph::from_adjacency(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let grid = vec![
            vec![Matrix::scalar(2.0), Matrix::scalar(0.0)],
            vec![Matrix::scalar(-1.0), Matrix::scalar(2.0)],
        ];
        let gains = GainSchedule::from_blocks(&grid).unwrap();
        let err = consensus_simulate(
            &plant,
            &graph,
            &gains,
            1.0,
            1.0,
            &[1.0],
            &[vec![0.0], vec![0.0]],
            &[vec![0.0], vec![0.0]],
            &[vec![0.0], vec![0.0]],
            1.0,
            1e-3,
        )
        .unwrap_err();
        assert!(matches!(err, SimError::Consensus(_)));

        // Nonzero v sum rejected.
        let (plant, graph, gains) = example1();
        let err = consensus_simulate(
            &plant,
            &graph,
            &gains,
            1.0,
            1.0,
            &[1.0],
            &[vec![0.0], vec![0.0]],
            &[vec![0.0], vec![0.0]],
            &[vec![0.3], vec![0.0]],
            1.0,
            1e-3,
        )
        .unwrap_err();
        assert!(matches!(err, SimError::Consensus(_)));
    }

    #[test]
    fn kl_bound_holds_along_trajectories() {
        let (plant, graph, gains) = example1();
        let es = assemble(&plant, &graph, &gains).unwrap();
        let noise = NoiseSpec {
            kind: NoiseKind::Sinusoid { offset: 0.3, amplitude: 0.3, omega: 20.0 },
            sharing: NoiseSharing::Common,
        };
        let trace =
            simulate(&plant, &graph, &gains, &noise, &[3.0], &[vec![5.0], vec![5.0]], 10.0, 1e-3)
                .unwrap();
        let e0 = 8.0_f64.sqrt();
        let m_inf = 0.6;
        for cond in [analysis::KlCondition::DistinctEig, analysis::KlCondition::Dissipative] {
            let bound = analysis::kl_bound(
                &es,
                cond,
                None,
                None,
                crate::system::ErrorOutput::Global,
                crate::system::NoiseInput::Common,
            )
            .unwrap();
            for idx in 0..trace.times.len() {
                let envelope = bound.envelope(e0, trace.times[idx], m_inf);
                assert!(
                    trace.ebar_norm(idx) <= envelope * (1.0 + 1e-9),
                    "KL bound ({:?}) violated at t = {}",
                    cond,
                    trace.times[idx]
                );
            }
        }
    }

    #[test]
    fn csv_export_layout() {
        let (plant, graph, gains) = example1();
        let trace = simulate(
            &plant,
            &graph,
            &gains,
            &NoiseSpec::constant(0.1),
            &[1.0],
            &[vec![0.0], vec![2.0]],
            0.01,
            1e-2,
        )
        .unwrap();
        let csv = trace.to_csv(1, 1, 2);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,x_1,xhat_1_1,xhat_2_1,ebar_1_1,ebar_2_1,m_1,m_2");
        assert_eq!(lines.count(), 2);
    }
}
