//! Plant and observer models, and assembly of the networked error system.
//!
//! For a plant (A, C), a digraph with adjacency G and a gain grid K of
//! n-by-p blocks K_ij, the stacked estimation error obeys
//!
//!   de/dt = [I_N (x) A - (K * G^T)(I_N (x) C)] e + (K * G^T) m,
//!   ebar  = (D^-1 (x) I_n)(G^T (x) I_n) e,
//!
//! where (x) is the Kronecker product and * the blockwise Khatri-Rao mask.

use thiserror::Error;

use crate::graph::Digraph;
use crate::linalg::{self, kron, Matrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("gain block K_{i}{j} is nonzero but {j} is not an incoming neighbor of {i}")]
    GatingViolation { i: usize, j: usize },
    #[error("star design needs at least two agents, got {0}")]
    TooFewAgents(usize),
    #[error(transparent)]
    Linalg(#[from] linalg::LinalgError),
}

/// LTI plant x' = A x with noisy output y = C x + m.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    a: Matrix,
    c: Matrix,
}

impl Plant {
    pub fn new(a: Matrix, c: Matrix) -> Result<Plant, SystemError> {
        if !a.is_square() {
            return Err(SystemError::Dimension(format!(
                "state map must be square, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        if c.cols() != a.rows() {
            return Err(SystemError::Dimension(format!(
                "output map has {} columns but the state dimension is {}",
                c.cols(),
                a.rows()
            )));
        }
        Ok(Plant { a, c })
    }

    pub fn scalar(a: f64) -> Plant {
        Plant { a: Matrix::scalar(a), c: Matrix::scalar(1.0) }
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.c.rows()
    }

    /// PBH detectability test: rank [lambda I - A; C] = n for every
    /// eigenvalue with nonnegative real part.
    pub fn is_detectable(&self) -> Result<bool, SystemError> {
        let n = self.state_dim();
        let spec = linalg::eig(&self.a, false)?;
        let scale = self.a.spectral_norm().max(1.0);
        for lambda in spec.eigenvalues {
            if lambda.re < -1e-9 * scale {
                continue;
            }
            // Stack [lambda I - A; C] as a complex matrix and test the
            // smallest singular value through the real embedding.
            let rows = n + self.output_dim();
            let re = Matrix::from_fn(rows, n, |i, j| {
                if i < n {
                    let d = if i == j { lambda.re } else { 0.0 };
                    d - self.a[(i, j)]
                } else {
                    self.c[(i - n, j)]
                }
            });
            let im = Matrix::from_fn(rows, n, |i, j| {
                if i < n && i == j {
                    lambda.im
                } else {
                    0.0
                }
            });
            let embed = Matrix::from_fn(2 * rows, 2 * n, |i, j| {
                let (bi, ii) = (i / rows, i % rows);
                let (bj, jj) = (j / n, j % n);
                match (bi, bj) {
                    (0, 0) | (1, 1) => re[(ii, jj)],
                    (0, 1) => -im[(ii, jj)],
                    _ => im[(ii, jj)],
                }
            });
            let gram = &embed.transpose() * &embed;
            let (vals, _) = linalg::sym_eig(&gram);
            if vals[0].max(0.0).sqrt() <= 1e-9 * scale {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Output-injection gain of the baseline single observer.
#[derive(Debug, Clone, PartialEq)]
pub struct LuenbergerGain {
    k: Matrix,
}

impl LuenbergerGain {
    pub fn new(plant: &Plant, k: Matrix) -> Result<LuenbergerGain, SystemError> {
        if k.rows() != plant.state_dim() || k.cols() != plant.output_dim() {
            return Err(SystemError::Dimension(format!(
                "gain must be {}x{}, got {}x{}",
                plant.state_dim(),
                plant.output_dim(),
                k.rows(),
                k.cols()
            )));
        }
        Ok(LuenbergerGain { k })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.k
    }

    /// Closed-loop error map A - K_L C.
    pub fn error_matrix(&self, plant: &Plant) -> Matrix {
        plant.a() - &(&self.k * plant.c())
    }

    pub fn is_stabilizing(&self, plant: &Plant) -> Result<bool, SystemError> {
        Ok(linalg::spectral_abscissa(&self.error_matrix(plant))? < 0.0)
    }
}

/// N x N grid of n x p gain blocks; K_ij couples agent i to the innovation
/// of neighbor j.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSchedule {
    n_agents: usize,
    block_rows: usize,
    block_cols: usize,
    stacked: Matrix,
}

impl GainSchedule {
    pub fn from_blocks(blocks: &[Vec<Matrix>]) -> Result<GainSchedule, SystemError> {
        let n_agents = blocks.len();
        if n_agents == 0 || blocks.iter().any(|r| r.len() != n_agents) {
            return Err(SystemError::Dimension("gain grid must be square and nonempty".into()));
        }
        let block_rows = blocks[0][0].rows();
        let block_cols = blocks[0][0].cols();
        for row in blocks {
            for b in row {
                if b.rows() != block_rows || b.cols() != block_cols {
                    return Err(SystemError::Dimension(format!(
                        "all gain blocks must be {}x{}",
                        block_rows, block_cols
                    )));
                }
            }
        }
        Ok(GainSchedule {
            n_agents,
            block_rows,
            block_cols,
            stacked: Matrix::from_blocks(blocks),
        })
    }

    /// Builds the grid from the stacked (nN)x(pN) matrix.
    pub fn from_stacked(stacked: Matrix, n_agents: usize) -> Result<GainSchedule, SystemError> {
        if stacked.rows() % n_agents != 0 || stacked.cols() % n_agents != 0 {
            return Err(SystemError::Dimension(format!(
                "{}x{} does not partition into {n_agents}x{n_agents} blocks",
                stacked.rows(),
                stacked.cols()
            )));
        }
        Ok(GainSchedule {
            n_agents,
            block_rows: stacked.rows() / n_agents,
            block_cols: stacked.cols() / n_agents,
            stacked,
        })
    }

    /// Diagonal schedule with K_ii = k for all agents.
    pub fn diagonal(k: &Matrix, n_agents: usize) -> GainSchedule {
        let zero = Matrix::zeros(k.rows(), k.cols());
        let grid: Vec<Vec<Matrix>> = (0..n_agents)
            .map(|i| (0..n_agents).map(|j| if i == j { k.clone() } else { zero.clone() }).collect())
            .collect();
        GainSchedule::from_blocks(&grid).expect("diagonal grid is well-formed")
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn block(&self, i: usize, j: usize) -> Matrix {
        self.stacked.block(
            (i - 1) * self.block_rows,
            (j - 1) * self.block_cols,
            self.block_rows,
            self.block_cols,
        )
    }

    pub fn stacked(&self) -> &Matrix {
        &self.stacked
    }

    fn block_is_zero(&self, i: usize, j: usize) -> bool {
        self.block(i, j).max_abs() == 0.0
    }
}

/// Assembled error system (A, B, C) with its graph and dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSystem {
    a_cal: Matrix,
    b_cal: Matrix,
    c_cal: Matrix,
    digraph: Digraph,
    n: usize,
    p: usize,
    n_agents: usize,
}

/// Which noise enters the transfer map: one independent channel per agent
/// (input dimension pN) or a single channel common to all agents (input
/// dimension p).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseInput {
    Independent,
    Common,
}

/// Which error output the transfer map reports: the full stacked vector of
/// local averages, a single agent's block row, or the network-average
/// estimate error (1/N) sum_i ebar_i.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorOutput {
    Global,
    Local(usize),
    Average,
}

impl ErrorSystem {
    pub fn a_cal(&self) -> &Matrix {
        &self.a_cal
    }

    pub fn b_cal(&self) -> &Matrix {
        &self.b_cal
    }

    pub fn c_cal(&self) -> &Matrix {
        &self.c_cal
    }

    pub fn digraph(&self) -> &Digraph {
        &self.digraph
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn output_dim(&self) -> usize {
        self.p
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    /// Block row of C for agent i (rows (i-1)n .. in, 1-based agent index).
    pub fn local_output(&self, i: usize) -> Result<Matrix, SystemError> {
        if i == 0 || i > self.n_agents {
            return Err(SystemError::Dimension(format!(
                "agent index {i} out of range 1..={}",
                self.n_agents
            )));
        }
        Ok(self.c_cal.block((i - 1) * self.n, 0, self.n, self.n * self.n_agents))
    }

    /// Input matrix for the requested noise model.
    pub fn input_matrix(&self, noise: NoiseInput) -> Matrix {
        match noise {
            NoiseInput::Independent => self.b_cal.clone(),
            NoiseInput::Common => {
                // Stack m_i = m for all agents: B (1_N (x) I_p).
                let ones = Matrix::from_fn(self.n_agents, 1, |_, _| 1.0);
                &self.b_cal * &kron(&ones, &Matrix::identity(self.p))
            }
        }
    }

    /// Output matrix for the requested error selection.
    pub fn output_matrix(&self, output: ErrorOutput) -> Result<Matrix, SystemError> {
        match output {
            ErrorOutput::Global => Ok(self.c_cal.clone()),
            ErrorOutput::Local(i) => self.local_output(i),
            ErrorOutput::Average => {
                let avg = kron(
                    &Matrix::from_fn(1, self.n_agents, |_, _| 1.0 / self.n_agents as f64),
                    &Matrix::identity(self.n),
                );
                Ok(&avg * &self.c_cal)
            }
        }
    }
}

/// Assembles the networked error system, enforcing gain-edge gating: a
/// nonzero K_ij on a missing edge (j, i) is rejected.
pub fn assemble(
    plant: &Plant,
    graph: &Digraph,
    gains: &GainSchedule,
) -> Result<ErrorSystem, SystemError> {
    let n = plant.state_dim();
    let p = plant.output_dim();
    let n_agents = graph.node_count();
    if gains.n_agents() != n_agents {
        return Err(SystemError::Dimension(format!(
            "gain grid is {}x{} blocks but the graph has {} nodes",
            gains.n_agents(),
            gains.n_agents(),
            n_agents
        )));
    }
    if gains.block_rows != n || gains.block_cols != p {
        return Err(SystemError::Dimension(format!(
            "gain blocks must be {}x{} for this plant, got {}x{}",
            n, p, gains.block_rows, gains.block_cols
        )));
    }
    for i in 1..=n_agents {
        for j in 1..=n_agents {
            if !graph.has_edge(j, i) && !gains.block_is_zero(i, j) {
                return Err(SystemError::GatingViolation { i, j });
            }
        }
    }

    let g_t = graph.adjacency().transpose();
    let b_cal = linalg::khatri_rao(gains.stacked(), &g_t)?;
    let a_cal = &kron(&Matrix::identity(n_agents), plant.a())
        - &(&b_cal * &kron(&Matrix::identity(n_agents), plant.c()));
    let d_inv = Matrix::from_fn(n_agents, n_agents, |i, j| {
        if i == j {
            1.0 / graph.in_degree(i + 1) as f64
        } else {
            0.0
        }
    });
    let c_cal = kron(&(&d_inv * &g_t), &Matrix::identity(n));

    Ok(ErrorSystem { a_cal, b_cal, c_cal, digraph: graph.clone(), n, p, n_agents })
}

/// Single-observer reduction: the N = 1 special case of the interconnected
/// observer with gain K_L.
pub fn luenberger_error_system(
    plant: &Plant,
    gain: &LuenbergerGain,
) -> Result<ErrorSystem, SystemError> {
    let gains = GainSchedule::diagonal(gain.matrix(), 1);
    assemble(plant, &Digraph::self_loops_only(1), &gains)
}

/// Star design of the local-gain guarantee: agent 1 broadcasts, every agent
/// keeps the Luenberger gain on itself, and agents 2..N apply
/// K_i1 = alpha_tilde K_L to agent 1's innovation.
pub fn star_design(
    plant: &Plant,
    gain: &LuenbergerGain,
    n_agents: usize,
    alpha_tilde: f64,
) -> Result<(Digraph, GainSchedule), SystemError> {
    if n_agents < 2 {
        return Err(SystemError::TooFewAgents(n_agents));
    }
    let k_l = gain.matrix();
    if k_l.rows() != plant.state_dim() || k_l.cols() != plant.output_dim() {
        return Err(SystemError::Dimension(format!(
            "gain must be {}x{} for this plant",
            plant.state_dim(),
            plant.output_dim()
        )));
    }
    let graph = Digraph::star_broadcast(n_agents);
    let zero = Matrix::zeros(k_l.rows(), k_l.cols());
    let grid: Vec<Vec<Matrix>> = (1..=n_agents)
        .map(|i| {
            (1..=n_agents)
                .map(|j| {
                    if i == j {
                        k_l.clone()
                    } else if j == 1 {
                        k_l.scale(alpha_tilde)
                    } else {
                        zero.clone()
                    }
                })
                .collect()
        })
        .collect();
    Ok((graph, GainSchedule::from_blocks(&grid)?))
}
