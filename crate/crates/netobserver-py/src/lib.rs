//! Python bindings: plants, digraphs, assembled error systems, the
//! synthesis entry points, and time-domain simulation.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use netobserver::analysis::{self, KlCondition, TransferRealization};
use netobserver::graph;
use netobserver::linalg::{self, Matrix};
use netobserver::lmi::{self, AlternationOptions, HinfObjective};
use netobserver::sim;
use netobserver::system::{self, ErrorOutput, GainSchedule, LuenbergerGain, NoiseInput};

fn to_py_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> PyResult<Matrix> {
    Matrix::from_rows(rows).map_err(to_py_err)
}

fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn gains_from_blocks(blocks: Vec<Vec<Vec<Vec<f64>>>>) -> PyResult<GainSchedule> {
    let grid: Vec<Vec<Matrix>> = blocks
        .iter()
        .map(|row| row.iter().map(|b| matrix_from_rows(b)).collect::<PyResult<_>>())
        .collect::<PyResult<_>>()?;
    GainSchedule::from_blocks(&grid).map_err(to_py_err)
}

fn gains_to_blocks(gains: &GainSchedule) -> Vec<Vec<Vec<Vec<f64>>>> {
    let n = gains.n_agents();
    (1..=n)
        .map(|i| (1..=n).map(|j| matrix_to_rows(&gains.block(i, j))).collect())
        .collect()
}

fn parse_output(output: &str) -> PyResult<ErrorOutput> {
    match output {
        "global" => Ok(ErrorOutput::Global),
        "average" => Ok(ErrorOutput::Average),
        other => match other.strip_prefix("local-") {
            Some(idx) => idx
                .parse()
                .map(ErrorOutput::Local)
                .map_err(|_| to_py_err(format!("bad output selector {other:?}"))),
            None => Err(to_py_err(format!(
                "output must be global|average|local-<i>, got {other:?}"
            ))),
        },
    }
}

fn parse_noise(noise: &str) -> PyResult<NoiseInput> {
    match noise {
        "independent" => Ok(NoiseInput::Independent),
        "common" => Ok(NoiseInput::Common),
        other => Err(to_py_err(format!("noise must be independent|common, got {other:?}"))),
    }
}

fn parse_objective(objective: &str) -> PyResult<HinfObjective> {
    match parse_output(objective)? {
        ErrorOutput::Global => Ok(HinfObjective::Global),
        ErrorOutput::Average => Ok(HinfObjective::Average),
        ErrorOutput::Local(i) => Ok(HinfObjective::Local(i)),
    }
}

/// LTI plant x' = A x, y = C x + m.
#[pyclass]
#[derive(Clone)]
struct Plant {
    inner: system::Plant,
}

#[pymethods]
impl Plant {
    #[new]
    fn new(a: Vec<Vec<f64>>, c: Vec<Vec<f64>>) -> PyResult<Self> {
        let plant =
            system::Plant::new(matrix_from_rows(&a)?, matrix_from_rows(&c)?).map_err(to_py_err)?;
        Ok(Plant { inner: plant })
    }

    #[staticmethod]
    fn scalar(a: f64) -> Plant {
        Plant { inner: system::Plant::scalar(a) }
    }

    fn state_dim(&self) -> usize {
        self.inner.state_dim()
    }

    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }

    fn is_detectable(&self) -> PyResult<bool> {
        self.inner.is_detectable().map_err(to_py_err)
    }
}

/// Directed communication graph with mandatory self-loops.
#[pyclass]
#[derive(Clone)]
struct Digraph {
    inner: graph::Digraph,
}

#[pymethods]
impl Digraph {
    #[new]
    fn new(adjacency: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Digraph { inner: graph::Digraph::from_adjacency(&adjacency).map_err(to_py_err)? })
    }

    #[staticmethod]
    fn all_to_all(n: usize) -> Digraph {
        Digraph { inner: graph::Digraph::all_to_all(n) }
    }

    #[staticmethod]
    fn self_loops_only(n: usize) -> Digraph {
        Digraph { inner: graph::Digraph::self_loops_only(n) }
    }

    #[staticmethod]
    fn star_broadcast(n: usize) -> Digraph {
        Digraph { inner: graph::Digraph::star_broadcast(n) }
    }

    fn adjacency(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&self.inner.adjacency())
    }

    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    fn in_degree_matrix(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&self.inner.in_degree_matrix())
    }

    fn incoming_neighbors(&self, i: usize) -> PyResult<Vec<usize>> {
        self.inner.incoming_neighbors(i).map_err(to_py_err)
    }

    fn laplacian(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&self.inner.laplacian(true))
    }

    fn is_strongly_connected(&self) -> bool {
        self.inner.is_strongly_connected()
    }

    fn is_weight_balanced(&self) -> bool {
        self.inner.is_weight_balanced()
    }
}

/// Assembled networked error system.
#[pyclass]
struct ErrorSystem {
    plant: system::Plant,
    graph: graph::Digraph,
    gains: GainSchedule,
    inner: system::ErrorSystem,
}

#[pymethods]
impl ErrorSystem {
    fn a(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(self.inner.a_cal())
    }

    fn b(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(self.inner.b_cal())
    }

    fn c(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(self.inner.c_cal())
    }

    fn eigenvalues(&self) -> PyResult<Vec<(f64, f64)>> {
        let spec = linalg::eig(self.inner.a_cal(), false).map_err(to_py_err)?;
        Ok(spec.eigenvalues.iter().map(|l| (l.re, l.im)).collect())
    }

    fn convergence_rate(&self) -> PyResult<f64> {
        analysis::convergence_rate(&self.inner).map_err(to_py_err)
    }

    fn log_norm(&self) -> PyResult<f64> {
        linalg::log_norm(self.inner.a_cal()).map_err(to_py_err)
    }

    /// H-infinity norm of the selected noise-to-error map.
    #[pyo3(signature = (output = "global", noise = "independent", rel_tol = 1e-7))]
    fn hinf(&self, output: &str, noise: &str, rel_tol: f64) -> PyResult<f64> {
        let t = TransferRealization::from_error_system(
            &self.inner,
            parse_output(output)?,
            parse_noise(noise)?,
        )
        .map_err(to_py_err)?;
        analysis::hinf_norm(&t, rel_tol).map_err(to_py_err)
    }

    /// KL bound (c, lambda, g) under "distinct-eig" or "dissipative".
    #[pyo3(signature = (condition, output = "global", noise = "independent"))]
    fn kl_bound(&self, condition: &str, output: &str, noise: &str) -> PyResult<(f64, f64, f64)> {
        let cond = match condition {
            "distinct-eig" => KlCondition::DistinctEig,
            "dissipative" => KlCondition::Dissipative,
            other => {
                return Err(to_py_err(format!(
                    "condition must be distinct-eig|dissipative, got {other:?}"
                )))
            }
        };
        let b = analysis::kl_bound(
            &self.inner,
            cond,
            None,
            None,
            parse_output(output)?,
            parse_noise(noise)?,
        )
        .map_err(to_py_err)?;
        Ok((b.coeff, b.rate, b.noise_gain))
    }

    /// Steady-state local error under constant per-agent noise.
    fn steady_state(&self, m_const: Vec<f64>) -> PyResult<Vec<f64>> {
        let ss = analysis::steady_state_error(&self.inner, &Matrix::col_vec(&m_const))
            .map_err(to_py_err)?;
        Ok(ss.data().to_vec())
    }

    /// Simulates the design and returns {"t", "x", "xhat", "ebar", "m"}.
    #[pyo3(signature = (x0, xhat0, t_end, dt, noise_kind = "zero", offset = 0.0, amplitude = 0.0, omega = 0.0, seed = 0, sharing = "common"))]
    #[allow(clippy::too_many_arguments)]
    fn simulate<'py>(
        &self,
        py: Python<'py>,
        x0: Vec<f64>,
        xhat0: Vec<Vec<f64>>,
        t_end: f64,
        dt: f64,
        noise_kind: &str,
        offset: f64,
        amplitude: f64,
        omega: f64,
        seed: u64,
        sharing: &str,
    ) -> PyResult<Bound<'py, PyDict>> {
        let kind = match noise_kind {
            "zero" => sim::NoiseKind::Zero,
            "constant" => sim::NoiseKind::Constant { offset },
            "sinusoid" => sim::NoiseKind::Sinusoid { offset, amplitude, omega },
            "white" => sim::NoiseKind::White { amplitude, seed },
            other => return Err(to_py_err(format!("unknown noise kind {other:?}"))),
        };
        let sharing = match sharing {
            "common" => sim::NoiseSharing::Common,
            "independent" => sim::NoiseSharing::Independent,
            other => return Err(to_py_err(format!("unknown sharing {other:?}"))),
        };
        let trace = sim::simulate(
            &self.plant,
            &self.graph,
            &self.gains,
            &sim::NoiseSpec { kind, sharing },
            &x0,
            &xhat0,
            t_end,
            dt,
        )
        .map_err(to_py_err)?;
        let out = PyDict::new(py);
        out.set_item("t", trace.times.clone())?;
        out.set_item("x", trace.x.clone())?;
        out.set_item("xhat", trace.xhat.clone())?;
        out.set_item("ebar", trace.ebar.clone())?;
        out.set_item("m", trace.m.clone())?;
        Ok(out)
    }
}

/// Assembles the networked error system from a plant, a digraph and the
/// N x N grid of gain blocks.
#[pyfunction]
fn assemble(plant: &Plant, graph: &Digraph, blocks: Vec<Vec<Vec<Vec<f64>>>>) -> PyResult<ErrorSystem> {
    let gains = gains_from_blocks(blocks)?;
    let inner = system::assemble(&plant.inner, &graph.inner, &gains).map_err(to_py_err)?;
    Ok(ErrorSystem { plant: plant.inner.clone(), graph: graph.inner.clone(), gains, inner })
}

/// Common-Lyapunov gain synthesis; returns {"gains", "gamma", "rate"}.
#[pyfunction]
#[pyo3(signature = (plant, graph, sigma, objective = "global"))]
fn design_common_p<'py>(
    py: Python<'py>,
    plant: &Plant,
    graph: &Digraph,
    sigma: f64,
    objective: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let d = lmi::design_common_p(&plant.inner, &graph.inner, sigma, parse_objective(objective)?, None)
        .map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("gains", gains_to_blocks(&d.gains))?;
    out.set_item("gamma", d.gamma)?;
    out.set_item("rate", d.rate)?;
    Ok(out)
}

/// Fixed-graph synthesis (alternation plus verified polish); returns
/// {"gains", "gamma", "rate"}.
#[pyfunction]
#[pyo3(signature = (plant, graph, sigma, objective = "global", seed = 0x5EED, polish_evals = 2000))]
fn design_fixed_graph<'py>(
    py: Python<'py>,
    plant: &Plant,
    graph: &Digraph,
    sigma: f64,
    objective: &str,
    seed: u64,
    polish_evals: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let opts = AlternationOptions { seed, polish_evals, ..Default::default() };
    let d = lmi::design_fixed_graph(
        &plant.inner,
        &graph.inner,
        sigma,
        parse_objective(objective)?,
        &opts,
        None,
    )
    .map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("gains", gains_to_blocks(&d.gains))?;
    out.set_item("gamma", d.gamma)?;
    out.set_item("rate", d.rate)?;
    Ok(out)
}

/// Local-gain guarantee: solves the certificate and realizes the two-agent
/// star; returns {"alpha_tilde", "p", "gamma_l", "local_gamma"}.
#[pyfunction]
fn local_gain_certificate<'py>(
    py: Python<'py>,
    plant: &Plant,
    k_l: Vec<Vec<f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let gain = LuenbergerGain::new(&plant.inner, matrix_from_rows(&k_l)?).map_err(to_py_err)?;
    let cert = lmi::local_gain_certificate(&plant.inner, &gain).map_err(to_py_err)?;
    let out = PyDict::new(py);
    out.set_item("alpha_tilde", cert.alpha_tilde)?;
    out.set_item("p", matrix_to_rows(&cert.p))?;
    out.set_item("gamma_l", cert.gamma_l)?;
    out.set_item("local_gamma", cert.local_gamma)?;
    Ok(out)
}

/// H-infinity norm of an explicit state-space realization.
#[pyfunction]
#[pyo3(signature = (a, b, c, rel_tol = 1e-7))]
fn hinf_norm(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>, c: Vec<Vec<f64>>, rel_tol: f64) -> PyResult<f64> {
    let t = TransferRealization::new(
        matrix_from_rows(&a)?,
        matrix_from_rows(&b)?,
        matrix_from_rows(&c)?,
        None,
    )
    .map_err(to_py_err)?;
    analysis::hinf_norm(&t, rel_tol).map_err(to_py_err)
}

#[pymodule]
fn netobserver_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Plant>()?;
    m.add_class::<Digraph>()?;
    m.add_class::<ErrorSystem>()?;
    m.add_function(wrap_pyfunction!(assemble, m)?)?;
    m.add_function(wrap_pyfunction!(design_common_p, m)?)?;
    m.add_function(wrap_pyfunction!(design_fixed_graph, m)?)?;
    m.add_function(wrap_pyfunction!(local_gain_certificate, m)?)?;
    m.add_function(wrap_pyfunction!(hinf_norm, m)?)?;
    Ok(())
}
