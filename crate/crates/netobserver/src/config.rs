//! Config-file schema: TOML with the system sections (plant, graph, gains,
//! luenberger) plus task and output sections. Unknown keys are rejected so
//! typos fail loudly before any computation runs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Digraph;
use crate::linalg::Matrix;
use crate::system::{GainSchedule, LuenbergerGain, Plant};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config schema error: {0}")]
    Schema(String),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    /// State map, row-major.
    pub a: Vec<Vec<f64>>,
    /// Output map, row-major.
    pub c: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    /// Row-major 0/1 adjacency; g[i][j] = 1 iff node i+1 sends to node j+1.
    pub adjacency: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GainsSection {
    /// N x N grid of n x p blocks, row-major at every level.
    pub blocks: Vec<Vec<Vec<Vec<f64>>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LuenbergerSection {
    pub k_l: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    /// zero | constant | sinusoid | white
    pub kind: String,
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default)]
    pub omega: f64,
    #[serde(default)]
    pub seed: u64,
    /// common | independent
    #[serde(default = "default_sharing")]
    pub sharing: String,
}

fn default_sharing() -> String {
    "common".into()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConsensusSection {
    pub beta1: f64,
    pub beta2: f64,
    pub xi0: Vec<Vec<f64>>,
    pub v0: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct TaskSection {
    pub sigma: Option<f64>,
    pub gamma_star: Option<f64>,
    pub n_agents: Option<usize>,
    /// global | local-<i> | average
    pub objective: Option<String>,
    /// common-p | bmi-alternate | dilated | separated
    pub method: Option<String>,
    pub noise: Option<NoiseSection>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub transient_cut: Option<f64>,
    pub x0: Option<Vec<f64>>,
    pub xhat0: Option<Vec<Vec<f64>>>,
    pub consensus: Option<ConsensusSection>,
    pub n_set: Option<Vec<usize>>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub max_gain: Option<f64>,
    /// Tables to regenerate in `report`: subset of ["I", "II", "III", "IV"].
    pub tables: Option<Vec<String>>,
}

/// Solver evidence attached to emitted design files.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct CertificateSection {
    pub method: Option<String>,
    /// Verified norm of the realized design.
    pub gamma: Option<f64>,
    /// Verified decay rate of the realized design.
    pub rate: Option<f64>,
    /// Smallest feasible gamma seen by the matrix-inequality bisection.
    pub lmi_gamma: Option<f64>,
    /// Lyapunov matrices, row-major.
    pub p_matrices: Option<Vec<Vec<Vec<f64>>>>,
    /// Worst constraint margin of the certificate (negative = strict).
    pub margin: Option<f64>,
    pub solver_iterations: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
    pub formats: Option<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub plant: PlantSection,
    pub graph: Option<GraphSection>,
    pub gains: Option<GainsSection>,
    pub luenberger: Option<LuenbergerSection>,
    #[serde(default)]
    pub task: TaskSection,
    #[serde(default)]
    pub output: OutputSection,
    pub certificate: Option<CertificateSection>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn plant(&self) -> Result<Plant, ConfigError> {
        let a = Matrix::from_rows(&self.plant.a)
            .map_err(|e| ConfigError::Schema(format!("plant.a: {e}")))?;
        let c = Matrix::from_rows(&self.plant.c)
            .map_err(|e| ConfigError::Schema(format!("plant.c: {e}")))?;
        Plant::new(a, c).map_err(|e| ConfigError::Schema(format!("plant: {e}")))
    }

    pub fn graph(&self) -> Result<Digraph, ConfigError> {
        let section = self
            .graph
            .as_ref()
            .ok_or_else(|| ConfigError::Schema("missing [graph] section".into()))?;
        Digraph::from_adjacency(&section.adjacency)
            .map_err(|e| ConfigError::Schema(format!("graph.adjacency: {e}")))
    }

    pub fn gains(&self) -> Result<GainSchedule, ConfigError> {
        let section = self
            .gains
            .as_ref()
            .ok_or_else(|| ConfigError::Schema("missing [gains] section".into()))?;
        let grid: Vec<Vec<Matrix>> = section
            .blocks
            .iter()
            .map(|row| {
                row.iter()
                    .map(|b| {
                        Matrix::from_rows(b)
                            .map_err(|e| ConfigError::Schema(format!("gains.blocks: {e}")))
                    })
                    .collect::<Result<_, _>>()
            })
            .collect::<Result<_, _>>()?;
        GainSchedule::from_blocks(&grid).map_err(|e| ConfigError::Schema(format!("gains: {e}")))
    }

    pub fn luenberger(&self, plant: &Plant) -> Result<Option<LuenbergerGain>, ConfigError> {
        match &self.luenberger {
            None => Ok(None),
            Some(l) => {
                let k = Matrix::from_rows(&l.k_l)
                    .map_err(|e| ConfigError::Schema(format!("luenberger.k_l: {e}")))?;
                LuenbergerGain::new(plant, k)
                    .map(Some)
                    .map_err(|e| ConfigError::Schema(format!("luenberger: {e}")))
            }
        }
    }

    pub fn noise(&self) -> Result<crate::sim::NoiseSpec, ConfigError> {
        use crate::sim::{NoiseKind, NoiseSharing, NoiseSpec};
        let section = match &self.task.noise {
            Some(n) => n,
            None => return Ok(NoiseSpec::zero()),
        };
        let kind = match section.kind.as_str() {
            "zero" => NoiseKind::Zero,
            "constant" => NoiseKind::Constant { offset: section.offset },
            "sinusoid" => NoiseKind::Sinusoid {
                offset: section.offset,
                amplitude: section.amplitude,
                omega: section.omega,
            },
            "white" => NoiseKind::White { amplitude: section.amplitude, seed: section.seed },
            other => {
                return Err(ConfigError::Schema(format!(
                    "task.noise.kind must be zero|constant|sinusoid|white, got {other:?}"
                )))
            }
        };
        let sharing = match section.sharing.as_str() {
            "common" => NoiseSharing::Common,
            "independent" => NoiseSharing::Independent,
            other => {
                return Err(ConfigError::Schema(format!(
                    "task.noise.sharing must be common|independent, got {other:?}"
                )))
            }
        };
        Ok(NoiseSpec { kind, sharing })
    }

    pub fn objective(&self) -> Result<crate::lmi::HinfObjective, ConfigError> {
        use crate::lmi::HinfObjective;
        match self.task.objective.as_deref() {
            None | Some("global") => Ok(HinfObjective::Global),
            Some("average") => Ok(HinfObjective::Average),
            Some(other) => {
                if let Some(idx) = other.strip_prefix("local-") {
                    let i: usize = idx.parse().map_err(|_| {
                        ConfigError::Schema(format!("bad local objective index {other:?}"))
                    })?;
                    if i == 0 {
                        return Err(ConfigError::Schema("agent indices are 1-based".into()));
                    }
                    Ok(HinfObjective::Local(i))
                } else {
                    Err(ConfigError::Schema(format!(
                        "task.objective must be global|average|local-<i>, got {other:?}"
                    )))
                }
            }
        }
    }
}

/// Serializes a realized design back into the config schema (round-trips
/// bit-exactly through the shortest-roundtrip float formatting).
pub fn design_to_config(plant: &Plant, graph: &Digraph, gains: &GainSchedule) -> RunConfig {
    let mat_rows = |m: &Matrix| -> Vec<Vec<f64>> {
        (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
    };
    let n_agents = graph.node_count();
    let blocks: Vec<Vec<Vec<Vec<f64>>>> = (1..=n_agents)
        .map(|i| (1..=n_agents).map(|j| mat_rows(&gains.block(i, j))).collect())
        .collect();
    RunConfig {
        plant: PlantSection { a: mat_rows(plant.a()), c: mat_rows(plant.c()) },
        graph: Some(GraphSection {
            adjacency: (1..=n_agents)
                .map(|i| {
                    (1..=n_agents).map(|j| if graph.has_edge(i, j) { 1.0 } else { 0.0 }).collect()
                })
                .collect(),
        }),
        gains: Some(GainsSection { blocks }),
        luenberger: None,
        task: TaskSection::default(),
        output: OutputSection::default(),
        certificate: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::assemble;

    const EXAMPLE: &str = r#"
[plant]
a = [[-0.5]]
c = [[1.0]]

[graph]
adjacency = [[1.0, 1.0], [0.0, 1.0]]

[gains]
blocks = [[[[2.0]], [[0.0]]], [[[-1.0]], [[2.0]]]]

[luenberger]
k_l = [[2.0]]

[task]
sigma = 2.5

[task.noise]
kind = "sinusoid"
offset = 0.3
amplitude = 0.3
omega = 20.0
"#;

    #[test]
    fn parses_and_builds_domain_types() {
        let cfg = RunConfig::from_toml(EXAMPLE).unwrap();
        let plant = cfg.plant().unwrap();
        assert_eq!(plant.state_dim(), 1);
        let graph = cfg.graph().unwrap();
        assert_eq!(graph.node_count(), 2);
        let gains = cfg.gains().unwrap();
        assert_eq!(gains.block(2, 1)[(0, 0)], -1.0);
        assert!(cfg.luenberger(&plant).unwrap().is_some());
        assert_eq!(cfg.task.sigma, Some(2.5));
        let noise = cfg.noise().unwrap();
        assert_eq!(noise.sup_norm(1), 0.6);
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = format!("{EXAMPLE}\n[task.extra]\nfoo = 1\n");
        assert!(RunConfig::from_toml(&bad).is_err());
        let bad = EXAMPLE.replace("[plant]", "[plant]\nbogus = 3.0");
        assert!(RunConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn objective_parsing() {
        let mut cfg = RunConfig::from_toml(EXAMPLE).unwrap();
        assert_eq!(cfg.objective().unwrap(), crate::lmi::HinfObjective::Global);
        cfg.task.objective = Some("local-2".into());
        assert_eq!(cfg.objective().unwrap(), crate::lmi::HinfObjective::Local(2));
        cfg.task.objective = Some("average".into());
        assert_eq!(cfg.objective().unwrap(), crate::lmi::HinfObjective::Average);
        cfg.task.objective = Some("local-0".into());
        assert!(cfg.objective().is_err());
        cfg.task.objective = Some("sideways".into());
        assert!(cfg.objective().is_err());
    }

    #[test]
    fn round_trip_reassembles_bit_exactly() {
        let cfg = RunConfig::from_toml(EXAMPLE).unwrap();
        let plant = cfg.plant().unwrap();
        let graph = cfg.graph().unwrap();
        let gains = cfg.gains().unwrap();
        let es = assemble(&plant, &graph, &gains).unwrap();

        let serialized = design_to_config(&plant, &graph, &gains).to_toml();
        let parsed = RunConfig::from_toml(&serialized).unwrap();
        let es2 = assemble(
            &parsed.plant().unwrap(),
            &parsed.graph().unwrap(),
            &parsed.gains().unwrap(),
        )
        .unwrap();
        assert_eq!(es.a_cal(), es2.a_cal());
        assert_eq!(es.b_cal(), es2.b_cal());
        assert_eq!(es.c_cal(), es2.c_cal());
    }

    #[test]
    fn round_trip_preserves_awkward_floats() {
        // Shortest-roundtrip formatting must reproduce the exact bits.
        let plant = Plant::scalar(-1.0 / 3.0);
        let graph = Digraph::all_to_all(2);
        let vals = [0.1 + 0.2, 1e-17, -3.0e17, 1.7896];
        let grid = vec![
            vec![Matrix::scalar(vals[0]), Matrix::scalar(vals[1])],
            vec![Matrix::scalar(vals[2]), Matrix::scalar(vals[3])],
        ];
        let gains = GainSchedule::from_blocks(&grid).unwrap();
        let text = design_to_config(&plant, &graph, &gains).to_toml();
        let parsed = RunConfig::from_toml(&text).unwrap();
        let gains2 = parsed.gains().unwrap();
        for i in 1..=2 {
            for j in 1..=2 {
                assert_eq!(
                    gains.block(i, j)[(0, 0)].to_bits(),
                    gains2.block(i, j)[(0, 0)].to_bits()
                );
            }
        }
    }
}
