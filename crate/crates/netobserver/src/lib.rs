//! Design and analysis toolkit for interconnected Luenberger-type observers
//! over directed graphs.
//!
//! The toolkit assembles the networked error system of a bank of coupled
//! observers, certifies convergence rate and noise robustness (KL bounds,
//! H-infinity norms), synthesizes gains and connectivity graphs through
//! small dense matrix-inequality problems, and validates designs by
//! time-domain simulation.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod graph;
pub mod linalg;
pub mod lmi;
pub mod sim;
pub mod system;

pub use graph::Digraph;
pub use linalg::Matrix;
pub use system::{ErrorSystem, GainSchedule, LuenbergerGain, Plant};
