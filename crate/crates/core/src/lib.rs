//! Stochastic collapse dynamics on composite quantum systems.
//!
//! The crate integrates an Itô collapse equation driven by a mass-weighted
//! interaction operator, measures entanglement across subsystem bipartitions
//! and audits conserved quantities along trajectories and ensembles.

pub mod cli;
pub mod conservation;
pub mod entanglement;
pub mod error;
pub mod hilbert;
pub mod integrator;
pub mod lindblad;
pub mod operators;
pub mod persist;
pub mod quadrature;
pub mod scenario;
pub mod sparse;
pub mod wavepacket;

pub use error::{Error, Result};
pub use hilbert::{make_product_state, CompositeSpace, StateVector, SubsystemKind, SubsystemSpec};
pub use integrator::{run_ensemble, Dynamics, IntegrationPlan, NoiseKind, TrajectoryRecord};
pub use operators::{assemble_hamiltonian, collapse_operator, AssembledOperator, CollapseParams, OperatorSpec, OperatorTerm, PairPotential};
pub use scenario::{builtin_scenario, load_config, ScenarioConfig};
pub use sparse::CsrMatrix;
