//! Dynamical control of local decoherence in multipartite, multilevel systems.
//!
//! The crate is generic over the scalar type (`f32` or `f64`); the aliases at
//! the bottom fix it to `f64`, which is what the command-line tool uses.

pub mod bath;
pub mod decay;
pub mod dephasing;
pub mod error;
pub mod linalg;
pub mod modulation;
pub mod optimizer;
pub mod oracle;
pub mod quadrature;
pub mod recipes;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub type DecayScenarioF64 = decay::DecayScenario<f64>;
pub type DecayEngineF64 = decay::DecayEngine<f64>;
pub type DecoherenceHistoryF64 = decay::DecoherenceHistory<f64>;
pub type DephasingScenarioF64 = dephasing::DephasingScenario<f64>;
pub type DephasingIntegralsF64 = dephasing::DephasingIntegrals<f64>;
pub type BathModelF64 = bath::BathModel<f64>;
pub type ModulationScheduleF64 = modulation::ModulationSchedule<f64>;
pub type OptimizationProblemF64 = optimizer::OptimizationProblem<f64>;
pub type OptimizationResultF64 = optimizer::OptimizationResult<f64>;
pub type ComplexF64 = num_complex::Complex<f64>;
