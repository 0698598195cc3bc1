//! Dyadic shell models of turbulence.
//!
//! A simulation and verification library for tree (KP), chain (DN) and
//! repeated-coefficients shell models, in deterministic and stochastic
//! form. Includes the special solutions used as non-uniqueness and blow-up
//! probes, the Girsanov linearisation with its closed second-moment system,
//! and a Fourier-space implementation of the transport-noise Ito corrector
//! with its dissipation/remainder decomposition.

pub mod corrector;
pub mod dynamics;
pub mod error;
pub mod expm;
pub mod girsanov;
pub mod io;
pub mod moments;
pub mod parallel;
pub mod philox;
pub mod scheme;
pub mod sde;
pub mod solutions;
pub mod spectral;
pub mod state;
pub mod topology;

pub use dynamics::{energy_budget, integrate, IntegrateOptions, ModelKind, ShellModel};
pub use error::{Error, Result};
pub use scheme::{coefficient_table, rcm_assign, CoefficientScheme, CoefficientTable};
pub use state::{energy, Method, ShellState, Trajectory};
pub use topology::{NodeId, Topology};
