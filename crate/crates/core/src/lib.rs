//! Entanglement detection for bipartite quantum states via covariance
//! matrices of local observables.
//!
//! A state `ρ` on `C^{d_A} ⊗ C^{d_B}` is separable only if its block
//! covariance matrix dominates a direct sum of local covariance matrices.
//! The [`criteria`] module evaluates computable consequences of that
//! condition (trace norms, operator Schmidt coefficients, the local filter
//! normal form, and an exact semidefinite program for two qubits) alongside
//! the PPT and realignment baselines.

pub mod covariance;
pub mod criteria;
pub mod density;
pub mod error;
pub mod filtering;
pub mod harness;
pub mod io;
pub mod matlin;
pub mod observables;
pub mod schmidt;
pub mod sdp;
pub mod states;

pub use criteria::{run_all, CriteriaOptions, Criterion, CriterionVerdict, VerdictStatus};
pub use density::DensityMatrix;
pub use error::{Error, Result};
pub use observables::{BasisKind, ObservableBasis};
