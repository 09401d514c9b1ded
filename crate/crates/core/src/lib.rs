//! Open-system dynamics of storage resonators coupled through a common bus
//! resonator.
//!
//! The crate builds truncated Fock-space operators ([`fock`]), the device
//! Hamiltonian in lab, interaction and dispersive-effective frames
//! ([`device`]), integrates the Schrodinger and Lindblad equations with
//! fixed-step RK4 ([`engine`]), and evaluates Bell-state fidelities for the
//! built-in golden scenarios ([`scenario`]). [`oracle`] holds the closed-form
//! two-level solution used to cross-check the numerics.

pub mod analysis;
pub mod device;
pub mod engine;
pub mod error;
pub mod fock;
pub mod io;
pub mod observables;
pub mod oracle;
pub mod scenario;

pub use error::{Error, IntegratorFailure, Result};
