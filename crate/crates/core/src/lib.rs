//! Open-system dynamics of a parametrically driven anharmonic (Kerr)
//! oscillator: master-equation integration, quantum-state-diffusion
//! trajectory ensembles, and phase-space observables, all over a truncated
//! Fock basis.

pub mod error;
pub mod fock;
pub mod master;
pub mod model;
pub mod phase_space;
pub mod qsd;

pub use error::{Result, SimError};
