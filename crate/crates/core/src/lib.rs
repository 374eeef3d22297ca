//! Cavity-QED simulation of atomic EPR-pair preparation and teleportation
//! with three-level lambda atoms.
//!
//! The crate works on pure states of atoms and a truncated cavity mode:
//!
//! - [`fockspace`]: joint states, coherent and Fock states, fidelity, truncation diagnostics
//! - [`operators`]: dispersive lambda propagator, parity projectors, displacement,
//!   Jaynes–Cummings propagator, atomic rotations
//! - [`measurement`]: atomic detection, post-selection, branch enumeration and sampling
//! - [`protocols`]: EPR/Bell-pair preparation and teleportation with feed-forward
//! - [`qubitmodel`]: the XOR-gate qubit abstraction and its comparison to the physical model

pub mod error;
pub mod fockspace;
pub mod measurement;
pub mod operators;
pub mod protocols;
pub mod qubitmodel;

pub use error::{Result, SimError};
pub use fockspace::{CavityMode, ComplexAmp, CompositeState, Level, Subsystem};
