//! Numerical laboratory for kinetic transport on curved and trapping geometries.
//!
//! The crate covers metric fields with their Hamiltonian flows, transport
//! observables (velocity averages and mixed norms), a Boltzmann collision
//! operator with a monotone iteration scheme, and semiclassical checks built
//! on Weyl quantization.

pub mod boltzmann;
pub mod collision;
pub mod config;
pub mod error;
pub mod field;
pub mod flow;
pub mod io;
pub mod jet;
pub mod kt;
pub mod metric;
pub mod quad;
pub mod semiclassical;
pub mod transport;
pub mod trapped;
pub mod verify;

pub use error::{LabError, Result};
