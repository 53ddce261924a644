//! Metropolis simulation of the two-dimensional q-state clock model and its
//! continuous XY limit, aimed at one question: how long does a fully
//! polarized lattice remember its initial direction?
//!
//! * [`lattice`]: periodic spin lattice and clock-model energy
//! * [`dynamics`]: single-spin Metropolis updates and the sweep time unit
//! * [`observables`]: magnetization, census, polarization sectors
//! * [`cluster`]: same-species droplets and torus winding
//! * [`experiments`]: memory-time protocol, ensembles, precession, exact oracle
//! * [`fit`]: power-law exponents and growth classification
//! * [`io`]: CSV tables and JSON documents

pub mod cluster;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod io;
pub mod lattice;
pub mod observables;
pub mod params;
pub mod rng;

pub use error::{Error, Result};
pub use lattice::{Fill, SpinLattice, SpinState};
pub use params::{Cardinality, ModelParams};
