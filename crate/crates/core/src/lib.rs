//! Simulation toolkit for the 2D transverse-field quantum Ising model on
//! periodic square lattices: random-state sampling, energy/magnetization/
//! entanglement observables, spin-spin correlations, and reproducible CSV
//! datasets.

pub mod analysis;
pub mod entanglement;
pub mod error;
pub mod lattice;
pub mod operators;
pub mod sampler;
pub mod states;

pub use error::CoreError;
