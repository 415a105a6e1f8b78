pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod fock;
pub mod hamiltonians;
pub mod linalg;
pub mod model;
pub mod qspace;
pub mod rng;
pub mod sparse;
pub mod spectral;
