//! Driven tilted tight-binding chains with complex hopping.
//!
//! The crate computes Bessel-function eigensystems and propagators of the
//! chain `κ(t) Σ (|n><n+1| + h.c.) + ω0 Σ n |n><n|`, integrates the driven
//! dynamics numerically, analyses level spreading at resonance and simulates
//! the equivalent static two-dimensional lattice.

pub mod cli;
pub mod error;
pub mod exponent;
pub mod integrator;
pub mod io;
pub mod lattice2d;
pub mod linalg;
pub mod model;
pub mod par;
pub mod propagator;
pub mod resonance;
pub mod special_fn;
pub mod spectrum;

pub use error::{Error, Result};
pub use model::{build_hamiltonian, kappa_at, ChainParams, EigenPair, StateVector};
pub use par::Exec;
