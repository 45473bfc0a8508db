//! Spectral laboratory for the quantum Rabi model with a bias and
//! Ising-coupled auxiliary spins.
//!
//! Hamiltonians are built exactly in a truncated Fock space ([`models`]),
//! diagonalized ([`spectra`]), cross-checked against a displaced-oscillator
//! solver and closed-form adiabatic levels ([`displaced`]), and reduced to
//! ground-state magnetization scaling curves ([`scaling`]).

pub mod acceptance;
pub mod cli;
pub mod displaced;
pub mod error;
pub mod hilbert;
pub mod models;
pub mod report;
pub mod scaling;
pub mod spectra;

pub use error::{Error, Result};
pub use hilbert::{BosonBasis, SymmetricOperator};
pub use models::{IsingAxis, IsingEdge, ModelSpec};
pub use spectra::Spectrum;
