//! Numerical laboratory for correlated and adversarial noise on small quantum registers.
//!
//! The crate is organized bottom-up: Pauli algebra ([`pauli`]), states and
//! channels ([`state`], [`channel`], [`pauli_channel`]), circuits and their
//! noisy execution ([`circuit`], [`simulate`]), noise constructions ([`noise`]),
//! syndrome statistics ([`syndrome`]), entanglement functionals
//! ([`entanglement`]) and the experiments built from them ([`lab`]).
//!
//! Qubit 0 is always the leftmost tensor factor.

pub mod channel;
pub mod circuit;
pub mod config;
pub mod entanglement;
mod error;
pub mod lab;
pub mod linalg;
pub mod noise;
pub mod pauli;
pub mod pauli_channel;
pub mod rng;
mod serde_mat;
pub mod simulate;
pub mod state;
pub mod syndrome;

pub use channel::{channel_error_rate, CptpReport, QuantumChannel, RateEstimate, RateStrategy};
pub use circuit::{Circuit, CircuitValidation, Gate, GateKind};
pub use config::{Caps, Tolerances, TOL};
pub use error::{Error, Result};
pub use pauli::{BitString, PauliLetter, PauliString, Phase, SignedPauli};
pub use pauli_channel::PauliChannel;
pub use rng::Seed;
pub use state::{trace_distance, DensityMatrix, UnitaryOp};
