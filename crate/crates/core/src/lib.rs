//! Simulation of blind delegated quantum computation over a noisy photonic
//! channel.
//!
//! The client encodes each rotated qubit `|+_θ⟩` into two spatial paths and
//! two time bins ([`sender`]), the channel applies collective polarization
//! noise and photon loss ([`channel`]), and the server decodes, selects the
//! noise-free time bin and runs a heralded amplification block per branch
//! ([`processor`]) before feeding the recovered qubits into the usual
//! rotated-measurement delegation loop ([`mbqc`]). [`harness`] wires the
//! pieces into sweeps, Monte-Carlo estimators and end-to-end runs.
//!
//! States are exact sparse Fock-space superpositions ([`state`]); mixtures
//! are lists of weighted pure trajectories.

pub mod angle;
pub mod channel;
pub mod error;
pub mod harness;
pub mod mbqc;
pub mod optics;
pub mod processor;
pub mod qubit;
pub mod sender;
pub mod state;

pub use angle::Angle;
pub use channel::{LossParams, NoiseParams, Trajectory};
pub use error::{Error, Result};
pub use processor::{CorrectionTable, DistillReport, HeraldEvent, HeraldPattern, NoiseProcessor};
pub use qubit::{Pauli, Qubit};
pub use state::{Block, Delay, FockBasisState, ModeLabel, ModeMap, Path, PhotonicState, Pol};
