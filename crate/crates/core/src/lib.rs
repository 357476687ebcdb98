//! Simulator for rotation-invariant BB84 with spin-orbit hybrid photon
//! states.
//!
//! Photons live in a truncated space of polarization (spin) and orbital
//! angular momentum modes. A q = 1/2 Q-plate maps polarization qubits onto
//! hybrid states that do not change when the receiver's platform rotates
//! about the propagation axis, so the key exchange needs no shared frame.

pub mod channel;
pub mod cli;
pub mod error;
pub mod optics;
pub mod protocol;
pub mod rng;
pub mod source;
pub mod spinorbit;
pub mod tomography;

pub use error::{QkdError, Result};
