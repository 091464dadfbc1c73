//! Numerical model of a χ(2) microcavity acting as an artificial atom.
//!
//! * [`fock`]: truncated Fock bases, Hamiltonians, excitation blocks.
//! * [`dynamics`]: Lindblad and pulsed non-Hermitian evolution.
//! * [`scattering`]: closed-form two-photon scattering and a time-domain check.
//! * [`storage`]: antenna-mediated single-photon storage and retrieval.
//! * [`czgate`]: the photon-photon controlled-Z sequence and its fidelity.
//!
//! All rates are amplitude decay rates in units of a reference rate; a mode
//! with intrinsic rate `κ₀` and external rate `κ₁` decays at `κ = κ₀ + κ₁`
//! and couples to its waveguide with amplitude `√(2κ₁)`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod czgate;
pub mod dynamics;
pub mod envelope;
pub mod error;
pub mod fock;
pub mod ode;
pub mod scattering;
pub mod storage;

pub use envelope::{Envelope, EnvelopeKind};
pub use error::{Error, Result};
