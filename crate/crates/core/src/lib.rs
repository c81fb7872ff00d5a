//! Finite-size secure key lengths for qubit and decoy-state BB84.
//!
//! This crate computes secure key lengths under closed-form finite-size
//! bounds for BB84-type quantum key distribution protocols with imperfect
//! threshold detectors, and simulates the classical post-processing
//! protocols around them. It is organized as:
//!
//! - [`stats`] — binary entropy, binomial tail function and its inverse,
//!   Serfling and Hoeffding deviations, and Clopper-Pearson intervals
//!   via beta quantiles;
//! - [`detector`] — threshold-detector click model and the
//!   basis-efficiency-mismatch metrics δ₁, δ₂;
//! - [`decoy`] — three-intensity decoy-state bounds on zero- and
//!   one-photon event counts;
//! - [`keyrate`] — the phase-error-rate bound under detector mismatch and
//!   the final key-length formulas with full ε-budget accounting;
//! - [`acceptance`] — fixed-length acceptance tests and the
//!   feasible/confidence interval constructions;
//! - [`postselect`] — symmetric-subspace dimension accounting and the
//!   coherent-attack lift transforms, entirely in log₂ domain;
//! - [`hashing`] — Toeplitz universal₂ hashing, error verification, and
//!   variable-input-length privacy amplification;
//! - [`authsim`] — a simulator for the two-party classical message
//!   exchange under the practical authenticated-channel model;
//! - [`simulate`] — honest-channel outcome models and Monte Carlo
//!   expected key rates.
//!
//! The crate is `no_std` compatible (`alloc` required); all operations are
//! pure and freely shareable across threads.

#![cfg_attr(not(test), no_std)]
// Reference constants in oracle tests keep their full published precision.
#![allow(clippy::excessive_precision)]

extern crate alloc;

pub mod acceptance;
pub mod authsim;
pub mod decoy;
pub mod detector;
mod error;
pub mod hashing;
pub mod keyrate;
pub mod logdomain;
pub mod postselect;
pub mod simulate;
mod special;
pub mod stats;

pub use error::Error;
pub use logdomain::LogProb;
pub use stats::Probability;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;
