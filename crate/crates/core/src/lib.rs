//! Ultracold bosons in an optical lattice generated by a quantized cavity
//! field.
//!
//! The crate builds the generalized Bose-Hubbard/cavity Hamiltonians for a
//! one-dimensional single-band lattice, their field-eliminated
//! approximations, and evolves them with Lindblad master equations or
//! quantum-jump trajectories. Units are recoil units throughout: lengths in
//! `1/k`, energies in `E_R`, rates in `ω_R` (with `ħ = 1`).

pub mod error;
pub mod fockspace;
pub mod lattice;
pub mod models;
pub mod observables;
pub mod selfconsistent;
pub mod solvers;

pub use error::{Error, Result};

/// Complex scalar used for all amplitudes and operator entries.
pub type C64 = num_complex::Complex64;
