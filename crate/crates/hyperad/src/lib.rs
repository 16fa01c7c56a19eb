//! Hyperspherical adiabatic potentials, four-body bound states, and spectral
//! statistics for a one-dimensional model of diatomic molecule-molecule
//! collisions.
//!
//! Two identical molecules, each a pair of distinguishable fermions, move on
//! a line with pairwise Morse or Poschl-Teller interactions. The library
//! computes, in the hyperspherical adiabatic representation:
//!
//! - two-atom bound-state spectra and the dimer-dimer reference energy,
//! - adiabatic potential curves `U_nu(R)` from a B-spline Galerkin
//!   discretization of the fixed-R hyperangular problem,
//! - four-body bound states in the zero-coupling approximation, channel by
//!   channel,
//! - nearest-neighbor spacing statistics: kernel density estimates, Brody
//!   fits, and smoothed chaoticity profiles `q(R)`,
//! - density-of-states scaling fits against depth and range of the pair
//!   potential.
//!
//! Start from the runnable examples (`cargo run --release --example ...`)
//! or the `hyperad` batch CLI.

pub mod adiabatic;
pub mod galerkin;
pub mod levelstats;
pub mod model;
pub mod twobody;
