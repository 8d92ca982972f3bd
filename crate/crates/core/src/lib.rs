//! Simulation toolkit for a squeezed-vacuum Ramsey clock on a spin-1 condensate.
//!
//! - [`atom`]: four-level Hamiltonian, pulse sequences and Ramsey fringes.
//! - [`squeezing`]: two-mode squeezed vacuum statistics and phase sensitivity.
//! - [`fock`]: truncated Fock-space check of the squeezing closed forms.
//! - [`noise`]: technical-noise Monte Carlo and analytic noise budget.
//! - [`tomography`]: homodyne data, filtered back-projection and MLE.
//! - [`stability`]: Allan deviation and fractional frequency stability.
//!
//! Units are SI (s, rad/s, Hz) except magnetic fields, which are in gauss.
//! Quadratures are normalized so the vacuum variance is 1/2.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atom;
pub mod error;
pub mod fock;
pub mod noise;
mod rng;
pub mod squeezing;
pub mod stability;
pub mod tomography;

pub use atom::{
    AtomParams, ClockTemplate, FringeCurve, LevelFractions, MicrowaveCalibration, PulseSequence,
    StateVec4,
};
pub use error::{Error, Result};
pub use fock::FockState;
pub use noise::{ClockSetup, NoiseCurve, NoisePoint, NoiseSpec};
pub use squeezing::SqueezedVacuumSpec;
pub use stability::{AllanCurve, TimeSeries};
pub use tomography::{DensityMatrix, HomodyneDataset, WignerGrid};
