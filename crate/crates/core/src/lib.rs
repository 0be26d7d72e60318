//! Polarization tomography toolkit for photon pairs from metasurface SPDC
//! sources.
//!
//! The pipeline runs source model → coincidence simulation → density-matrix
//! reconstruction → state metrics, with a separate fiber-dispersion
//! spectroscopy path:
//!
//! - [`qmat`]: small complex matrices, density matrices, Jacobi eigensolver, fidelity
//! - [`polopt`]: Jones calculus, waveplates and the tomography protocols
//! - [`source`]: photon-pair source description and its two-photon state
//! - [`simlab`]: filter routing, coincidence rates and Poisson count simulation
//! - [`tomo`]: linear and maximum-likelihood state reconstruction, bootstrap errors
//! - [`metrics`]: purity, Stokes parameters, concurrence, entanglement of formation
//! - [`fiberspec`]: delay-to-wavelength calibration and spectrum inversion
//! - [`cli`]: the `polartomo` command-line front end

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod fiberspec;
pub mod io;
pub mod linsolve;
pub mod metrics;
pub mod polopt;
pub mod qmat;
pub mod simlab;
pub mod source;
mod simplex;
pub mod tomo;

pub use error::{Error, Result};
pub use polopt::{JonesVector, PolLabel, ProjectionSetting, Protocol, WaveplateSetting};
pub use qmat::{Arm, CMatrix, DensityMatrix};
pub use source::{SourceSpec, SpectralPeak};
