//! Spin-boson dynamics with hierarchical equations of motion (HEOM) and
//! Bloch-volume non-Markovianity diagnostics.
//!
//! The crate is organised bottom-up:
//!
//! - [`bath`]: Lorentzian spectral densities, the bath correlation function
//!   (direct quadrature and exponential mode expansion).
//! - [`heom`]: the auxiliary density operator hierarchy and its propagation.
//! - [`dynmap`]: dynamical map reconstruction, volume of accessible states,
//!   total and canonical decoherence rates.
//! - [`oracles`]: slow closed-form or quadrature references used to validate
//!   the engine.
//! - [`config`] and [`harness`]: experiment configuration and the scenario
//!   drivers used by the command-line tool.
//!
//! All internal quantities are in Hartree atomic units (ħ = 1). Times are
//! read and written in femtoseconds, temperatures in kelvin.

pub mod bath;
pub mod config;
pub mod dynmap;
pub mod error;
pub mod harness;
pub mod heom;
pub mod oracles;
pub mod quadrature;
pub mod units;

pub use error::{Error, Result};
