//! Full-dimension MIMO elevation beamforming simulator.
//!
//! The crate is organised bottom-up:
//!
//! * [`array`]: element and port radiation patterns on a 2D active antenna array.
//! * [`txru`]: TXRU virtualization weights and the block-diagonal virtualization matrix.
//! * [`spectra`]: angular power spectra, angle sampling and cluster/subpath realization.
//! * [`channel`]: ray-tracing channel coefficients (element and ITU port approaches) and
//!   covariance-based Rayleigh/Kronecker channel draws.
//! * [`correlation`]: spatial correlation functions by quadrature and Monte Carlo, and
//!   element-to-port covariance assembly.
//! * [`beamforming`]: digital precoders, link metrics, tilt strategies and downtilt weight
//!   optimizers.
//! * [`harness`]: experiment configuration, deterministic RNG streams, Monte-Carlo loops
//!   and result export.
//!
//! Angles are radians inside the numerical kernels and degrees in every configuration
//! file, CSV export and public "`_deg`" argument.

pub mod array;
pub mod beamforming;
pub mod channel;
pub mod correlation;
mod error;
pub mod harness;
pub mod linalg;
pub mod quadrature;
pub mod spectra;
pub mod txru;
pub mod units;

pub use error::{Error, Result};

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;
