//! Digital precoding, link metrics, tilt strategies and downtilt weight optimizers.

pub mod dinkelbach;
pub mod eigen;
pub mod metrics;
pub mod precoding;
pub mod sdb;
pub mod sdp;
pub mod tilt;

pub use dinkelbach::{dinkelbach, gaussian_randomization, DinkelbachOptions, DinkelbachReport};
pub use eigen::weights_eigen_single_user;
pub use metrics::{metrics, sir_deterministic, sir_deterministic_scaled, LinkMetrics};
pub use precoding::{mrt, mrt_per_user, mrt_scaled, mrt_statistical, rzf, zf, MrtScaling, PowerAllocation, PrecodingMatrix};
pub use sdb::{leakage, surrogate_for_weights, weights_sdb, weights_sdb_multicell, CellProblem, SdbOptions, SdbSolution};
pub use sdp::{MaxMinSdp, MaxMinSolution};
pub use tilt::{tilt_com, tilt_cst, tilt_los, tilt_muab};
