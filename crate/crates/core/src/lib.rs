//! Downlink OAM-MIMO link-level simulation with rate splitting.
//!
//! The crate builds the closed-form channel between a transmit uniform
//! circular array (UCA) and the receive UCAs of a user pair, evaluates the
//! private/common SINRs and capacities of one-layer rate splitting, and
//! maximizes the pair sum capacity with a quadratic-transform fractional
//! programming loop. Baseline access schemes (SDMA, NOMA, TDMA) reuse the
//! same capacity model so comparisons share one yardstick.
//!
//! Module map:
//! - [`channel`]: UCA geometry, channel coefficients, Gram spectra.
//! - [`signal`]: precoders, power constraint, OAM steering phases.
//! - [`scenario`]: pair and scenario configuration types.
//! - [`metrics`]: SINR grids, capacities, rate reports.
//! - [`fp`]: the fractional-programming precoder optimizer.
//! - [`baseline`]: SDMA, NOMA and TDMA reference schemes.
//! - [`harness`]: presets, config files, sweeps and CSV output.

pub mod baseline;
pub mod channel;
mod error;
pub mod fp;
pub mod harness;
pub mod metrics;
mod program;
pub mod scenario;
pub mod signal;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Dense complex matrix used for channels, precoders and auxiliary grids.
pub type CMatrix = nalgebra::DMatrix<Complex64>;
