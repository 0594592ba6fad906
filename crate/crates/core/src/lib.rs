//! Simulation of an OFDM monostatic joint communication and sensing receiver
//! that tracks a single point target.
//!
//! The crate is organised bottom-up:
//!
//! - [`transforms`]: FFT wrappers, Bluestein chirp-Z transform, FLOP models.
//! - [`waveform`]: QPSK frames, the time-frequency reflection model, ULA
//!   snapshots and Bartlett angle-of-arrival estimation.
//! - [`sensing`]: range-Doppler maps (native, zero-padded, chirp-Z zoom) and
//!   peak detection.
//! - [`trackers`]: Kalman filter, event-based measurement and the combined
//!   Kalman/chirp-Z tracker.
//! - [`scenario`]: trajectories, theoretical bounds, error metrics and the
//!   complexity model.
//! - [`experiment`]: the Monte-Carlo batch runner and result files used by
//!   the `jcas-sim` binary.
//!
//! Trajectories are processed in parallel when the `parallel` feature is
//! enabled (the default); see [`exec`].

pub mod error;
pub mod exec;
pub mod experiment;
pub mod scenario;
pub mod sensing;
pub mod trackers;
pub mod transforms;
pub mod waveform;

pub use error::{Error, Result};
pub use transforms::C64;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
