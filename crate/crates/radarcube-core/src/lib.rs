//! # radarcube-core
//!
//! Simulation and signal-processing core for a 4D FMCW MIMO radar
//! point-cloud pipeline.
//!
//! The crate covers the full chain from waveform definition to radar
//! points:
//!
//! ```text
//! scene + waveform + antenna layout
//!        │  waveform: TDM-MIMO dechirped beat-signal synthesis
//!        ▼
//!    DataCube ── rd: range FFT → Doppler FFT → channel integration ──▶ RDMap
//!        │                                                              │
//!        │                     cfar: CA / SOCA / dynamic clutter-edge detection
//!        │                                                              ▼
//!        │          doa: per-detection snapshots → 2D steering spectra
//!        │                                                              ▼
//!        └──────────────────────────── cloud: 4D points + quality metrics
//! ```
//!
//! Array geometry tooling (virtual-array synthesis, redundancy analysis,
//! ladder-layout generation, ambiguity maps) lives in [`array`]. File
//! formats and the scenario configuration schema live in [`io`], and
//! [`pipeline`] ties the stages together for the CLI and integration
//! tests.
//!
//! All operations are deterministic: random draws come from seeded,
//! per-channel counter RNG streams, and parallel execution never changes
//! results.

pub mod array;
pub mod cfar;
pub mod cloud;
pub mod doa;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod rd;
pub mod waveform;

pub use error::RadarError;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, RadarError>;
