//! Near-field joint angle-range localization with sparse modular antenna
//! arrays.
//!
//! The library models a linear array of `P` dense subarrays whose combined
//! sparse aperture places sources in the radiating near field, where the
//! wavefront curvature makes both azimuth and range observable. Each subarray
//! feeds a single RF chain through a constant-modulus analog combiner, so
//! only `P*K` compressed measurements per snapshot are available instead of
//! the full `M`-element data.
//!
//! Provided estimators:
//! - [`share::share_estimate`]: SHARE, a two-stage estimator that first
//!   resolves the grating-lobe ambiguity with non-coherent per-subarray
//!   spectra, then refines angle and range jointly by sparse recovery over a
//!   localized dictionary.
//! - [`baselines::omp2d_estimate`]: one-shot MMV-OMP over the full global
//!   angle-range dictionary of compressed atoms.
//! - [`baselines::music2d_estimate`]: fully-digital 2D-MUSIC over the same
//!   global grid.
//!
//! The [`eval`] module adds source matching, RMSE metrics, a Monte Carlo
//! harness, a closed-form FLOP cost model, and beampattern generation.

pub mod baselines;
pub mod compression;
pub mod eval;
pub mod geometry;
mod linalg;
pub mod share;
pub mod signal;

use thiserror::Error;

/// Errors reported by the localization library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("estimation failed: {0}")]
    Estimation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub use baselines::MusicSpectrum2D;
pub use compression::{CombinerBank, CombinerPolicy};
pub use eval::{Algorithm, FlopEstimate, FlopParams, MetricsRecord, MonteCarloRun, ScenarioGen, TrialRecord};
pub use geometry::{ArrayConfig, GridSpec, SPEED_OF_LIGHT};
pub use share::{Dictionary, EstimateSet, ShareParams, SourceEstimate, Spectrum1D};
pub use signal::{RowLayout, Scenario, SnapshotMatrix, SourceTruth};
