//! Camera identification from sensor pattern noise.
//!
//! Every image sensor multiplies the light it receives by a faint, fixed,
//! per-pixel gain pattern (photo-response non-uniformity, PRNU). This crate
//! estimates that pattern from video frames and decides whether two
//! estimates belong to the same sensor:
//!
//! * [`frame_io`] reads Y4M streams and PGM directories into luminance frames.
//! * [`denoise`] is the wavelet-domain locally adaptive Wiener filter used to
//!   separate scene content from sensor noise.
//! * [`fingerprint`] averages noise residuals into a [`Fingerprint`] and
//!   reads/writes the `PRNUFP1` file format.
//! * [`matcher`] correlates two fingerprints and scores the result with the
//!   peak-to-correlation energy (PCE) statistic.
//! * [`sensor_sim`] synthesizes cameras with a known pattern so the whole
//!   chain can be checked against ground truth.

pub mod denoise;
pub mod fingerprint;
pub mod frame_io;
pub mod matcher;
pub mod sensor_sim;
mod spectral;

pub use denoise::{denoise_frame, DenoiseError, DenoiserConfig};
pub use fingerprint::{
    compute_residual, estimate_fingerprint, estimate_fingerprint_with, estimate_from_frames,
    fingerprint_quality, Estimator, Fingerprint, FingerprintAccumulator, FingerprintError,
    FingerprintOptions, QualitySummary, Residual,
};
pub use frame_io::{
    select_query_frames, select_registration_frames, FrameError, FrameKind, FrameSequence,
    LuminanceFrame, Selection,
};
pub use matcher::{
    cross_correlate, match_fingerprints, pce, CorrelationSurface, MatchError, MatcherConfig,
    PceReport, SearchMode,
};
pub use sensor_sim::{make_camera, SceneSchedule, SceneSpec, SensorModel, SimError};
