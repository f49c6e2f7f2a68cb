//! Passive bistatic radar toolkit: scene simulation, detection, and tracking.
//!
//! The library mirrors a passive radar receiver that listens to an LTE-style
//! illuminator of opportunity with two uniform linear arrays: a reference
//! array pointed at the transmitter and a surveillance array pointed at the
//! scene. The processing chain is:
//!
//! 1. **simulate**: synthesize per-slot IQ samples for both arrays from a
//!    moving point target, static clutter, and the direct path.
//! 2. **detect**: beamform, cancel clutter by least-squares projection,
//!    form cross-ambiguity maps, run CA-CFAR with clustering, estimate AoA
//!    by phase interferometry, and emit (range, range-rate, AoA) observations.
//! 3. **track**: multi-target tracking with gated two-stage assignment,
//!    tentative/confirmed lifecycle rules, and KF (bistatic) or EKF
//!    (Cartesian) correction.
//! 4. **evaluate**: MAE/RMSE and detection/false-alarm rates against the
//!    simulated ground truth.
//!
//! # Example
//!
//! ```
//! use lipase::geometry::{measure, CartesianState, Geometry};
//! use nalgebra::Vector2;
//!
//! let g = Geometry::new(
//!     Vector2::new(255.0, 0.0), // transmitter
//!     Vector2::new(0.0, 0.0),   // receiver
//!     1.2,                      // surveillance broadside, rad from +x
//!     0.0,                      // reference broadside, rad from +x
//! );
//! let s = CartesianState {
//!     pos: Vector2::new(0.0, 100.0),
//!     vel: Vector2::new(0.0, 0.0),
//! };
//! let z = measure(&s, &g).unwrap();
//! assert!((z.bistatic_range - 373.905).abs() < 1e-2);
//! assert_eq!(z.range_rate, 0.0);
//! ```

pub mod detect;
pub mod evaluate;
pub mod geometry;
pub mod io;
pub mod scenario;
pub mod simulate;
pub mod track;

/// Propagation speed used for every delay/range conversion, in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Errors produced by the toolkit.
///
/// Variants split into input-validation failures (bad configuration or
/// malformed files, CLI exit code 2) and runtime failures (numerical
/// degeneracies and IO problems encountered mid-pipeline, exit code 1).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A configuration field failed a precondition. `path` is the
    /// field path inside the scenario file, e.g. `radio.sample_rate`.
    #[error("invalid config at {path}: {message}")]
    Validation { path: String, message: String },
    /// A data file does not follow its declared format.
    #[error("malformed {what}: {message}")]
    Format { what: String, message: String },
    /// Target position coincides with the transmitter or receiver.
    #[error("degenerate target position: coincides with {station} at distance {dist:.3e} m")]
    DegeneratePosition { station: &'static str, dist: f64 },
    /// The ellipse/ray intersection behind `invert` is undefined.
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    /// Division by zero in a resolution formula (endfire or beta = pi).
    #[error("resolution undefined: {0}")]
    ResolutionUndefined(String),
    /// A scatterer path falls outside the array's field of view.
    #[error("path AoA {aoa_rad:.4} rad is outside the {array} array field of view")]
    FovViolation { array: &'static str, aoa_rad: f64 },
    /// A path delay is not representable inside the generated waveform span.
    #[error("delay {delay_s:.3e} s outside the rendered waveform span")]
    DelayOutOfSpan { delay_s: f64 },
    /// Vector/matrix dimensions do not agree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// The clutter-cancellation regressor matrix is rank-deficient.
    #[error("rank-deficient clutter regressor: {0}")]
    RankDeficient(String),
    /// The requested Doppler window does not fit the map.
    #[error("doppler window invalid: {0}")]
    DopplerWindow(String),
    /// CFAR edge clipping removed every training cell.
    #[error("empty CFAR training set at cell (l={l}, p={p})")]
    EmptyTrainingSet { l: usize, p: isize },
    /// The innovation covariance W is singular.
    #[error("singular innovation covariance: {0}")]
    SingularMatrix(String),
    /// A metric was requested over an empty sequence.
    #[error("empty sequence: {0}")]
    EmptySequence(String),
    /// Scoring required a confirmed track but none survived.
    #[error("no confirmed track survived the run")]
    NoConfirmedTrack,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for this error: 2 for input-validation
    /// failures, 1 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation { .. } | Error::Format { .. } => 2,
            _ => 1,
        }
    }

    pub(crate) fn validation(path: &str, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn format(what: &str, message: impl Into<String>) -> Self {
        Error::Format {
            what: what.to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
