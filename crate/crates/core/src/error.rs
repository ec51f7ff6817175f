use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),

    #[error("target too close to the z-axis (planar range {planar:.4} m)")]
    DegenerateProjection { planar: f64 },

    #[error("rank-deficient design: observations need at least two distinct azimuths")]
    DegenerateGeometry,

    #[error("velocity estimation failed: {inliers} inliers, {required} required")]
    EstimationFailed { inliers: usize, required: usize },

    #[error("invalid timestamps: {0}")]
    InvalidTimestamps(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("target feature set is empty")]
    NoTargets,

    #[error("no matched pairs (iteration {iteration})")]
    NoMatches { iteration: usize },

    #[error("weights must be non-negative with a positive sum")]
    DegenerateWeights,

    #[error("cross-covariance is zero, rotation undefined")]
    UndefinedRotation,

    #[error("trajectories do not overlap in time")]
    NoOverlap,

    #[error("all positions coincide, alignment undefined")]
    DegenerateAlignment,

    #[error("dataset too short: {0}")]
    DatasetTooShort(String),

    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("{}: dimension mismatch: {detail}", path.display())]
    DimensionMismatch { path: PathBuf, detail: String },

    #[error("{stream}: timestamps not strictly increasing at index {index}")]
    NonMonotone { stream: String, index: usize },

    #[error("{}: invalid data: {detail}", path.display())]
    InvalidData { path: PathBuf, detail: String },

    #[error("{}:{line}: parse error: {detail}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        detail: String,
    },

    #[error("adapter config incomplete, missing: {}", .0.join(", "))]
    ConfigIncomplete(Vec<String>),

    #[error("frame {index}: {source}")]
    Frame {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_frame(self, index: usize) -> Error {
        Error::Frame {
            index,
            source: Box::new(self),
        }
    }
}
