use thiserror::Error;

/// Failure to read or validate a canonical scene document.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("invariant violated at {path}: {message}")]
    Invariant { path: String, message: String },
}

impl SceneError {
    pub fn path(&self) -> &str {
        match self {
            SceneError::Schema { path, .. } | SceneError::Invariant { path, .. } => path,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("scene {0} is already calibrated")]
    AlreadyCalibrated(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("scene {0} must be calibrated before graph construction")]
    NotCalibrated(String),
    #[error("track {track} missing at frame {frame}")]
    MissingTrack { track: String, frame: usize },
    #[error("zero time step between frames {prev} and {frame}")]
    ZeroDt { prev: usize, frame: usize },
    #[error("frame {0} out of range")]
    FrameOutOfRange(usize),
}
