use std::path::PathBuf;

use crate::geometry::ImageId;

/// Errors produced by the detection refinement toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid bounding box: {0}")]
    InvalidBox(String),

    #[error("empty crop")]
    EmptyCrop,

    #[error("class out of vocabulary: {class_id} (vocabulary is 1..={num_classes})")]
    ClassOutOfVocabulary { class_id: u32, num_classes: u32 },

    #[error("empty ground truth")]
    EmptyGroundTruth,

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("diverged: non-finite loss at batch {batch_index}")]
    Diverged { batch_index: usize },

    #[error("scene too crowded: image {image_index} after {attempts} placement attempts")]
    SceneTooCrowded { image_index: usize, attempts: usize },

    #[error("missing image: {0}")]
    MissingImage(ImageId),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("invalid config: {0}")]
    Config(String),

    /// A document failed validation; `path` is the JSON path of the offending field.
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
