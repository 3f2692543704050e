//! Decoupled classification refinement: crop-resize, a separately trained
//! classifier, and multiplicative score fusion.

mod crop;
mod features;
mod fusion;
mod linear;
mod model;

pub use crop::{channel_statistics, crop_resize, resample_bilinear, Crop, CropConfig, MIN_ROI_SIZE};
pub use features::{projection_matrix, FeatureExtractor, FeatureSpec};
pub use fusion::{fuse_scores, refine_detections, PassThrough, RegionScorer};
pub use linear::{log_sum_exp, softmax, LinearSoftmax};
pub use model::{
    argmax, train_refiner, FeatureSection, ModelFile, RefinerModel, TrainConfig, TrainingRecord,
    WeightMatrix, MODEL_FORMAT_VERSION,
};
