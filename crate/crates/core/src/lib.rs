pub mod analysis;
pub mod error;
pub mod eval;
pub mod formats;
pub mod geometry;
pub mod miner;
pub mod pipeline;
pub mod refiner;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::{
    area, clamp_to_image, iou, BoundingBox, ClassId, Detection, GroundTruthObject, Image, ImageId,
    ImageInfo, BACKGROUND,
};
