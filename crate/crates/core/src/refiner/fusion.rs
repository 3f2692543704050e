//! Test-time score fusion with the base detector.

use std::collections::BTreeMap;

use super::model::RefinerModel;
use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, Detection, Image, ImageId};

/// Anything that scores an image region over background plus `K` classes.
pub trait RegionScorer {
    fn num_classes(&self) -> u32;

    fn class_probabilities(&self, image: &Image, bbox: &BoundingBox) -> Result<Vec<f64>>;
}

impl RegionScorer for RefinerModel {
    fn num_classes(&self) -> u32 {
        RefinerModel::num_classes(self)
    }

    fn class_probabilities(&self, image: &Image, bbox: &BoundingBox) -> Result<Vec<f64>> {
        self.predict(image, bbox)
    }
}

/// All-ones scorer; fusion with it leaves every detection unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PassThrough {
    pub num_classes: u32,
}

impl RegionScorer for PassThrough {
    fn num_classes(&self) -> u32 {
        self.num_classes
    }

    fn class_probabilities(&self, _image: &Image, _bbox: &BoundingBox) -> Result<Vec<f64>> {
        Ok(vec![1.0; self.num_classes as usize + 1])
    }
}

/// Multiplies the detection score by the refiner's probability for the
/// detection's own class. Box and label are untouched; nothing is renormalized.
pub fn fuse_scores(det: &Detection, probs: &[f64]) -> Result<Detection> {
    let p = probs
        .get(det.class_id as usize)
        .copied()
        .ok_or(Error::ClassOutOfVocabulary {
            class_id: det.class_id,
            num_classes: probs.len().saturating_sub(1) as u32,
        })?;
    Ok(Detection {
        score: det.score * p,
        ..det.clone()
    })
}

/// Fuses every detection with the scorer's probabilities, preserving order.
pub fn refine_detections<S: RegionScorer + ?Sized>(
    scorer: &S,
    images: &BTreeMap<ImageId, Image>,
    dets: &[Detection],
) -> Result<Vec<Detection>> {
    dets.iter()
        .map(|d| {
            let image = images
                .get(&d.image_id)
                .ok_or_else(|| Error::MissingImage(d.image_id.clone()))?;
            fuse_scores(d, &scorer.class_probabilities(image, &d.bbox)?)
        })
        .collect()
}
