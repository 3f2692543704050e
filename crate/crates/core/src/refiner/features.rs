//! Crop to feature vector: flatten, optionally followed by a fixed random projection.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::crop::{Crop, CropConfig};
use crate::error::{Error, Result};
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub crop: CropConfig,
    /// Output dimension of the random projection; `None` keeps the flat crop.
    pub projection_dim: Option<usize>,
    pub projection_seed: Option<u64>,
}

impl FeatureSpec {
    pub fn input_dim(&self) -> usize {
        3 * self.crop.roi_size * self.crop.roi_size
    }

    pub fn output_dim(&self) -> usize {
        self.projection_dim.unwrap_or_else(|| self.input_dim())
    }
}

/// Maps crops to features. Holds the projection matrix, which is regenerated
/// from its seed rather than stored.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureExtractor {
    spec: FeatureSpec,
    /// `projection_dim x input_dim`, row-major
    projection: Option<Vec<f64>>,
}

/// Gaussian projection with entries drawn from `N(0, 1 / dim)`.
pub fn projection_matrix(seed: u64, dim: usize, input_dim: usize) -> Vec<f64> {
    let mut rng = substream(seed, "projection", 0);
    let scale = 1.0 / (dim as f64).sqrt();
    (0..dim * input_dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * scale
        })
        .collect()
}

impl FeatureExtractor {
    pub fn new(spec: FeatureSpec) -> Result<Self> {
        spec.crop.validate()?;
        let projection = match spec.projection_dim {
            None => None,
            Some(0) => return Err(Error::config("projection_dim must be positive")),
            Some(d) => Some(projection_matrix(
                spec.projection_seed.unwrap_or(0),
                d,
                spec.input_dim(),
            )),
        };
        Ok(FeatureExtractor { spec, projection })
    }

    pub fn spec(&self) -> &FeatureSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.output_dim()
    }

    pub fn extract(&self, crop: &Crop) -> Result<Vec<f64>> {
        let expected = self.spec.input_dim();
        if crop.data.len() != expected || crop.size != self.spec.crop.roi_size {
            return Err(Error::ShapeMismatch {
                expected,
                actual: crop.data.len(),
            });
        }
        Ok(match &self.projection {
            None => crop.data.clone(),
            Some(m) => m
                .chunks_exact(expected)
                .map(|row| row.iter().zip(&crop.data).map(|(a, b)| a * b).sum())
                .collect(),
        })
    }
}
