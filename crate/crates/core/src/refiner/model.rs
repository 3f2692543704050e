//! The refinement classifier: training over mined minibatches and prediction.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::crop::{channel_statistics, crop_resize, CropConfig};
use super::features::{FeatureExtractor, FeatureSpec};
use super::linear::LinearSoftmax;
use crate::error::{Error, Result};
use crate::geometry::{BoundingBox, ClassId, Image, ImageId};
use crate::miner::SampleManifest;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    /// Fractional epoch after which the learning rate drops tenfold.
    pub lr_drop_epoch: f64,
    pub roi_size: usize,
    pub projection_dim: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            momentum: 0.9,
            weight_decay: 1e-4,
            epochs: 7,
            lr_drop_epoch: 4.83,
            roi_size: 32,
            projection_dim: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::config(format!("weight decay {} must be >= 0", self.weight_decay)));
        }
        if !(self.lr_drop_epoch >= 0.0) {
            return Err(Error::config("lr_drop_epoch must be >= 0"));
        }
        if self.roi_size < super::crop::MIN_ROI_SIZE {
            return Err(Error::config(format!("roi_size {} below minimum 8", self.roi_size)));
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the config's JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(&Sha256::digest(&json)[..8])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub config: TrainConfig,
    pub config_hash: String,
    pub epochs: usize,
    /// Mean batch loss over the last epoch; absent when no step ran.
    pub final_loss: Option<f64>,
    pub epoch_losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinerModel {
    num_classes: u32,
    features: FeatureExtractor,
    classifier: LinearSoftmax,
    training: TrainingRecord,
}

impl RefinerModel {
    /// A model with zero weights: predicts the uniform distribution.
    pub fn untrained(num_classes: u32, spec: FeatureSpec, config: TrainConfig) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::config("num_classes must be at least 1"));
        }
        let features = FeatureExtractor::new(spec)?;
        let classifier = LinearSoftmax::zeros(features.dim(), num_classes as usize + 1);
        Ok(RefinerModel {
            num_classes,
            features,
            classifier,
            training: TrainingRecord {
                config_hash: config.hash(),
                config,
                epochs: 0,
                final_loss: None,
                epoch_losses: Vec::new(),
            },
        })
    }

    pub fn num_classes(&self) -> u32 {
        self.num_classes
    }

    pub fn feature_spec(&self) -> &FeatureSpec {
        self.features.spec()
    }

    pub fn classifier(&self) -> &LinearSoftmax {
        &self.classifier
    }

    pub fn training(&self) -> &TrainingRecord {
        &self.training
    }

    pub fn features(&self, image: &Image, bbox: &BoundingBox) -> Result<Vec<f64>> {
        let crop = crop_resize(image, bbox, &self.features.spec().crop)?;
        self.features.extract(&crop)
    }

    /// Class probabilities over background and the `K` object classes.
    pub fn predict(&self, image: &Image, bbox: &BoundingBox) -> Result<Vec<f64>> {
        Ok(self.classifier.probabilities(&self.features(image, bbox)?))
    }

    pub fn to_file(&self) -> ModelFile {
        let spec = self.features.spec();
        ModelFile {
            version: MODEL_FORMAT_VERSION,
            num_classes: self.num_classes,
            roi_size: spec.crop.roi_size,
            feature: FeatureSection {
                projection_dim: spec.projection_dim,
                projection_seed: spec.projection_seed,
                channel_mean: spec.crop.channel_mean,
                channel_std: spec.crop.channel_std,
            },
            weights: WeightMatrix {
                shape: [self.classifier.dim + 1, self.classifier.classes],
                data: self.classifier.weights.clone(),
            },
            training: self.training.clone(),
        }
    }

    pub fn from_file(file: ModelFile) -> Result<Self> {
        if file.version != MODEL_FORMAT_VERSION {
            return Err(Error::schema("version", format!("unsupported model version {}", file.version)));
        }
        let spec = FeatureSpec {
            crop: CropConfig::new(file.roi_size, file.feature.channel_mean, file.feature.channel_std)
                .map_err(|e| Error::schema("feature", e.to_string()))?,
            projection_dim: file.feature.projection_dim,
            projection_seed: file.feature.projection_seed,
        };
        let mut model = RefinerModel::untrained(file.num_classes, spec, file.training.config.clone())
            .map_err(|e| Error::schema("K", e.to_string()))?;
        let expected = [model.classifier.dim + 1, model.classifier.classes];
        if file.weights.shape != expected {
            return Err(Error::schema(
                "weights.shape",
                format!("expected {expected:?}, found {:?}", file.weights.shape),
            ));
        }
        if file.weights.data.len() != expected[0] * expected[1] {
            return Err(Error::schema(
                "weights.data",
                format!("expected {} values, found {}", expected[0] * expected[1], file.weights.data.len()),
            ));
        }
        if let Some(i) = file.weights.data.iter().position(|w| !w.is_finite()) {
            return Err(Error::schema(format!("weights.data[{i}]"), "non-finite weight"));
        }
        model.classifier.weights = file.weights.data;
        model.training = file.training;
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSection {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub projection_dim: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub projection_seed: Option<u64>,
    pub channel_mean: [f64; 3],
    pub channel_std: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    /// `[feature_dim + 1, K + 1]`
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

/// On-disk layout of a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    #[serde(rename = "K")]
    pub num_classes: u32,
    #[serde(rename = "S")]
    pub roi_size: usize,
    pub feature: FeatureSection,
    pub weights: WeightMatrix,
    pub training: TrainingRecord,
}

/// Trains the classifier with softmax cross-entropy and momentum SGD.
///
/// Minibatches are consumed in manifest order, once per epoch. The update is
/// `v <- momentum * v - lr * grad; w <- w + v`, and `lr` drops tenfold once
/// `lr_drop_epoch` epochs worth of batches have run. Channel statistics for
/// normalization are measured once over `images` and frozen into the model.
/// The base detections are inputs only; nothing here feeds back into them.
pub fn train_refiner(
    images: &BTreeMap<ImageId, Image>,
    manifest: &SampleManifest,
    num_classes: u32,
    cfg: &TrainConfig,
) -> Result<RefinerModel> {
    cfg.validate()?;
    for (bi, batch) in manifest.batches.iter().enumerate() {
        for (ei, e) in batch.iter().enumerate() {
            if e.assigned_label > num_classes {
                return Err(Error::schema(
                    format!("batches[{bi}][{ei}].assigned_label"),
                    format!("label {} outside [0, {num_classes}]", e.assigned_label),
                ));
            }
            if !images.contains_key(&e.image_id) {
                return Err(Error::MissingImage(e.image_id.clone()));
            }
        }
    }

    let (mean, std) = channel_statistics(images.values());
    let spec = FeatureSpec {
        crop: CropConfig::new(cfg.roi_size, mean, std)?,
        projection_dim: cfg.projection_dim,
        projection_seed: cfg.projection_dim.map(|_| cfg.seed),
    };
    let mut model = RefinerModel::untrained(num_classes, spec, cfg.clone())?;

    // features per distinct (image, box)
    let mut cache: HashMap<(&ImageId, [u64; 4]), Vec<f64>> = HashMap::new();
    for e in manifest.entries() {
        let key = (&e.image_id, e.bbox.to_xywh().map(f64::to_bits));
        if let std::collections::hash_map::Entry::Vacant(slot) = cache.entry(key) {
            slot.insert(model.features(&images[&e.image_id], &e.bbox)?);
        }
    }

    let steps_per_epoch = manifest.batches.len();
    let drop_step = (cfg.lr_drop_epoch * steps_per_epoch as f64).round() as usize;
    let mut velocity = vec![0.0; model.classifier.weights.len()];
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut step = 0usize;

    for _ in 0..cfg.epochs {
        let mut loss_sum = 0.0;
        for (bi, batch) in manifest.batches.iter().enumerate() {
            if batch.is_empty() {
                continue;
            }
            let xs: Vec<&[f64]> = batch
                .iter()
                .map(|e| cache[&(&e.image_id, e.bbox.to_xywh().map(f64::to_bits))].as_slice())
                .collect();
            let labels: Vec<usize> = batch.iter().map(|e| e.assigned_label as usize).collect();
            let (loss, grad) = model.classifier.loss_and_grad(&xs, &labels, cfg.weight_decay);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { batch_index: bi });
            }
            loss_sum += loss;

            let lr = if step < drop_step {
                cfg.learning_rate
            } else {
                cfg.learning_rate * 0.1
            };
            for ((w, v), g) in model.classifier.weights.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = cfg.momentum * *v - lr * g;
                *w += *v;
            }
            step += 1;
        }
        epoch_losses.push(loss_sum / steps_per_epoch.max(1) as f64);
    }
    if model.classifier.weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Diverged {
            batch_index: steps_per_epoch.saturating_sub(1),
        });
    }

    model.training.epochs = cfg.epochs;
    model.training.final_loss = if steps_per_epoch > 0 { epoch_losses.last().copied() } else { None };
    model.training.epoch_losses = epoch_losses;
    Ok(model)
}

/// Largest class index of a probability vector.
pub fn argmax(probs: &[f64]) -> ClassId {
    probs
        .iter()
        .enumerate()
        .fold((0usize, f64::NEG_INFINITY), |best, (i, &p)| if p > best.1 { (i, p) } else { best })
        .0 as ClassId
}
