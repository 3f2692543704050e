//! Training-sample mining for the refinement classifier.
//!
//! Base-detector boxes get a label from their best ground-truth overlap, a
//! category (hard FP, foreground, background) from label and score, and are
//! then drawn into image-centric minibatches under one of six heuristics.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, BoundingBox, ClassId, Detection, GroundTruthObject, ImageId, BACKGROUND};
use crate::rng::substream;

/// Replacement images tried per batch slot before giving up.
pub const MAX_IMAGE_RETRIES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RoiCategory {
    HardFp,
    Fg,
    Bg,
    /// Reserved; the categorization rules never produce it.
    EasyFp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRoi {
    pub image_id: ImageId,
    pub bbox: BoundingBox,
    pub base_class: ClassId,
    pub base_score: f64,
    /// `0` for background.
    pub assigned_label: ClassId,
    pub category: Option<RoiCategory>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Heuristic {
    Random,
    FpOnly,
    FpFg,
    FpBg,
    FpFgBg,
    /// Fixed 1:3 foreground to background split by label.
    RcnnLike,
}

impl Heuristic {
    pub const ALL: [Heuristic; 6] = [
        Heuristic::Random,
        Heuristic::FpOnly,
        Heuristic::FpFg,
        Heuristic::FpBg,
        Heuristic::FpFgBg,
        Heuristic::RcnnLike,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Heuristic::Random => "random",
            Heuristic::FpOnly => "fp_only",
            Heuristic::FpFg => "fp_fg",
            Heuristic::FpBg => "fp_bg",
            Heuristic::FpFgBg => "fp_fg_bg",
            Heuristic::RcnnLike => "rcnn_like",
        }
    }

    fn admits(self, category: RoiCategory) -> bool {
        use RoiCategory::*;
        match self {
            Heuristic::Random => true,
            Heuristic::FpOnly => category == HardFp,
            Heuristic::FpFg => matches!(category, HardFp | Fg),
            Heuristic::FpBg => matches!(category, HardFp | Bg),
            Heuristic::FpFgBg => matches!(category, HardFp | Fg | Bg),
            Heuristic::RcnnLike => true,
        }
    }
}

impl std::str::FromStr for Heuristic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Heuristic::ALL
            .into_iter()
            .find(|h| h.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Heuristic::ALL.iter().map(|h| h.name()).collect();
                format!("unknown heuristic `{s}` ({})", names.join(" | "))
            })
    }
}

impl std::fmt::Display for Heuristic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub images_per_batch: usize,
    pub rois_per_batch: usize,
    pub heuristic: Heuristic,
    /// Score above which a misclassified box is a hard false positive.
    pub fp_threshold: f64,
    /// IoU at which a box takes the label of its best object.
    pub fg_iou: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            images_per_batch: 1,
            rois_per_batch: 32,
            heuristic: Heuristic::FpFgBg,
            fp_threshold: 0.3,
            fg_iou: 0.5,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.images_per_batch == 0 || self.rois_per_batch == 0 {
            return Err(Error::config("images_per_batch and rois_per_batch must be positive"));
        }
        if !self.rois_per_batch.is_multiple_of(self.images_per_batch) {
            return Err(Error::config(format!(
                "rois_per_batch {} is not divisible by images_per_batch {}",
                self.rois_per_batch, self.images_per_batch
            )));
        }
        if !(self.fp_threshold > 0.0 && self.fp_threshold < 1.0) {
            return Err(Error::config(format!("fp_threshold {} outside (0, 1)", self.fp_threshold)));
        }
        if !(self.fg_iou > 0.0 && self.fg_iou <= 1.0) {
            return Err(Error::config(format!("fg_iou {} outside (0, 1]", self.fg_iou)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image_id: ImageId,
    pub bbox: BoundingBox,
    pub assigned_label: ClassId,
    pub category: RoiCategory,
    pub base_class: ClassId,
    pub base_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleManifest {
    pub config: SamplerConfig,
    pub batches: Vec<Vec<ManifestEntry>>,
}

impl SampleManifest {
    pub fn entries(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.batches.iter().flatten()
    }
}

/// Labels each detection with the class of its best-overlapping object when
/// that IoU reaches `fg_iou`, background otherwise. Difficult objects are skipped.
pub fn assign_labels(
    dets: &[Detection],
    gts: &[GroundTruthObject],
    fg_iou: f64,
) -> Result<Vec<LabeledRoi>> {
    if !(fg_iou > 0.0 && fg_iou <= 1.0) {
        return Err(Error::config(format!("fg_iou {fg_iou} outside (0, 1]")));
    }
    let mut by_image: BTreeMap<&ImageId, Vec<&GroundTruthObject>> = BTreeMap::new();
    for g in gts.iter().filter(|g| !g.difficult) {
        by_image.entry(&g.image_id).or_default().push(g);
    }
    Ok(dets
        .iter()
        .map(|d| {
            let mut best: Option<(f64, ClassId)> = None;
            for g in by_image.get(&d.image_id).into_iter().flatten() {
                let o = iou(&d.bbox, &g.bbox);
                if best.is_none_or(|(b, _)| o > b) {
                    best = Some((o, g.class_id));
                }
            }
            let assigned_label = match best {
                Some((o, c)) if o >= fg_iou => c,
                _ => BACKGROUND,
            };
            LabeledRoi {
                image_id: d.image_id.clone(),
                bbox: d.bbox,
                base_class: d.class_id,
                base_score: d.score,
                assigned_label,
                category: None,
            }
        })
        .collect())
}

/// Category of a labeled box; every box gets exactly one.
pub fn category_of(assigned_label: ClassId, base_class: ClassId, base_score: f64, fp_threshold: f64) -> RoiCategory {
    if base_score > fp_threshold && assigned_label != base_class {
        RoiCategory::HardFp
    } else if assigned_label != BACKGROUND {
        RoiCategory::Fg
    } else {
        RoiCategory::Bg
    }
}

pub fn categorize(mut rois: Vec<LabeledRoi>, fp_threshold: f64) -> Vec<LabeledRoi> {
    for r in &mut rois {
        r.category = Some(category_of(r.assigned_label, r.base_class, r.base_score, fp_threshold));
    }
    rois
}

/// Labeled boxes of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRois {
    pub image_id: ImageId,
    pub rois: Vec<LabeledRoi>,
}

/// Groups boxes per image, ordered by image id.
pub fn group_by_image(rois: Vec<LabeledRoi>) -> Vec<ImageRois> {
    let mut map: BTreeMap<ImageId, Vec<LabeledRoi>> = BTreeMap::new();
    for r in rois {
        map.entry(r.image_id.clone()).or_default().push(r);
    }
    map.into_iter()
        .map(|(image_id, rois)| ImageRois { image_id, rois })
        .collect()
}

struct Pools<'a> {
    main: Vec<&'a LabeledRoi>,
    // RCNN_LIKE only
    fg: Vec<&'a LabeledRoi>,
    bg: Vec<&'a LabeledRoi>,
}

fn pools(image: &ImageRois, heuristic: Heuristic) -> Result<Pools<'_>> {
    let mut p = Pools {
        main: Vec::new(),
        fg: Vec::new(),
        bg: Vec::new(),
    };
    for r in &image.rois {
        let category = r.category.ok_or_else(|| {
            Error::config(format!("uncategorized roi in image {}", image.image_id))
        })?;
        if heuristic == Heuristic::RcnnLike {
            if r.assigned_label == BACKGROUND {
                p.bg.push(r);
            } else {
                p.fg.push(r);
            }
        } else if heuristic.admits(category) {
            p.main.push(r);
        }
    }
    Ok(p)
}

fn entry(r: &LabeledRoi) -> ManifestEntry {
    ManifestEntry {
        image_id: r.image_id.clone(),
        bbox: r.bbox,
        assigned_label: r.assigned_label,
        category: r.category.expect("categorized"),
        base_class: r.base_class,
        base_score: r.base_score,
    }
}

/// Draws `n_batches` minibatches of `R` boxes from `N` distinct images each.
///
/// Images are drawn uniformly; boxes are drawn uniformly with replacement
/// from the heuristic's pool within the image. An image whose pool cannot
/// serve its quota is swapped for another up to [`MAX_IMAGE_RETRIES`] times.
/// Batch `b` uses its own substream, so batches are independent of each other.
pub fn sample_minibatches(
    images: &[ImageRois],
    config: &SamplerConfig,
    n_batches: usize,
) -> Result<SampleManifest> {
    config.validate()?;
    let n = config.images_per_batch;
    let r = config.rois_per_batch;
    if images.len() < n {
        return Err(Error::InsufficientSamples(format!(
            "{} images available, {n} needed per batch",
            images.len()
        )));
    }
    let all_pools: Vec<Pools> = images
        .iter()
        .map(|im| pools(im, config.heuristic))
        .collect::<Result<_>>()?;

    let per_image = r / n;
    let fg_total = r.div_ceil(4);
    // (fg, bg) quota for slot i under RCNN_LIKE
    let rcnn_quota = |i: usize| {
        let fg = fg_total / n + usize::from(i < fg_total % n);
        (fg, per_image.saturating_sub(fg))
    };
    let serves = |p: &Pools, slot: usize| -> bool {
        if config.heuristic == Heuristic::RcnnLike {
            let (fg, bg) = rcnn_quota(slot);
            (fg == 0 || !p.fg.is_empty()) && (bg == 0 || !p.bg.is_empty())
        } else {
            !p.main.is_empty()
        }
    };

    let mut batches = Vec::with_capacity(n_batches);
    for b in 0..n_batches {
        let mut rng = substream(config.seed, "minibatch", b as u32);
        let mut chosen: Vec<usize> = index::sample(&mut rng, images.len(), n).into_vec();
        for slot in 0..n {
            let mut retries = 0;
            while !serves(&all_pools[chosen[slot]], slot) {
                if retries == MAX_IMAGE_RETRIES {
                    return Err(Error::InsufficientSamples(format!(
                        "no image could serve the {} pool for batch {b} after {MAX_IMAGE_RETRIES} retries",
                        config.heuristic
                    )));
                }
                retries += 1;
                let candidate = rng.random_range(0..images.len());
                if !chosen.contains(&candidate) {
                    chosen[slot] = candidate;
                }
            }
        }

        let mut batch = Vec::with_capacity(r);
        for (slot, &im) in chosen.iter().enumerate() {
            let p = &all_pools[im];
            if config.heuristic == Heuristic::RcnnLike {
                let (fg, bg) = rcnn_quota(slot);
                for _ in 0..fg {
                    batch.push(entry(p.fg[rng.random_range(0..p.fg.len())]));
                }
                for _ in 0..bg {
                    batch.push(entry(p.bg[rng.random_range(0..p.bg.len())]));
                }
            } else {
                for _ in 0..per_image {
                    batch.push(entry(p.main[rng.random_range(0..p.main.len())]));
                }
            }
        }
        batches.push(batch);
    }
    Ok(SampleManifest {
        config: config.clone(),
        batches,
    })
}
