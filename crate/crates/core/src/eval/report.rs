//! mAP aggregation, single-threshold and COCO-style.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ap::{average_precision, pr_curve, ApMode};
use super::matching::{match_with_ignore, MatchOutcome};
use crate::error::{Error, Result};
use crate::geometry::{ClassId, Detection, GroundTruthObject};

/// Upper bound (exclusive) of the small bucket, in square pixels.
pub const SMALL_AREA_MAX: f64 = 32.0 * 32.0;
/// Upper bound (inclusive) of the medium bucket, in square pixels.
pub const MEDIUM_AREA_MAX: f64 = 96.0 * 96.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeBucket {
    Small,
    Medium,
    Large,
}

impl SizeBucket {
    pub const ALL: [SizeBucket; 3] = [SizeBucket::Small, SizeBucket::Medium, SizeBucket::Large];

    pub fn of_area(area: f64) -> SizeBucket {
        if area < SMALL_AREA_MAX {
            SizeBucket::Small
        } else if area <= MEDIUM_AREA_MAX {
            SizeBucket::Medium
        } else {
            SizeBucket::Large
        }
    }
}

/// AP per size bucket; `None` where the bucket holds no ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SizeBucketAp {
    pub small: Option<f64>,
    pub medium: Option<f64>,
    pub large: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ap_mode: ApMode,
    pub iou_thresholds: Vec<f64>,
    /// AP per class with at least one non-difficult object, averaged over thresholds.
    pub per_class_ap: BTreeMap<ClassId, f64>,
    pub map: f64,
    /// mAP at each entry of `iou_thresholds`.
    pub map_per_threshold: Vec<f64>,
    pub num_detections: usize,
    pub num_ground_truth: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub size_ap: Option<SizeBucketAp>,
}

/// Per-class AP for every class that has positives.
pub fn class_aps(outcome: &MatchOutcome, mode: ApMode) -> BTreeMap<ClassId, f64> {
    outcome
        .classes
        .iter()
        .filter(|(_, c)| c.n_positives > 0)
        .map(|(&id, _)| (id, average_precision(&pr_curve(outcome, id), mode)))
        .collect()
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// mAP with some ground truth ignored; `None` when no class keeps a positive.
pub fn map_with_ignore<F>(
    dets: &[Detection],
    gts: &[GroundTruthObject],
    num_classes: u32,
    iou_threshold: f64,
    mode: ApMode,
    ignore: F,
) -> Result<Option<f64>>
where
    F: Fn(usize, &GroundTruthObject) -> bool,
{
    let outcome = match_with_ignore(dets, gts, num_classes, iou_threshold, ignore)?;
    Ok(mean(class_aps(&outcome, mode).into_values()))
}

/// Single-threshold evaluation; mAP is the unweighted mean over classes with
/// at least one non-difficult object.
pub fn evaluate_map(
    dets: &[Detection],
    gts: &[GroundTruthObject],
    num_classes: u32,
    iou_threshold: f64,
    mode: ApMode,
) -> Result<EvalReport> {
    let outcome = match_with_ignore(dets, gts, num_classes, iou_threshold, |_, _| false)?;
    let per_class_ap = class_aps(&outcome, mode);
    let map = mean(per_class_ap.values().copied()).ok_or(Error::EmptyGroundTruth)?;
    Ok(EvalReport {
        ap_mode: mode,
        iou_thresholds: vec![iou_threshold],
        per_class_ap,
        map,
        map_per_threshold: vec![map],
        num_detections: dets.len(),
        num_ground_truth: gts.len(),
        size_ap: None,
    })
}

/// IoU thresholds 0.50, 0.55, ..., 0.95.
pub fn coco_thresholds() -> Vec<f64> {
    (0..10).map(|i| f64::from(50 + 5 * i) / 100.0).collect()
}

/// COCO-style evaluation: all-point AP averaged over [`coco_thresholds`],
/// plus AP per size bucket.
///
/// Bucket APs restrict positives to objects in the bucket; detections are
/// still matched against every object and matches to out-of-bucket objects
/// are ignored.
pub fn evaluate_coco_style(
    dets: &[Detection],
    gts: &[GroundTruthObject],
    num_classes: u32,
) -> Result<EvalReport> {
    let thresholds = coco_thresholds();
    let mode = ApMode::AllPoint;
    let mut per_class_sum: BTreeMap<ClassId, f64> = BTreeMap::new();
    let mut map_per_threshold = Vec::with_capacity(thresholds.len());
    for &t in &thresholds {
        let r = evaluate_map(dets, gts, num_classes, t, mode)?;
        for (c, ap) in r.per_class_ap {
            *per_class_sum.entry(c).or_default() += ap;
        }
        map_per_threshold.push(r.map);
    }
    let n = thresholds.len() as f64;
    let per_class_ap = per_class_sum.into_iter().map(|(c, s)| (c, s / n)).collect();
    let map = map_per_threshold.iter().sum::<f64>() / n;

    let mut bucket_ap = [None; 3];
    for (slot, bucket) in bucket_ap.iter_mut().zip(SizeBucket::ALL) {
        let mut per_t = Vec::with_capacity(thresholds.len());
        for &t in &thresholds {
            let ap = map_with_ignore(dets, gts, num_classes, t, mode, |_, g| {
                SizeBucket::of_area(g.bbox.area()) != bucket
            })?;
            match ap {
                Some(v) => per_t.push(v),
                None => break,
            }
        }
        *slot = (per_t.len() == thresholds.len()).then(|| per_t.iter().sum::<f64>() / n);
    }

    Ok(EvalReport {
        ap_mode: mode,
        iou_thresholds: thresholds,
        per_class_ap,
        map,
        map_per_threshold,
        num_detections: dets.len(),
        num_ground_truth: gts.len(),
        size_ap: Some(SizeBucketAp {
            small: bucket_ap[0],
            medium: bucket_ap[1],
            large: bucket_ap[2],
        }),
    })
}
