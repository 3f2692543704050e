//! Greedy detection-to-ground-truth matching.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{iou, ClassId, Detection, GroundTruthObject, ImageId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    TruePositive,
    FalsePositive,
    /// Matched an ignored (difficult or out-of-range) ground-truth object.
    Ignored,
}

/// Matching result for one detection.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedMatch {
    /// Index into the detection slice passed to the matcher.
    pub detection: usize,
    pub score: f64,
    pub verdict: Verdict,
    /// Index into the ground-truth slice for TP and ignored verdicts.
    pub matched_gt: Option<usize>,
    /// IoU with the matched object, or the best same-class overlap for FPs.
    pub iou: f64,
}

/// Ranked matches for a single class.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClassOutcome {
    /// Detections of this class ordered by descending score.
    pub ranked: Vec<RankedMatch>,
    /// Non-ignored ground-truth objects of this class.
    pub n_positives: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutcome {
    pub iou_threshold: f64,
    pub num_classes: u32,
    pub classes: BTreeMap<ClassId, ClassOutcome>,
    verdicts: Vec<Verdict>,
}

impl MatchOutcome {
    /// Verdict of each detection, in input order.
    pub fn verdicts(&self) -> &[Verdict] {
        &self.verdicts
    }

    pub fn class(&self, class_id: ClassId) -> Option<&ClassOutcome> {
        self.classes.get(&class_id)
    }

    /// Input indices of all false positives.
    pub fn false_positives(&self) -> impl Iterator<Item = usize> + '_ {
        self.verdicts
            .iter()
            .enumerate()
            .filter(|(_, v)| **v == Verdict::FalsePositive)
            .map(|(i, _)| i)
    }

    pub fn count(&self, verdict: Verdict) -> usize {
        self.verdicts.iter().filter(|v| **v == verdict).count()
    }
}

pub(crate) fn validate_threshold(iou_threshold: f64) -> Result<()> {
    if !(iou_threshold > 0.0 && iou_threshold <= 1.0) {
        return Err(Error::config(format!(
            "iou threshold {iou_threshold} outside (0, 1]"
        )));
    }
    Ok(())
}

pub(crate) fn validate_classes(
    dets: &[Detection],
    gts: &[GroundTruthObject],
    num_classes: u32,
) -> Result<()> {
    let classes = dets
        .iter()
        .map(|d| d.class_id)
        .chain(gts.iter().map(|g| g.class_id));
    for class_id in classes {
        if class_id == 0 || class_id > num_classes {
            return Err(Error::ClassOutOfVocabulary {
                class_id,
                num_classes,
            });
        }
    }
    Ok(())
}

/// Matches detections against ground truth, VOC style.
///
/// Within each class, detections are visited in descending score order (ties
/// keep input order). Each one takes the unmatched, non-difficult object of the
/// same class and image with the highest IoU; it is a TP when that IoU reaches
/// `iou_threshold`. Failing that, a detection overlapping a difficult object at
/// the threshold is ignored; anything else, duplicates included, is an FP.
pub fn match_detections(
    dets: &[Detection],
    gts: &[GroundTruthObject],
    num_classes: u32,
    iou_threshold: f64,
) -> Result<MatchOutcome> {
    match_with_ignore(dets, gts, num_classes, iou_threshold, |_, _| false)
}

/// [`match_detections`] with extra ground truth treated like difficult objects.
///
/// `ignore` receives each object's index in `gts`.
pub fn match_with_ignore<F>(
    dets: &[Detection],
    gts: &[GroundTruthObject],
    num_classes: u32,
    iou_threshold: f64,
    ignore: F,
) -> Result<MatchOutcome>
where
    F: Fn(usize, &GroundTruthObject) -> bool,
{
    validate_threshold(iou_threshold)?;
    validate_classes(dets, gts, num_classes)?;

    let ignored: Vec<bool> = gts
        .iter()
        .enumerate()
        .map(|(i, g)| g.difficult || ignore(i, g))
        .collect();
    let mut by_image_class: BTreeMap<(&ImageId, ClassId), Vec<usize>> = BTreeMap::new();
    for (i, g) in gts.iter().enumerate() {
        by_image_class.entry((&g.image_id, g.class_id)).or_default().push(i);
    }

    let mut classes: BTreeMap<ClassId, ClassOutcome> =
        (1..=num_classes).map(|c| (c, ClassOutcome::default())).collect();
    for (i, g) in gts.iter().enumerate() {
        if !ignored[i] {
            classes.get_mut(&g.class_id).expect("validated").n_positives += 1;
        }
    }

    let mut per_class_dets: BTreeMap<ClassId, Vec<usize>> = BTreeMap::new();
    for (i, d) in dets.iter().enumerate() {
        per_class_dets.entry(d.class_id).or_default().push(i);
    }

    let mut matched = vec![false; gts.len()];
    let mut verdicts = vec![Verdict::FalsePositive; dets.len()];
    let empty = Vec::new();

    for (class_id, mut order) in per_class_dets {
        // stable: equal scores keep input order
        order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score));
        let outcome = classes.get_mut(&class_id).expect("validated");
        outcome.ranked.reserve(order.len());

        for di in order {
            let det = &dets[di];
            let candidates = by_image_class
                .get(&(&det.image_id, class_id))
                .unwrap_or(&empty);

            let mut best_free: Option<(usize, f64)> = None;
            let mut best_ignored: Option<(usize, f64)> = None;
            let mut best_any = 0.0f64;
            for &gi in candidates {
                let o = iou(&det.bbox, &gts[gi].bbox);
                if ignored[gi] {
                    if best_ignored.is_none_or(|(_, b)| o > b) {
                        best_ignored = Some((gi, o));
                    }
                    continue;
                }
                best_any = best_any.max(o);
                if !matched[gi] && best_free.is_none_or(|(_, b)| o > b) {
                    best_free = Some((gi, o));
                }
            }

            let record = match (best_free, best_ignored) {
                (Some((gi, o)), _) if o >= iou_threshold => {
                    matched[gi] = true;
                    (Verdict::TruePositive, Some(gi), o)
                }
                (_, Some((gi, o))) if o >= iou_threshold => (Verdict::Ignored, Some(gi), o),
                _ => (Verdict::FalsePositive, None, best_any),
            };
            verdicts[di] = record.0;
            outcome.ranked.push(RankedMatch {
                detection: di,
                score: det.score,
                verdict: record.0,
                matched_gt: record.1,
                iou: record.2,
            });
        }
    }

    Ok(MatchOutcome {
        iou_threshold,
        num_classes,
        classes,
        verdicts,
    })
}
