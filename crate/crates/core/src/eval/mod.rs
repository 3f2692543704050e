//! Detection evaluation: matching, precision/recall and (m)AP.

mod ap;
mod matching;
mod report;

pub use ap::{average_precision, pr_curve, ApMode, PrCurve, PrPoint};
pub use matching::{
    match_detections, match_with_ignore, ClassOutcome, MatchOutcome, RankedMatch, Verdict,
};
pub use report::{
    class_aps, coco_thresholds, evaluate_coco_style, evaluate_map, map_with_ignore, EvalReport,
    SizeBucket, SizeBucketAp, MEDIUM_AREA_MAX, SMALL_AREA_MAX,
};
