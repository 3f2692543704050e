//! Precision/recall curves and average precision.

use serde::{Deserialize, Serialize};

use super::matching::{MatchOutcome, Verdict};
use crate::geometry::ClassId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

/// One point per ranked, non-ignored detection.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
}

impl PrCurve {
    pub fn from_points(points: impl IntoIterator<Item = (f64, f64)>) -> Self {
        PrCurve {
            points: points
                .into_iter()
                .map(|(recall, precision)| PrPoint { recall, precision })
                .collect(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApMode {
    /// Area under the monotone precision envelope.
    #[default]
    AllPoint,
    /// Mean interpolated precision at recall 0, 0.1, ..., 1.0.
    ElevenPoint,
}

impl std::str::FromStr for ApMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all_point" => Ok(ApMode::AllPoint),
            "eleven_point" => Ok(ApMode::ElevenPoint),
            other => Err(format!("unknown ap mode `{other}` (all_point | eleven_point)")),
        }
    }
}

impl std::fmt::Display for ApMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ApMode::AllPoint => "all_point",
            ApMode::ElevenPoint => "eleven_point",
        })
    }
}

/// Cumulative precision and recall down the ranking of `class_id`.
///
/// Ignored detections contribute no point. With no positives every recall is 0.
pub fn pr_curve(outcome: &MatchOutcome, class_id: ClassId) -> PrCurve {
    let Some(class) = outcome.class(class_id) else {
        return PrCurve::default();
    };
    let n_pos = class.n_positives as f64;
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut points = Vec::with_capacity(class.ranked.len());
    for m in &class.ranked {
        match m.verdict {
            Verdict::TruePositive => tp += 1,
            Verdict::FalsePositive => fp += 1,
            Verdict::Ignored => continue,
        }
        let recall = if n_pos > 0.0 { tp as f64 / n_pos } else { 0.0 };
        points.push(PrPoint {
            recall,
            precision: tp as f64 / (tp + fp) as f64,
        });
    }
    PrCurve { points }
}

pub fn average_precision(curve: &PrCurve, mode: ApMode) -> f64 {
    if curve.is_empty() {
        return 0.0;
    }
    match mode {
        ApMode::AllPoint => all_point(curve),
        ApMode::ElevenPoint => eleven_point(curve),
    }
}

fn all_point(curve: &PrCurve) -> f64 {
    let n = curve.points.len();
    let mut recall = Vec::with_capacity(n + 2);
    let mut precision = Vec::with_capacity(n + 2);
    recall.push(0.0);
    precision.push(0.0);
    for p in &curve.points {
        recall.push(p.recall);
        precision.push(p.precision);
    }
    recall.push(1.0);
    precision.push(0.0);

    for i in (0..precision.len() - 1).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut ap = 0.0;
    for i in 1..recall.len() {
        if recall[i] != recall[i - 1] {
            ap += (recall[i] - recall[i - 1]) * precision[i];
        }
    }
    ap.clamp(0.0, 1.0)
}

fn eleven_point(curve: &PrCurve) -> f64 {
    let total: f64 = (0..=10)
        .map(|k| {
            let r = k as f64 / 10.0;
            curve
                .points
                .iter()
                .filter(|p| p.recall >= r)
                .map(|p| p.precision)
                .fold(0.0, f64::max)
        })
        .sum();
    total / 11.0
}
