//! A simulated base detector with controllable failure modes.
//!
//! Besides jittered true positives it injects three kinds of confident false
//! positives: boxes covering only part of an object (correct class, IoU in
//! `[0.1, 0.5)`), well-placed boxes carrying a similar but wrong class, and
//! boxes on background.

use std::collections::BTreeMap;

use rand::Rng as _;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::analysis::{SimilarityGroups, TAXONOMY_MIN_IOU};
use crate::error::{Error, Result};
use crate::geometry::{clamp_to_image, iou, BoundingBox, ClassId, Detection, GroundTruthObject, ImageId, ImageInfo};
use crate::rng::{substream, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScoreDistribution {
    Beta { alpha: f64, beta: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl ScoreDistribution {
    fn validate(&self) -> Result<()> {
        match *self {
            ScoreDistribution::Beta { alpha, beta } if alpha > 0.0 && beta > 0.0 => Ok(()),
            ScoreDistribution::Uniform { lo, hi } if 0.0 <= lo && lo <= hi && hi <= 1.0 => Ok(()),
            other => Err(Error::config(format!("invalid score distribution {other:?}"))),
        }
    }

    fn sample(&self, rng: &mut Rng) -> f64 {
        let v = match *self {
            ScoreDistribution::Beta { alpha, beta } => {
                Beta::new(alpha, beta).expect("validated").sample(rng)
            }
            ScoreDistribution::Uniform { lo, hi } => {
                if lo == hi {
                    lo
                } else {
                    rng.random_range(lo..=hi)
                }
            }
        };
        v.clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErrorModeConfig {
    /// Probability that an object yields a jittered true positive.
    pub tp_rate: f64,
    /// Corner jitter as a fraction of box width/height.
    pub jitter: f64,
    /// Per object: box covering part of it, same class.
    pub rate_partial: f64,
    /// Per object: well-placed box with a similar but wrong class.
    pub rate_confusion: f64,
    /// Per grid cell: box on background.
    pub rate_background: f64,
    /// Background cells per image side.
    pub background_grid: u32,
    /// Inclusive side-length range of background boxes, in pixels.
    pub background_size: [f64; 2],
    pub tp_score: ScoreDistribution,
    pub partial_score: ScoreDistribution,
    pub confusion_score: ScoreDistribution,
    pub background_score: ScoreDistribution,
    /// Construction attempts per injected box before it is skipped.
    pub max_attempts: usize,
    pub seed: u64,
}

impl Default for ErrorModeConfig {
    fn default() -> Self {
        ErrorModeConfig {
            tp_rate: 0.9,
            jitter: 0.1,
            rate_partial: 0.4,
            rate_confusion: 0.3,
            rate_background: 0.1,
            background_grid: 3,
            background_size: [16.0, 48.0],
            tp_score: ScoreDistribution::Beta { alpha: 5.0, beta: 2.0 },
            partial_score: ScoreDistribution::Beta { alpha: 3.0, beta: 3.0 },
            confusion_score: ScoreDistribution::Beta { alpha: 3.0, beta: 2.5 },
            background_score: ScoreDistribution::Beta { alpha: 2.0, beta: 3.0 },
            max_attempts: 100,
            seed: 42,
        }
    }
}

impl ErrorModeConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, rate) in [
            ("tp_rate", self.tp_rate),
            ("rate_partial", self.rate_partial),
            ("rate_confusion", self.rate_confusion),
            ("rate_background", self.rate_background),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::config(format!("{name} {rate} outside [0, 1]")));
            }
        }
        if !(self.jitter >= 0.0 && self.jitter < 0.5) {
            return Err(Error::config(format!("jitter {} outside [0, 0.5)", self.jitter)));
        }
        let [lo, hi] = self.background_size;
        if !(lo >= 1.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::config("background_size must satisfy 1 <= lo <= hi"));
        }
        if self.background_grid == 0 {
            return Err(Error::config("background_grid must be positive"));
        }
        if self.max_attempts == 0 {
            return Err(Error::config("max_attempts must be positive"));
        }
        for d in [&self.tp_score, &self.partial_score, &self.confusion_score, &self.background_score] {
            d.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectedKind {
    TruePositive,
    Partial,
    Confusion,
    Background,
}

impl InjectedKind {
    pub const ALL: [InjectedKind; 4] = [
        InjectedKind::TruePositive,
        InjectedKind::Partial,
        InjectedKind::Confusion,
        InjectedKind::Background,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct KindCounts {
    /// Bernoulli draws that asked for a box.
    pub requested: usize,
    pub constructed: usize,
    /// Requests dropped because no valid geometry was found.
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionStats {
    pub per_kind: BTreeMap<InjectedKind, KindCounts>,
    /// Bernoulli trials per kind: objects for per-object kinds, cells for background.
    pub trials: BTreeMap<InjectedKind, usize>,
}

impl InjectionStats {
    pub fn skipped(&self) -> usize {
        self.per_kind.values().map(|c| c.skipped).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedDetections {
    pub detections: Vec<Detection>,
    /// What each detection was constructed as, parallel to `detections`.
    pub kinds: Vec<InjectedKind>,
    pub stats: InjectionStats,
}

fn jittered(rng: &mut Rng, b: &BoundingBox, jitter: f64) -> Option<BoundingBox> {
    if jitter == 0.0 {
        return Some(*b);
    }
    let (jw, jh) = (jitter * b.width(), jitter * b.height());
    let mut d = |s: f64| rng.random_range(-s..=s);
    let (x0, x1) = (b.x_min() + d(jw), b.x_max() + d(jw));
    let (y0, y1) = (b.y_min() + d(jh), b.y_max() + d(jh));
    BoundingBox::new(x0, y0, x1, y1).ok().filter(|c| c.area() > 0.0)
}

struct Ctx<'a> {
    info: &'a ImageInfo,
    gts: &'a [&'a GroundTruthObject],
}

impl Ctx<'_> {
    fn clamp(&self, b: BoundingBox) -> Option<BoundingBox> {
        clamp_to_image(&b, self.info.width, self.info.height)
            .ok()
            .filter(|c| c.area() > 0.0)
    }

    fn max_iou(&self, b: &BoundingBox, class: Option<ClassId>) -> f64 {
        self.gts
            .iter()
            .filter(|g| class.is_none_or(|c| g.class_id == c))
            .map(|g| iou(b, &g.bbox))
            .fold(0.0, f64::max)
    }
}

fn true_positive(rng: &mut Rng, ctx: &Ctx, g: &GroundTruthObject, cfg: &ErrorModeConfig) -> BoundingBox {
    for _ in 0..cfg.max_attempts {
        if let Some(b) = jittered(rng, &g.bbox, cfg.jitter).and_then(|b| ctx.clamp(b)) {
            if iou(&b, &g.bbox) >= 0.5 {
                return b;
            }
        }
    }
    g.bbox
}

/// Box overlapping `g` with IoU in `[0.1, 0.5)` and no same-class overlap of 0.5.
fn partial(rng: &mut Rng, ctx: &Ctx, g: &GroundTruthObject, cfg: &ErrorModeConfig) -> Option<BoundingBox> {
    for _ in 0..cfg.max_attempts {
        let (w, h) = (g.bbox.width(), g.bbox.height());
        let sw = w * rng.random_range(0.4..1.3);
        let sh = h * rng.random_range(0.4..1.3);
        let (cx, cy) = g.bbox.center();
        let cx = cx + w * rng.random_range(-0.7..0.7);
        let cy = cy + h * rng.random_range(-0.7..0.7);
        let Some(b) = BoundingBox::new(cx - sw / 2.0, cy - sh / 2.0, cx + sw / 2.0, cy + sh / 2.0)
            .ok()
            .and_then(|b| ctx.clamp(b))
        else {
            continue;
        };
        let o = iou(&b, &g.bbox);
        if (0.12..0.48).contains(&o) && ctx.max_iou(&b, Some(g.class_id)) < 0.48 {
            return Some(b);
        }
    }
    None
}

/// Well-localized box on `g` with a different class from its similarity group.
fn confusion(
    rng: &mut Rng,
    ctx: &Ctx,
    g: &GroundTruthObject,
    groups: &SimilarityGroups,
    cfg: &ErrorModeConfig,
) -> Option<(BoundingBox, ClassId)> {
    let similar: Vec<ClassId> = groups
        .group_of(g.class_id)?
        .classes
        .iter()
        .copied()
        .filter(|&c| c != g.class_id)
        .collect();
    if similar.is_empty() {
        return None;
    }
    let class = similar[rng.random_range(0..similar.len())];
    for _ in 0..cfg.max_attempts {
        let Some(b) = jittered(rng, &g.bbox, cfg.jitter).and_then(|b| ctx.clamp(b)) else {
            continue;
        };
        // no same-class object nearby, so it cannot be a TP or a Loc error
        if iou(&b, &g.bbox) >= 0.5 && ctx.max_iou(&b, Some(class)) < TAXONOMY_MIN_IOU {
            return Some((b, class));
        }
    }
    None
}

fn background(
    rng: &mut Rng,
    ctx: &Ctx,
    cell: (u32, u32),
    cfg: &ErrorModeConfig,
) -> Option<BoundingBox> {
    let n = f64::from(cfg.background_grid);
    let (cw, ch) = (f64::from(ctx.info.width) / n, f64::from(ctx.info.height) / n);
    let [lo, hi] = cfg.background_size;
    for _ in 0..cfg.max_attempts {
        let cx = (f64::from(cell.0) + rng.random_range(0.0..1.0)) * cw;
        let cy = (f64::from(cell.1) + rng.random_range(0.0..1.0)) * ch;
        let w = if lo == hi { lo } else { rng.random_range(lo..=hi) };
        let h = if lo == hi { lo } else { rng.random_range(lo..=hi) };
        let Some(b) = BoundingBox::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)
            .ok()
            .and_then(|b| ctx.clamp(b))
        else {
            continue;
        };
        if ctx.max_iou(&b, None) < TAXONOMY_MIN_IOU {
            return Some(b);
        }
    }
    None
}

/// Simulates detector output over `images`.
///
/// Per object: a true positive with probability `tp_rate` (IoU >= 0.5 by
/// rejection), a partial-object box with probability `rate_partial` and a
/// similar-class confusion with probability `rate_confusion`. Per cell of a
/// `background_grid x background_grid` grid: a background box with
/// probability `rate_background`. Each image draws from a substream keyed by its id.
pub fn simulate_base_detector(
    images: &[ImageInfo],
    gts: &[GroundTruthObject],
    groups: &SimilarityGroups,
    cfg: &ErrorModeConfig,
) -> Result<SimulatedDetections> {
    cfg.validate()?;
    let num_classes = groups.num_classes();
    let mut by_image: BTreeMap<&ImageId, Vec<&GroundTruthObject>> = BTreeMap::new();
    for g in gts {
        if g.class_id == 0 || g.class_id > num_classes {
            return Err(Error::ClassOutOfVocabulary {
                class_id: g.class_id,
                num_classes,
            });
        }
        by_image.entry(&g.image_id).or_default().push(g);
    }

    let mut detections = Vec::new();
    let mut kinds = Vec::new();
    let mut per_kind: BTreeMap<InjectedKind, KindCounts> =
        InjectedKind::ALL.into_iter().map(|k| (k, KindCounts::default())).collect();
    let mut trials: BTreeMap<InjectedKind, usize> =
        InjectedKind::ALL.into_iter().map(|k| (k, 0)).collect();
    let empty = Vec::new();

    let mut push = |d: Option<(BoundingBox, ClassId, f64)>, kind: InjectedKind, id: &ImageId| {
        let counts = per_kind.get_mut(&kind).expect("all kinds");
        counts.requested += 1;
        match d {
            Some((bbox, class_id, score)) => {
                counts.constructed += 1;
                detections.push(Detection {
                    image_id: id.clone(),
                    class_id,
                    score,
                    bbox,
                });
                kinds.push(kind);
            }
            None => counts.skipped += 1,
        }
    };

    for info in images {
        let mut rng = substream(cfg.seed, &format!("detector/{}", info.id), 0);
        let image_gts = by_image.get(&info.id).unwrap_or(&empty);
        let ctx = Ctx { info, gts: image_gts };

        for g in image_gts {
            for kind in [InjectedKind::TruePositive, InjectedKind::Partial, InjectedKind::Confusion] {
                *trials.get_mut(&kind).expect("all kinds") += 1;
                let rate = match kind {
                    InjectedKind::TruePositive => cfg.tp_rate,
                    InjectedKind::Partial => cfg.rate_partial,
                    _ => cfg.rate_confusion,
                };
                if !rng.random_bool(rate) {
                    continue;
                }
                let made = match kind {
                    InjectedKind::TruePositive => Some((true_positive(&mut rng, &ctx, g, cfg), g.class_id)),
                    InjectedKind::Partial => partial(&mut rng, &ctx, g, cfg).map(|b| (b, g.class_id)),
                    _ => confusion(&mut rng, &ctx, g, groups, cfg),
                };
                let dist = match kind {
                    InjectedKind::TruePositive => &cfg.tp_score,
                    InjectedKind::Partial => &cfg.partial_score,
                    _ => &cfg.confusion_score,
                };
                let scored = made.map(|(b, c)| (b, c, dist.sample(&mut rng)));
                push(scored, kind, &info.id);
            }
        }

        for cy in 0..cfg.background_grid {
            for cx in 0..cfg.background_grid {
                *trials.get_mut(&InjectedKind::Background).expect("all kinds") += 1;
                if !rng.random_bool(cfg.rate_background) {
                    continue;
                }
                let made = background(&mut rng, &ctx, (cx, cy), cfg).map(|b| {
                    let class = rng.random_range(1..=num_classes);
                    (b, class, cfg.background_score.sample(&mut rng))
                });
                push(made, InjectedKind::Background, &info.id);
            }
        }
    }

    Ok(SimulatedDetections {
        detections,
        kinds,
        stats: InjectionStats { per_kind, trials },
    })
}
