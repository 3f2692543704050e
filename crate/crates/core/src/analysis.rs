//! False-positive diagnostics: score histograms, hypothesized mAP after FP
//! removal, the Loc/Sim/Oth/BG taxonomy and per-characteristic AP.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{evaluate_map, map_with_ignore, match_detections, ApMode, Verdict};
use crate::geometry::{iou, ClassId, Detection, GroundTruthObject, ImageId};

/// Score bins used for the FP histogram unless configured otherwise.
pub const DEFAULT_FP_BIN_EDGES: [f64; 8] = [0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

/// Overlap at which an FP counts as touching an object.
pub const TAXONOMY_MIN_IOU: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpBinReport {
    pub edges: Vec<f64>,
    /// `counts[i]` covers `[edges[i], edges[i + 1])`; the last bin is closed.
    pub counts: Vec<usize>,
    /// Every false positive, binned or not.
    pub total_fp: usize,
}

impl FpBinReport {
    pub fn binned(&self) -> usize {
        self.counts.iter().sum()
    }
}

fn validate_edges(edges: &[f64], unit_interval: bool) -> Result<()> {
    if edges.len() < 2 {
        return Err(Error::config("need at least two bin edges"));
    }
    if edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::config("bin edges must be strictly increasing"));
    }
    if unit_interval && edges.iter().any(|e| !(0.0..=1.0).contains(e)) {
        return Err(Error::config("score bin edges must lie in [0, 1]"));
    }
    Ok(())
}

/// Index of the bin holding `value`, or `None` when outside all bins.
fn bin_index(edges: &[f64], value: f64) -> Option<usize> {
    let last = edges.len() - 2;
    if value < edges[0] || value > edges[last + 1] {
        return None;
    }
    let i = edges.partition_point(|&e| e <= value).saturating_sub(1);
    Some(i.min(last))
}

/// Histogram of false-positive scores.
pub fn fp_score_bins(
    dets: &[Detection],
    gts: &[GroundTruthObject],
    num_classes: u32,
    iou_threshold: f64,
    edges: &[f64],
) -> Result<FpBinReport> {
    validate_edges(edges, true)?;
    let outcome = match_detections(dets, gts, num_classes, iou_threshold)?;
    let mut counts = vec![0; edges.len() - 1];
    let mut total_fp = 0;
    for i in outcome.false_positives() {
        total_fp += 1;
        if let Some(b) = bin_index(edges, dets[i].score) {
            counts[b] += 1;
        }
    }
    Ok(FpBinReport {
        edges: edges.to_vec(),
        counts,
        total_fp,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesizedPoint {
    pub threshold: f64,
    pub map: f64,
    /// False positives deleted at this threshold.
    pub removed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesizedMapCurve {
    pub base_map: f64,
    pub points: Vec<HypothesizedPoint>,
}

/// mAP after deleting every false positive scored above each threshold.
///
/// Verdicts come from one matching pass over the full detection set; deleted
/// FPs are treated as correctly reclassified to background.
pub fn hypothesized_map_curve(
    dets: &[Detection],
    gts: &[GroundTruthObject],
    num_classes: u32,
    iou_threshold: f64,
    mode: ApMode,
    thresholds: &[f64],
) -> Result<HypothesizedMapCurve> {
    if let Some(t) = thresholds.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::config(format!("threshold {t} outside [0, 1]")));
    }
    let outcome = match_detections(dets, gts, num_classes, iou_threshold)?;
    let base_map = evaluate_map(dets, gts, num_classes, iou_threshold, mode)?.map;
    let verdicts = outcome.verdicts();

    let mut points = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        let kept: Vec<Detection> = dets
            .iter()
            .zip(verdicts)
            .filter(|(d, v)| !(**v == Verdict::FalsePositive && d.score > t))
            .map(|(d, _)| d.clone())
            .collect();
        let removed = dets.len() - kept.len();
        let map = if removed == 0 {
            base_map
        } else {
            evaluate_map(&kept, gts, num_classes, iou_threshold, mode)?.map
        };
        points.push(HypothesizedPoint {
            threshold: t,
            map,
            removed,
        });
    }
    Ok(HypothesizedMapCurve { base_map, points })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FpCategory {
    /// Right class, poor localization.
    Loc,
    /// Confused with a class from the same similarity group.
    Sim,
    /// Confused with an unrelated class.
    Oth,
    /// Fired on background.
    #[serde(rename = "BG")]
    Bg,
}

impl FpCategory {
    pub const ALL: [FpCategory; 4] = [FpCategory::Loc, FpCategory::Sim, FpCategory::Oth, FpCategory::Bg];

    pub fn label(self) -> &'static str {
        match self {
            FpCategory::Loc => "Loc",
            FpCategory::Sim => "Sim",
            FpCategory::Oth => "Oth",
            FpCategory::Bg => "BG",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimilarityGroup {
    pub name: String,
    pub classes: Vec<ClassId>,
}

/// A partition of the class vocabulary into groups of look-alike classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<SimilarityGroup>", into = "Vec<SimilarityGroup>")]
pub struct SimilarityGroups {
    groups: Vec<SimilarityGroup>,
    /// group index per class, `lookup[c - 1]`
    #[serde(skip)]
    lookup: Vec<usize>,
}

impl SimilarityGroups {
    pub fn new(groups: Vec<SimilarityGroup>) -> Result<Self> {
        let num_classes = groups.iter().map(|g| g.classes.len()).sum::<usize>();
        let mut lookup = vec![usize::MAX; num_classes];
        for (gi, g) in groups.iter().enumerate() {
            for &c in &g.classes {
                let slot = (c as usize)
                    .checked_sub(1)
                    .and_then(|i| lookup.get_mut(i))
                    .ok_or_else(|| {
                        Error::config(format!(
                            "similarity groups must partition classes 1..={num_classes}; found class {c}"
                        ))
                    })?;
                if *slot != usize::MAX {
                    return Err(Error::config(format!("class {c} appears in two similarity groups")));
                }
                *slot = gi;
            }
        }
        Ok(SimilarityGroups { groups, lookup })
    }

    /// Every class in one group.
    pub fn single_group(num_classes: u32) -> Self {
        Self::new(vec![SimilarityGroup {
            name: "all".into(),
            classes: (1..=num_classes).collect(),
        }])
        .expect("contiguous partition")
    }

    /// Every class alone.
    pub fn singletons(num_classes: u32) -> Self {
        Self::new(
            (1..=num_classes)
                .map(|c| SimilarityGroup {
                    name: format!("class_{c}"),
                    classes: vec![c],
                })
                .collect(),
        )
        .expect("contiguous partition")
    }

    pub fn num_classes(&self) -> u32 {
        self.lookup.len() as u32
    }

    pub fn groups(&self) -> &[SimilarityGroup] {
        &self.groups
    }

    pub fn group_of(&self, class_id: ClassId) -> Option<&SimilarityGroup> {
        let gi = *self.lookup.get((class_id as usize).checked_sub(1)?)?;
        self.groups.get(gi)
    }

    pub fn similar(&self, a: ClassId, b: ClassId) -> bool {
        let idx = |c: ClassId| (c as usize).checked_sub(1).and_then(|i| self.lookup.get(i));
        a != b && idx(a).is_some() && idx(a) == idx(b)
    }
}

impl TryFrom<Vec<SimilarityGroup>> for SimilarityGroups {
    type Error = Error;

    fn try_from(groups: Vec<SimilarityGroup>) -> Result<Self> {
        SimilarityGroups::new(groups)
    }
}

impl From<SimilarityGroups> for Vec<SimilarityGroup> {
    fn from(g: SimilarityGroups) -> Self {
        g.groups
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CategoryCounts {
    #[serde(rename = "Loc")]
    pub loc: usize,
    #[serde(rename = "Sim")]
    pub sim: usize,
    #[serde(rename = "Oth")]
    pub oth: usize,
    #[serde(rename = "BG")]
    pub bg: usize,
}

impl CategoryCounts {
    pub fn get(&self, c: FpCategory) -> usize {
        match c {
            FpCategory::Loc => self.loc,
            FpCategory::Sim => self.sim,
            FpCategory::Oth => self.oth,
            FpCategory::Bg => self.bg,
        }
    }

    fn bump(&mut self, c: FpCategory) {
        match c {
            FpCategory::Loc => self.loc += 1,
            FpCategory::Sim => self.sim += 1,
            FpCategory::Oth => self.oth += 1,
            FpCategory::Bg => self.bg += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.loc + self.sim + self.oth + self.bg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategorizedFp {
    pub detection: usize,
    pub class_id: ClassId,
    pub score: f64,
    pub category: FpCategory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyReport {
    pub fps: Vec<CategorizedFp>,
    pub per_class: BTreeMap<ClassId, CategoryCounts>,
    pub total: CategoryCounts,
    pub groups: SimilarityGroups,
}

/// Category of one false positive given every object in its image.
///
/// Precedence is Loc, Sim, Oth, BG. Loc covers any same-class overlap of at
/// least 0.1; an FP can only reach 0.5 or more when it duplicates a matched
/// object.
pub fn categorize_fp<'a>(
    det: &Detection,
    image_gts: impl IntoIterator<Item = &'a GroundTruthObject>,
    groups: &SimilarityGroups,
) -> FpCategory {
    let (mut same, mut similar, mut other) = (0.0f64, 0.0f64, 0.0f64);
    for g in image_gts {
        let o = iou(&det.bbox, &g.bbox);
        if g.class_id == det.class_id {
            same = same.max(o);
        } else if groups.similar(g.class_id, det.class_id) {
            similar = similar.max(o);
        } else {
            other = other.max(o);
        }
    }
    if same >= TAXONOMY_MIN_IOU {
        FpCategory::Loc
    } else if similar >= TAXONOMY_MIN_IOU {
        FpCategory::Sim
    } else if other >= TAXONOMY_MIN_IOU {
        FpCategory::Oth
    } else {
        FpCategory::Bg
    }
}

pub fn fp_taxonomy(
    dets: &[Detection],
    gts: &[GroundTruthObject],
    num_classes: u32,
    iou_threshold: f64,
    groups: &SimilarityGroups,
) -> Result<TaxonomyReport> {
    if groups.num_classes() != num_classes {
        return Err(Error::config(format!(
            "similarity groups cover {} classes, vocabulary has {num_classes}",
            groups.num_classes()
        )));
    }
    let outcome = match_detections(dets, gts, num_classes, iou_threshold)?;
    let mut by_image: BTreeMap<&ImageId, Vec<&GroundTruthObject>> = BTreeMap::new();
    for g in gts {
        by_image.entry(&g.image_id).or_default().push(g);
    }

    let mut per_class: BTreeMap<ClassId, CategoryCounts> =
        (1..=num_classes).map(|c| (c, CategoryCounts::default())).collect();
    let mut total = CategoryCounts::default();
    let mut fps = Vec::new();
    for i in outcome.false_positives() {
        let d = &dets[i];
        let image_gts = by_image.get(&d.image_id).map(Vec::as_slice).unwrap_or(&[]);
        let category = categorize_fp(d, image_gts.iter().copied(), groups);
        per_class.get_mut(&d.class_id).expect("validated").bump(category);
        total.bump(category);
        fps.push(CategorizedFp {
            detection: i,
            class_id: d.class_id,
            score: d.score,
            category,
        });
    }
    Ok(TaxonomyReport {
        fps,
        per_class,
        total,
        groups: groups.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Characteristic {
    /// Pixel area of the object box.
    Size,
    /// Width over height of the object box.
    Aspect,
}

impl Characteristic {
    pub fn of(self, g: &GroundTruthObject) -> f64 {
        match self {
            Characteristic::Size => g.bbox.area(),
            Characteristic::Aspect => g.bbox.aspect_ratio().unwrap_or(f64::MAX),
        }
    }

    pub fn default_edges(self) -> Vec<f64> {
        match self {
            Characteristic::Size => vec![0.0, 32.0 * 32.0, 96.0 * 96.0, f64::MAX],
            Characteristic::Aspect => vec![0.0, 0.75, 4.0 / 3.0, f64::MAX],
        }
    }
}

impl std::str::FromStr for Characteristic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "size" => Ok(Characteristic::Size),
            "aspect" => Ok(Characteristic::Aspect),
            other => Err(format!("unknown characteristic `{other}` (size | aspect)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityBin {
    pub lo: f64,
    pub hi: f64,
    pub num_gt: usize,
    /// Absent when the bin holds no positives.
    pub ap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub characteristic: Characteristic,
    pub bins: Vec<SensitivityBin>,
    /// max minus min over bins with an AP.
    pub spread: Option<f64>,
}

/// AP with ground truth restricted to each characteristic bin.
///
/// Matches to objects outside the bin are ignored. This is plain AP per bin,
/// not a normalized-precision variant.
pub fn sensitivity_by_characteristic(
    dets: &[Detection],
    gts: &[GroundTruthObject],
    num_classes: u32,
    iou_threshold: f64,
    mode: ApMode,
    characteristic: Characteristic,
    edges: &[f64],
) -> Result<SensitivityReport> {
    validate_edges(edges, false)?;
    let bin_of: Vec<usize> = gts
        .iter()
        .map(|g| {
            let v = characteristic.of(g);
            bin_index(edges, v).ok_or_else(|| {
                Error::config(format!(
                    "{characteristic:?} bins [{}, {}] do not cover value {v} of an object in {}",
                    edges[0],
                    edges[edges.len() - 1],
                    g.image_id
                ))
            })
        })
        .collect::<Result<_>>()?;

    let mut bins = Vec::with_capacity(edges.len() - 1);
    for b in 0..edges.len() - 1 {
        let num_gt = bin_of.iter().filter(|&&x| x == b).count();
        let ap = if num_gt == 0 {
            None
        } else {
            map_with_ignore(dets, gts, num_classes, iou_threshold, mode, |i, _| {
                bin_of[i] != b
            })?
        };
        bins.push(SensitivityBin {
            lo: edges[b],
            hi: edges[b + 1],
            num_gt,
            ap,
        });
    }
    let present: Vec<f64> = bins.iter().filter_map(|b| b.ap).collect();
    let spread = (!present.is_empty()).then(|| {
        present.iter().copied().fold(f64::MIN, f64::max)
            - present.iter().copied().fold(f64::MAX, f64::min)
    });
    Ok(SensitivityReport {
        characteristic,
        bins,
        spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoundingBox;

    fn bb(x0: f64, y0: f64, x1: f64, y1: f64) -> BoundingBox {
        BoundingBox::new(x0, y0, x1, y1).unwrap()
    }

    fn det(class_id: ClassId, score: f64, b: BoundingBox) -> Detection {
        Detection::new("img".into(), class_id, score, b).unwrap()
    }

    fn gt(class_id: ClassId, b: BoundingBox) -> GroundTruthObject {
        GroundTruthObject::new("img".into(), class_id, b)
    }

    #[test]
    fn bins_fp_scores() {
        let g = vec![gt(1, bb(0., 0., 10., 10.))];
        let far = bb(50., 50., 60., 60.);
        let dets = vec![det(1, 0.35, far), det(1, 0.55, far), det(1, 0.95, far)];
        let r = fp_score_bins(&dets, &g, 1, 0.5, &[0.3, 0.5, 0.7, 1.0]).unwrap();
        assert_eq!(r.counts, vec![1, 1, 1]);
        assert_eq!(r.total_fp, 3);
    }

    #[test]
    fn bins_without_fps_are_zero() {
        let g = vec![gt(1, bb(0., 0., 10., 10.))];
        let r = fp_score_bins(&[], &g, 1, 0.5, &DEFAULT_FP_BIN_EDGES).unwrap();
        assert!(r.counts.iter().all(|&c| c == 0));
        let tp = vec![det(1, 0.9, bb(0., 0., 10., 10.))];
        let r = fp_score_bins(&tp, &g, 1, 0.5, &DEFAULT_FP_BIN_EDGES).unwrap();
        assert!(r.counts.iter().all(|&c| c == 0));
        assert_eq!(r.total_fp, 0);
    }

    #[test]
    fn score_one_lands_in_last_bin() {
        let edges = [0.0, 0.5, 1.0];
        assert_eq!(bin_index(&edges, 1.0), Some(1));
        assert_eq!(bin_index(&edges, 0.5), Some(1));
        assert_eq!(bin_index(&edges, 0.0), Some(0));
        assert_eq!(bin_index(&[0.3, 1.0], 0.2), None);
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(fp_score_bins(&[], &[], 1, 0.5, &[0.5, 0.3]).is_err());
        assert!(fp_score_bins(&[], &[], 1, 0.5, &[0.5]).is_err());
        assert!(fp_score_bins(&[], &[], 1, 0.5, &[0.5, 1.5]).is_err());
    }

    fn mixed_instance() -> (Vec<Detection>, Vec<GroundTruthObject>) {
        let g = vec![gt(1, bb(0., 0., 10., 10.)), gt(1, bb(20., 0., 30., 10.))];
        let dets = vec![
            det(1, 0.9, bb(40., 40., 50., 50.)),
            det(1, 0.8, bb(0., 0., 10., 10.)),
            det(1, 0.6, bb(60., 60., 70., 70.)),
            det(1, 0.4, bb(20., 0., 30., 10.)),
            det(1, 0.2, bb(80., 80., 90., 90.)),
        ];
        (dets, g)
    }

    #[test]
    fn hypothesized_curve_identity_and_full_removal() {
        let (dets, g) = mixed_instance();
        let c = hypothesized_map_curve(&dets, &g, 1, 0.5, ApMode::AllPoint, &[0.0, 0.5, 0.95, 1.0])
            .unwrap();
        assert_eq!(c.points[2].map, c.base_map);
        assert_eq!(c.points[3].map, c.base_map);
        assert_eq!(c.points[0].map, 1.0);
        assert_eq!(c.points[0].removed, 3);
        assert!(c.points[1].map >= c.points[2].map);
        assert!(c.base_map < 1.0);
    }

    #[test]
    fn taxonomy_examples() {
        let groups = SimilarityGroups::new(vec![
            SimilarityGroup { name: "animal".into(), classes: vec![1, 2] },
            SimilarityGroup { name: "vehicle".into(), classes: vec![3] },
        ])
        .unwrap();
        let g = vec![gt(1, bb(0., 0., 10., 10.)), gt(2, bb(50., 0., 60., 10.))];
        let dets = vec![
            // IoU 0.3 with class-1 object
            det(1, 0.9, bb(0., 0., 10., 3.)),
            // IoU 0.05 with everything
            det(1, 0.9, bb(0., 0., 10., 0.5)),
            // class 1 on the class-2 object: IoU 0.4, similar group
            det(1, 0.9, bb(50., 0., 60., 4.)),
            // class 3 on the class-2 object: other group
            det(3, 0.9, bb(50., 0., 60., 8.)),
            // nowhere near anything
            det(2, 0.5, bb(80., 80., 90., 90.)),
        ];
        let r = fp_taxonomy(&dets, &g, 3, 0.5, &groups).unwrap();
        let cats: Vec<_> = r.fps.iter().map(|f| f.category).collect();
        assert_eq!(
            cats,
            vec![FpCategory::Loc, FpCategory::Bg, FpCategory::Sim, FpCategory::Oth, FpCategory::Bg]
        );
        assert_eq!(r.total.total(), 5);
        assert_eq!(r.per_class[&1].loc, 1);
        assert_eq!(r.per_class[&3].oth, 1);
    }

    #[test]
    fn duplicate_counts_as_localization_error() {
        let g = vec![gt(1, bb(0., 0., 10., 10.))];
        let dets = vec![det(1, 0.9, bb(0., 0., 10., 10.)), det(1, 0.8, bb(0., 0., 10., 9.))];
        let r = fp_taxonomy(&dets, &g, 1, 0.5, &SimilarityGroups::single_group(1)).unwrap();
        assert_eq!(r.fps.len(), 1);
        assert_eq!(r.fps[0].category, FpCategory::Loc);
    }

    #[test]
    fn similarity_groups_must_partition() {
        let dup = vec![
            SimilarityGroup { name: "a".into(), classes: vec![1, 2] },
            SimilarityGroup { name: "b".into(), classes: vec![2] },
        ];
        assert!(SimilarityGroups::new(dup).is_err());
        let gap = vec![SimilarityGroup { name: "a".into(), classes: vec![1, 3] }];
        assert!(SimilarityGroups::new(gap).is_err());
        let g = SimilarityGroups::single_group(3);
        assert!(g.similar(1, 3));
        assert!(!g.similar(2, 2));
        assert!(!SimilarityGroups::singletons(3).similar(1, 2));
        let json = serde_json::to_string(&g).unwrap();
        let back: SimilarityGroups = serde_json::from_str(&json).unwrap();
        assert_eq!(back, g);
        assert!(serde_json::from_str::<SimilarityGroups>(r#"[{"name":"x","classes":[2]}]"#).is_err());
    }

    #[test]
    fn one_bin_matches_global_ap() {
        let (dets, g) = mixed_instance();
        let global = evaluate_map(&dets, &g, 1, 0.5, ApMode::AllPoint).unwrap().map;
        let r = sensitivity_by_characteristic(
            &dets, &g, 1, 0.5, ApMode::AllPoint, Characteristic::Size, &[0.0, 1e6],
        )
        .unwrap();
        assert_eq!(r.bins[0].ap, Some(global));
        assert_eq!(r.spread, Some(0.0));
    }

    #[test]
    fn detector_missing_small_objects() {
        let g = vec![gt(1, bb(0., 0., 10., 10.)), gt(1, bb(100., 100., 200., 200.))];
        let dets = vec![det(1, 0.9, bb(100., 100., 200., 200.))];
        let r = sensitivity_by_characteristic(
            &dets,
            &g,
            1,
            0.5,
            ApMode::AllPoint,
            Characteristic::Size,
            &Characteristic::Size.default_edges(),
        )
        .unwrap();
        assert_eq!(r.bins[0].ap, Some(0.0));
        assert_eq!(r.bins[1].ap, None);
        assert_eq!(r.bins[2].ap, Some(1.0));
        assert_eq!(r.spread, Some(1.0));
    }

    #[test]
    fn bins_must_cover_objects() {
        let g = vec![gt(1, bb(0., 0., 10., 10.))];
        let err = sensitivity_by_characteristic(
            &[], &g, 1, 0.5, ApMode::AllPoint, Characteristic::Size, &[200.0, 300.0],
        );
        assert!(err.is_err());
    }
}
