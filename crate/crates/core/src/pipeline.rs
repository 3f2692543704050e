//! End-to-end runs: mine on a training split, train the refiner, fuse on a
//! test split and evaluate, plus the ablation sweeps built on top of that.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::analysis::SimilarityGroups;
use crate::error::{Error, Result};
use crate::eval::{evaluate_map, match_detections, ApMode, Verdict};
use crate::geometry::{Detection, GroundTruthObject, Image, ImageId};
use crate::miner::{assign_labels, categorize, group_by_image, sample_minibatches, Heuristic, SampleManifest, SamplerConfig};
use crate::refiner::{refine_detections, train_refiner, RefinerModel, TrainConfig};
use crate::synth::{gen_dataset, simulate_base_detector, ErrorModeConfig, SceneConfig};

/// Images, annotations and base detections of one split.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub images: BTreeMap<ImageId, Image>,
    pub ground_truth: Vec<GroundTruthObject>,
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub num_classes: u32,
    pub train: Split,
    pub test: Split,
}

/// Generates train and test splits from one scene seed and simulates the
/// base detector on both.
pub fn build_benchmark(
    scene: &SceneConfig,
    train_images: usize,
    test_images: usize,
    errors: &ErrorModeConfig,
) -> Result<Benchmark> {
    let groups = SimilarityGroups::single_group(scene.num_classes);
    let make = |split: &str, n: usize| -> Result<Split> {
        let cfg = SceneConfig {
            num_images: n,
            split: split.into(),
            ..scene.clone()
        };
        let data = gen_dataset(&cfg)?;
        let infos: Vec<_> = data.images.iter().map(Image::info).collect();
        let sim = simulate_base_detector(&infos, &data.ground_truth, &groups, errors)?;
        Ok(Split {
            images: data.images.into_iter().map(|im| (im.id().clone(), im)).collect(),
            ground_truth: data.ground_truth,
            detections: sim.detections,
        })
    };
    Ok(Benchmark {
        num_classes: scene.num_classes,
        train: make("train", train_images)?,
        test: make("test", test_images)?,
    })
}

/// The desk-scale benchmark: three classes, 200 training and 100 test images
/// from scene seed 42, default detector error modes.
pub fn standard_benchmark() -> Result<Benchmark> {
    let scene = SceneConfig {
        seed: 42,
        ..SceneConfig::default()
    };
    build_benchmark(&scene, 200, 100, &ErrorModeConfig::default())
}

/// Labels, categorizes and samples training boxes from base detections.
///
/// `n_batches` defaults to one pass over the images that have boxes.
pub fn mine(
    detections: &[Detection],
    ground_truth: &[GroundTruthObject],
    config: &SamplerConfig,
    n_batches: Option<usize>,
) -> Result<SampleManifest> {
    config.validate()?;
    let rois = categorize(assign_labels(detections, ground_truth, config.fg_iou)?, config.fp_threshold);
    let grouped = group_by_image(rois);
    let n = n_batches.unwrap_or_else(|| grouped.len().div_ceil(config.images_per_batch));
    sample_minibatches(&grouped, config, n)
}

/// False positives scored strictly above `score_threshold`.
pub fn hard_fp_count(
    dets: &[Detection],
    gts: &[GroundTruthObject],
    num_classes: u32,
    iou_threshold: f64,
    score_threshold: f64,
) -> Result<usize> {
    let outcome = match_detections(dets, gts, num_classes, iou_threshold)?;
    Ok(outcome
        .verdicts()
        .iter()
        .zip(dets)
        .filter(|(v, d)| **v == Verdict::FalsePositive && d.score > score_threshold)
        .count())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub sampler: SamplerConfig,
    pub train: TrainConfig,
    /// Minibatches to mine; one pass over the training images when absent.
    pub batches: Option<usize>,
    pub iou_threshold: f64,
    pub ap_mode: ApMode,
    /// Score above which a false positive counts as hard when reporting.
    pub hard_fp_score: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            sampler: SamplerConfig::default(),
            train: TrainConfig::default(),
            batches: None,
            iou_threshold: 0.5,
            ap_mode: ApMode::AllPoint,
            hard_fp_score: 0.3,
        }
    }
}

impl PipelineConfig {
    /// Uses `seed` for both sampling and training.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.sampler.seed = seed;
        self.train.seed = seed;
        self
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub manifest: SampleManifest,
    pub model: RefinerModel,
    pub refined: Vec<Detection>,
    pub base_map: f64,
    pub refined_map: f64,
    pub base_hard_fp: usize,
    pub refined_hard_fp: usize,
    pub train_time: Duration,
    /// Mean wall time of refinement per test image.
    pub refine_time_per_image: Duration,
}

pub fn run_pipeline(
    train: &Split,
    test: &Split,
    num_classes: u32,
    cfg: &PipelineConfig,
) -> Result<PipelineOutcome> {
    let manifest = mine(&train.detections, &train.ground_truth, &cfg.sampler, cfg.batches)?;
    let started = Instant::now();
    let model = train_refiner(&train.images, &manifest, num_classes, &cfg.train)?;
    let train_time = started.elapsed();

    let started = Instant::now();
    let refined = refine_detections(&model, &test.images, &test.detections)?;
    let refine_time_per_image = started.elapsed() / test.images.len().max(1) as u32;

    let eval = |dets: &[Detection]| evaluate_map(dets, &test.ground_truth, num_classes, cfg.iou_threshold, cfg.ap_mode);
    let hard = |dets: &[Detection]| {
        hard_fp_count(dets, &test.ground_truth, num_classes, cfg.iou_threshold, cfg.hard_fp_score)
    };
    Ok(PipelineOutcome {
        base_map: eval(&test.detections)?.map,
        refined_map: eval(&refined)?.map,
        base_hard_fp: hard(&test.detections)?,
        refined_hard_fp: hard(&refined)?,
        manifest,
        model,
        refined,
        train_time,
        refine_time_per_image,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Heuristic,
    FpThr,
    SampleSize,
    RoiScale,
}

impl std::str::FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "heuristic" => Ok(SweepAxis::Heuristic),
            "fp_thr" => Ok(SweepAxis::FpThr),
            "sample_size" => Ok(SweepAxis::SampleSize),
            "roi_scale" => Ok(SweepAxis::RoiScale),
            other => Err(format!(
                "unknown sweep axis `{other}` (heuristic | fp_thr | sample_size | roi_scale)"
            )),
        }
    }
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SweepAxis::Heuristic => "heuristic",
            SweepAxis::FpThr => "fp_thr",
            SweepAxis::SampleSize => "sample_size",
            SweepAxis::RoiScale => "roi_scale",
        })
    }
}

impl SweepAxis {
    /// Applies one axis value to a copy of `base`.
    pub fn apply(self, base: &PipelineConfig, value: &str) -> Result<PipelineConfig> {
        let mut cfg = base.clone();
        let bad = |e: &dyn std::fmt::Display| Error::config(format!("bad {self:?} value `{value}`: {e}"));
        match self {
            SweepAxis::Heuristic => cfg.sampler.heuristic = value.parse::<Heuristic>().map_err(|e| bad(&e))?,
            SweepAxis::FpThr => cfg.sampler.fp_threshold = value.parse().map_err(|e| bad(&e))?,
            SweepAxis::SampleSize => cfg.sampler.rois_per_batch = value.parse().map_err(|e| bad(&e))?,
            SweepAxis::RoiScale => cfg.train.roi_size = value.parse().map_err(|e| bad(&e))?,
        }
        cfg.sampler.validate()?;
        cfg.train.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: String,
    pub base_map: f64,
    pub map: f64,
    pub hard_fp: usize,
    pub wall_time_s: f64,
    pub refine_time_per_image_s: f64,
}

/// Reruns mine, train, refine and evaluate once per axis value, with shared seeds.
///
/// Refinement timing is the fastest of `timing_repeats` passes over the test split.
pub fn sweep(
    train: &Split,
    test: &Split,
    num_classes: u32,
    base: &PipelineConfig,
    axis: SweepAxis,
    values: &[String],
    timing_repeats: usize,
) -> Result<Vec<SweepRow>> {
    let configs: Vec<PipelineConfig> = values
        .iter()
        .map(|v| axis.apply(base, v))
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(values.len());
    for (value, cfg) in values.iter().zip(&configs) {
        let started = Instant::now();
        let out = run_pipeline(train, test, num_classes, cfg)?;
        let wall = started.elapsed();
        let mut best = out.refine_time_per_image;
        for _ in 1..timing_repeats.max(1) {
            let t = Instant::now();
            refine_detections(&out.model, &test.images, &test.detections)?;
            best = best.min(t.elapsed() / test.images.len().max(1) as u32);
        }
        rows.push(SweepRow {
            value: value.clone(),
            base_map: out.base_map,
            map: out.refined_map,
            hard_fp: out.refined_hard_fp,
            wall_time_s: wall.as_secs_f64(),
            refine_time_per_image_s: best.as_secs_f64(),
        });
    }
    Ok(rows)
}
