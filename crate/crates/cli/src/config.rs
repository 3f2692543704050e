//! The run configuration file. One document carries a section per stage;
//! each command reads the sections it needs and ignores the rest.

use detrefine_core::analysis::{Characteristic, SimilarityGroup, SimilarityGroups, DEFAULT_FP_BIN_EDGES};
use detrefine_core::eval::ApMode;
use detrefine_core::miner::SamplerConfig;
use detrefine_core::pipeline::PipelineConfig;
use detrefine_core::refiner::TrainConfig;
use detrefine_core::synth::{ErrorModeConfig, SceneConfig};
use detrefine_core::Result;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub iou_threshold: f64,
    pub ap_mode: ApMode,
    /// Also report the COCO-style threshold sweep and size buckets.
    pub coco: bool,
    /// Score above which a false positive counts as hard.
    pub hard_fp_score: f64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            iou_threshold: 0.5,
            ap_mode: ApMode::AllPoint,
            coco: false,
            hard_fp_score: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSettings {
    pub fp_bin_edges: Vec<f64>,
    /// Thresholds of the hypothesized-mAP curve.
    pub thresholds: Vec<f64>,
    pub size_edges: Vec<f64>,
    pub aspect_edges: Vec<f64>,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        AnalysisSettings {
            fp_bin_edges: DEFAULT_FP_BIN_EDGES.to_vec(),
            thresholds: (3..=9).map(|i| f64::from(i) / 10.0).collect(),
            size_edges: Characteristic::Size.default_edges(),
            aspect_edges: Characteristic::Aspect.default_edges(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scene: SceneConfig,
    pub errors: ErrorModeConfig,
    /// Similarity groups for the simulator and the taxonomy; one group
    /// holding every class when absent.
    pub groups: Option<Vec<SimilarityGroup>>,
    pub sampler: SamplerConfig,
    /// Minibatches to mine; one pass over the images when absent.
    pub batches: Option<usize>,
    pub train: TrainConfig,
    pub eval: EvalSettings,
    pub analysis: AnalysisSettings,
}

impl RunConfig {
    pub fn similarity_groups(&self, num_classes: u32) -> Result<SimilarityGroups> {
        match &self.groups {
            Some(g) => SimilarityGroups::new(g.clone()),
            None => Ok(SimilarityGroups::single_group(num_classes)),
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            sampler: self.sampler.clone(),
            train: self.train.clone(),
            batches: self.batches,
            iou_threshold: self.eval.iou_threshold,
            ap_mode: self.eval.ap_mode,
            hard_fp_score: self.eval.hard_fp_score,
        }
    }
}
