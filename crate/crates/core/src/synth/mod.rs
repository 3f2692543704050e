//! Deterministic synthetic data: scenes plus a simulated base detector.

mod detector;
mod scene;

pub use detector::{
    simulate_base_detector, ErrorModeConfig, InjectedKind, InjectionStats, KindCounts,
    ScoreDistribution, SimulatedDetections,
};
pub use scene::{
    default_class_colors, gen_dataset, ColorRange, SceneConfig, SynthDataset, CLASS_NAMES,
    MAX_CLASSES, PLACEMENT_ATTEMPTS,
};
