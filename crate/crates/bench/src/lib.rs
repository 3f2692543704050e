//! Benchmark fixtures; the benchmarks themselves live in `benches/`.

use detrefine_core::pipeline::{build_benchmark, Benchmark};
use detrefine_core::synth::{ErrorModeConfig, SceneConfig};

/// A small train/test benchmark built from the default scene and error modes.
pub fn fixture(train_images: usize, test_images: usize) -> Benchmark {
    build_benchmark(&SceneConfig::default(), train_images, test_images, &ErrorModeConfig::default())
        .expect("default benchmark builds")
}
