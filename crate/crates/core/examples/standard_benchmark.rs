//! Runs the refinement pipeline on the built-in benchmark for three seeds.
//!
//! cargo run --release -p detrefine-core --example standard_benchmark

use detrefine_core::pipeline::{run_pipeline, standard_benchmark, PipelineConfig};

fn main() -> detrefine_core::Result<()> {
    let bench = standard_benchmark()?;
    for seed in [1u64, 2, 3] {
        let out = run_pipeline(&bench.train, &bench.test, bench.num_classes, &PipelineConfig::default().with_seed(seed))?;
        println!(
            "seed {seed}: mAP {:.4} -> {:.4}, hard false positives {} -> {}, training {:.2?}",
            out.base_map, out.refined_map, out.base_hard_fp, out.refined_hard_fp, out.train_time
        );
    }
    Ok(())
}
