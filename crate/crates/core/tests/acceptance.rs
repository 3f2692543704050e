//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use common::{brute_force_flags, envelope_ap, grid_iou};
use detrefine_core::analysis::{fp_taxonomy, hypothesized_map_curve, FpCategory, SimilarityGroups};
use detrefine_core::eval::{average_precision, match_detections, pr_curve, ApMode};
use detrefine_core::formats::{encode_ppm, to_json, DetectionsFile};
use detrefine_core::miner::{
    categorize, group_by_image, sample_minibatches, Heuristic, LabeledRoi, RoiCategory, SamplerConfig,
};
use detrefine_core::pipeline::{
    build_benchmark, mine, run_pipeline, standard_benchmark, sweep, Benchmark, PipelineConfig, SweepAxis,
};
use detrefine_core::refiner::{refine_detections, train_refiner, LinearSoftmax, PassThrough};
use detrefine_core::synth::{gen_dataset, simulate_base_detector, ErrorModeConfig, InjectedKind, SceneConfig};
use detrefine_core::{iou, BoundingBox, Detection, GroundTruthObject, Image, ImageId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

struct Suite {
    failures: usize,
}

impl Suite {
    fn run(&mut self, id: u32, name: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) {
        let started = Instant::now();
        let result = f();
        let elapsed = started.elapsed();
        let result = match (result, limit) {
            (Ok(_), Some(limit)) if elapsed > limit => Err(format!("took {elapsed:.2?}, limit {limit:?}")),
            (r, _) => r,
        };
        match result {
            Ok(detail) => println!("PASS [{id}] {name} ({elapsed:.2?}): {detail}"),
            Err(detail) => {
                self.failures += 1;
                println!("FAIL [{id}] {name} ({elapsed:.2?}): {detail}");
            }
        }
    }
}

fn iou_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let mut pick = || {
            let (a, b, c, d) = (
                rng.random_range(0..=64),
                rng.random_range(0..=64),
                rng.random_range(0..=64),
                rng.random_range(0..=64),
            );
            [a.min(b), c.min(d), a.max(b), c.max(d)]
        };
        let (a, b) = (pick(), pick());
        let to_box = |r: [i64; 4]| BoundingBox::new(r[0] as f64, r[1] as f64, r[2] as f64, r[3] as f64).unwrap();
        worst = worst.max((iou(&to_box(a), &to_box(b)) - grid_iou(a, b)).abs());
    }
    ensure(worst <= 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!("10000 pairs, max deviation {worst:e}"))
}

fn ap_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1002);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let rand_box = |rng: &mut ChaCha8Rng| {
            let (x, y) = (rng.random_range(0.0..16.0), rng.random_range(0.0..16.0));
            BoundingBox::new(x, y, x + rng.random_range(3.0..12.0), y + rng.random_range(3.0..12.0)).unwrap()
        };
        let gts: Vec<GroundTruthObject> = (0..rng.random_range(1..=3))
            .map(|_| GroundTruthObject::new(ImageId::from("i"), 1, rand_box(&mut rng)))
            .collect();
        let dets: Vec<Detection> = (0..rng.random_range(0..=6))
            .map(|_| {
                let b = if rng.random_bool(0.6) {
                    let g = gts[rng.random_range(0..gts.len())].bbox;
                    let s = rng.random_range(-2.0..2.0);
                    BoundingBox::new(g.x_min() + s, g.y_min(), g.x_max() + s, g.y_max() + s.abs()).unwrap()
                } else {
                    rand_box(&mut rng)
                };
                Detection::new(ImageId::from("i"), 1, rng.random_range(0.0..1.0), b).unwrap()
            })
            .collect();
        let outcome = match_detections(&dets, &gts, 1, 0.5).map_err(|e| e.to_string())?;
        let got = average_precision(&pr_curve(&outcome, 1), ApMode::AllPoint);
        let (flags, n) = brute_force_flags(&dets, &gts, 1, 0.5);
        worst = worst.max((got - envelope_ap(&flags, n)).abs());
    }
    ensure(worst <= 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!("500 instances, max deviation {worst:e}"))
}

fn hypothesized_map(bench: &Benchmark) -> Outcome {
    let test = &bench.test;
    let k = bench.num_classes;
    let thresholds: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let curve = hypothesized_map_curve(&test.detections, &test.ground_truth, k, 0.5, ApMode::AllPoint, &thresholds)
        .map_err(|e| e.to_string())?;
    for w in curve.points.windows(2) {
        ensure(w[1].map <= w[0].map, || format!("curve rises between t={} and t={}", w[0].threshold, w[1].threshold))?;
    }
    let max_score = test.detections.iter().map(|d| d.score).fold(0.0, f64::max);
    let top = hypothesized_map_curve(&test.detections, &test.ground_truth, k, 0.5, ApMode::AllPoint, &[max_score, 1.0])
        .map_err(|e| e.to_string())?;
    ensure(top.points.iter().all(|p| p.map == curve.base_map), || "curve at max score differs from base mAP".into())?;

    let full_recall = build_benchmark(
        &SceneConfig { seed: 42, ..SceneConfig::default() },
        10,
        100,
        &ErrorModeConfig { tp_rate: 1.0, ..ErrorModeConfig::default() },
    )
    .map_err(|e| e.to_string())?;
    let t = &full_recall.test;
    let zero = hypothesized_map_curve(&t.detections, &t.ground_truth, k, 0.5, ApMode::AllPoint, &[0.0])
        .map_err(|e| e.to_string())?;
    ensure(zero.points[0].map == 1.0, || format!("mAP at t=0 is {}", zero.points[0].map))?;
    Ok(format!(
        "base {:.4}, t=0.3 {:.4}, t=0 {:.4}; full-recall set at t=0 {}",
        curve.base_map, curve.points[6].map, curve.points[0].map, zero.points[0].map
    ))
}

fn taxonomy_partition() -> Outcome {
    let groups = SimilarityGroups::single_group(3);
    let mut constructed = 0;
    for seed in [1u64, 2, 3, 4, 5] {
        let data = gen_dataset(&SceneConfig { num_images: 100, seed, ..SceneConfig::default() }).map_err(|e| e.to_string())?;
        let infos: Vec<_> = data.images.iter().map(Image::info).collect();
        let sim = simulate_base_detector(&infos, &data.ground_truth, &groups, &ErrorModeConfig { seed, ..ErrorModeConfig::default() })
            .map_err(|e| e.to_string())?;
        let r = fp_taxonomy(&sim.detections, &data.ground_truth, 3, 0.5, &groups).map_err(|e| e.to_string())?;
        let n_fp = match_detections(&sim.detections, &data.ground_truth, 3, 0.5)
            .map_err(|e| e.to_string())?
            .false_positives()
            .count();
        let sum: usize = FpCategory::ALL.iter().map(|c| r.total.get(*c)).sum();
        ensure(sum == n_fp, || format!("seed {seed}: categories sum to {sum}, {n_fp} false positives"))?;
        let category: BTreeMap<usize, FpCategory> = r.fps.iter().map(|f| (f.detection, f.category)).collect();
        for (i, kind) in sim.kinds.iter().enumerate() {
            let want = match kind {
                InjectedKind::TruePositive => continue,
                InjectedKind::Partial => FpCategory::Loc,
                InjectedKind::Confusion => FpCategory::Sim,
                InjectedKind::Background => FpCategory::Bg,
            };
            ensure(category.get(&i) == Some(&want), || format!("seed {seed}: {kind:?} box {i} is {:?}", category.get(&i)))?;
            constructed += 1;
        }
    }
    Ok(format!("5 simulator runs, {constructed} constructed false positives all in their category"))
}

fn sampling_contracts(bench: &Benchmark) -> Outcome {
    let roi = |index: usize, label: u32, score: f64| LabeledRoi {
        image_id: ImageId::from("a"),
        bbox: BoundingBox::from_xywh(index as f64, 0.0, 4.0, 4.0).unwrap(),
        base_class: 1,
        base_score: score,
        assigned_label: label,
        category: None,
    };
    let mut rois = Vec::new();
    for i in 0..30 {
        rois.push(match i / 10 {
            0 => roi(i, 0, 0.8),
            1 => roi(i, 1, 0.9),
            _ => roi(i, 0, 0.1),
        });
    }
    let images = group_by_image(categorize(rois, 0.3));
    let cats: Vec<_> = images[0].rois.iter().map(|r| r.category.unwrap()).collect();
    ensure(
        [RoiCategory::HardFp, RoiCategory::Fg, RoiCategory::Bg].iter().all(|c| cats.iter().filter(|x| *x == c).count() == 10),
        || "pools are not 10/10/10".into(),
    )?;
    let cfg = SamplerConfig { rois_per_batch: 1, seed: 77, ..SamplerConfig::default() };
    let draws = 10_000;
    let manifest = sample_minibatches(&images, &cfg, draws).map_err(|e| e.to_string())?;
    let mut counts = [0usize; 30];
    for e in manifest.entries() {
        counts[e.bbox.x_min() as usize] += 1;
    }
    let p = 1.0 / 30.0;
    let sd = (draws as f64 * p * (1.0 - p)).sqrt();
    let worst = counts.iter().map(|&c| (c as f64 - draws as f64 * p).abs() / sd).fold(0.0, f64::max);
    ensure(worst <= 3.0, || format!("largest deviation {worst:.2} sigma"))?;

    let rcnn = SamplerConfig { heuristic: Heuristic::RcnnLike, rois_per_batch: 64, ..SamplerConfig::default() };
    let m = mine(&bench.train.detections, &bench.train.ground_truth, &rcnn, Some(50)).map_err(|e| e.to_string())?;
    for b in &m.batches {
        let fg = b.iter().filter(|e| e.assigned_label != 0).count();
        ensure(fg == 16 && b.len() == 64, || format!("batch has {fg} fg of {}", b.len()))?;
    }

    for h in Heuristic::ALL {
        let cfg = SamplerConfig { heuristic: h, seed: 5, ..SamplerConfig::default() };
        let a = mine(&bench.train.detections, &bench.train.ground_truth, &cfg, None).map_err(|e| e.to_string())?;
        let b = mine(&bench.train.detections, &bench.train.ground_truth, &cfg, None).map_err(|e| e.to_string())?;
        ensure(to_json(&a) == to_json(&b), || format!("{h} manifests differ"))?;
    }
    Ok(format!("RCNN_LIKE 16/48 on 50 batches; FP_FG_BG worst deviation {worst:.2} sigma over {draws} draws; manifests bit-identical"))
}

fn refiner_correctness(bench: &Benchmark) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1006);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (dim, classes, n) = (rng.random_range(1..6), rng.random_range(2..5), rng.random_range(1..5));
        let mut m = LinearSoftmax::zeros(dim, classes);
        m.weights.iter_mut().for_each(|w| *w = rng.random_range(-1.0..1.0));
        let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
        let wd = rng.random_range(0.0..0.1);
        let (_, grad) = m.loss_and_grad(&refs, &labels, wd);
        let h = 1e-5;
        let (mut diff, mut scale_a, mut scale_n) = (0.0, 0.0, 0.0);
        for i in 0..grad.len() {
            let orig = m.weights[i];
            m.weights[i] = orig + h;
            let plus = m.loss_and_grad(&refs, &labels, wd).0;
            m.weights[i] = orig - h;
            let minus = m.loss_and_grad(&refs, &labels, wd).0;
            m.weights[i] = orig;
            let num = (plus - minus) / (2.0 * h);
            diff += (grad[i] - num) * (grad[i] - num);
            scale_a += grad[i] * grad[i];
            scale_n += num * num;
        }
        worst = worst.max(diff.sqrt() / (scale_a.sqrt() + scale_n.sqrt()).max(1e-12));
    }
    ensure(worst < 1e-4, || format!("gradient relative error {worst:e}"))?;

    let test = &bench.test;
    let same = refine_detections(&PassThrough { num_classes: bench.num_classes }, &test.images, &test.detections)
        .map_err(|e| e.to_string())?;
    ensure(same == test.detections, || "pass-through changed detections".into())?;

    let cfg = PipelineConfig::default();
    let manifest = mine(&bench.train.detections, &bench.train.ground_truth, &cfg.sampler, None).map_err(|e| e.to_string())?;
    let model = train_refiner(&bench.train.images, &manifest, bench.num_classes, &cfg.train).map_err(|e| e.to_string())?;
    let refined = refine_detections(&model, &test.images, &test.detections).map_err(|e| e.to_string())?;
    let raised = refined.iter().zip(&test.detections).filter(|(r, d)| r.score > d.score).count();
    ensure(raised == 0, || format!("{raised} scores increased"))?;
    Ok(format!("gradient relative error {worst:.1e} over 20 models; pass-through exact; no score raised in {} detections", refined.len()))
}

fn end_to_end(bench: &Benchmark) -> Outcome {
    let mut lines = Vec::new();
    for seed in [1u64, 2, 3] {
        let out = run_pipeline(&bench.train, &bench.test, bench.num_classes, &PipelineConfig::default().with_seed(seed))
            .map_err(|e| e.to_string())?;
        let gain = (out.refined_map - out.base_map) * 100.0;
        let reduction = 1.0 - out.refined_hard_fp as f64 / out.base_hard_fp as f64;
        lines.push(format!(
            "seed {seed}: mAP {:.2} -> {:.2} (+{gain:.2}), hard FP {} -> {} (-{:.0}%)",
            out.base_map * 100.0,
            out.refined_map * 100.0,
            out.base_hard_fp,
            out.refined_hard_fp,
            reduction * 100.0
        ));
        ensure(gain >= 1.0, || lines.join("; "))?;
        ensure(reduction >= 0.5, || lines.join("; "))?;
    }
    Ok(lines.join("; "))
}

fn ablation_shapes(bench: &Benchmark) -> Outcome {
    let values = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let base = PipelineConfig::default().with_seed(1);
    let fp = sweep(&bench.train, &bench.test, bench.num_classes, &base, SweepAxis::FpThr, &values(&["0.2", "0.25", "0.3", "0.35", "0.4"]), 1)
        .map_err(|e| e.to_string())?;
    let maps: Vec<f64> = fp.iter().map(|r| r.map).collect();
    let spread = (maps.iter().copied().fold(f64::MIN, f64::max) - maps.iter().copied().fold(f64::MAX, f64::min)) * 100.0;
    ensure(fp.len() == 5 && spread <= 1.5, || format!("fp_thr mAP spread {spread:.3} points"))?;

    let fp_only = PipelineConfig {
        sampler: SamplerConfig { heuristic: Heuristic::FpOnly, ..base.sampler.clone() },
        ..base.clone()
    };
    let fp_only_rows = sweep(&bench.train, &bench.test, bench.num_classes, &fp_only, SweepAxis::FpThr, &values(&["0.2", "0.3", "0.4"]), 1)
        .map_err(|e| e.to_string())?;
    let fo: Vec<f64> = fp_only_rows.iter().map(|r| r.map * 100.0).collect();

    let scales = values(&["8", "16", "32", "64"]);
    let rows = sweep(&bench.train, &bench.test, bench.num_classes, &base, SweepAxis::RoiScale, &scales, 5)
        .map_err(|e| e.to_string())?;
    let times: Vec<f64> = rows.iter().map(|r| r.refine_time_per_image_s * 1e6).collect();
    ensure(times.windows(2).all(|w| w[1] > w[0]), || format!("refine time per image (us) {times:.1?}"))?;
    Ok(format!(
        "fp_thr spread {spread:.3} points (FP_ONLY for reference: {fo:.2?}); refine us/image at S=8,16,32,64: {times:.1?}"
    ))
}

fn determinism() -> Outcome {
    let scene = SceneConfig { num_images: 30, seed: 42, ..SceneConfig::default() };
    let run = || -> Result<Vec<Vec<u8>>, String> {
        let data = gen_dataset(&scene).map_err(|e| e.to_string())?;
        let mut synth = Vec::new();
        for im in &data.images {
            synth.extend(encode_ppm(im));
        }
        let infos: Vec<_> = data.images.iter().map(Image::info).collect();
        let sim = simulate_base_detector(&infos, &data.ground_truth, &SimilarityGroups::single_group(3), &ErrorModeConfig::default())
            .map_err(|e| e.to_string())?;
        let cfg = PipelineConfig::default().with_seed(7);
        let manifest = mine(&sim.detections, &data.ground_truth, &cfg.sampler, None).map_err(|e| e.to_string())?;
        let images: BTreeMap<_, _> = data.images.iter().map(|im| (im.id().clone(), im.clone())).collect();
        let model = train_refiner(&images, &manifest, 3, &cfg.train).map_err(|e| e.to_string())?;
        let refined = refine_detections(&model, &images, &sim.detections).map_err(|e| e.to_string())?;
        Ok(vec![
            synth,
            to_json(&DetectionsFile::new(&sim.detections)).into_bytes(),
            to_json(&manifest).into_bytes(),
            to_json(&model.to_file()).into_bytes(),
            to_json(&DetectionsFile::new(&refined)).into_bytes(),
        ])
    };
    let (a, b) = (run()?, run()?);
    let stages = ["synth", "simulate", "mine", "train", "refine"];
    for ((x, y), stage) in a.iter().zip(&b).zip(stages) {
        ensure(x == y, || format!("{stage} output differs between runs"))?;
    }
    let sizes: Vec<String> = a.iter().zip(stages).map(|(x, s)| format!("{s} {}B", x.len())).collect();
    Ok(format!("identical bytes: {}", sizes.join(", ")))
}

fn main() {
    let mut suite = Suite { failures: 0 };
    let bench = standard_benchmark().expect("standard benchmark builds");

    suite.run(1, "IoU equals cell-counting oracle", Some(Duration::from_secs(5)), iou_oracle);
    suite.run(2, "all-point AP equals envelope oracle", Some(Duration::from_secs(10)), ap_oracle);
    suite.run(3, "hypothesized mAP curve properties", None, || hypothesized_map(&bench));
    suite.run(4, "FP taxonomy partition and injected categories", None, taxonomy_partition);
    suite.run(5, "sampling contracts", None, || sampling_contracts(&bench));
    suite.run(6, "refiner gradient and fusion contracts", None, || refiner_correctness(&bench));
    suite.run(7, "end-to-end refinement gain on seed-42 benchmark", Some(Duration::from_secs(300)), || end_to_end(&bench));
    suite.run(8, "ablation sweep shapes", None, || ablation_shapes(&bench));
    suite.run(9, "stage outputs byte-reproducible", None, determinism);

    if suite.failures > 0 {
        println!("{} acceptance criteria failed", suite.failures);
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
