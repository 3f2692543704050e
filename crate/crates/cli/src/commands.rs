//! Command implementations. Each returns a one-line summary for stderr.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use detrefine_core::analysis::{
    fp_score_bins, fp_taxonomy, hypothesized_map_curve, sensitivity_by_characteristic, Characteristic,
    FpBinReport, FpCategory, TaxonomyReport,
};
use detrefine_core::eval::{evaluate_coco_style, evaluate_map, EvalReport};
use detrefine_core::formats::{read_json, write_json, write_ppm, DatasetFile, DetectionsFile};
use detrefine_core::miner::{RoiCategory, SampleManifest};
use detrefine_core::pipeline::{self, hard_fp_count, standard_benchmark, Split, SweepAxis};
use detrefine_core::refiner::{refine_detections, train_refiner, ModelFile, RefinerModel};
use detrefine_core::synth::{gen_dataset, simulate_base_detector, CLASS_NAMES};
use detrefine_core::{Detection, Image, ImageId, Result};
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{num, opt, short, write_csv, RunReport, Table};
use crate::{Common, EvalFlags, MineFlags, TrainFlags};

fn load_config(common: &Common) -> Result<RunConfig> {
    match &common.config {
        Some(path) => read_json(path),
        None => Ok(RunConfig::default()),
    }
}

fn dataset_dir(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

fn load_images(dataset: &DatasetFile, path: &Path) -> Result<BTreeMap<ImageId, Image>> {
    dataset.load_images(dataset_dir(path))
}

fn load_detections(path: &Path) -> Result<Vec<Detection>> {
    Ok(DetectionsFile::read(path)?.to_detections())
}

fn apply_eval(cfg: &mut RunConfig, flags: &EvalFlags) {
    if let Some(t) = flags.iou_thr {
        cfg.eval.iou_threshold = t;
    }
    if let Some(m) = flags.ap_mode {
        cfg.eval.ap_mode = m;
    }
}

fn apply_mine(cfg: &mut RunConfig, flags: &MineFlags) {
    let s = &mut cfg.sampler;
    s.heuristic = flags.heuristic.unwrap_or(s.heuristic);
    s.fp_threshold = flags.fp_thr.unwrap_or(s.fp_threshold);
    s.rois_per_batch = flags.rois.unwrap_or(s.rois_per_batch);
    s.images_per_batch = flags.images_per_batch.unwrap_or(s.images_per_batch);
    s.fg_iou = flags.fg_iou.unwrap_or(s.fg_iou);
    if flags.batches.is_some() {
        cfg.batches = flags.batches;
    }
}

fn apply_train(cfg: &mut RunConfig, flags: &TrainFlags) {
    let t = &mut cfg.train;
    t.roi_size = flags.roi_size.unwrap_or(t.roi_size);
    t.learning_rate = flags.lr.unwrap_or(t.learning_rate);
    t.momentum = flags.momentum.unwrap_or(t.momentum);
    t.weight_decay = flags.wd.unwrap_or(t.weight_decay);
    t.epochs = flags.epochs.unwrap_or(t.epochs);
    t.lr_drop_epoch = flags.lr_drop_epoch.unwrap_or(t.lr_drop_epoch);
    if flags.projection_dim.is_some() {
        t.projection_dim = flags.projection_dim;
    }
}

pub fn synth(common: &Common, split: Option<String>, num_images: Option<usize>) -> Result<String> {
    let mut cfg = load_config(common)?;
    cfg.scene.seed = common.seed.unwrap_or(cfg.scene.seed);
    cfg.scene.split = split.unwrap_or(cfg.scene.split);
    cfg.scene.num_images = num_images.unwrap_or(cfg.scene.num_images);
    let data = gen_dataset(&cfg.scene)?;
    for image in &data.images {
        write_ppm(&common.out.join(format!("{}.ppm", image.id())), image)?;
    }
    write_json(&common.out.join("dataset.json"), &DatasetFile::from_synth(&data, &CLASS_NAMES))?;

    #[derive(Serialize)]
    struct Metrics {
        num_images: usize,
        num_objects: usize,
    }
    let metrics = Metrics {
        num_images: data.images.len(),
        num_objects: data.ground_truth.len(),
    };
    let summary = format!("synth: {} images, {} objects", metrics.num_images, metrics.num_objects);
    RunReport::new("synth", &cfg, Some(cfg.scene.seed), metrics).write(&common.out)?;
    Ok(summary)
}

pub fn simulate(common: &Common, dataset_path: &Path) -> Result<String> {
    let mut cfg = load_config(common)?;
    cfg.errors.seed = common.seed.unwrap_or(cfg.errors.seed);
    let dataset = DatasetFile::read(dataset_path)?;
    let groups = cfg.similarity_groups(dataset.num_classes())?;
    let sim = simulate_base_detector(&dataset.image_infos(), &dataset.ground_truth(), &groups, &cfg.errors)?;
    write_json(&common.out.join("detections.json"), &DetectionsFile::new(&sim.detections))?;
    let summary = format!(
        "simulate: {} detections, {} requested boxes skipped",
        sim.detections.len(),
        sim.stats.skipped()
    );
    RunReport::new("simulate", &cfg, Some(cfg.errors.seed), &sim.stats)
        .input("dataset", dataset_path)
        .write(&common.out)?;
    Ok(summary)
}

#[derive(Serialize)]
struct EvalMetrics {
    voc: EvalReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    coco: Option<EvalReport>,
    hard_false_positives: usize,
}

fn evaluate(cfg: &RunConfig, dets: &[Detection], gts: &[detrefine_core::GroundTruthObject], k: u32) -> Result<EvalMetrics> {
    Ok(EvalMetrics {
        voc: evaluate_map(dets, gts, k, cfg.eval.iou_threshold, cfg.eval.ap_mode)?,
        coco: if cfg.eval.coco {
            Some(evaluate_coco_style(dets, gts, k)?)
        } else {
            None
        },
        hard_false_positives: hard_fp_count(dets, gts, k, cfg.eval.iou_threshold, cfg.eval.hard_fp_score)?,
    })
}

fn class_name(dataset: &DatasetFile, id: u32) -> String {
    dataset
        .classes
        .iter()
        .find(|c| c.id == id)
        .map_or_else(|| id.to_string(), |c| c.name.clone())
}

pub fn eval(common: &Common, dataset_path: &Path, dets_path: &Path, flags: &EvalFlags, coco: bool) -> Result<String> {
    let mut cfg = load_config(common)?;
    apply_eval(&mut cfg, flags);
    cfg.eval.coco |= coco;
    let dataset = DatasetFile::read(dataset_path)?;
    let dets = load_detections(dets_path)?;
    let m = evaluate(&cfg, &dets, &dataset.ground_truth(), dataset.num_classes())?;

    let rows: Vec<Vec<String>> = m
        .voc
        .per_class_ap
        .iter()
        .map(|(c, ap)| vec![c.to_string(), class_name(&dataset, *c), num(*ap)])
        .collect();
    write_csv(&common.out.join("per_class_ap.csv"), &["class_id", "name", "ap"], &rows)?;

    let mut table = Table::new(&["class", "AP"]);
    for (c, ap) in &m.voc.per_class_ap {
        table.row(vec![class_name(&dataset, *c), short(*ap)]);
    }
    table.row(vec!["**mAP**".into(), short(m.voc.map)]);
    let mut md = format!(
        "# Evaluation\n\nIoU threshold {}, {} AP, {} detections, {} objects.\n\n{}",
        cfg.eval.iou_threshold,
        cfg.eval.ap_mode,
        m.voc.num_detections,
        m.voc.num_ground_truth,
        table.render()
    );
    md.push_str(&format!(
        "\nFalse positives scored above {}: {}\n",
        cfg.eval.hard_fp_score, m.hard_false_positives
    ));
    if let Some(c) = &m.coco {
        md.push_str(&format!("\nCOCO-style AP@[.50:.95]: {}\n", short(c.map)));
        if let Some(s) = c.size_ap {
            let show = |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), short);
            md.push_str(&format!(
                "AP small {}, medium {}, large {}\n",
                show(s.small),
                show(s.medium),
                show(s.large)
            ));
        }
    }
    detrefine_core::formats::write_bytes(&common.out.join("eval.md"), md.as_bytes())?;
    let summary = format!("eval: mAP {:.4}", m.voc.map);
    RunReport::new("eval", &cfg, common.seed, m)
        .input("dataset", dataset_path)
        .input("detections", dets_path)
        .write(&common.out)?;
    Ok(summary)
}

fn bins_rows(bins: &FpBinReport) -> Vec<Vec<String>> {
    bins.counts
        .iter()
        .enumerate()
        .map(|(i, c)| vec![num(bins.edges[i]), num(bins.edges[i + 1]), c.to_string()])
        .collect()
}

fn taxonomy_rows(t: &TaxonomyReport) -> Vec<Vec<String>> {
    let row = |label: String, c: &detrefine_core::analysis::CategoryCounts| {
        let mut r = vec![label];
        r.extend(FpCategory::ALL.iter().map(|k| c.get(*k).to_string()));
        r.push(c.total().to_string());
        r
    };
    let mut rows: Vec<_> = t.per_class.iter().map(|(k, c)| row(k.to_string(), c)).collect();
    rows.push(row("all".into(), &t.total));
    rows
}

pub fn analyze(
    common: &Common,
    dataset_path: &Path,
    dets_path: &Path,
    flags: &EvalFlags,
    thresholds: Option<Vec<f64>>,
) -> Result<String> {
    let mut cfg = load_config(common)?;
    apply_eval(&mut cfg, flags);
    if let Some(t) = thresholds {
        cfg.analysis.thresholds = t;
    }
    let dataset = DatasetFile::read(dataset_path)?;
    let (gts, k) = (dataset.ground_truth(), dataset.num_classes());
    let dets = load_detections(dets_path)?;
    let (thr, mode) = (cfg.eval.iou_threshold, cfg.eval.ap_mode);
    let groups = cfg.similarity_groups(k)?;

    let bins = fp_score_bins(&dets, &gts, k, thr, &cfg.analysis.fp_bin_edges)?;
    let curve = hypothesized_map_curve(&dets, &gts, k, thr, mode, &cfg.analysis.thresholds)?;
    let taxonomy = fp_taxonomy(&dets, &gts, k, thr, &groups)?;
    let size = sensitivity_by_characteristic(&dets, &gts, k, thr, mode, Characteristic::Size, &cfg.analysis.size_edges)?;
    let aspect =
        sensitivity_by_characteristic(&dets, &gts, k, thr, mode, Characteristic::Aspect, &cfg.analysis.aspect_edges)?;

    let out = &common.out;
    write_csv(&out.join("fp_bins.csv"), &["lo", "hi", "false_positives"], &bins_rows(&bins))?;
    let curve_rows: Vec<_> = curve
        .points
        .iter()
        .map(|p| vec![num(p.threshold), num(p.map), p.removed.to_string()])
        .collect();
    write_csv(&out.join("hypothesized_map.csv"), &["threshold", "map", "removed"], &curve_rows)?;
    write_csv(&out.join("taxonomy.csv"), &["class_id", "loc", "sim", "oth", "bg", "total"], &taxonomy_rows(&taxonomy))?;
    let mut sens_rows = Vec::new();
    for r in [&size, &aspect] {
        for b in &r.bins {
            let name = if r.characteristic == Characteristic::Size { "size" } else { "aspect" };
            sens_rows.push(vec![name.to_string(), num(b.lo), num(b.hi), b.num_gt.to_string(), opt(b.ap)]);
        }
    }
    write_csv(&out.join("sensitivity.csv"), &["characteristic", "lo", "hi", "num_gt", "ap"], &sens_rows)?;

    let mut md = String::from("# False positive analysis\n\n## False positives by score\n\n");
    let mut t = Table::new(&["score range", "false positives"]);
    for (i, c) in bins.counts.iter().enumerate() {
        t.row(vec![format!("[{}, {})", bins.edges[i], bins.edges[i + 1]), c.to_string()]);
    }
    md.push_str(&t.render());
    md.push_str(&format!(
        "\n{} false positives in total, {} inside the binned range.\n\n## mAP after removing false positives above a threshold\n\nBase mAP {}.\n\n",
        bins.total_fp,
        bins.binned(),
        short(curve.base_map)
    ));
    let mut t = Table::new(&["threshold", "mAP", "removed"]);
    for p in &curve.points {
        t.row(vec![p.threshold.to_string(), short(p.map), p.removed.to_string()]);
    }
    md.push_str(&t.render());
    md.push_str("\n## Taxonomy\n\n");
    let mut t = Table::new(&["class", "Loc", "Sim", "Oth", "BG", "total"]);
    for r in taxonomy_rows(&taxonomy) {
        t.row(r);
    }
    md.push_str(&t.render());
    md.push_str("\n## Sensitivity\n\n");
    let mut t = Table::new(&["characteristic", "range", "objects", "AP"]);
    for r in [&size, &aspect] {
        for b in &r.bins {
            t.row(vec![
                format!("{:?}", r.characteristic).to_lowercase(),
                format!("[{}, {}]", b.lo, if b.hi == f64::MAX { "max".to_string() } else { b.hi.to_string() }),
                b.num_gt.to_string(),
                b.ap.map_or_else(|| "n/a".into(), short),
            ]);
        }
    }
    md.push_str(&t.render());
    detrefine_core::formats::write_bytes(&out.join("analysis.md"), md.as_bytes())?;

    #[derive(Serialize)]
    struct Metrics {
        fp_bins: FpBinReport,
        hypothesized_map: detrefine_core::analysis::HypothesizedMapCurve,
        taxonomy: TaxonomyReport,
        sensitivity: Vec<detrefine_core::analysis::SensitivityReport>,
    }
    let summary = format!(
        "analyze: {} false positives, base mAP {:.4}",
        bins.total_fp, curve.base_map
    );
    let metrics = Metrics {
        fp_bins: bins,
        hypothesized_map: curve,
        taxonomy,
        sensitivity: vec![size, aspect],
    };
    RunReport::new("analyze", &cfg, common.seed, metrics)
        .input("dataset", dataset_path)
        .input("detections", dets_path)
        .write(out)?;
    Ok(summary)
}

pub fn mine(common: &Common, dataset_path: &Path, dets_path: &Path, flags: &MineFlags) -> Result<String> {
    let mut cfg = load_config(common)?;
    apply_mine(&mut cfg, flags);
    cfg.sampler.seed = common.seed.unwrap_or(cfg.sampler.seed);
    let dataset = DatasetFile::read(dataset_path)?;
    let dets = load_detections(dets_path)?;
    let manifest = pipeline::mine(&dets, &dataset.ground_truth(), &cfg.sampler, cfg.batches)?;
    write_json(&common.out.join("manifest.json"), &manifest)?;

    let mut counts: BTreeMap<RoiCategory, usize> = BTreeMap::new();
    for e in manifest.entries() {
        *counts.entry(e.category).or_default() += 1;
    }
    #[derive(Serialize)]
    struct Metrics {
        batches: usize,
        entries: usize,
        per_category: BTreeMap<RoiCategory, usize>,
    }
    let metrics = Metrics {
        batches: manifest.batches.len(),
        entries: manifest.entries().count(),
        per_category: counts,
    };
    let summary = format!("mine: {} batches, {} boxes", metrics.batches, metrics.entries);
    RunReport::new("mine", &cfg, Some(cfg.sampler.seed), metrics)
        .input("dataset", dataset_path)
        .input("detections", dets_path)
        .write(&common.out)?;
    Ok(summary)
}

pub fn train(common: &Common, dataset_path: &Path, manifest_path: &Path, flags: &TrainFlags) -> Result<String> {
    let mut cfg = load_config(common)?;
    apply_train(&mut cfg, flags);
    cfg.train.seed = common.seed.unwrap_or(cfg.train.seed);
    let dataset = DatasetFile::read(dataset_path)?;
    let manifest: SampleManifest = read_json(manifest_path)?;
    let images = load_images(&dataset, dataset_path)?;
    let model = train_refiner(&images, &manifest, dataset.num_classes(), &cfg.train)?;
    write_json(&common.out.join("model.json"), &model.to_file())?;
    let summary = format!(
        "train: {} epochs, final loss {}",
        model.training().epochs,
        model.training().final_loss.map_or_else(|| "n/a".into(), |l| format!("{l:.4}"))
    );
    RunReport::new("train", &cfg, Some(cfg.train.seed), model.training())
        .input("dataset", dataset_path)
        .input("manifest", manifest_path)
        .write(&common.out)?;
    Ok(summary)
}

pub fn refine(common: &Common, dataset_path: &Path, dets_path: &Path, model_path: &Path) -> Result<String> {
    let cfg = load_config(common)?;
    let dataset = DatasetFile::read(dataset_path)?;
    let dets = load_detections(dets_path)?;
    let model = RefinerModel::from_file(read_json::<ModelFile>(model_path)?)?;
    if model.num_classes() != dataset.num_classes() {
        return Err(detrefine_core::Error::Config(format!(
            "model has {} classes, dataset has {}",
            model.num_classes(),
            dataset.num_classes()
        )));
    }
    let images = load_images(&dataset, dataset_path)?;
    let refined = refine_detections(&model, &images, &dets)?;
    write_json(&common.out.join("detections.json"), &DetectionsFile::new(&refined))?;

    #[derive(Serialize)]
    struct Metrics {
        detections: usize,
        mean_score_before: f64,
        mean_score_after: f64,
    }
    let mean = |d: &[Detection]| d.iter().map(|x| x.score).sum::<f64>() / d.len().max(1) as f64;
    let metrics = Metrics {
        detections: refined.len(),
        mean_score_before: mean(&dets),
        mean_score_after: mean(&refined),
    };
    let summary = format!(
        "refine: {} detections, mean score {:.4} -> {:.4}",
        metrics.detections, metrics.mean_score_before, metrics.mean_score_after
    );
    RunReport::new("refine", &cfg, common.seed, metrics)
        .input("dataset", dataset_path)
        .input("detections", dets_path)
        .input("model", model_path)
        .write(&common.out)?;
    Ok(summary)
}

pub fn report(common: &Common, dataset_path: &Path, base_path: &Path, refined_path: &Path, flags: &EvalFlags) -> Result<String> {
    let mut cfg = load_config(common)?;
    apply_eval(&mut cfg, flags);
    let dataset = DatasetFile::read(dataset_path)?;
    let (gts, k) = (dataset.ground_truth(), dataset.num_classes());
    let base = load_detections(base_path)?;
    let refined = load_detections(refined_path)?;
    let groups = cfg.similarity_groups(k)?;
    let thr = cfg.eval.iou_threshold;

    #[derive(Serialize)]
    struct Side {
        eval: EvalMetrics,
        fp_bins: FpBinReport,
        taxonomy: TaxonomyReport,
    }
    let side = |dets: &[Detection]| -> Result<Side> {
        Ok(Side {
            eval: evaluate(&cfg, dets, &gts, k)?,
            fp_bins: fp_score_bins(dets, &gts, k, thr, &cfg.analysis.fp_bin_edges)?,
            taxonomy: fp_taxonomy(dets, &gts, k, thr, &groups)?,
        })
    };
    let (b, r) = (side(&base)?, side(&refined)?);

    let out = &common.out;
    let ap_rows: Vec<_> = b
        .eval
        .voc
        .per_class_ap
        .iter()
        .map(|(c, ap)| {
            let rap = r.eval.voc.per_class_ap.get(c).copied().unwrap_or(0.0);
            vec![c.to_string(), class_name(&dataset, *c), num(*ap), num(rap), num(rap - ap)]
        })
        .collect();
    write_csv(&out.join("per_class_ap.csv"), &["class_id", "name", "base_ap", "refined_ap", "delta"], &ap_rows)?;
    let bin_rows: Vec<_> = b
        .fp_bins
        .counts
        .iter()
        .zip(&r.fp_bins.counts)
        .enumerate()
        .map(|(i, (x, y))| vec![num(b.fp_bins.edges[i]), num(b.fp_bins.edges[i + 1]), x.to_string(), y.to_string()])
        .collect();
    write_csv(&out.join("fp_bins.csv"), &["lo", "hi", "base", "refined"], &bin_rows)?;

    let mut md = String::from("# Base versus refined detections\n\n");
    let mut t = Table::new(&["", "base", "refined"]);
    t.row(vec![format!("mAP@{thr}"), short(b.eval.voc.map), short(r.eval.voc.map)]);
    t.row(vec![
        format!("false positives scored above {}", cfg.eval.hard_fp_score),
        b.eval.hard_false_positives.to_string(),
        r.eval.hard_false_positives.to_string(),
    ]);
    for c in FpCategory::ALL {
        t.row(vec![
            format!("{} false positives", c.label()),
            b.taxonomy.total.get(c).to_string(),
            r.taxonomy.total.get(c).to_string(),
        ]);
    }
    md.push_str(&t.render());
    md.push_str("\n## Per-class AP\n\n");
    let mut t = Table::new(&["class", "base", "refined", "change"]);
    for row in &ap_rows {
        let parse = |s: &str| s.parse::<f64>().unwrap_or(0.0);
        t.row(vec![row[1].clone(), short(parse(&row[2])), short(parse(&row[3])), format!("{:+.4}", parse(&row[4]))]);
    }
    md.push_str(&t.render());
    md.push_str("\n## False positives by score\n\n");
    let mut t = Table::new(&["score range", "base", "refined"]);
    for (i, (x, y)) in b.fp_bins.counts.iter().zip(&r.fp_bins.counts).enumerate() {
        t.row(vec![format!("[{}, {})", b.fp_bins.edges[i], b.fp_bins.edges[i + 1]), x.to_string(), y.to_string()]);
    }
    md.push_str(&t.render());
    detrefine_core::formats::write_bytes(&out.join("report.md"), md.as_bytes())?;

    let summary = format!(
        "report: mAP {:.4} -> {:.4}, hard false positives {} -> {}",
        b.eval.voc.map, r.eval.voc.map, b.eval.hard_false_positives, r.eval.hard_false_positives
    );
    #[derive(Serialize)]
    struct Metrics {
        base: Side,
        refined: Side,
        map_change: f64,
    }
    let map_change = r.eval.voc.map - b.eval.voc.map;
    RunReport::new("report", &cfg, common.seed, Metrics { base: b, refined: r, map_change })
        .input("dataset", dataset_path)
        .input("base", base_path)
        .input("refined", refined_path)
        .write(out)?;
    Ok(summary)
}

pub struct SweepFiles {
    pub train_dataset: PathBuf,
    pub train_detections: PathBuf,
    pub test_dataset: PathBuf,
    pub test_detections: PathBuf,
}

fn load_split(dataset_path: &Path, dets_path: &Path) -> Result<(Split, u32)> {
    let dataset = DatasetFile::read(dataset_path)?;
    Ok((
        Split {
            images: load_images(&dataset, dataset_path)?,
            ground_truth: dataset.ground_truth(),
            detections: load_detections(dets_path)?,
        },
        dataset.num_classes(),
    ))
}

pub fn sweep(
    common: &Common,
    axis: SweepAxis,
    values: &[String],
    files: Option<SweepFiles>,
    timing_repeats: usize,
    mine_flags: &MineFlags,
    train_flags: &TrainFlags,
) -> Result<String> {
    let mut cfg = load_config(common)?;
    apply_mine(&mut cfg, mine_flags);
    apply_train(&mut cfg, train_flags);
    if let Some(seed) = common.seed {
        cfg.sampler.seed = seed;
        cfg.train.seed = seed;
    }
    let (train, test, k) = match &files {
        Some(f) => {
            let (train, k) = load_split(&f.train_dataset, &f.train_detections)?;
            let (test, k_test) = load_split(&f.test_dataset, &f.test_detections)?;
            if k != k_test {
                return Err(detrefine_core::Error::Config(format!(
                    "training split has {k} classes, test split has {k_test}"
                )));
            }
            (train, test, k)
        }
        None => {
            let b = standard_benchmark()?;
            (b.train, b.test, b.num_classes)
        }
    };
    let rows = pipeline::sweep(&train, &test, k, &cfg.pipeline(), axis, values, timing_repeats)?;

    let csv_rows: Vec<_> = rows
        .iter()
        .map(|r| {
            vec![
                r.value.clone(),
                num(r.map),
                num(r.base_map),
                r.hard_fp.to_string(),
                num(r.wall_time_s),
                num(r.refine_time_per_image_s),
            ]
        })
        .collect();
    write_csv(
        &common.out.join("sweep.csv"),
        &[axis.to_string().as_str(), "map", "base_map", "hard_fp", "wall_time_s", "refine_time_per_image_s"],
        &csv_rows,
    )?;
    let mut t = Table::new(&[axis.to_string().as_str(), "mAP", "base mAP", "hard FP", "wall time (s)", "refine (ms/image)"]);
    for r in &rows {
        t.row(vec![
            r.value.clone(),
            short(r.map),
            short(r.base_map),
            r.hard_fp.to_string(),
            format!("{:.3}", r.wall_time_s),
            format!("{:.4}", r.refine_time_per_image_s * 1e3),
        ]);
    }
    let md = format!("# Sweep over {axis}\n\n{}", t.render());
    detrefine_core::formats::write_bytes(&common.out.join("sweep.md"), md.as_bytes())?;

    let summary = format!("sweep: {} values of {axis}", rows.len());
    let mut report = RunReport::new("sweep", &cfg, Some(cfg.sampler.seed), &rows);
    if let Some(f) = &files {
        report = report
            .input("train_dataset", &f.train_dataset)
            .input("train_detections", &f.train_detections)
            .input("test_dataset", &f.test_dataset)
            .input("test_detections", &f.test_detections);
    }
    report.write(&common.out)?;
    Ok(summary)
}
