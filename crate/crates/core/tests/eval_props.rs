mod common;

use common::{brute_force_flags, brute_force_map, bx, det, eleven_point_ap, envelope_ap, gt};
use detrefine_core::eval::{
    average_precision, evaluate_coco_style, evaluate_map, match_detections, pr_curve, ApMode, Verdict,
};
use detrefine_core::{Detection, Error, GroundTruthObject};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random single-image instance with clustered boxes so overlaps are common.
fn instance(rng: &mut impl Rng, max_dets: usize, max_gts: usize, classes: u32) -> (Vec<Detection>, Vec<GroundTruthObject>) {
    let rand_box = |rng: &mut ChaCha8Rng| {
        let (x, y) = (rng.random_range(0.0..20.0), rng.random_range(0.0..20.0));
        bx(x, y, x + rng.random_range(4.0..14.0), y + rng.random_range(4.0..14.0))
    };
    let mut r = ChaCha8Rng::seed_from_u64(rng.random());
    let gts: Vec<_> = (0..r.random_range(1..=max_gts))
        .map(|_| gt("im", r.random_range(1..=classes), rand_box(&mut r)))
        .collect();
    let dets: Vec<_> = (0..r.random_range(0..=max_dets))
        .map(|_| {
            let b = if r.random_bool(0.6) {
                let g = &gts[r.random_range(0..gts.len())];
                let s = r.random_range(-2.0..2.0);
                bx(g.bbox.x_min() + s, g.bbox.y_min() - s, g.bbox.x_max() + s, g.bbox.y_max())
            } else {
                rand_box(&mut r)
            };
            det("im", r.random_range(1..=classes), r.random_range(0.01..1.0), b)
        })
        .collect();
    (dets, gts)
}

fn single_class_ap(dets: &[Detection], gts: &[GroundTruthObject], mode: ApMode) -> f64 {
    let outcome = match_detections(dets, gts, 1, 0.5).unwrap();
    average_precision(&pr_curve(&outcome, 1), mode)
}

#[test]
fn all_point_ap_matches_envelope_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..500 {
        let (dets, gts) = instance(&mut rng, 6, 3, 1);
        let (flags, n) = brute_force_flags(&dets, &gts, 1, 0.5);
        let got = single_class_ap(&dets, &gts, ApMode::AllPoint);
        assert!((got - envelope_ap(&flags, n)).abs() <= 1e-9, "{dets:?} {gts:?}");
        let got11 = single_class_ap(&dets, &gts, ApMode::ElevenPoint);
        assert!((got11 - eleven_point_ap(&flags, n)).abs() <= 1e-9);
    }
}

#[test]
fn multi_class_map_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..300 {
        let (dets, gts) = instance(&mut rng, 10, 5, 3);
        let got = evaluate_map(&dets, &gts, 3, 0.5, ApMode::AllPoint).unwrap().map;
        assert!((got - brute_force_map(&dets, &gts, 3, 0.5)).abs() <= 1e-9);
    }
}

#[test]
fn input_order_does_not_matter() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..200 {
        let (mut dets, gts) = instance(&mut rng, 8, 4, 2);
        let before = evaluate_map(&dets, &gts, 2, 0.5, ApMode::AllPoint).unwrap().map;
        dets.reverse();
        let after = evaluate_map(&dets, &gts, 2, 0.5, ApMode::AllPoint).unwrap().map;
        assert_eq!(before, after);
    }
}

#[test]
fn monotone_rescoring_does_not_matter() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..200 {
        let (dets, gts) = instance(&mut rng, 8, 4, 2);
        let squashed: Vec<_> = dets
            .iter()
            .map(|d| Detection { score: d.score * d.score, ..d.clone() })
            .collect();
        let a = evaluate_map(&dets, &gts, 2, 0.5, ApMode::AllPoint).unwrap().map;
        let b = evaluate_map(&squashed, &gts, 2, 0.5, ApMode::AllPoint).unwrap().map;
        assert_eq!(a, b);
    }
}

#[test]
fn appending_a_lowest_scored_detection_never_lowers_ap() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..300 {
        let (mut dets, gts) = instance(&mut rng, 6, 3, 1);
        let before = single_class_ap(&dets, &gts, ApMode::AllPoint);
        let g = &gts[rng.random_range(0..gts.len())];
        dets.push(det("im", 1, 0.001, g.bbox));
        assert!(single_class_ap(&dets, &gts, ApMode::AllPoint) >= before - 1e-12);
    }
}

#[test]
fn removing_a_false_positive_never_lowers_ap() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..300 {
        let (dets, gts) = instance(&mut rng, 8, 3, 1);
        let outcome = match_detections(&dets, &gts, 1, 0.5).unwrap();
        let before = single_class_ap(&dets, &gts, ApMode::AllPoint);
        for fp in outcome.false_positives() {
            let mut fewer = dets.clone();
            fewer.remove(fp);
            assert!(single_class_ap(&fewer, &gts, ApMode::AllPoint) >= before - 1e-12);
        }
    }
}

#[test]
fn perfect_and_empty_detections() {
    let gts = vec![gt("a", 1, bx(0.0, 0.0, 10.0, 10.0)), gt("b", 2, bx(5.0, 5.0, 30.0, 20.0))];
    let perfect: Vec<_> = gts.iter().map(|g| det(g.image_id.as_str(), g.class_id, 1.0, g.bbox)).collect();
    assert_eq!(evaluate_map(&perfect, &gts, 2, 0.5, ApMode::AllPoint).unwrap().map, 1.0);
    assert_eq!(evaluate_map(&[], &gts, 2, 0.5, ApMode::AllPoint).unwrap().map, 0.0);
    let coco = evaluate_coco_style(&perfect, &gts, 2).unwrap();
    assert!(coco.map_per_threshold.iter().all(|&m| m == 1.0));
    assert!(matches!(
        evaluate_map(&perfect, &[], 2, 0.5, ApMode::AllPoint),
        Err(Error::EmptyGroundTruth)
    ));
}

#[test]
fn duplicate_detections_are_false_positives() {
    let g = gt("a", 1, bx(0.0, 0.0, 10.0, 10.0));
    let d1 = det("a", 1, 0.9, bx(0.0, 0.0, 10.0, 8.0));
    let d2 = det("a", 1, 0.8, bx(0.0, 2.0, 10.0, 10.0));
    let outcome = match_detections(&[d1, d2], &[g], 1, 0.5).unwrap();
    assert_eq!(outcome.verdicts(), &[Verdict::TruePositive, Verdict::FalsePositive]);
}

#[test]
fn unknown_class_is_rejected() {
    let g = gt("a", 1, bx(0.0, 0.0, 10.0, 10.0));
    let d = det("a", 4, 0.9, bx(0.0, 0.0, 10.0, 10.0));
    assert!(matches!(
        match_detections(&[d], &[g], 3, 0.5),
        Err(Error::ClassOutOfVocabulary { class_id: 4, .. })
    ));
}
