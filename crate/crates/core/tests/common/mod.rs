//! Shared builders and brute-force oracles for the integration tests.
#![allow(dead_code)]

use detrefine_core::{BoundingBox, ClassId, Detection, GroundTruthObject, ImageId};

pub fn bx(x0: f64, y0: f64, x1: f64, y1: f64) -> BoundingBox {
    BoundingBox::new(x0, y0, x1, y1).unwrap()
}

pub fn det(image: &str, class_id: ClassId, score: f64, b: BoundingBox) -> Detection {
    Detection::new(ImageId::from(image), class_id, score, b).unwrap()
}

pub fn gt(image: &str, class_id: ClassId, b: BoundingBox) -> GroundTruthObject {
    GroundTruthObject::new(ImageId::from(image), class_id, b)
}

/// IoU of integer boxes by counting unit cells.
pub fn grid_iou(a: [i64; 4], b: [i64; 4]) -> f64 {
    let lo = a[0].min(b[0]).min(a[1]).min(b[1]);
    let hi = a[2].max(b[2]).max(a[3]).max(b[3]);
    let inside = |r: [i64; 4], x: i64, y: i64| x >= r[0] && x < r[2] && y >= r[1] && y < r[3];
    let (mut inter, mut union) = (0u64, 0u64);
    for y in lo..hi {
        for x in lo..hi {
            let (ia, ib) = (inside(a, x, y), inside(b, x, y));
            inter += u64::from(ia && ib);
            union += u64::from(ia || ib);
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

fn plain_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let w = (a.x_max().min(b.x_max()) - a.x_min().max(b.x_min())).max(0.0);
    let h = (a.y_max().min(b.y_max()) - a.y_min().max(b.y_min())).max(0.0);
    let inter = w * h;
    let union = a.width() * a.height() + b.width() * b.height() - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// Per-detection TP flags for one class, by a direct greedy scan in score order.
/// Returns (flags in rank order, number of ground-truth objects).
pub fn brute_force_flags(dets: &[Detection], gts: &[GroundTruthObject], class_id: ClassId, thr: f64) -> (Vec<bool>, usize) {
    let mut order: Vec<&Detection> = dets.iter().filter(|d| d.class_id == class_id).collect();
    order.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap());
    let objs: Vec<&GroundTruthObject> = gts.iter().filter(|g| g.class_id == class_id).collect();
    let mut taken = vec![false; objs.len()];
    let mut flags = Vec::new();
    for d in order {
        let mut best: Option<(usize, f64)> = None;
        for (j, g) in objs.iter().enumerate() {
            if taken[j] || g.image_id != d.image_id {
                continue;
            }
            let o = plain_iou(&d.bbox, &g.bbox);
            if o >= thr && best.is_none_or(|(_, bo)| o > bo) {
                best = Some((j, o));
            }
        }
        match best {
            Some((j, _)) => {
                taken[j] = true;
                flags.push(true);
            }
            None => flags.push(false),
        }
    }
    (flags, objs.len())
}

/// (recall, precision) after each ranked detection.
pub fn pr_points(flags: &[bool], n_pos: usize) -> Vec<(f64, f64)> {
    let mut tp = 0usize;
    flags
        .iter()
        .enumerate()
        .map(|(k, &f)| {
            tp += usize::from(f);
            (tp as f64 / n_pos as f64, tp as f64 / (k + 1) as f64)
        })
        .collect()
}

/// Area under the precision envelope: every recall step is weighted by the
/// best precision reached at that recall or later.
pub fn envelope_ap(flags: &[bool], n_pos: usize) -> f64 {
    let pts = pr_points(flags, n_pos);
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for k in 0..pts.len() {
        let step = pts[k].0 - prev_recall;
        if step > 0.0 {
            let best = pts[k..].iter().map(|p| p.1).fold(0.0, f64::max);
            ap += step * best;
            prev_recall = pts[k].0;
        }
    }
    ap
}

pub fn eleven_point_ap(flags: &[bool], n_pos: usize) -> f64 {
    let pts = pr_points(flags, n_pos);
    (0..=10)
        .map(|t| {
            let r = t as f64 / 10.0;
            pts.iter().filter(|p| p.0 >= r).map(|p| p.1).fold(0.0, f64::max)
        })
        .sum::<f64>()
        / 11.0
}

/// mAP over classes with at least one ground-truth object.
pub fn brute_force_map(dets: &[Detection], gts: &[GroundTruthObject], num_classes: u32, thr: f64) -> f64 {
    let mut aps = Vec::new();
    for c in 1..=num_classes {
        let (flags, n) = brute_force_flags(dets, gts, c, thr);
        if n > 0 {
            aps.push(envelope_ap(&flags, n));
        }
    }
    aps.iter().sum::<f64>() / aps.len() as f64
}
