//! Crop-resize of regions from the source image.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{clamp_to_image, BoundingBox, Image};

pub const MIN_ROI_SIZE: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropConfig {
    /// Output side length; crops are `roi_size x roi_size`.
    pub roi_size: usize,
    /// Frozen per-channel statistics on the `[0, 1]` scale.
    pub channel_mean: [f64; 3],
    pub channel_std: [f64; 3],
}

impl CropConfig {
    pub fn new(roi_size: usize, channel_mean: [f64; 3], channel_std: [f64; 3]) -> Result<Self> {
        let cfg = CropConfig {
            roi_size,
            channel_mean,
            channel_std,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.roi_size < MIN_ROI_SIZE {
            return Err(Error::config(format!(
                "roi_size {} below minimum {MIN_ROI_SIZE}",
                self.roi_size
            )));
        }
        if !self.channel_mean.iter().all(|m| m.is_finite())
            || !self.channel_std.iter().all(|s| s.is_finite() && *s > 0.0)
        {
            return Err(Error::config("channel statistics must be finite with positive std"));
        }
        Ok(())
    }

    /// Zero mean, unit std: pixel values pass through on the `[0, 1]` scale.
    pub fn unnormalized(roi_size: usize) -> Result<Self> {
        Self::new(roi_size, [0.0; 3], [1.0; 3])
    }
}

/// `size x size x 3` grid, row-major, channels last.
#[derive(Debug, Clone, PartialEq)]
pub struct Crop {
    pub size: usize,
    pub data: Vec<f64>,
}

impl Crop {
    pub fn at(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.data[(row * self.size + col) * 3 + channel]
    }
}

/// Source sample positions along one axis: `(lower pixel, upper pixel, weight of upper)`.
fn axis_taps(start: f64, extent: f64, out: usize, limit: u32) -> Vec<(u32, u32, f64)> {
    // pixels the box touches; sampling never leaves them
    let first = start.floor().max(0.0);
    let last = ((start + extent).ceil() - 1.0).min(f64::from(limit - 1)).max(first);
    let step = extent / out as f64;
    (0..out)
        .map(|k| {
            let p = (start + (k as f64 + 0.5) * step - 0.5).clamp(first, last);
            let lo = p.floor();
            let frac = p - lo;
            let lo = lo as u32;
            let hi = if frac > 0.0 { lo + 1 } else { lo };
            (lo, hi.min(last as u32), frac)
        })
        .collect()
}

/// Bilinear resample of `bbox` to `size x size`, values on the `[0, 1]` scale.
///
/// Output cell centers are mapped into the box and interpolated between pixel
/// centers. Sample positions are clamped to the pixels the box covers, so
/// nothing outside the box contributes.
pub fn resample_bilinear(image: &Image, bbox: &BoundingBox, size: usize) -> Result<Crop> {
    if size == 0 {
        return Err(Error::config("crop size must be positive"));
    }
    let b = clamp_to_image(bbox, image.width(), image.height())?;
    if b.area() <= 0.0 {
        return Err(Error::EmptyCrop);
    }
    let cols = axis_taps(b.x_min(), b.width(), size, image.width());
    let rows = axis_taps(b.y_min(), b.height(), size, image.height());
    let mut data = Vec::with_capacity(size * size * 3);
    for &(y0, y1, fy) in &rows {
        for &(x0, x1, fx) in &cols {
            let p00 = image.pixel(x0, y0);
            let p01 = image.pixel(x1, y0);
            let p10 = image.pixel(x0, y1);
            let p11 = image.pixel(x1, y1);
            for c in 0..3 {
                let top = (1.0 - fx) * f64::from(p00[c]) + fx * f64::from(p01[c]);
                let bottom = (1.0 - fx) * f64::from(p10[c]) + fx * f64::from(p11[c]);
                data.push(((1.0 - fy) * top + fy * bottom) / 255.0);
            }
        }
    }
    Ok(Crop { size, data })
}

/// Crops `bbox`, resizes it to `roi_size` and normalizes with the frozen statistics.
pub fn crop_resize(image: &Image, bbox: &BoundingBox, cfg: &CropConfig) -> Result<Crop> {
    cfg.validate()?;
    let mut crop = resample_bilinear(image, bbox, cfg.roi_size)?;
    for px in crop.data.chunks_exact_mut(3) {
        for c in 0..3 {
            px[c] = (px[c] - cfg.channel_mean[c]) / cfg.channel_std[c];
        }
    }
    Ok(crop)
}

/// Per-channel mean and std of all pixels, on the `[0, 1]` scale.
pub fn channel_statistics<'a>(images: impl IntoIterator<Item = &'a Image>) -> ([f64; 3], [f64; 3]) {
    let mut sum = [0.0f64; 3];
    let mut sq = [0.0f64; 3];
    let mut n = 0usize;
    for im in images {
        for px in im.pixels().chunks_exact(3) {
            for c in 0..3 {
                let v = f64::from(px[c]) / 255.0;
                sum[c] += v;
                sq[c] += v * v;
            }
        }
        n += im.pixels().len() / 3;
    }
    if n == 0 {
        return ([0.0; 3], [1.0; 3]);
    }
    let nf = n as f64;
    let mean = sum.map(|s| s / nf);
    let mut std = [1.0; 3];
    for c in 0..3 {
        let var = (sq[c] / nf - mean[c] * mean[c]).max(0.0);
        std[c] = if var > 1e-12 { var.sqrt() } else { 1.0 };
    }
    (mean, std)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ImageId;

    fn gradient_image(w: u32, h: u32) -> Image {
        let mut pixels = Vec::new();
        for y in 0..h {
            for x in 0..w {
                pixels.extend([(x * 20) as u8, (y * 30) as u8, ((x + y) * 7) as u8]);
            }
        }
        Image::new(ImageId::new("g"), w, h, pixels).unwrap()
    }

    fn bb(x0: f64, y0: f64, x1: f64, y1: f64) -> BoundingBox {
        BoundingBox::new(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn full_image_at_native_size_is_identity() {
        let img = gradient_image(9, 9);
        let cfg = CropConfig::new(9, [0.1, 0.2, 0.3], [0.5, 0.25, 2.0]).unwrap();
        let crop = crop_resize(&img, &bb(0., 0., 9., 9.), &cfg).unwrap();
        for y in 0..9 {
            for x in 0..9 {
                let p = img.pixel(x, y);
                for c in 0..3 {
                    let expected = (f64::from(p[c]) / 255.0 - cfg.channel_mean[c]) / cfg.channel_std[c];
                    assert!((crop.at(y as usize, x as usize, c) - expected).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn single_pixel_box_is_constant() {
        let img = gradient_image(10, 10);
        let cfg = CropConfig::unnormalized(8).unwrap();
        let crop = crop_resize(&img, &bb(3., 4., 4., 5.), &cfg).unwrap();
        let p = img.pixel(3, 4);
        for px in crop.data.chunks_exact(3) {
            for c in 0..3 {
                assert_eq!(px[c], f64::from(p[c]) / 255.0);
            }
        }
    }

    #[test]
    fn two_by_two_upsampled_to_four() {
        // 2x2 source: sample positions -0.25, 0.25, 0.75, 1.25 clamp to 0, 0.25, 0.75, 1
        let img = Image::new(
            "s".into(),
            2,
            2,
            vec![0, 0, 0, 100, 100, 100, 200, 200, 200, 40, 40, 40],
        )
        .unwrap();
        let crop = resample_bilinear(&img, &bb(0., 0., 2., 2.), 4).unwrap();
        let taps = [0.0, 0.25, 0.75, 1.0];
        let v = |x: usize, y: usize| [0.0, 100.0, 200.0, 40.0][y * 2 + x];
        for (r, &fy) in taps.iter().enumerate() {
            for (c, &fx) in taps.iter().enumerate() {
                let expected = (1.0 - fy) * ((1.0 - fx) * v(0, 0) + fx * v(1, 0))
                    + fy * ((1.0 - fx) * v(0, 1) + fx * v(1, 1));
                assert!((crop.at(r, c, 0) * 255.0 - expected).abs() < 1e-9, "({r},{c})");
            }
        }
    }

    #[test]
    fn context_outside_box_is_not_sampled() {
        // box covers the middle column of a 3-wide image, neighbors are bright
        let mut img = Image::filled("c".into(), 3, 3, [255, 255, 255]).unwrap();
        for y in 0..3 {
            img.set_pixel(1, y, [0, 0, 0]);
        }
        let crop = crop_resize(&img, &bb(1., 0., 2., 3.), &CropConfig::unnormalized(8).unwrap()).unwrap();
        assert!(crop.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_crop_propagates() {
        let img = gradient_image(10, 10);
        let cfg = CropConfig::unnormalized(8).unwrap();
        assert!(matches!(crop_resize(&img, &bb(11., 11., 20., 20.), &cfg), Err(Error::EmptyCrop)));
        assert!(matches!(crop_resize(&img, &bb(2., 2., 2., 5.), &cfg), Err(Error::EmptyCrop)));
    }

    #[test]
    fn config_validation() {
        assert!(CropConfig::unnormalized(7).is_err());
        assert!(CropConfig::new(8, [0.0; 3], [1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn statistics_of_constant_image() {
        let img = Image::filled("c".into(), 4, 4, [51, 102, 255]).unwrap();
        let (mean, std) = channel_statistics([&img]);
        assert!((mean[0] - 0.2).abs() < 1e-12);
        assert!((mean[1] - 0.4).abs() < 1e-12);
        assert!((mean[2] - 1.0).abs() < 1e-12);
        assert_eq!(std, [1.0; 3]);
    }
}
