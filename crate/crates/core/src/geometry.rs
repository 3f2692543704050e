//! Boxes, detection records and the IoU arithmetic everything else builds on.
//!
//! Boxes are continuous and corner-form with the origin at the top-left of the
//! image. There is no inclusive-pixel "+1" convention: a box `(0, 0, 2, 2)`
//! has area 4.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Class identifier. `0` is reserved for background; object classes are `1..=K`.
pub type ClassId = u32;

pub const BACKGROUND: ClassId = 0;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ImageId(pub String);

impl ImageId {
    pub fn new(id: impl Into<String>) -> Self {
        ImageId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ImageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ImageId {
    fn from(s: &str) -> Self {
        ImageId(s.to_owned())
    }
}

/// Axis-aligned box. Stored as origin plus size so the `[x, y, w, h]` file
/// form round-trips bit-exactly; zero-area boxes are allowed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

impl BoundingBox {
    /// Corner-form constructor.
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        if ![x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidBox(format!(
                "non-finite coordinate in ({x_min}, {y_min}, {x_max}, {y_max})"
            )));
        }
        if x_max < x_min || y_max < y_min {
            return Err(Error::InvalidBox(format!(
                "negative extent in ({x_min}, {y_min}, {x_max}, {y_max})"
            )));
        }
        Ok(BoundingBox {
            x: x_min,
            y: y_min,
            w: x_max - x_min,
            h: y_max - y_min,
        })
    }

    /// Builds a box from the `[x, y, w, h]` form used by the file formats.
    pub fn from_xywh(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if ![x, y, w, h].iter().all(|v| v.is_finite()) || !(x + w).is_finite() || !(y + h).is_finite() {
            return Err(Error::InvalidBox(format!("non-finite box [{x}, {y}, {w}, {h}]")));
        }
        if w < 0.0 || h < 0.0 {
            return Err(Error::InvalidBox(format!("negative size ({w}, {h})")));
        }
        Ok(BoundingBox { x, y, w, h })
    }

    pub fn to_xywh(&self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }

    pub fn x_min(&self) -> f64 {
        self.x
    }

    pub fn y_min(&self) -> f64 {
        self.y
    }

    pub fn x_max(&self) -> f64 {
        self.x + self.w
    }

    pub fn y_max(&self) -> f64 {
        self.y + self.h
    }

    pub fn width(&self) -> f64 {
        self.w
    }

    pub fn height(&self) -> f64 {
        self.h
    }

    pub fn area(&self) -> f64 {
        area(self)
    }

    /// Width over height; `None` for boxes with zero height.
    pub fn aspect_ratio(&self) -> Option<f64> {
        let h = self.height();
        (h > 0.0).then(|| self.width() / h)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + 0.5 * self.w, self.y + 0.5 * self.h)
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let w = (self.x_max().min(other.x_max()) - self.x.max(other.x)).max(0.0);
        let h = (self.y_max().min(other.y_max()) - self.y.max(other.y)).max(0.0);
        w * h
    }

    pub fn iou(&self, other: &BoundingBox) -> f64 {
        iou(self, other)
    }
}

impl Serialize for BoundingBox {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_xywh().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BoundingBox {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let [x, y, w, h] = <[f64; 4]>::deserialize(deserializer)?;
        BoundingBox::from_xywh(x, y, w, h).map_err(serde::de::Error::custom)
    }
}

/// `(x_max - x_min) * (y_max - y_min)`.
pub fn area(b: &BoundingBox) -> f64 {
    b.width() * b.height()
}

/// Intersection over union. Zero when the union has zero area.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = area(a) + area(b) - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Clips a box to `[0, width] x [0, height]`.
///
/// Fails with [`Error::EmptyCrop`] when the box lies entirely outside the image.
/// A box that only touches the border yields a zero-area result, which is
/// still considered empty.
pub fn clamp_to_image(b: &BoundingBox, width: u32, height: u32) -> Result<BoundingBox> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidBox(format!(
            "image size {width}x{height} must be at least 1x1"
        )));
    }
    let (w, h) = (f64::from(width), f64::from(height));
    if b.x_min() >= w || b.y_min() >= h || b.x_max() <= 0.0 || b.y_max() <= 0.0 {
        return Err(Error::EmptyCrop);
    }
    let inside = b.x_min() >= 0.0 && b.y_min() >= 0.0 && b.x_max() <= w && b.y_max() <= h;
    if inside {
        return Ok(*b);
    }
    BoundingBox::new(
        b.x_min().clamp(0.0, w),
        b.y_min().clamp(0.0, h),
        b.x_max().clamp(0.0, w),
        b.y_max().clamp(0.0, h),
    )
}

/// One scored box emitted by a detector.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub image_id: ImageId,
    pub class_id: ClassId,
    pub score: f64,
    pub bbox: BoundingBox,
}

impl Detection {
    pub fn new(image_id: ImageId, class_id: ClassId, score: f64, bbox: BoundingBox) -> Result<Self> {
        if class_id == BACKGROUND {
            return Err(Error::InvalidBox(
                "detection class_id 0 is reserved for background".into(),
            ));
        }
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::InvalidBox(format!("score {score} outside [0, 1]")));
        }
        Ok(Detection {
            image_id,
            class_id,
            score,
            bbox,
        })
    }
}

/// An annotated object.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthObject {
    pub image_id: ImageId,
    pub class_id: ClassId,
    pub bbox: BoundingBox,
    pub difficult: bool,
}

impl GroundTruthObject {
    pub fn new(image_id: ImageId, class_id: ClassId, bbox: BoundingBox) -> Self {
        GroundTruthObject {
            image_id,
            class_id,
            bbox,
            difficult: false,
        }
    }
}

/// Image identity and size, without pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageInfo {
    pub id: ImageId,
    pub width: u32,
    pub height: u32,
}

/// Row-major 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    id: ImageId,
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl Image {
    pub fn new(id: ImageId, width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidBox(format!(
                "image {id} has size {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                actual: pixels.len(),
            });
        }
        Ok(Image {
            id,
            width,
            height,
            pixels,
        })
    }

    /// A `width x height` image filled with one color.
    pub fn filled(id: ImageId, width: u32, height: u32, rgb: [u8; 3]) -> Result<Self> {
        let n = width as usize * height as usize;
        let pixels = rgb.iter().copied().cycle().take(n * 3).collect();
        Self::new(id, width, height, pixels)
    }

    pub fn id(&self) -> &ImageId {
        &self.id
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn info(&self) -> ImageInfo {
        ImageInfo {
            id: self.id.clone(),
            width: self.width,
            height: self.height,
        }
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }
}
